use std::fmt::Write as _;

use rayon::prelude::*;

use super::special::igamc;
use super::tests::*;
use super::{StsParams, TestKind, TestResult};
use crate::bits::BitStream;
use crate::error::{Error, Result};

/// Aggregate over all sequences for one test.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub test: TestKind,
    pub sequences: usize,
    pub pass_count: usize,
    /// Minimum passing count (not rounded).
    pub threshold: f64,
    pub min_p: f64,
    pub median_p: f64,
    /// Chi-square uniformity of the p-values over ten bins.
    pub uniformity_p: f64,
}

impl SuiteRow {
    pub fn pass(&self) -> bool {
        self.pass_count as f64 >= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub params: StsParams,
    /// `per_sequence[i][j]` is test `TestKind::ALL[j]` on sequence `i`.
    pub per_sequence: Vec<Vec<TestResult>>,
    pub rows: Vec<SuiteRow>,
}

pub const SUITE_CSV_HEADER: &str = "test,sequences,pass_count,threshold,min_p,median_p,uniformity_p,pass";

impl SuiteResult {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(SuiteRow::pass)
    }

    pub fn row(&self, test: TestKind) -> Option<&SuiteRow> {
        self.rows.iter().find(|r| r.test == test)
    }

    /// Rows as CSV, with the threshold shown as a whole count the way the
    /// reference suite prints it.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{SUITE_CSV_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6},{:.6},{:.6},{}",
                r.test.name(),
                r.sequences,
                r.pass_count,
                r.threshold.floor() as u64,
                r.min_p,
                r.median_p,
                r.uniformity_p,
                r.pass()
            );
        }
        s
    }
}

/// Smallest acceptable number of passing sequences out of `m`:
/// `m (p̂ - 3 sqrt(p̂ (1 - p̂) / m))` with `p̂ = 1 - alpha`.
pub fn proportion_threshold(m: usize, alpha: f64) -> f64 {
    let p = 1.0 - alpha;
    let mf = m as f64;
    mf * (p - 3.0 * (p * alpha / mf).sqrt())
}

/// P-value of the ten-bin chi-square uniformity test.
pub fn uniformity_p(p_values: &[f64]) -> f64 {
    if p_values.is_empty() {
        return 0.0;
    }
    let mut bins = [0usize; 10];
    for &p in p_values {
        bins[((p * 10.0) as usize).min(9)] += 1;
    }
    let e = p_values.len() as f64 / 10.0;
    let chi2: f64 = bins.iter().map(|&f| (f as f64 - e).powi(2) / e).sum();
    igamc(4.5, chi2 / 2.0)
}

/// Kolmogorov-Smirnov distance of `samples` from Uniform[0,1] and the
/// asymptotic 1% critical value 1.6276/sqrt(n).
pub fn ks_uniform(samples: &[f64]) -> (f64, f64) {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i as f64 + 1.0) / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max);
    (d, 1.6276 / n.sqrt())
}

fn run_all(seq: &BitStream, p: &StsParams) -> Result<Vec<TestResult>> {
    Ok(vec![
        test_frequency(seq, p.alpha)?,
        test_block_frequency(seq, p.block_len, p.alpha)?,
        test_cusum(seq, CusumMode::Forward, p.alpha)?,
        test_cusum(seq, CusumMode::Backward, p.alpha)?,
        test_runs(seq, p.alpha)?,
        test_serial(seq, p.serial_m, p.alpha)?,
        test_approx_entropy(seq, p.apen_m, p.alpha)?,
    ])
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Splits `bits` into `seq_len` sequences (a short tail is ignored) and runs
/// every implemented test on each.
pub fn run_suite(bits: &BitStream, params: &StsParams) -> Result<SuiteResult> {
    if params.seq_len == 0 {
        return Err(Error::param("seq_len", "must be > 0"));
    }
    let m = bits.len() / params.seq_len;
    if m < 2 {
        return Err(Error::InsufficientData(format!(
            "suite needs at least 2 sequences of {} bits, got {} bits",
            params.seq_len,
            bits.len()
        )));
    }
    let per_sequence: Vec<Vec<TestResult>> = (0..m)
        .into_par_iter()
        .map(|i| run_all(&bits.slice(i * params.seq_len, params.seq_len), params))
        .collect::<Result<_>>()?;
    let threshold = proportion_threshold(m, params.alpha);
    let rows = TestKind::ALL
        .iter()
        .enumerate()
        .map(|(j, &test)| {
            let results: Vec<&TestResult> = per_sequence.iter().map(|r| &r[j]).collect();
            let mut ps: Vec<f64> = results.iter().flat_map(|r| r.p_values.iter().copied()).collect();
            SuiteRow {
                test,
                sequences: m,
                pass_count: results.iter().filter(|r| r.pass).count(),
                threshold,
                min_p: ps.iter().copied().fold(1.0, f64::min),
                uniformity_p: uniformity_p(&ps),
                median_p: median(&mut ps),
            }
        })
        .collect();
    Ok(SuiteResult {
        params: *params,
        per_sequence,
        rows,
    })
}
