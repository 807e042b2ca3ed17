//! Bias, serial autocorrelation and cross-correlation estimators.
//!
//! Sums are accumulated as exact integers and scaled by N² so the mean never
//! has to be rounded; conversion to floating point happens at the final
//! division only.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bits::{BitStream, StreamLabel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagCorr {
    pub k: i64,
    pub a: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub label: StreamLabel,
    pub n_bits: u64,
    pub bias: f64,
    pub sigma_b: f64,
    pub autocorr: Vec<LagCorr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossCorrReport {
    pub n_bits: u64,
    /// Lags `-k_max ..= k_max` in ascending order.
    pub lags: Vec<LagCorr>,
}

/// Number of `i < n - k` with `x_i = 1` and `y_{i+k} = 1`.
fn lag_pairs(x: &BitStream, y: &BitStream, k: usize) -> u64 {
    let n = x.len().min(y.len());
    if k >= n {
        return 0;
    }
    let m = n - k;
    let xw = x.words();
    let full = m / 64;
    let body: u64 = (0..full)
        .into_par_iter()
        .with_min_len(4096)
        .map(|j| (xw[j] & y.word_at(64 * j + k)).count_ones() as u64)
        .sum();
    let rem = m % 64;
    if rem == 0 {
        return body;
    }
    let mask = (1u64 << rem) - 1;
    body + (xw[full] & y.word_at(64 * full + k) & mask).count_ones() as u64
}

/// Ones in `x` over `[start, start + len)`, clamped to the stream length.
fn ones(x: &BitStream, start: usize, len: usize) -> u64 {
    x.count_ones_range(start, len)
}

pub fn bias(bits: &BitStream) -> Result<(f64, f64)> {
    if bits.is_empty() {
        return Err(Error::DegenerateStream("bias of an empty stream"));
    }
    let n = bits.len() as f64;
    let s = bits.count_ones() as i128;
    let b = (2 * s - bits.len() as i128) as f64 / (2.0 * n);
    Ok((b, 0.5 / n.sqrt()))
}

/// Numerator and denominator of the lag-k coefficient, both scaled by N².
fn autocorr_terms(n: i128, total: i128, head: i128, tail: i128, pairs: i128, k: i128) -> (i128, i128) {
    let m = n - k;
    let num = n * n * pairs - n * total * (head + tail) + m * total * total;
    let den = n * n * head - 2 * n * total * head + m * total * total;
    (num, den)
}

/// Serial autocorrelation for lags `1..=k_max`.
pub fn autocorr(bits: &BitStream, k_max: usize) -> Result<Vec<LagCorr>> {
    let n = bits.len();
    if n <= k_max || n < 2 {
        return Err(Error::TooShort {
            test: "autocorrelation",
            required: (k_max + 1).max(2),
            actual: n,
        });
    }
    let total = bits.count_ones();
    if total == 0 || total == n as u64 {
        return Err(Error::DegenerateStream("constant stream has no autocorrelation"));
    }
    (1..=k_max)
        .map(|k| {
            let m = n - k;
            let (num, den) = autocorr_terms(
                n as i128,
                total as i128,
                ones(bits, 0, m) as i128,
                ones(bits, k, m) as i128,
                lag_pairs(bits, bits, k) as i128,
                k as i128,
            );
            if den == 0 {
                return Err(Error::DegenerateStream("zero variance over the lagged range"));
            }
            Ok(LagCorr {
                k: k as i64,
                a: num as f64 / den as f64,
                sigma: 1.0 / (m as f64).sqrt(),
            })
        })
        .collect()
}

/// Same estimator over one byte per bit (nonzero = 1).
pub fn autocorr_unpacked(bits: &[u8], k_max: usize) -> Result<Vec<LagCorr>> {
    let n = bits.len();
    if n <= k_max || n < 2 {
        return Err(Error::TooShort {
            test: "autocorrelation",
            required: (k_max + 1).max(2),
            actual: n,
        });
    }
    let x: Vec<i128> = bits.iter().map(|&b| (b != 0) as i128).collect();
    let total: i128 = x.iter().sum();
    if total == 0 || total == n as i128 {
        return Err(Error::DegenerateStream("constant stream has no autocorrelation"));
    }
    (1..=k_max)
        .map(|k| {
            let m = n - k;
            let head: i128 = x[..m].iter().sum();
            let tail: i128 = x[k..].iter().sum();
            let pairs: i128 = (0..m).map(|i| x[i] * x[i + k]).sum();
            let (num, den) = autocorr_terms(n as i128, total, head, tail, pairs, k as i128);
            if den == 0 {
                return Err(Error::DegenerateStream("zero variance over the lagged range"));
            }
            Ok(LagCorr {
                k: k as i64,
                a: num as f64 / den as f64,
                sigma: 1.0 / (m as f64).sqrt(),
            })
        })
        .collect()
}

pub fn metrics(bits: &BitStream, k_max: usize) -> Result<MetricsReport> {
    let (b, sigma_b) = bias(bits)?;
    Ok(MetricsReport {
        label: bits.label(),
        n_bits: bits.len() as u64,
        bias: b,
        sigma_b,
        autocorr: autocorr(bits, k_max)?,
    })
}

/// Scaled covariance of `x_i` with `y_{i+k}` over `i < n - k`, and the
/// scaled head variances of both streams.
fn cross_terms(x: &BitStream, y: &BitStream, n: usize, k: usize) -> (i128, i128, i128) {
    let (nn, m) = (n as i128, (n - k) as i128);
    let sx = ones(x, 0, n) as i128;
    let sy = ones(y, 0, n) as i128;
    let head_x = ones(x, 0, n - k) as i128;
    let head_y = ones(y, 0, n - k) as i128;
    let tail_y = ones(y, k, n - k) as i128;
    let pairs = lag_pairs(x, y, k) as i128;
    let num = nn * nn * pairs - nn * (sx * tail_y + sy * head_x) + m * sx * sy;
    let var = |head: i128, s: i128| nn * nn * head - 2 * nn * s * head + m * s * s;
    (num, var(head_x, sx), var(head_y, sy))
}

/// Normalized cross-correlation for lags `-k_max ..= k_max`; negative lags
/// swap the roles of the two streams. Both are truncated to the common
/// length.
pub fn crosscorr(x: &BitStream, y: &BitStream, k_max: usize) -> Result<CrossCorrReport> {
    let n = x.len().min(y.len());
    if n < 2 || n <= k_max {
        return Err(Error::TooShort {
            test: "cross-correlation",
            required: (k_max + 1).max(2),
            actual: n,
        });
    }
    for s in [x, y] {
        let c = ones(s, 0, n);
        if c == 0 || c == n as u64 {
            return Err(Error::DegenerateStream("constant stream has no cross-correlation"));
        }
    }
    let mut lags = Vec::with_capacity(2 * k_max + 1);
    for k in -(k_max as i64)..=k_max as i64 {
        let ku = k.unsigned_abs() as usize;
        let (num, vx, vy) = if k >= 0 {
            cross_terms(x, y, n, ku)
        } else {
            cross_terms(y, x, n, ku)
        };
        if vx == 0 || vy == 0 {
            return Err(Error::DegenerateStream("zero variance over the lagged range"));
        }
        lags.push(LagCorr {
            k,
            a: num as f64 / ((vx as f64).sqrt() * (vy as f64).sqrt()),
            sigma: 1.0 / ((n - ku) as f64).sqrt(),
        });
    }
    Ok(CrossCorrReport { n_bits: n as u64, lags })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovLag {
    pub k: i64,
    pub measured: f64,
    /// a_1^k
    pub expected: f64,
    pub sigma: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovVerdict {
    pub z: f64,
    pub lags: Vec<MarkovLag>,
    pub pass: bool,
}

/// Checks `|a_k - a_1^k| <= z * sigma_k` for every lag k >= 2.
pub fn markov_check(report: &MetricsReport, z: f64) -> Result<MarkovVerdict> {
    let a1 = report
        .autocorr
        .iter()
        .find(|l| l.k == 1)
        .ok_or_else(|| Error::InsufficientData("report lacks lag 1".into()))?
        .a;
    if report.autocorr.len() < 2 {
        return Err(Error::InsufficientData("markov check needs lags up to at least 2".into()));
    }
    let lags: Vec<MarkovLag> = report
        .autocorr
        .iter()
        .filter(|l| l.k >= 2)
        .map(|l| {
            let expected = a1.powi(l.k as i32);
            MarkovLag {
                k: l.k,
                measured: l.a,
                expected,
                sigma: l.sigma,
                pass: (l.a - expected).abs() <= z * l.sigma,
            }
        })
        .collect();
    let pass = lags.iter().all(|l| l.pass);
    Ok(MarkovVerdict { z, lags, pass })
}

pub const METRICS_CSV_HEADER: &str = "stream_label,N,bias,sigma_b,k,a_k,sigma_k";

impl MetricsReport {
    /// Lag-1 coefficient, if computed.
    pub fn a1(&self) -> Option<f64> {
        self.autocorr.iter().find(|l| l.k == 1).map(|l| l.a)
    }

    pub fn sigma_a1(&self) -> Option<f64> {
        self.autocorr.iter().find(|l| l.k == 1).map(|l| l.sigma)
    }

    /// CSV rows (no header), one per lag.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for l in &self.autocorr {
            let _ = writeln!(
                s,
                "{},{},{:.9e},{:.9e},{},{:.9e},{:.9e}",
                self.label, self.n_bits, self.bias, self.sigma_b, l.k, l.a, l.sigma
            );
        }
        s
    }

    /// `key = value` lines under a prefix such as `S`.
    pub fn to_kv(&self, prefix: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{prefix}.n_bits = {}", self.n_bits);
        let _ = writeln!(s, "{prefix}.bias = {:.6e}", self.bias);
        let _ = writeln!(s, "{prefix}.sigma_b = {:.6e}", self.sigma_b);
        for l in &self.autocorr {
            let _ = writeln!(s, "{prefix}.a{} = {:.6e}", l.k, l.a);
            let _ = writeln!(s, "{prefix}.sigma_a{} = {:.6e}", l.k, l.sigma);
        }
        s
    }
}

impl CrossCorrReport {
    pub fn at(&self, k: i64) -> Option<&LagCorr> {
        self.lags.iter().find(|l| l.k == k)
    }

    pub fn csv_rows(&self, label: &str) -> String {
        let mut s = String::new();
        for l in &self.lags {
            let _ = writeln!(s, "{label},{},{},{:.9e},{:.9e}", self.n_bits, l.k, l.a, l.sigma);
        }
        s
    }

    pub fn to_kv(&self, prefix: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{prefix}.n_bits = {}", self.n_bits);
        for l in &self.lags {
            let _ = writeln!(s, "{prefix}.a({}) = {:.6e}", l.k, l.a);
        }
        s
    }

    /// Largest |a(k)| / sigma(k) over all lags.
    pub fn max_z(&self) -> f64 {
        self.lags.iter().map(|l| l.a.abs() / l.sigma).fold(0.0, f64::max)
    }
}
