//! A subset of the NIST SP 800-22 statistical tests, a multi-sequence suite
//! runner, and bit-file import/export for running the full external suite.

pub mod export;
pub mod special;
mod suite;

pub use export::{export_bits, import_bits, BitFormat};
pub use suite::{ks_uniform, proportion_threshold, run_suite, uniformity_p, SuiteResult, SuiteRow, SUITE_CSV_HEADER};
pub use tests::{
    test_approx_entropy, test_block_frequency, test_cusum, test_frequency, test_runs, test_serial,
    CusumMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestKind {
    Frequency,
    BlockFrequency,
    CusumForward,
    CusumBackward,
    Runs,
    Serial,
    ApproximateEntropy,
}

impl TestKind {
    pub const ALL: [TestKind; 7] = [
        TestKind::Frequency,
        TestKind::BlockFrequency,
        TestKind::CusumForward,
        TestKind::CusumBackward,
        TestKind::Runs,
        TestKind::Serial,
        TestKind::ApproximateEntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestKind::Frequency => "Frequency",
            TestKind::BlockFrequency => "BlockFrequency",
            TestKind::CusumForward => "CumulativeSums-forward",
            TestKind::CusumBackward => "CumulativeSums-backward",
            TestKind::Runs => "Runs",
            TestKind::Serial => "Serial",
            TestKind::ApproximateEntropy => "ApproximateEntropy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub test: TestKind,
    /// Smallest of `p_values`.
    pub p_value: f64,
    /// One p-value per statistic (two for the serial test).
    pub p_values: Vec<f64>,
    pub pass: bool,
    /// The runs test was not applicable because the sequence is too biased.
    pub prerequisite_failed: bool,
    pub params: String,
}

impl TestResult {
    pub(crate) fn new(test: TestKind, p_values: Vec<f64>, alpha: f64, params: String) -> Self {
        let p_values: Vec<f64> = p_values.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        let p_value = p_values.iter().copied().fold(1.0, f64::min);
        TestResult {
            test,
            p_value,
            pass: p_values.iter().all(|&p| p >= alpha),
            p_values,
            prerequisite_failed: false,
            params,
        }
    }
}

/// Test parameters; defaults follow the reference suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StsParams {
    pub alpha: f64,
    pub seq_len: usize,
    pub block_len: usize,
    pub serial_m: u32,
    pub apen_m: u32,
}

impl Default for StsParams {
    fn default() -> Self {
        StsParams {
            alpha: 0.01,
            seq_len: 1_000_000,
            block_len: 128,
            serial_m: 16,
            apen_m: 10,
        }
    }
}
