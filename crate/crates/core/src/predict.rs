//! Closed-form predictions: dead-time and afterpulse correlation,
//! cancellation rate, XOR propagation of bias and correlation, and sample
//! sizes.

use rand::RngCore;

use crate::bits::{BitStream, StreamLabel};
use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};

/// Bit process described by its bias and lag-1 autocorrelation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovBitModel {
    pub b: f64,
    pub a: f64,
}

const PROB_SLACK: f64 = 1e-12;

impl MarkovBitModel {
    pub const PERFECT: MarkovBitModel = MarkovBitModel { b: 0.0, a: 0.0 };

    pub fn new(b: f64, a: f64) -> Result<Self> {
        let m = MarkovBitModel { b, a };
        m.validate()?;
        Ok(m)
    }

    pub fn p1(&self) -> f64 {
        0.5 + self.b
    }

    /// (p(1|1), p(1|0))
    pub fn transitions(&self) -> (f64, f64) {
        let p1 = self.p1();
        let p0 = 1.0 - p1;
        (p1 + self.a * p0, p1 - self.a * p1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b.abs() <= 0.5) {
            return Err(Error::param("b", format!("|b| must be <= 0.5, got {}", self.b)));
        }
        if !(self.a.abs() <= 1.0) {
            return Err(Error::param("a", format!("|a| must be <= 1, got {}", self.a)));
        }
        let (p11, p10) = self.transitions();
        for p in [p11, p10] {
            if !(-PROB_SLACK..=1.0 + PROB_SLACK).contains(&p) {
                return Err(Error::param(
                    "a",
                    format!(
                        "(b={}, a={}) implies transition probabilities p(1|1)={p11}, p(1|0)={p10} outside [0,1]",
                        self.b, self.a
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// Dead-time and afterpulse inputs. Times in ps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadTimeModel {
    pub tau_d: f64,
    /// Mean detection period.
    pub tau: f64,
    pub p_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadTimePrediction {
    /// e^(-tau_d/tau) - 1
    pub exact: f64,
    /// -tau_d/tau
    pub approx: f64,
}

/// Lag-1 autocorrelation caused by dead time alone.
pub fn predict_deadtime_autocorr(tau_d: f64, tau: f64) -> Result<DeadTimePrediction> {
    if !(tau > 0.0) {
        return Err(Error::param("tau", "must be > 0"));
    }
    if !(tau_d >= 0.0) {
        return Err(Error::param("tau_d", "must be >= 0"));
    }
    let x = tau_d / tau;
    Ok(DeadTimePrediction {
        exact: (-x).exp_m1(),
        approx: -x,
    })
}

/// Afterpulse plus dead-time autocorrelation, p_a - tau_d/tau.
pub fn predict_net_autocorr(m: &DeadTimeModel) -> Result<f64> {
    if !(m.tau > 0.0) {
        return Err(Error::param("tau", "must be > 0"));
    }
    Ok(m.p_a - m.tau_d / m.tau)
}

/// Detection rate (per second) at which the two contributions cancel.
/// `tau_d` in ps.
pub fn predict_f0(p_a: f64, tau_d: f64) -> Result<f64> {
    if !(tau_d > 0.0) {
        return Err(Error::param("tau_d", "must be > 0"));
    }
    if !(0.0..1.0).contains(&p_a) {
        return Err(Error::param("p_a", "must lie in [0, 1)"));
    }
    Ok(p_a / (tau_d * 1e-12))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagation {
    pub exact: MarkovBitModel,
    pub approx: MarkovBitModel,
    /// Inputs are small enough for the approximate forms to hold.
    pub approx_valid: bool,
}

/// Small-parameter threshold for reporting the approximate forms as valid.
const APPROX_SMALL: f64 = 0.01;

/// Bias and lag-1 autocorrelation of `y_i = s_{2i} ^ s_{2i+1}` for a
/// Markov input.
pub fn propagate_pairxor(m: &MarkovBitModel) -> Result<Propagation> {
    m.validate()?;
    let (b, a) = (m.b, m.a);
    let q = 0.25 - b * b;
    let den = 1.0 - 2.0 * (1.0 - a) * q;
    if den.abs() < 1e-300 {
        return Err(Error::DegenerateModel("pair-xor output has zero variance"));
    }
    let exact = MarkovBitModel {
        b: -2.0 * b * b - 2.0 * a * q,
        a: 2.0 * a * (1.0 - a) * b * b / den,
    };
    let approx = MarkovBitModel {
        b: -2.0 * b * b - a / 2.0,
        a: 4.0 * a * b * b,
    };
    Ok(Propagation {
        exact,
        approx,
        approx_valid: a.abs() <= APPROX_SMALL && b * b <= APPROX_SMALL * 0.25,
    })
}

/// Bias and lag-1 autocorrelation of `c_i = t_i ^ y_i` for independent
/// inputs.
///
/// The bias of an XOR of independent bits is `-2 b_t b_y` (one is more likely
/// when exactly one input leans towards one). The exact autocorrelation
/// follows from multiplying the ±1 moments of the two inputs.
pub fn propagate_xor(t: &MarkovBitModel, y: &MarkovBitModel) -> Result<Propagation> {
    t.validate()?;
    y.validate()?;
    let (bt2, by2) = (t.b * t.b, y.b * y.b);
    let den = 1.0 - 16.0 * bt2 * by2;
    if den.abs() < 1e-300 {
        return Err(Error::DegenerateModel("xor output has zero variance"));
    }
    let num = t.a * y.a * (1.0 - 4.0 * bt2) * (1.0 - 4.0 * by2)
        + 4.0 * t.a * by2 * (1.0 - 4.0 * bt2)
        + 4.0 * y.a * bt2 * (1.0 - 4.0 * by2);
    let b = -2.0 * t.b * y.b;
    Ok(Propagation {
        exact: MarkovBitModel { b, a: num / den },
        approx: MarkovBitModel {
            b,
            a: t.a * y.a + 4.0 * (t.a * by2 + y.a * bt2),
        },
        approx_valid: [t.b, y.b].iter().all(|b| b * b <= APPROX_SMALL * 0.25),
    })
}

/// Smallest N at which the bias or the lag-1 autocorrelation of `m` equals
/// `z` standard errors.
pub fn required_sample_size(m: &MarkovBitModel, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::param("z", "must be > 0"));
    }
    let n_b = (m.b != 0.0).then(|| (z / (2.0 * m.b.abs())).powi(2));
    let n_a = (m.a != 0.0).then(|| (z / m.a).powi(2) + 1.0);
    match (n_b, n_a) {
        (Some(x), Some(y)) => Ok(x.min(y)),
        (Some(x), None) | (None, Some(x)) => Ok(x),
        (None, None) => Err(Error::Unbounded),
    }
}

pub const DEFAULT_Z: f64 = 1.96;

#[inline]
fn threshold(p: f64) -> Option<u64> {
    // None means "always one"
    if p >= 1.0 {
        None
    } else if p <= 0.0 {
        Some(0)
    } else {
        Some((p * 18_446_744_073_709_551_616.0) as u64)
    }
}

#[inline]
fn draw(rng: &mut impl RngCore, thr: Option<u64>) -> bool {
    match thr {
        None => true,
        Some(t) => rng.next_u64() < t,
    }
}

/// Stationary Markov chain with bias `m.b` and lag-1 autocorrelation `m.a`.
pub fn gen_markov_bits(m: &MarkovBitModel, n: usize, seed: u64) -> Result<BitStream> {
    m.validate()?;
    let mut rng = stream_rng(seed, stream::MARKOV);
    let (p11, p10) = m.transitions();
    let (t1, t0) = (threshold(p11), threshold(p10));
    let mut words = Vec::with_capacity(n.div_ceil(64));
    let mut prev = draw(&mut rng, threshold(m.p1()));
    let mut i = 0;
    while i < n {
        let take = (n - i).min(64);
        let mut w = 0u64;
        for j in 0..take {
            let bit = if i + j == 0 {
                prev
            } else {
                draw(&mut rng, if prev { t1 } else { t0 })
            };
            w |= (bit as u64) << j;
            prev = bit;
        }
        words.push(w);
        i += take;
    }
    Ok(BitStream::from_words(StreamLabel::Raw, words, n))
}

impl Propagation {
    pub fn to_kv(&self, prefix: &str) -> String {
        format!(
            "{prefix}.b = {:.6e}\n{prefix}.a = {:.6e}\n{prefix}.b_approx = {:.6e}\n{prefix}.a_approx = {:.6e}\n{prefix}.approx_valid = {}\n",
            self.exact.b, self.exact.a, self.approx.b, self.approx.a, self.approx_valid
        )
    }
}
