//! Arrival streams: Poisson photons, periodic injection pulses, beam-splitter
//! routing onto the two detector channels.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Exp1};

use crate::error::{Error, Result};
use crate::rng::{self, stream_rng};
use crate::time::{secs_to_ps, TimeStamp, PS_PER_SEC};

/// Largest event list the list-based generators will allocate.
pub const MAX_LIST_EVENTS: f64 = (1u64 << 31) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArrivalKind {
    Photon,
    Injection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrivalEvent {
    pub time: TimeStamp,
    pub kind: ArrivalKind,
}

impl ArrivalEvent {
    pub fn photon(ps: u64) -> Self {
        ArrivalEvent {
            time: TimeStamp(ps),
            kind: ArrivalKind::Photon,
        }
    }

    pub fn injection(ps: u64) -> Self {
        ArrivalEvent {
            time: TimeStamp(ps),
            kind: ArrivalKind::Injection,
        }
    }
}

/// Light source configuration. `split_prob_d1` folds the beam-splitter ratio
/// and any filter-adjusted imbalance into one routing probability.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceParams {
    /// Photon arrival rate at the splitter, events/s.
    pub mean_rate: f64,
    /// Seconds.
    pub duration: f64,
    pub split_prob_d1: f64,
    /// Injection pulses/s; 0 disables the attack.
    pub injection_rate: f64,
    /// Picoseconds. `None` places pulses at half-period offsets.
    pub injection_phase: Option<u64>,
}

impl SourceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_rate > 0.0 && self.mean_rate.is_finite()) {
            return Err(Error::param("mean_rate", "must be positive and finite"));
        }
        validate_duration(self.duration)?;
        if !(0.0..=1.0).contains(&self.split_prob_d1) {
            return Err(Error::param("split_prob_d1", "must lie in [0, 1]"));
        }
        if !(self.injection_rate >= 0.0 && self.injection_rate.is_finite()) {
            return Err(Error::param("injection_rate", "must be non-negative"));
        }
        Ok(())
    }

    pub fn injection_phase_ps(&self) -> u64 {
        self.injection_phase
            .unwrap_or_else(|| default_injection_phase(self.injection_rate))
    }
}

pub fn default_injection_phase(rate: f64) -> u64 {
    if rate > 0.0 {
        (PS_PER_SEC as f64 / rate / 2.0).floor() as u64
    } else {
        0
    }
}

fn validate_duration(duration: f64) -> Result<()> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::param("duration", "must be positive and finite"));
    }
    if duration * PS_PER_SEC as f64 >= u64::MAX as f64 {
        return Err(Error::param("duration", "exceeds the 64-bit picosecond time axis"));
    }
    Ok(())
}

/// Incremental Poisson process on the picosecond grid.
///
/// Arrival times are accumulated in floating point and floored to the grid,
/// so quantization does not shift the rate. An arrival that floors onto the
/// previous one is pushed 1 ps later to keep the stream strictly increasing.
#[derive(Debug, Clone)]
pub struct PoissonStream {
    rng: ChaCha8Rng,
    mean_ps: f64,
    clock: f64,
    last: Option<u64>,
    pending: Option<u64>,
}

impl PoissonStream {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        Self::with_rng(rate, stream_rng(seed, rng::stream::PHOTONS))
    }

    pub(crate) fn with_rng(rate: f64, rng: ChaCha8Rng) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::param("rate", "must be positive and finite"));
        }
        Ok(PoissonStream {
            rng,
            mean_ps: PS_PER_SEC as f64 / rate,
            clock: 0.0,
            last: None,
            pending: None,
        })
    }

    fn draw(&mut self) -> u64 {
        let e: f64 = Exp1.sample(&mut self.rng);
        self.clock += e * self.mean_ps;
        let mut t = self.clock as u64;
        if let Some(last) = self.last {
            if t <= last {
                t = last + 1;
            }
        }
        self.last = Some(t);
        t
    }

    /// Appends every arrival strictly before `horizon` (ps).
    pub fn fill_until(&mut self, horizon: u64, out: &mut Vec<u64>) {
        loop {
            let t = match self.pending.take() {
                Some(t) => t,
                None => self.draw(),
            };
            if t >= horizon {
                self.pending = Some(t);
                return;
            }
            out.push(t);
        }
    }
}

/// Periodic pulse train at `phase + k / rate`.
#[derive(Debug, Clone)]
pub struct InjectionStream {
    period_ps: f64,
    phase: u64,
    next_k: u64,
}

impl InjectionStream {
    /// Returns `None` for a zero rate (no attack).
    pub fn new(rate: f64, phase: u64) -> Result<Option<Self>> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::param("injection_rate", "must be non-negative"));
        }
        if rate == 0.0 {
            return Ok(None);
        }
        Ok(Some(InjectionStream {
            period_ps: PS_PER_SEC as f64 / rate,
            phase,
            next_k: 0,
        }))
    }

    fn time_of(&self, k: u64) -> u64 {
        self.phase + (k as f64 * self.period_ps).floor() as u64
    }

    pub fn fill_until(&mut self, horizon: u64, out: &mut Vec<u64>) {
        loop {
            let t = self.time_of(self.next_k);
            if t >= horizon {
                return;
            }
            out.push(t);
            self.next_k += 1;
        }
    }
}

/// Bernoulli router: each photon independently goes to D1 with `split_prob_d1`.
#[derive(Debug, Clone)]
pub struct Splitter {
    rng: ChaCha8Rng,
    to_d1: Bernoulli,
}

impl Splitter {
    pub fn new(split_prob_d1: f64, seed: u64) -> Result<Self> {
        let to_d1 = Bernoulli::new(split_prob_d1)
            .map_err(|_| Error::param("split_prob_d1", "must lie in [0, 1]"))?;
        Ok(Splitter {
            rng: stream_rng(seed, rng::stream::SPLITTER),
            to_d1,
        })
    }

    pub fn route(&mut self, photons: &[u64], d0: &mut Vec<u64>, d1: &mut Vec<u64>) {
        for &t in photons {
            if self.rng.sample(self.to_d1) {
                d1.push(t);
            } else {
                d0.push(t);
            }
        }
    }
}

pub fn gen_poisson_arrivals(rate: f64, duration: f64, seed: u64) -> Result<Vec<ArrivalEvent>> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::param("rate", "must be positive and finite"));
    }
    validate_duration(duration)?;
    let expected = rate * duration;
    if expected > MAX_LIST_EVENTS {
        return Err(Error::CapacityExceeded {
            expected,
            capacity: MAX_LIST_EVENTS,
        });
    }
    let mut stream = PoissonStream::new(rate, seed)?;
    let mut times = Vec::with_capacity((expected * 1.01 + 16.0) as usize);
    stream.fill_until(secs_to_ps(duration), &mut times);
    Ok(times.into_iter().map(ArrivalEvent::photon).collect())
}

pub fn gen_injection_pulses(rate: f64, phase: u64, duration: f64) -> Result<Vec<ArrivalEvent>> {
    validate_duration(duration)?;
    let Some(mut stream) = InjectionStream::new(rate, phase)? else {
        return Ok(Vec::new());
    };
    let expected = rate * duration;
    if expected > MAX_LIST_EVENTS {
        return Err(Error::CapacityExceeded {
            expected,
            capacity: MAX_LIST_EVENTS,
        });
    }
    let mut times = Vec::with_capacity(expected as usize + 1);
    stream.fill_until(secs_to_ps(duration), &mut times);
    Ok(times.into_iter().map(ArrivalEvent::injection).collect())
}

pub fn route_splitter(
    photons: &[ArrivalEvent],
    split_prob_d1: f64,
    seed: u64,
) -> Result<(Vec<TimeStamp>, Vec<TimeStamp>)> {
    let mut splitter = Splitter::new(split_prob_d1, seed)?;
    let times: Vec<u64> = photons.iter().map(|e| e.time.0).collect();
    let mut d0 = Vec::with_capacity(times.len() / 2);
    let mut d1 = Vec::with_capacity(times.len() / 2);
    splitter.route(&times, &mut d0, &mut d1);
    Ok((
        d0.into_iter().map(TimeStamp).collect(),
        d1.into_iter().map(TimeStamp).collect(),
    ))
}

/// Stable merge of one channel's photons with the shared injection train.
/// At equal times the photon is placed first.
pub(crate) fn merge_into(photons: &[u64], injections: &[u64], out: &mut Vec<ArrivalEvent>) {
    out.reserve(photons.len() + injections.len());
    let (mut i, mut j) = (0, 0);
    while i < photons.len() && j < injections.len() {
        if photons[i] <= injections[j] {
            out.push(ArrivalEvent::photon(photons[i]));
            i += 1;
        } else {
            out.push(ArrivalEvent::injection(injections[j]));
            j += 1;
        }
    }
    out.extend(photons[i..].iter().map(|&t| ArrivalEvent::photon(t)));
    out.extend(injections[j..].iter().map(|&t| ArrivalEvent::injection(t)));
}

/// Copies every injection onto both channels at its exact timestamp.
pub fn merge_with_injection(
    photons_d0: &[TimeStamp],
    photons_d1: &[TimeStamp],
    injections: &[ArrivalEvent],
) -> (Vec<ArrivalEvent>, Vec<ArrivalEvent>) {
    let inj: Vec<u64> = injections.iter().map(|e| e.time.0).collect();
    let p0: Vec<u64> = photons_d0.iter().map(|t| t.0).collect();
    let p1: Vec<u64> = photons_d1.iter().map(|t| t.0).collect();
    let mut d0 = Vec::new();
    let mut d1 = Vec::new();
    merge_into(&p0, &inj, &mut d0);
    merge_into(&p1, &inj, &mut d1);
    (d0, d1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn times(events: &[ArrivalEvent]) -> Vec<u64> {
        events.iter().map(|e| e.time.0).collect()
    }

    #[test]
    fn poisson_mean_interval_matches_rate() {
        let events = gen_poisson_arrivals(1e6, 1.0, 11).unwrap();
        let n = events.len() as f64;
        let span = events.last().unwrap().time.0 - events[0].time.0;
        let mean_ns = span as f64 / (n - 1.0) / 1e3;
        let sigma = 1000.0 / n.sqrt();
        assert!((mean_ns - 1000.0).abs() < 4.0 * sigma, "mean {mean_ns}");
    }

    #[test]
    fn poisson_count_statistics() {
        let n = gen_poisson_arrivals(1e6, 1e-3, 5).unwrap().len() as f64;
        assert!((n - 1000.0).abs() < 4.0 * 1000f64.sqrt(), "count {n}");
    }

    #[test]
    fn poisson_is_deterministic_and_strictly_increasing() {
        let a = gen_poisson_arrivals(5e7, 1e-3, 99).unwrap();
        let b = gen_poisson_arrivals(5e7, 1e-3, 99).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].time < w[1].time));
        assert_ne!(a, gen_poisson_arrivals(5e7, 1e-3, 100).unwrap());
    }

    #[test]
    fn poisson_rejects_bad_parameters() {
        assert!(gen_poisson_arrivals(0.0, 1.0, 1).is_err());
        assert!(gen_poisson_arrivals(1e6, 0.0, 1).is_err());
        assert!(matches!(
            gen_poisson_arrivals(1e12, 10.0, 1),
            Err(Error::CapacityExceeded { .. })
        ));
    }

    #[test]
    fn chunked_generation_matches_single_pass() {
        let mut whole = PoissonStream::new(2e7, 3).unwrap();
        let mut all = Vec::new();
        whole.fill_until(1_000_000_000, &mut all);

        let mut chunked = PoissonStream::new(2e7, 3).unwrap();
        let mut parts = Vec::new();
        for h in (1..=10).map(|k| k * 100_000_000) {
            chunked.fill_until(h, &mut parts);
        }
        assert_eq!(all, parts);
    }

    #[test]
    fn injection_zero_rate_is_empty() {
        assert!(gen_injection_pulses(0.0, 0, 1.0).unwrap().is_empty());
    }

    #[test]
    fn injection_arithmetic_sequence() {
        let ev = gen_injection_pulses(1e6, 0, 1e-5).unwrap();
        let expect: Vec<u64> = (0..10).map(|k| k * 1_000_000).collect();
        assert_eq!(times(&ev), expect);
        assert!(ev.iter().all(|e| e.kind == ArrivalKind::Injection));
    }

    #[test]
    fn injection_count_at_max_attack_rate() {
        let ev = gen_injection_pulses(7e6, 0, 1.0).unwrap();
        assert_eq!(ev.len(), 7_000_000);
    }

    #[test]
    fn split_degenerate() {
        let photons = gen_poisson_arrivals(1e7, 1e-3, 1).unwrap();
        let (d0, d1) = route_splitter(&photons, 0.0, 2).unwrap();
        assert_eq!(d0.len(), photons.len());
        assert!(d1.is_empty());
    }

    #[test]
    fn split_balanced_binomial() {
        let photons = gen_poisson_arrivals(1e7, 1.0, 4).unwrap();
        let n = photons.len() as f64;
        let (d0, d1) = route_splitter(&photons, 0.5, 8).unwrap();
        assert_eq!(d0.len() + d1.len(), photons.len());
        let frac = d1.len() as f64 / n;
        assert!((frac - 0.5).abs() < 4.0 / (2.0 * n.sqrt()), "{frac}");
        assert!(d0.windows(2).all(|w| w[0] < w[1]));
        assert!(d1.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn split_detuned_reproduces_imbalance() {
        let photons = gen_poisson_arrivals(2e7, 0.5, 4).unwrap();
        let n = photons.len() as f64;
        let (_, d1) = route_splitter(&photons, 0.501, 9).unwrap();
        let b = d1.len() as f64 / n - 0.5;
        assert!((b - 0.001).abs() < 4.0 / (2.0 * n.sqrt()), "{b}");
    }

    #[test]
    fn merge_without_injection_is_identity() {
        let (d0, d1) = merge_with_injection(&[TimeStamp(5), TimeStamp(9)], &[TimeStamp(7)], &[]);
        assert_eq!(times(&d0), vec![5, 9]);
        assert_eq!(times(&d1), vec![7]);
    }

    #[test]
    fn merge_places_injection_on_both_channels() {
        let (d0, d1) = merge_with_injection(
            &[TimeStamp::from_ns(100)],
            &[],
            &[ArrivalEvent::injection(50_000)],
        );
        assert_eq!(
            d0,
            vec![ArrivalEvent::injection(50_000), ArrivalEvent::photon(100_000)]
        );
        assert_eq!(d1, vec![ArrivalEvent::injection(50_000)]);
    }

    #[test]
    fn merge_conserves_injections() {
        let inj = gen_injection_pulses(1e6, 500_000, 1.0).unwrap();
        let photons = gen_poisson_arrivals(1e6, 1.0, 3).unwrap();
        let (p0, p1) = route_splitter(&photons, 0.5, 3).unwrap();
        let (d0, d1) = merge_with_injection(&p0, &p1, &inj);
        let inj0: Vec<u64> = d0
            .iter()
            .filter(|e| e.kind == ArrivalKind::Injection)
            .map(|e| e.time.0)
            .collect();
        let inj1: Vec<u64> = d1
            .iter()
            .filter(|e| e.kind == ArrivalKind::Injection)
            .map(|e| e.time.0)
            .collect();
        assert_eq!(inj0.len(), 1_000_000);
        assert_eq!(inj0, inj1);
        assert!(d0.windows(2).all(|w| w[0].time <= w[1].time));
    }
}
