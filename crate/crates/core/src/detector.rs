//! Single-photon detector model: efficiency thinning, non-paralyzable dead
//! time and afterpulsing.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Exp1};

use crate::arrival::{ArrivalEvent, ArrivalKind};
use crate::error::{Error, Result};
use crate::rng::{self, stream_rng};
use crate::time::{TimeStamp, PS_PER_NS, PS_PER_SEC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    D0,
    D1,
}

impl Channel {
    /// Bit value assigned by the spatial (which-detector) extractor.
    #[inline]
    pub fn bit(self) -> bool {
        matches!(self, Channel::D1)
    }

    pub fn index(self) -> usize {
        match self {
            Channel::D0 => 0,
            Channel::D1 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::D0 => "D0",
            Channel::D1 => "D1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Photon,
    Afterpulse,
    Injection,
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::Photon => "photon",
            Origin::Afterpulse => "afterpulse",
            Origin::Injection => "injection",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionEvent {
    pub time: TimeStamp,
    pub channel: Channel,
    pub origin: Origin,
}

impl DetectionEvent {
    pub fn new(ps: u64, channel: Channel, origin: Origin) -> Self {
        DetectionEvent {
            time: TimeStamp(ps),
            channel,
            origin,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    /// Non-paralyzable dead time, ps.
    pub dead_time: u64,
    pub afterpulse_prob: f64,
    /// Mean of the exponential afterpulse delay past the end of the dead time, ps.
    pub afterpulse_mean_delay: u64,
    /// Photon detection probability.
    pub efficiency: f64,
    /// Detection probability of an injected pulse.
    pub injection_detect_prob: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            dead_time: 24 * PS_PER_NS,
            afterpulse_prob: 0.031,
            afterpulse_mean_delay: 30 * PS_PER_NS,
            efficiency: 1.0,
            injection_detect_prob: 0.997,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if self.dead_time == 0 {
            return Err(Error::param("dead_time", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.afterpulse_prob) {
            return Err(Error::param("afterpulse_prob", "must lie in [0, 1)"));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::param("efficiency", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.injection_detect_prob) {
            return Err(Error::param("injection_detect_prob", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn dead_time_secs(&self) -> f64 {
        self.dead_time as f64 / PS_PER_SEC as f64
    }
}

/// Streaming detector for one channel.
///
/// Arrivals are fed in time order, optionally in chunks; pending afterpulses
/// are carried across chunk boundaries, so chunked and single-pass runs
/// produce identical output for the same seed.
#[derive(Debug, Clone)]
pub struct Detector {
    channel: Channel,
    dead_time: u64,
    afterpulse_mean: f64,
    rng: ChaCha8Rng,
    photon_keep: Option<Bernoulli>,
    injection_keep: Option<Bernoulli>,
    afterpulse: Option<Bernoulli>,
    pending: BinaryHeap<Reverse<u64>>,
    last: Option<u64>,
}

impl Detector {
    pub fn new(params: &DetectorParams, channel: Channel, seed: u64) -> Result<Self> {
        params.validate()?;
        let stream = match channel {
            Channel::D0 => rng::stream::DETECTOR_D0,
            Channel::D1 => rng::stream::DETECTOR_D1,
        };
        let thinning = |p: f64| (p < 1.0).then(|| Bernoulli::new(p).expect("validated"));
        Ok(Detector {
            channel,
            dead_time: params.dead_time,
            afterpulse_mean: params.afterpulse_mean_delay as f64,
            rng: stream_rng(seed, stream),
            photon_keep: thinning(params.efficiency),
            injection_keep: thinning(params.injection_detect_prob),
            afterpulse: (params.afterpulse_prob > 0.0)
                .then(|| Bernoulli::new(params.afterpulse_prob).expect("validated")),
            pending: BinaryHeap::new(),
            last: None,
        })
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    fn fire(&mut self, t: u64, origin: Origin, out: &mut Vec<DetectionEvent>) {
        if let Some(last) = self.last {
            if t < last + self.dead_time {
                return;
            }
        }
        self.last = Some(t);
        out.push(DetectionEvent::new(t, self.channel, origin));
        if let Some(ap) = self.afterpulse {
            if self.rng.sample(ap) {
                let e: f64 = Exp1.sample(&mut self.rng);
                let delay = (e * self.afterpulse_mean) as u64;
                self.pending.push(Reverse(t + self.dead_time + delay));
            }
        }
    }

    fn flush(&mut self, below: u64, out: &mut Vec<DetectionEvent>) {
        while let Some(&Reverse(p)) = self.pending.peek() {
            if p >= below {
                break;
            }
            self.pending.pop();
            self.fire(p, Origin::Afterpulse, out);
        }
    }

    /// Processes `arrivals` (all earlier than `horizon`) and every pending
    /// afterpulse earlier than `horizon`. Output is appended in time order.
    pub fn feed(&mut self, arrivals: &[ArrivalEvent], horizon: u64, out: &mut Vec<DetectionEvent>) {
        for a in arrivals {
            let t = a.time.0;
            // an afterpulse at the same instant as an arrival goes first
            self.flush(t.saturating_add(1), out);
            let (keep, origin) = match a.kind {
                ArrivalKind::Photon => (self.photon_keep, Origin::Photon),
                ArrivalKind::Injection => (self.injection_keep, Origin::Injection),
            };
            let survives = match keep {
                Some(b) => self.rng.sample(b),
                None => true,
            };
            if survives {
                self.fire(t, origin, out);
            }
        }
        self.flush(horizon, out);
    }

    /// Drains every remaining afterpulse.
    pub fn finish(&mut self, out: &mut Vec<DetectionEvent>) {
        self.flush(u64::MAX, out);
    }
}

pub fn detect(
    arrivals: &[ArrivalEvent],
    params: &DetectorParams,
    channel: Channel,
    seed: u64,
) -> Result<Vec<DetectionEvent>> {
    if arrivals.windows(2).any(|w| w[0].time > w[1].time) {
        return Err(Error::param("arrivals", "must be sorted ascending"));
    }
    let mut det = Detector::new(params, channel, seed)?;
    let mut out = Vec::with_capacity(arrivals.len());
    det.feed(arrivals, u64::MAX, &mut out);
    det.finish(&mut out);
    Ok(out)
}

/// Interleaves two sorted channel streams. Exact ties put D0 before D1.
pub fn merge_channels(d0: &[DetectionEvent], d1: &[DetectionEvent]) -> Vec<DetectionEvent> {
    let mut out = Vec::with_capacity(d0.len() + d1.len());
    merge_channels_into(d0, d1, &mut out);
    out
}

pub(crate) fn merge_channels_into(
    d0: &[DetectionEvent],
    d1: &[DetectionEvent],
    out: &mut Vec<DetectionEvent>,
) {
    out.reserve(d0.len() + d1.len());
    let (mut i, mut j) = (0, 0);
    while i < d0.len() && j < d1.len() {
        if d0[i].time <= d1[j].time {
            out.push(d0[i]);
            i += 1;
        } else {
            out.push(d1[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&d0[i..]);
    out.extend_from_slice(&d1[j..]);
}

/// Renewal approximation of the detected count rate for an incident photon
/// rate (photons/s reaching the detector).
///
/// After each detection the detector is blind for the dead time; the next
/// detection is the first of a photon and, with probability p_a, an
/// afterpulse delayed Exp(mean) past the dead time.
pub fn detected_rate(incident: f64, params: &DetectorParams) -> f64 {
    let r = incident * params.efficiency;
    if r <= 0.0 {
        return 0.0;
    }
    let pa = params.afterpulse_prob;
    let tau_d = params.dead_time_secs();
    let mu = params.afterpulse_mean_delay as f64 / PS_PER_SEC as f64;
    let ap_wait = if mu > 0.0 { 1.0 / (r + 1.0 / mu) } else { 0.0 };
    1.0 / (tau_d + (1.0 - pa) / r + pa * ap_wait)
}

/// Inverts [`detected_rate`]: incident rate that yields `target` detections/s.
pub fn incident_rate_for(target: f64, params: &DetectorParams) -> Result<f64> {
    params.validate()?;
    if target == 0.0 {
        return Ok(0.0);
    }
    let ceiling = 1.0 / params.dead_time_secs();
    if !(target > 0.0 && target < ceiling) {
        return Err(Error::param(
            "detected rate",
            format!("must lie in [0, 1/dead_time = {ceiling:.4e}) counts/s, got {target:.4e}"),
        ));
    }
    let (mut lo, mut hi) = (target * 1e-3, target);
    while detected_rate(hi, params) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if detected_rate(mid, params) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
