//! Scenario orchestration: chunked end-to-end simulation of one operating
//! point, parameter sweeps, and CSV/text reports.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::arrival::{
    default_injection_phase, merge_into, ArrivalEvent, ArrivalKind, InjectionStream, PoissonStream, Splitter,
};
use crate::bits::{BitStream, StreamLabel};
use crate::config::SimConfig;
use crate::detector::{detected_rate, incident_rate_for, merge_channels_into, Channel, DetectionEvent, Detector, DetectorParams, Origin};
use crate::error::{Error, Result};
use crate::extract::{Accepted, Blanker, ClockMode, ClockParams, Pipeline, PipelineCounts, PipelineOutput, T1T2};
use crate::predict::{propagate_pairxor, propagate_xor, MarkovBitModel, Propagation};
use crate::rng::{mix_seed, stream, stream_rng};
use crate::stats::{autocorr, bias, crosscorr, markov_check, CrossCorrReport, MarkovVerdict, MetricsReport};
use crate::time::{ps_to_secs, secs_to_ps};

/// Simulated time per engine step.
const CHUNK_PS: u64 = 100_000_000;
/// Detections per calibration pilot run.
const PILOT_DETECTIONS: f64 = 1_000_000.0;
const PILOT_ROUNDS: usize = 3;

/// Photon source settings that realise the configured detected rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourcePlan {
    /// Photons/s reaching D0 and D1.
    pub incident_d0: f64,
    pub incident_d1: f64,
}

impl SourcePlan {
    pub fn total_rate(&self) -> f64 {
        self.incident_d0 + self.incident_d1
    }

    pub fn split_prob_d1(&self) -> f64 {
        let t = self.total_rate();
        if t > 0.0 {
            self.incident_d1 / t
        } else {
            0.5
        }
    }
}

/// Detected rate of one free-running detector fed Poisson light at
/// `incident`, measured over a pilot run.
fn pilot_rate(incident: f64, target: f64, params: &DetectorParams, seed: u64) -> Result<f64> {
    let horizon = secs_to_ps(PILOT_DETECTIONS / target);
    let mut photons = PoissonStream::with_rng(incident, stream_rng(seed, stream::CALIBRATION))?;
    let mut det = Detector::new(params, Channel::D0, mix_seed(seed, stream::CALIBRATION))?;
    let (mut times, mut arrivals, mut out) = (Vec::new(), Vec::new(), Vec::new());
    let mut count = 0usize;
    let mut now = 0;
    while now < horizon {
        let next = (now + CHUNK_PS).min(horizon);
        times.clear();
        arrivals.clear();
        out.clear();
        photons.fill_until(next, &mut times);
        merge_into(&times, &[], &mut arrivals);
        det.feed(&arrivals, next, &mut out);
        count += out.len();
        now = next;
    }
    Ok(count as f64 / ps_to_secs(horizon))
}

/// Incident rate giving `target` detections/s: the renewal approximation
/// refined by Newton steps on pilot simulations with common random numbers.
pub fn calibrate_incident(target: f64, params: &DetectorParams, seed: u64) -> Result<f64> {
    let mut r = incident_rate_for(target, params)?;
    if target == 0.0 {
        return Ok(0.0);
    }
    for _ in 0..PILOT_ROUNDS {
        let measured = pilot_rate(r, target, params, seed)?;
        let h = r * 1e-4;
        let slope = (detected_rate(r + h, params) - detected_rate(r - h, params)) / (2.0 * h);
        r = (r + (target - measured) / slope).max(r * 0.5);
    }
    Ok(r)
}

/// Both channels are calibrated on the same pilot random numbers, so equal
/// targets give exactly equal intensities.
pub fn plan_source(cfg: &SimConfig) -> Result<SourcePlan> {
    let seed = mix_seed(cfg.seed, stream::CALIBRATION);
    let inc = |target: f64| {
        if cfg.calibrate {
            calibrate_incident(target, &cfg.detector, seed)
        } else {
            incident_rate_for(target, &cfg.detector)
        }
    };
    let incident_d0 = inc(cfg.rate_d0)?;
    let incident_d1 = if cfg.rate_d1 == cfg.rate_d0 { incident_d0 } else { inc(cfg.rate_d1)? };
    Ok(SourcePlan {
        incident_d0,
        incident_d1,
    })
}

/// Where and for how long to dump raw event traces.
#[derive(Debug, Clone)]
pub struct TraceOptions {
    pub dir: PathBuf,
    /// Only events before this time (ps) are written.
    pub until: u64,
}

struct TraceSink {
    until: u64,
    arrivals: BufWriter<File>,
    arrivals_path: PathBuf,
    detections: BufWriter<File>,
    detections_path: PathBuf,
}

impl TraceSink {
    fn create(opts: &TraceOptions, tag: &str) -> Result<Self> {
        let open = |name: String, header: &str| -> Result<(BufWriter<File>, PathBuf)> {
            let path = opts.dir.join(name);
            let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(f);
            writeln!(w, "{header}").map_err(|e| Error::io(&path, e))?;
            Ok((w, path))
        };
        let (arrivals, arrivals_path) = open(format!("trace_arrivals{tag}.csv"), "time_ps,channel,kind")?;
        let (detections, detections_path) =
            open(format!("trace_detections{tag}.csv"), "time_ps,channel,origin")?;
        Ok(TraceSink {
            until: opts.until,
            arrivals,
            arrivals_path,
            detections,
            detections_path,
        })
    }

    fn arrivals(&mut self, ch: Channel, evs: &[ArrivalEvent]) -> Result<()> {
        for a in evs.iter().take_while(|a| a.time.0 < self.until) {
            let kind = match a.kind {
                ArrivalKind::Photon => "photon",
                ArrivalKind::Injection => "injection",
            };
            writeln!(self.arrivals, "{},{},{kind}", a.time.0, ch.name())
                .map_err(|e| Error::io(&self.arrivals_path, e))?;
        }
        Ok(())
    }

    fn detections(&mut self, merged: &[DetectionEvent]) -> Result<()> {
        for d in merged.iter().take_while(|d| d.time.0 < self.until) {
            writeln!(self.detections, "{},{},{}", d.time.0, d.channel.name(), d.origin.name())
                .map_err(|e| Error::io(&self.detections_path, e))?;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.arrivals.flush().map_err(|e| Error::io(&self.arrivals_path, e))?;
        self.detections.flush().map_err(|e| Error::io(&self.detections_path, e))
    }
}

/// Detections per origin for one channel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OriginCounts {
    pub photon: u64,
    pub afterpulse: u64,
    pub injection: u64,
}

impl OriginCounts {
    pub fn total(&self) -> u64 {
        self.photon + self.afterpulse + self.injection
    }
}

/// Source, splitter and both detectors, advanced in fixed time chunks.
pub struct Engine {
    photons: Option<PoissonStream>,
    splitter: Splitter,
    injection: Option<InjectionStream>,
    det: [Detector; 2],
    now: u64,
    photon_buf: Vec<u64>,
    chan_buf: [Vec<u64>; 2],
    inj_buf: Vec<u64>,
    arr_buf: [Vec<ArrivalEvent>; 2],
    out: [Vec<DetectionEvent>; 2],
    merged: Vec<DetectionEvent>,
    origins: [OriginCounts; 2],
    trace: Option<TraceSink>,
}

impl Engine {
    pub fn new(cfg: &SimConfig, plan: &SourcePlan, seed: u64) -> Result<Self> {
        let total = plan.total_rate();
        let photons = if total > 0.0 {
            Some(PoissonStream::new(total, seed)?)
        } else {
            None
        };
        let phase = cfg
            .injection_phase
            .unwrap_or_else(|| default_injection_phase(cfg.injection_rate));
        Ok(Engine {
            photons,
            splitter: Splitter::new(plan.split_prob_d1(), seed)?,
            injection: InjectionStream::new(cfg.injection_rate, phase)?,
            det: [
                Detector::new(&cfg.detector, Channel::D0, seed)?,
                Detector::new(&cfg.detector, Channel::D1, seed)?,
            ],
            now: 0,
            photon_buf: Vec::new(),
            chan_buf: [Vec::new(), Vec::new()],
            inj_buf: Vec::new(),
            arr_buf: [Vec::new(), Vec::new()],
            out: [Vec::new(), Vec::new()],
            merged: Vec::new(),
            origins: [OriginCounts::default(); 2],
            trace: None,
        })
    }

    fn with_trace(mut self, opts: Option<&TraceOptions>, tag: &str) -> Result<Self> {
        if let Some(o) = opts {
            self.trace = Some(TraceSink::create(o, tag)?);
        }
        Ok(self)
    }

    /// Simulated time reached so far (ps).
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn origins(&self) -> [OriginCounts; 2] {
        self.origins
    }

    /// Advances one chunk and returns the merged detections of that chunk.
    pub fn step(&mut self) -> Result<&[DetectionEvent]> {
        let horizon = self.now + CHUNK_PS;
        self.photon_buf.clear();
        self.inj_buf.clear();
        if let Some(p) = self.photons.as_mut() {
            p.fill_until(horizon, &mut self.photon_buf);
        }
        let [c0, c1] = &mut self.chan_buf;
        c0.clear();
        c1.clear();
        self.splitter.route(&self.photon_buf, c0, c1);
        if let Some(inj) = self.injection.as_mut() {
            inj.fill_until(horizon, &mut self.inj_buf);
        }
        self.merged.clear();
        for ch in 0..2 {
            self.arr_buf[ch].clear();
            merge_into(&self.chan_buf[ch], &self.inj_buf, &mut self.arr_buf[ch]);
            if let Some(t) = self.trace.as_mut() {
                t.arrivals(if ch == 0 { Channel::D0 } else { Channel::D1 }, &self.arr_buf[ch])?;
            }
            self.out[ch].clear();
            self.det[ch].feed(&self.arr_buf[ch], horizon, &mut self.out[ch]);
            let o = &mut self.origins[ch];
            for d in &self.out[ch] {
                match d.origin {
                    Origin::Photon => o.photon += 1,
                    Origin::Afterpulse => o.afterpulse += 1,
                    Origin::Injection => o.injection += 1,
                }
            }
        }
        merge_channels_into(&self.out[0], &self.out[1], &mut self.merged);
        if let Some(t) = self.trace.as_mut() {
            t.detections(&self.merged)?;
        }
        self.now = horizon;
        Ok(&self.merged)
    }

    fn finish(self) -> Result<()> {
        match self.trace {
            Some(t) => t.finish(),
            None => Ok(()),
        }
    }
}

/// Metrics that tolerate empty or constant streams: bias is NaN when
/// empty, the autocorrelation list is empty when undefined.
pub fn lenient_metrics(bits: &BitStream, k_max: usize) -> MetricsReport {
    let (b, sb) = bias(bits).unwrap_or((f64::NAN, f64::NAN));
    MetricsReport {
        label: bits.label(),
        n_bits: bits.len() as u64,
        bias: b,
        sigma_b: sb,
        autocorr: autocorr(bits, k_max).unwrap_or_default(),
    }
}

fn model_of(m: &MetricsReport) -> Option<MarkovBitModel> {
    MarkovBitModel::new(m.bias, m.a1()?).ok()
}

/// Everything measured at one operating point.
#[derive(Debug, Clone)]
pub struct PointReport {
    pub index: usize,
    /// Value of the swept variable (its meaning depends on the scenario).
    pub x: f64,
    pub cfg: SimConfig,
    pub plan: SourcePlan,
    /// Simulated seconds.
    pub duration: f64,
    pub origins: [OriginCounts; 2],
    pub counts: PipelineCounts,
    pub f_g: f64,
    pub f_b: f64,
    pub s: MetricsReport,
    pub y: MetricsReport,
    pub t: MetricsReport,
    pub c: MetricsReport,
    /// T against Y over their common length.
    pub cross: Option<CrossCorrReport>,
    /// Pair-XOR prediction from measured S.
    pub pred_y: Option<Propagation>,
    /// XOR prediction from measured T and Y.
    pub pred_c: Option<Propagation>,
    pub markov_s: Option<MarkovVerdict>,
    pub markov_t: Option<MarkovVerdict>,
}

impl PointReport {
    /// Measured detections/s per channel.
    pub fn f_d(&self, ch: Channel) -> f64 {
        if self.duration > 0.0 {
            self.origins[ch.index()].total() as f64 / self.duration
        } else {
            0.0
        }
    }

    pub fn metrics(&self, label: StreamLabel) -> &MetricsReport {
        match label {
            StreamLabel::S => &self.s,
            StreamLabel::Y => &self.y,
            StreamLabel::T => &self.t,
            _ => &self.c,
        }
    }
}

fn target_len(out: &Pipeline, label: StreamLabel) -> usize {
    match label {
        StreamLabel::S | StreamLabel::Raw => out.s.len(),
        StreamLabel::Y => out.y.len(),
        StreamLabel::T => out.t.len(),
        StreamLabel::C => out.c.len(),
    }
}

/// Default simulated-time cap: the target at 10⁵ bits/s, at least 10 ms.
pub fn default_max_duration(n_bits: u64) -> f64 {
    (n_bits as f64 / 1e5).max(0.01)
}

/// Runs one operating point to completion and keeps the bit streams.
pub fn simulate_streams(
    cfg: &SimConfig,
    seed: u64,
    trace: Option<&TraceOptions>,
) -> Result<(SourcePlan, [OriginCounts; 2], PipelineOutput)> {
    cfg.validate()?;
    let plan = plan_source(cfg)?;
    let tag = if trace.is_some() { format!("_{seed:016x}") } else { String::new() };
    let mut engine = Engine::new(cfg, &plan, seed)?.with_trace(trace, &tag)?;
    let mut pipe = Pipeline::new(cfg.blank, cfg.clock, cfg.pairing)?;
    let cap = secs_to_ps(cfg.max_duration.unwrap_or_else(|| default_max_duration(cfg.n_bits)));
    let idle = plan.total_rate() == 0.0 && cfg.injection_rate == 0.0;
    while (target_len(&pipe, cfg.target_stream) as u64) < cfg.n_bits && engine.now() < cap {
        let merged = engine.step()?;
        pipe.feed_merged(merged);
        if idle {
            break;
        }
    }
    let origins = engine.origins();
    let duration = engine.now();
    engine.finish()?;
    Ok((plan, origins, pipe.into_output(duration)))
}

pub fn report_from_output(
    index: usize,
    x: f64,
    cfg: &SimConfig,
    plan: SourcePlan,
    origins: [OriginCounts; 2],
    out: &PipelineOutput,
) -> PointReport {
    let k = cfg.k_max;
    let (s, y, t, c) = (
        lenient_metrics(&out.s, k),
        lenient_metrics(&out.y, k),
        lenient_metrics(&out.t, k),
        lenient_metrics(&out.c, k),
    );
    let pred_y = model_of(&s).and_then(|m| propagate_pairxor(&m).ok());
    let pred_c = match (model_of(&t), model_of(&y)) {
        (Some(mt), Some(my)) => propagate_xor(&mt, &my).ok(),
        _ => None,
    };
    let markov = |m: &MetricsReport| {
        if m.autocorr.len() >= 2 {
            markov_check(m, cfg.markov_z).ok()
        } else {
            None
        }
    };
    PointReport {
        index,
        x,
        cfg: cfg.clone(),
        plan,
        duration: out.duration,
        origins,
        counts: out.counts,
        f_g: out.f_g(),
        f_b: out.f_b(),
        cross: crosscorr(&out.t, &out.y, k).ok(),
        pred_y,
        pred_c,
        markov_s: markov(&s),
        markov_t: markov(&t),
        s,
        y,
        t,
        c,
    }
}

/// Simulates one point; `index` selects an independent random stream.
pub fn simulate_point(cfg: &SimConfig, index: usize, x: f64, trace: Option<&TraceOptions>) -> Result<PointReport> {
    let seed = point_seed(cfg.seed, index);
    let (plan, origins, out) = simulate_streams(cfg, seed, trace)?;
    Ok(report_from_output(index, x, cfg, plan, origins, &out))
}

/// Seed of point `index`; a pure function of the base seed and the index.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    mix_seed(seed, index as u64)
}

/// Runs independent points on a pool of `jobs` workers. Results come back
/// in input order regardless of scheduling.
pub fn run_points(
    points: Vec<(SimConfig, f64)>,
    jobs: usize,
    trace: Option<&TraceOptions>,
) -> Result<Vec<PointReport>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::param("jobs", e.to_string()))?;
    pool.install(|| {
        points
            .into_par_iter()
            .enumerate()
            .map(|(i, (cfg, x))| simulate_point(&cfg, i, x, trace))
            .collect()
    })
}

pub fn run_nominal(cfg: &SimConfig, trace: Option<&TraceOptions>) -> Result<PointReport> {
    simulate_point(cfg, 0, cfg.rate_d0, trace)
}

/// Linear-interpolated zero of a sampled curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossover {
    pub x: f64,
    /// Sign changes along the whole curve.
    pub sign_changes: usize,
}

/// First zero crossing of `(x, y)` pairs sorted by `x`.
pub fn find_crossover(points: &[(f64, f64)]) -> Option<Crossover> {
    let mut first = None;
    let mut changes = 0;
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if y0 == 0.0 && first.is_none() {
            first = Some(x0);
        }
        if (y0 > 0.0 && y1 < 0.0) || (y0 < 0.0 && y1 > 0.0) {
            changes += 1;
            if first.is_none() {
                first = Some(x0 - y0 * (x1 - x0) / (y1 - y0));
            }
        }
    }
    first.map(|x| Crossover { x, sign_changes: changes })
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub name: &'static str,
    /// Meaning of `PointReport::x`.
    pub x_label: &'static str,
    pub points: Vec<PointReport>,
}

impl Sweep {
    /// Crossing of the measured lag-1 autocorrelation of `label`.
    pub fn crossover(&self, label: StreamLabel) -> Option<Crossover> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter_map(|p| Some((p.x, p.metrics(label).a1()?)))
            .collect();
        find_crossover(&pts)
    }
}

/// a_S(1) against the per-detector detected rate (both detectors equal).
pub fn sweep_rate(cfg: &SimConfig, jobs: usize, trace: Option<&TraceOptions>) -> Result<Sweep> {
    let points = cfg
        .sweep_rates
        .iter()
        .map(|&r| {
            let mut c = cfg.clone();
            c.rate_d0 = r;
            c.rate_d1 = r;
            (c, r)
        })
        .collect();
    Ok(Sweep {
        name: "sweep-rate",
        x_label: "rate_per_detector_cps",
        points: run_points(points, jobs, trace)?,
    })
}

pub fn sweep_blank(cfg: &SimConfig, jobs: usize, trace: Option<&TraceOptions>) -> Result<Sweep> {
    let points = cfg
        .blank_windows
        .iter()
        .map(|&w| {
            let mut c = cfg.clone();
            c.blank.window = w;
            (c, w as f64)
        })
        .collect();
    Ok(Sweep {
        name: "sweep-blank",
        x_label: "blank_window_ps",
        points: run_points(points, jobs, trace)?,
    })
}

/// D1's detected rate varied with D0 held at its configured rate.
pub fn scenario_failure(cfg: &SimConfig, jobs: usize, trace: Option<&TraceOptions>) -> Result<Sweep> {
    let points = cfg
        .failure_rates
        .iter()
        .map(|&r| {
            let mut c = cfg.clone();
            c.rate_d1 = r;
            (c, r)
        })
        .collect();
    Ok(Sweep {
        name: "scenario-failure",
        x_label: "rate_d1_cps",
        points: run_points(points, jobs, trace)?,
    })
}

pub fn scenario_injection(cfg: &SimConfig, jobs: usize, trace: Option<&TraceOptions>) -> Result<Sweep> {
    let points = cfg
        .inject_rates
        .iter()
        .map(|&r| {
            let mut c = cfg.clone();
            c.injection_rate = r;
            (c, r)
        })
        .collect();
    Ok(Sweep {
        name: "scenario-inject",
        x_label: "injection_rate_hz",
        points: run_points(points, jobs, trace)?,
    })
}

/// Alarm state of one monitoring point relative to the nominal point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alarm {
    /// Both f_G and f_B below nominal by more than [`ALARM_TOLERANCE`].
    Low,
    /// Both above nominal.
    High,
    None,
}

impl Alarm {
    pub fn name(self) -> &'static str {
        match self {
            Alarm::Low => "low",
            Alarm::High => "high",
            Alarm::None => "none",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Monitoring {
    pub nominal: PointReport,
    /// Both detectors' rates varied together.
    pub both: Sweep,
    /// Only D0 varied.
    pub only_d0: Sweep,
    /// Injection rate varied.
    pub injection: Sweep,
}

/// Relative deadband around the nominal rates; point-to-point statistical
/// scatter at desk scale is well below it.
pub const ALARM_TOLERANCE: f64 = 0.01;

impl Monitoring {
    pub fn alarm(&self, p: &PointReport) -> Alarm {
        let (g, b) = (self.nominal.f_g, self.nominal.f_b);
        let (lo, hi) = (1.0 - ALARM_TOLERANCE, 1.0 + ALARM_TOLERANCE);
        if p.f_g < g * lo && p.f_b < b * lo {
            Alarm::Low
        } else if p.f_g > g * hi && p.f_b > b * hi {
            Alarm::High
        } else {
            Alarm::None
        }
    }

    pub fn curves(&self) -> [&Sweep; 3] {
        [&self.both, &self.only_d0, &self.injection]
    }
}

pub fn scenario_monitoring(cfg: &SimConfig, jobs: usize, trace: Option<&TraceOptions>) -> Result<Monitoring> {
    let mut points: Vec<(SimConfig, f64)> = vec![(cfg.clone(), 0.0)];
    for &r in &cfg.monitor_rates {
        let mut c = cfg.clone();
        c.rate_d0 = r;
        c.rate_d1 = r;
        points.push((c, r));
    }
    for &r in &cfg.monitor_rates {
        let mut c = cfg.clone();
        c.rate_d0 = r;
        points.push((c, r));
    }
    for &r in &cfg.inject_rates {
        let mut c = cfg.clone();
        c.injection_rate = r;
        points.push((c, r));
    }
    let mut all = run_points(points, jobs, trace)?.into_iter();
    let nominal = all.next().expect("nominal point");
    let n = cfg.monitor_rates.len();
    let both: Vec<_> = all.by_ref().take(n).collect();
    let only_d0: Vec<_> = all.by_ref().take(n).collect();
    let injection: Vec<_> = all.collect();
    Ok(Monitoring {
        nominal,
        both: Sweep {
            name: "monitor-both",
            x_label: "rate_per_detector_cps",
            points: both,
        },
        only_d0: Sweep {
            name: "monitor-d0",
            x_label: "rate_d0_cps",
            points: only_d0,
        },
        injection: Sweep {
            name: "monitor-inject",
            x_label: "injection_rate_hz",
            points: injection,
        },
    })
}

/// T1T2 bits from one accepted stream under both clock modes.
#[derive(Debug, Clone)]
pub struct ClockComparison {
    /// Mean interval between accepted pulses (ps).
    pub mean_interval: f64,
    pub clock_period: u64,
    pub free_running: BitStream,
    pub restartable: BitStream,
}

/// Feeds the accepted pulses of `cfg` into a free-running and a restartable
/// T1T2 extractor whose clock period is `ratio` times the mean accepted
/// interval. Runs until the free-running stream has `n_bits` bits.
pub fn clock_comparison(cfg: &SimConfig, ratio: f64, n_bits: u64, seed: u64) -> Result<ClockComparison> {
    cfg.validate()?;
    let plan = plan_source(cfg)?;
    let cap = secs_to_ps(cfg.max_duration.unwrap_or_else(|| default_max_duration(n_bits)));

    // pilot: accepted rate over a short run
    let mut engine = Engine::new(cfg, &plan, mix_seed(seed, 0xC10C))?;
    let mut blanker = Blanker::new(cfg.blank);
    let mut acc: Vec<Accepted> = Vec::new();
    let mut accepted = 0usize;
    while engine.now() < secs_to_ps(0.01) {
        acc.clear();
        blanker.feed(engine.step()?, &mut acc);
        accepted += acc.len();
    }
    if accepted < 2 {
        return Err(Error::InsufficientData("too few accepted pulses to time the clock".into()));
    }
    let mean_interval = engine.now() as f64 / accepted as f64;
    let clock_period = (ratio * mean_interval).round().max(1.0) as u64;

    let mut engine = Engine::new(cfg, &plan, seed)?;
    let mut blanker = Blanker::new(cfg.blank);
    let mut free = T1T2::new(ClockParams::new(clock_period, ClockMode::FreeRunning))?;
    let mut restart = T1T2::new(ClockParams::new(clock_period, ClockMode::Restartable))?;
    let mut fb = BitStream::new(StreamLabel::T);
    let mut rb = BitStream::new(StreamLabel::T);
    while (fb.len() as u64) < n_bits && engine.now() < cap {
        acc.clear();
        blanker.feed(engine.step()?, &mut acc);
        for a in &acc {
            if let Some((_, b)) = free.push(a.event.time.0) {
                fb.push(b);
            }
            if let Some((_, b)) = restart.push(a.event.time.0) {
                rb.push(b);
            }
        }
    }
    Ok(ClockComparison {
        mean_interval,
        clock_period,
        free_running: fb,
        restartable: rb,
    })
}

/// Header of [`points_csv`].
pub fn points_csv_header(x_label: &str) -> String {
    let mut h = format!(
        "index,{x_label},f_d0_target,f_d1_target,f_inject,blank_window_ps,incident_d0,incident_d1,f_d0,f_d1,duration_s,detections,accepted,blanked,coincident,ties,f_G,f_B"
    );
    for l in ["S", "Y", "T", "C"] {
        let _ = write!(h, ",n_{l},b_{l},sigma_b_{l},a1_{l},sigma_a1_{l}");
    }
    h.push_str(",pred_b_Y,pred_a_Y,pred_b_C,pred_a_C,max_z_TY,markov_S,markov_T");
    h
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.9e}"))
}

fn verdict(v: &Option<MarkovVerdict>) -> &'static str {
    match v {
        Some(v) if v.pass => "pass",
        Some(_) => "fail",
        None => "",
    }
}

/// One row per point with measured and predicted values side by side.
pub fn points_csv(x_label: &str, points: &[PointReport]) -> String {
    let mut s = points_csv_header(x_label);
    s.push('\n');
    for p in points {
        let _ = write!(
            s,
            "{},{},{},{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.9e},{},{},{},{},{},{:.6e},{:.6e}",
            p.index,
            p.x,
            p.cfg.rate_d0,
            p.cfg.rate_d1,
            p.cfg.injection_rate,
            p.cfg.blank.window,
            p.plan.incident_d0,
            p.plan.incident_d1,
            p.f_d(Channel::D0),
            p.f_d(Channel::D1),
            p.duration,
            p.counts.detections,
            p.counts.accepted,
            p.counts.blanked,
            p.counts.coincident,
            p.counts.ties,
            p.f_g,
            p.f_b,
        );
        for m in [&p.s, &p.y, &p.t, &p.c] {
            let _ = write!(
                s,
                ",{},{},{},{},{}",
                m.n_bits,
                opt(Some(m.bias).filter(|b| b.is_finite())),
                opt(Some(m.sigma_b).filter(|b| b.is_finite())),
                opt(m.a1()),
                opt(m.sigma_a1()),
            );
        }
        let _ = writeln!(
            s,
            ",{},{},{},{},{},{},{}",
            opt(p.pred_y.map(|x| x.exact.b)),
            opt(p.pred_y.map(|x| x.exact.a)),
            opt(p.pred_c.map(|x| x.exact.b)),
            opt(p.pred_c.map(|x| x.exact.a)),
            opt(p.cross.as_ref().map(|c| c.max_z())),
            verdict(&p.markov_s),
            verdict(&p.markov_t),
        );
    }
    s
}

/// Per-lag metrics of every stream at every point.
pub fn metrics_csv(points: &[PointReport]) -> String {
    let mut s = format!("index,{}\n", crate::stats::METRICS_CSV_HEADER);
    for p in points {
        for m in [&p.s, &p.y, &p.t, &p.c] {
            for row in m.csv_rows().lines() {
                let _ = writeln!(s, "{},{row}", p.index);
            }
        }
    }
    s
}

/// T-Y cross-correlation at every point.
pub fn cross_csv(points: &[PointReport]) -> String {
    let mut s = String::from("index,pair,N,k,a_k,sigma_k\n");
    for p in points {
        if let Some(c) = &p.cross {
            for row in c.csv_rows("TY").lines() {
                let _ = writeln!(s, "{},{row}", p.index);
            }
        }
    }
    s
}

/// Human-readable `key = value` report of one point.
pub fn point_report_text(p: &PointReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "point = {}", p.index);
    let _ = writeln!(s, "x = {}", p.x);
    let _ = writeln!(s, "duration_s = {:.6}", p.duration);
    let _ = writeln!(s, "incident_d0 = {:.6e}", p.plan.incident_d0);
    let _ = writeln!(s, "incident_d1 = {:.6e}", p.plan.incident_d1);
    let _ = writeln!(s, "f_d0 = {:.6e}", p.f_d(Channel::D0));
    let _ = writeln!(s, "f_d1 = {:.6e}", p.f_d(Channel::D1));
    let _ = writeln!(s, "f_G = {:.6e}", p.f_g);
    let _ = writeln!(s, "f_B = {:.6e}", p.f_b);
    let c = p.counts;
    let _ = writeln!(
        s,
        "detections = {}\naccepted = {}\nblanked = {}\ncoincident = {}\nties = {}",
        c.detections, c.accepted, c.blanked, c.coincident, c.ties
    );
    for (m, name) in [(&p.s, "S"), (&p.y, "Y"), (&p.t, "T"), (&p.c, "C")] {
        s.push_str(&m.to_kv(name));
    }
    if let Some(x) = &p.cross {
        s.push_str(&x.to_kv("TY"));
    }
    if let Some(x) = &p.pred_y {
        s.push_str(&x.to_kv("predicted.Y"));
    }
    if let Some(x) = &p.pred_c {
        s.push_str(&x.to_kv("predicted.C"));
    }
    let _ = writeln!(s, "markov.S = {}", verdict(&p.markov_s));
    let _ = writeln!(s, "markov.T = {}", verdict(&p.markov_t));
    s
}

/// Writes `text` to `dir/name`.
pub fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
