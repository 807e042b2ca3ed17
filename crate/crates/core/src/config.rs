//! Flat `key = value` configuration with units.
//!
//! Durations accept `ps`, `ns`, `us`, `ms` and `s`; rates accept `cps`,
//! `kcps`, `Mcps`, `Hz`, `kHz` and `MHz`. Lists are comma separated. Lines
//! starting with `#` are comments.

use std::fmt::Write as _;
use std::path::Path;

use crate::detector::DetectorParams;
use crate::error::{Error, Result};
use crate::extract::{BlankMode, BlankParams, ClockMode, ClockParams, Pairing};
use crate::bits::StreamLabel;

/// Parses a duration to picoseconds. A bare number is read as seconds.
pub fn parse_duration_ps(s: &str) -> std::result::Result<u64, String> {
    let s = s.trim();
    let split = s
        .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let v: f64 = num.trim().parse().map_err(|_| format!("`{s}` is not a duration"))?;
    let scale = match unit.trim() {
        "ps" => 1.0,
        "ns" => 1e3,
        "us" | "µs" => 1e6,
        "ms" => 1e9,
        "s" | "" => 1e12,
        u => return Err(format!("unknown duration unit `{u}` (use ps, ns, us, ms or s)")),
    };
    let ps = v * scale;
    if !(ps >= 0.0 && ps < 1.8e19) {
        return Err(format!("duration `{s}` out of range"));
    }
    Ok(ps.round() as u64)
}

/// Parses an event rate to events per second.
pub fn parse_rate(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let split = s
        .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let v: f64 = num.trim().parse().map_err(|_| format!("`{s}` is not a rate"))?;
    let scale = match unit.trim() {
        "" | "cps" | "Hz" | "/s" => 1.0,
        "kcps" | "kHz" => 1e3,
        "Mcps" | "MHz" => 1e6,
        u => return Err(format!("unknown rate unit `{u}` (use cps, kcps, Mcps, Hz, kHz or MHz)")),
    };
    let r = v * scale;
    if !(r.is_finite() && r >= 0.0) {
        return Err(format!("rate `{s}` must be finite and >= 0"));
    }
    Ok(r)
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(f).collect()
}

fn parse_prob(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("{v} is not a probability"));
    }
    Ok(v)
}

fn parse_num<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    let t = s.trim().replace('_', "");
    if let Ok(v) = t.parse() {
        return Ok(v);
    }
    // allow 1e7 style for integers
    let f: f64 = t.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if f.fract() == 0.0 && f >= 0.0 {
        if let Ok(v) = format!("{f:.0}").parse() {
            return Ok(v);
        }
    }
    Err(format!("`{s}` is not a valid integer"))
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        o => Err(format!("`{o}` is not a boolean")),
    }
}

fn ps_str(ps: u64) -> String {
    format!("{ps}ps")
}

fn rate_str(r: f64) -> String {
    format!("{r}cps")
}

/// Every knob of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    /// Target detected photon rate of each detector, counts/s.
    pub rate_d0: f64,
    pub rate_d1: f64,
    pub injection_rate: f64,
    /// None picks half the injection period.
    pub injection_phase: Option<u64>,
    pub detector: DetectorParams,
    pub blank: BlankParams,
    pub clock: ClockParams,
    pub pairing: Pairing,
    /// Stop once this many bits of `target_stream` exist.
    pub n_bits: u64,
    pub target_stream: StreamLabel,
    /// Upper bound on simulated seconds; None derives one from `n_bits`.
    pub max_duration: Option<f64>,
    pub k_max: usize,
    pub markov_z: f64,
    /// Refine the source intensity by pilot runs so the detected rates hit
    /// their targets.
    pub calibrate: bool,
    /// Per-detector detected rates for the rate sweep.
    pub sweep_rates: Vec<f64>,
    pub blank_windows: Vec<u64>,
    /// D1 detected rates for the detector failure scenario.
    pub failure_rates: Vec<f64>,
    pub inject_rates: Vec<f64>,
    /// Rates for the monitoring curves with one or both detectors varied.
    pub monitor_rates: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 1,
            rate_d0: 10e6,
            rate_d1: 10e6,
            injection_rate: 0.0,
            injection_phase: None,
            detector: DetectorParams::default(),
            blank: BlankParams::default(),
            clock: ClockParams::default(),
            pairing: Pairing::Sequential,
            n_bits: 10_000_000,
            target_stream: StreamLabel::C,
            max_duration: None,
            k_max: 6,
            markov_z: 4.0,
            calibrate: true,
            sweep_rates: (1..=9).map(|r| r as f64 * 1e6).collect(),
            blank_windows: (0..8).map(BlankParams::hardware_grid).collect(),
            failure_rates: vec![0.0, 2.5e6, 5e6, 7.5e6, 10e6],
            inject_rates: (0..=7).map(|r| r as f64 * 1e6).collect(),
            monitor_rates: vec![0.0, 2.5e6, 5e6, 7.5e6, 10e6],
        }
    }
}

pub const KEYS: &[&str] = &[
    "seed",
    "rate_d0",
    "rate_d1",
    "injection_rate",
    "injection_phase",
    "dead_time",
    "afterpulse_prob",
    "afterpulse_mean_delay",
    "efficiency",
    "injection_detect_prob",
    "blank_window",
    "blank_mode",
    "clock_period",
    "clock_mode",
    "pairing",
    "n_bits",
    "target_stream",
    "max_duration",
    "k_max",
    "markov_z",
    "calibrate",
    "sweep_rates",
    "blank_windows",
    "failure_rates",
    "inject_rates",
    "monitor_rates",
];

impl SimConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let err = |reason: String| Error::config(key, reason);
        let v = value.trim();
        match key {
            "seed" => self.seed = parse_num(v).map_err(err)?,
            "rate_d0" => self.rate_d0 = parse_rate(v).map_err(err)?,
            "rate_d1" => self.rate_d1 = parse_rate(v).map_err(err)?,
            "injection_rate" => self.injection_rate = parse_rate(v).map_err(err)?,
            "injection_phase" => {
                self.injection_phase = match v {
                    "auto" => None,
                    _ => Some(parse_duration_ps(v).map_err(err)?),
                }
            }
            "dead_time" => self.detector.dead_time = parse_duration_ps(v).map_err(err)?,
            "afterpulse_prob" => self.detector.afterpulse_prob = parse_prob(v).map_err(err)?,
            "afterpulse_mean_delay" => {
                self.detector.afterpulse_mean_delay = parse_duration_ps(v).map_err(err)?
            }
            "efficiency" => self.detector.efficiency = parse_prob(v).map_err(err)?,
            "injection_detect_prob" => {
                self.detector.injection_detect_prob = parse_prob(v).map_err(err)?
            }
            "blank_window" => self.blank.window = parse_duration_ps(v).map_err(err)?,
            "blank_mode" => {
                self.blank.mode = BlankMode::parse(v)
                    .ok_or_else(|| err(format!("`{v}`: use retriggerable or accepted-only")))?
            }
            "clock_period" => self.clock.clock_period = parse_duration_ps(v).map_err(err)?,
            "clock_mode" => {
                self.clock.mode = ClockMode::parse(v)
                    .ok_or_else(|| err(format!("`{v}`: use restartable or free-running")))?
            }
            "pairing" => {
                self.pairing = Pairing::parse(v)
                    .ok_or_else(|| err(format!("`{v}`: use sequential or slot-aligned")))?
            }
            "n_bits" => self.n_bits = parse_num(v).map_err(err)?,
            "target_stream" => {
                self.target_stream = match v {
                    "S" => StreamLabel::S,
                    "Y" => StreamLabel::Y,
                    "T" => StreamLabel::T,
                    "C" => StreamLabel::C,
                    _ => return Err(err(format!("`{v}`: use S, Y, T or C"))),
                }
            }
            "max_duration" => {
                self.max_duration = match v {
                    "auto" => None,
                    _ => Some(parse_duration_ps(v).map_err(err)? as f64 * 1e-12),
                }
            }
            "k_max" => self.k_max = parse_num(v).map_err(err)?,
            "markov_z" => self.markov_z = parse_num(v).map_err(err)?,
            "calibrate" => self.calibrate = parse_bool(v).map_err(err)?,
            "sweep_rates" => self.sweep_rates = parse_list(v, parse_rate).map_err(err)?,
            "blank_windows" => self.blank_windows = parse_list(v, parse_duration_ps).map_err(err)?,
            "failure_rates" => self.failure_rates = parse_list(v, parse_rate).map_err(err)?,
            "inject_rates" => self.inject_rates = parse_list(v, parse_rate).map_err(err)?,
            "monitor_rates" => self.monitor_rates = parse_list(v, parse_rate).map_err(err)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            self.set(k.trim(), v)?;
        }
        self.validate()
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut c = SimConfig::default();
        c.apply_kv(text)?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.clock.validate()?;
        if self.n_bits == 0 {
            return Err(Error::config("n_bits", "must be >= 1"));
        }
        if self.k_max == 0 {
            return Err(Error::config("k_max", "must be >= 1"));
        }
        if !(self.markov_z > 0.0) {
            return Err(Error::config("markov_z", "must be > 0"));
        }
        let ceiling = 1.0 / self.detector.dead_time_secs();
        for (key, r) in [("rate_d0", self.rate_d0), ("rate_d1", self.rate_d1)] {
            if r >= ceiling {
                return Err(Error::config(
                    key,
                    format!("detected rate {r:e} must stay below 1/dead_time = {ceiling:e}"),
                ));
            }
        }
        if let Some(d) = self.max_duration {
            if !(d > 0.0) {
                return Err(Error::config("max_duration", "must be > 0"));
            }
        }
        Ok(())
    }

    /// Canonical text form; `from_kv(to_kv())` reproduces `self`.
    pub fn to_kv(&self) -> String {
        let list_r = |v: &[f64]| v.iter().map(|&r| rate_str(r)).collect::<Vec<_>>().join(",");
        let list_t = |v: &[u64]| v.iter().map(|&t| ps_str(t)).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        kv("rate_d0", rate_str(self.rate_d0));
        kv("rate_d1", rate_str(self.rate_d1));
        kv("injection_rate", rate_str(self.injection_rate));
        kv("injection_phase", self.injection_phase.map_or("auto".into(), ps_str));
        kv("dead_time", ps_str(self.detector.dead_time));
        kv("afterpulse_prob", self.detector.afterpulse_prob.to_string());
        kv("afterpulse_mean_delay", ps_str(self.detector.afterpulse_mean_delay));
        kv("efficiency", self.detector.efficiency.to_string());
        kv("injection_detect_prob", self.detector.injection_detect_prob.to_string());
        kv("blank_window", ps_str(self.blank.window));
        kv("blank_mode", self.blank.mode.name().into());
        kv("clock_period", ps_str(self.clock.clock_period));
        kv("clock_mode", self.clock.mode.name().into());
        kv("pairing", self.pairing.name().into());
        kv("n_bits", self.n_bits.to_string());
        kv("target_stream", self.target_stream.as_str().into());
        kv(
            "max_duration",
            self.max_duration.map_or("auto".into(), |d| ps_str((d * 1e12).round() as u64)),
        );
        kv("k_max", self.k_max.to_string());
        kv("markov_z", self.markov_z.to_string());
        kv("calibrate", self.calibrate.to_string());
        kv("sweep_rates", list_r(&self.sweep_rates));
        kv("blank_windows", list_t(&self.blank_windows));
        kv("failure_rates", list_r(&self.failure_rates));
        kv("inject_rates", list_r(&self.inject_rates));
        kv("monitor_rates", list_r(&self.monitor_rates));
        s
    }
}
