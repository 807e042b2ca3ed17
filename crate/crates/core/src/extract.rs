//! Blanking filter and the BSR, T1T2 and combined bit extractors.

use crate::bits::{compress_even, BitStream, StreamLabel};
use crate::detector::{merge_channels_into, Channel, DetectionEvent};
use crate::error::{Error, Result};
use crate::time::{ns_to_ps, ps_to_secs};

/// What restarts the blanking window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlankMode {
    /// Every pulse, accepted or suppressed, restarts the window.
    #[default]
    Retriggerable,
    /// Only accepted pulses restart the window.
    AcceptedOnly,
}

impl BlankMode {
    pub fn name(self) -> &'static str {
        match self {
            BlankMode::Retriggerable => "retriggerable",
            BlankMode::AcceptedOnly => "accepted-only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "retriggerable" => Some(BlankMode::Retriggerable),
            "accepted-only" => Some(BlankMode::AcceptedOnly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlankParams {
    /// Window length in ps; 0 disables blanking.
    pub window: u64,
    pub mode: BlankMode,
}

impl Default for BlankParams {
    fn default() -> Self {
        BlankParams {
            window: ns_to_ps(17.6),
            mode: BlankMode::Retriggerable,
        }
    }
}

impl BlankParams {
    pub fn new(window: u64, mode: BlankMode) -> Self {
        BlankParams { window, mode }
    }

    pub fn off() -> Self {
        BlankParams::new(0, BlankMode::Retriggerable)
    }

    /// Hardware setting `k`: 5.6 ns + k * 4.0 ns.
    pub fn hardware_grid(k: u32) -> u64 {
        ns_to_ps(5.6) + k as u64 * ns_to_ps(4.0)
    }
}

/// An accepted detection and the S bit it produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Accepted {
    pub event: DetectionEvent,
    pub bit: bool,
}

/// Streaming blanking filter.
///
/// A pulse is accepted when it arrives at least `window` after the window
/// anchor. When a suppressed pulse has exactly the timestamp of the last
/// accepted pulse but the other channel (a coincidence, as produced by light
/// hitting both detectors at once), the accepted pulse emits a 1.
///
/// Accepted pulses are held back until a strictly later pulse arrives, so the
/// forced bit is known before release.
#[derive(Debug, Clone)]
pub struct Blanker {
    params: BlankParams,
    anchor: Option<u64>,
    pending: Option<Accepted>,
    seen: u64,
    blanked: u64,
    coincident: u64,
}

impl Blanker {
    pub fn new(params: BlankParams) -> Self {
        Blanker {
            params,
            anchor: None,
            pending: None,
            seen: 0,
            blanked: 0,
            coincident: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, ev: DetectionEvent, out: &mut Vec<Accepted>) {
        let t = ev.time.0;
        self.seen += 1;
        if let Some(p) = self.pending {
            if t > p.event.time.0 {
                out.push(p);
                self.pending = None;
            }
        }
        let open = match self.anchor {
            None => true,
            Some(a) => t >= a + self.params.window,
        };
        if open {
            if let Some(p) = self.pending.take() {
                // only reachable with a zero window and an exact tie
                out.push(p);
            }
            self.pending = Some(Accepted {
                event: ev,
                bit: ev.channel.bit(),
            });
            self.anchor = Some(t);
            return;
        }
        self.blanked += 1;
        if let Some(p) = self.pending.as_mut() {
            if p.event.time.0 == t && p.event.channel != ev.channel {
                p.bit = true;
                self.coincident += 1;
            }
        }
        if self.params.mode == BlankMode::Retriggerable {
            self.anchor = Some(t);
        }
    }

    pub fn feed(&mut self, events: &[DetectionEvent], out: &mut Vec<Accepted>) {
        for &ev in events {
            self.push(ev, out);
        }
    }

    pub fn finish(&mut self, out: &mut Vec<Accepted>) {
        if let Some(p) = self.pending.take() {
            out.push(p);
        }
    }

    /// Pulses seen so far.
    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn blanked(&self) -> u64 {
        self.blanked
    }

    /// Suppressed pulses that coincided exactly with an accepted pulse on the
    /// other channel.
    pub fn coincident(&self) -> u64 {
        self.coincident
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlankedStream {
    pub accepted: Vec<DetectionEvent>,
    /// Indices into `accepted` whose S bit is forced to 1 by a coincidence.
    pub forced_ones: Vec<usize>,
    pub blanked_count: u64,
    /// Seconds of simulated time covered.
    pub duration: f64,
}

/// Blanks an already merged, sorted stream.
pub fn blank(merged: &[DetectionEvent], params: &BlankParams, duration: f64) -> BlankedStream {
    let mut b = Blanker::new(*params);
    let mut acc = Vec::with_capacity(merged.len());
    b.feed(merged, &mut acc);
    b.finish(&mut acc);
    let forced_ones = acc
        .iter()
        .enumerate()
        .filter(|(_, a)| a.bit != a.event.channel.bit())
        .map(|(i, _)| i)
        .collect();
    BlankedStream {
        accepted: acc.iter().map(|a| a.event).collect(),
        forced_ones,
        blanked_count: b.blanked(),
        duration,
    }
}

/// One bit per accepted pulse: D0 gives 0, D1 gives 1 (coincidences give 1).
pub fn extract_bsr(blanked: &BlankedStream) -> BitStream {
    let mut s = BitStream::with_capacity(StreamLabel::S, blanked.accepted.len());
    s.extend(blanked.accepted.iter().map(|e| e.channel == Channel::D1));
    let mut words = s.words().to_vec();
    for &i in &blanked.forced_ones {
        words[i / 64] |= 1u64 << (i % 64);
    }
    let mut s = BitStream::from_words(StreamLabel::S, words, blanked.accepted.len());
    s.production_time = blanked.duration;
    s
}

/// XOR of non-overlapping consecutive pairs; a trailing odd bit is dropped.
pub fn derive_y(s: &BitStream) -> BitStream {
    let n = s.len() / 2;
    let src = s.words();
    let mut words = Vec::with_capacity(n.div_ceil(64));
    for pair in src.chunks(2) {
        let lo = compress_even(pair[0] ^ (pair[0] >> 1));
        let hi = pair.get(1).map_or(0, |&w| compress_even(w ^ (w >> 1)));
        words.push(lo | (hi << 32));
    }
    let mut y = BitStream::from_words(StreamLabel::Y, words, n);
    y.production_time = s.production_time;
    y
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClockMode {
    /// Clock phase resets at the opening pulse of each interval.
    #[default]
    Restartable,
    /// Ticks fall on a fixed global grid.
    FreeRunning,
}

impl ClockMode {
    pub fn name(self) -> &'static str {
        match self {
            ClockMode::Restartable => "restartable",
            ClockMode::FreeRunning => "free-running",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "restartable" => Some(ClockMode::Restartable),
            "free-running" => Some(ClockMode::FreeRunning),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClockParams {
    /// ps
    pub clock_period: u64,
    pub mode: ClockMode,
}

impl Default for ClockParams {
    fn default() -> Self {
        ClockParams {
            clock_period: 1_000,
            mode: ClockMode::Restartable,
        }
    }
}

impl ClockParams {
    pub fn new(clock_period: u64, mode: ClockMode) -> Self {
        ClockParams { clock_period, mode }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clock_period == 0 {
            return Err(Error::param("clock_period", "must be > 0"));
        }
        Ok(())
    }

    #[inline]
    fn ticks(&self, from: u64, to: u64) -> u64 {
        match self.mode {
            ClockMode::Restartable => (to - from) / self.clock_period,
            ClockMode::FreeRunning => to / self.clock_period - from / self.clock_period,
        }
    }
}

/// Streaming T1T2 extractor over accepted pulse times.
///
/// Pulses form triplets (e0, e1, e2), (e2, e3, e4), ...; slot `k` opens at
/// pulse `2k`. The bit is 0 when T1 > T2, 1 when T2 > T1, none on a tie.
#[derive(Debug, Clone)]
pub struct T1T2 {
    clock: ClockParams,
    open: Option<u64>,
    mid: Option<u64>,
    slot: u64,
    ties: u64,
}

impl T1T2 {
    pub fn new(clock: ClockParams) -> Result<Self> {
        clock.validate()?;
        Ok(T1T2 {
            clock,
            open: None,
            mid: None,
            slot: 0,
            ties: 0,
        })
    }

    /// Feeds one pulse time; returns `(slot, bit)` when a slot completes
    /// without a tie.
    #[inline]
    pub fn push(&mut self, t: u64) -> Option<(u64, bool)> {
        let Some(open) = self.open else {
            self.open = Some(t);
            return None;
        };
        let Some(mid) = self.mid else {
            self.mid = Some(t);
            return None;
        };
        let t1 = self.clock.ticks(open, mid);
        let t2 = self.clock.ticks(mid, t);
        let slot = self.slot;
        self.slot += 1;
        self.open = Some(t);
        self.mid = None;
        if t1 == t2 {
            self.ties += 1;
            None
        } else {
            Some((slot, t2 > t1))
        }
    }

    pub fn ties(&self) -> u64 {
        self.ties
    }

    /// Completed slots, tie or not.
    pub fn slots(&self) -> u64 {
        self.slot
    }
}

/// T1T2 bits using the clock mode in `clock`.
pub fn extract_t1t2(accepted: &[DetectionEvent], clock: &ClockParams) -> Result<BitStream> {
    let mut x = T1T2::new(*clock)?;
    let mut t = BitStream::with_capacity(StreamLabel::T, accepted.len() / 2);
    for e in accepted {
        if let Some((_, bit)) = x.push(e.time.0) {
            t.push(bit);
        }
    }
    Ok(t)
}

/// T1T2 bits with a free-running clock of the given period.
pub fn extract_t1t2_freerunning(accepted: &[DetectionEvent], clock: &ClockParams) -> Result<BitStream> {
    extract_t1t2(accepted, &ClockParams::new(clock.clock_period, ClockMode::FreeRunning))
}

/// `c_i = t_i ^ y_i` over the common prefix.
pub fn combine(t: &BitStream, y: &BitStream) -> BitStream {
    t.xor_prefix(y, StreamLabel::C)
}

/// How T bits are matched with Y bits in the combined stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pairing {
    /// i-th T bit with i-th Y bit.
    #[default]
    Sequential,
    /// Each T bit with the Y bit built from the first two pulses of its own
    /// triplet; Y bits of tie slots are dropped.
    SlotAligned,
}

impl Pairing {
    pub fn name(self) -> &'static str {
        match self {
            Pairing::Sequential => "sequential",
            Pairing::SlotAligned => "slot-aligned",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sequential" => Some(Pairing::Sequential),
            "slot-aligned" => Some(Pairing::SlotAligned),
            _ => None,
        }
    }
}

/// Counters accumulated by a [`Pipeline`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PipelineCounts {
    pub detections: u64,
    pub accepted: u64,
    pub blanked: u64,
    pub coincident: u64,
    pub ties: u64,
}

/// Streaming merge → blank → (S → Y, T) → C.
#[derive(Debug, Clone)]
pub struct Pipeline {
    blanker: Blanker,
    t1t2: T1T2,
    pairing: Pairing,
    accepted_buf: Vec<Accepted>,
    merged_buf: Vec<DetectionEvent>,
    pub s: BitStream,
    pub y: BitStream,
    pub t: BitStream,
    pub c: BitStream,
}

impl Pipeline {
    pub fn new(blank: BlankParams, clock: ClockParams, pairing: Pairing) -> Result<Self> {
        Ok(Pipeline {
            blanker: Blanker::new(blank),
            t1t2: T1T2::new(clock)?,
            pairing,
            accepted_buf: Vec::new(),
            merged_buf: Vec::new(),
            s: BitStream::new(StreamLabel::S),
            y: BitStream::new(StreamLabel::Y),
            t: BitStream::new(StreamLabel::T),
            c: BitStream::new(StreamLabel::C),
        })
    }

    /// Feeds one chunk of per-channel detections. Chunks must cover
    /// consecutive time ranges.
    pub fn feed(&mut self, d0: &[DetectionEvent], d1: &[DetectionEvent]) {
        let mut merged = std::mem::take(&mut self.merged_buf);
        merged.clear();
        merge_channels_into(d0, d1, &mut merged);
        self.feed_merged(&merged);
        self.merged_buf = merged;
    }

    /// Feeds already merged detections.
    pub fn feed_merged(&mut self, merged: &[DetectionEvent]) {
        let mut acc = std::mem::take(&mut self.accepted_buf);
        acc.clear();
        self.blanker.feed(merged, &mut acc);
        self.consume(&acc);
        self.accepted_buf = acc;
    }

    pub fn finish(&mut self) {
        let mut acc = Vec::new();
        self.blanker.finish(&mut acc);
        self.consume(&acc);
    }

    fn consume(&mut self, acc: &[Accepted]) {
        for a in acc {
            self.s.push(a.bit);
            let n = self.s.len();
            if n % 2 == 0 {
                self.y.push(self.s.get(n - 2) ^ a.bit);
            }
            if let Some((slot, bit)) = self.t1t2.push(a.event.time.0) {
                self.t.push(bit);
                match self.pairing {
                    Pairing::Sequential => {}
                    Pairing::SlotAligned => {
                        let k = 2 * slot as usize;
                        self.c.push(bit ^ self.s.get(k) ^ self.s.get(k + 1));
                    }
                }
            }
            if self.pairing == Pairing::Sequential {
                while self.c.len() < self.t.len().min(self.y.len()) {
                    let i = self.c.len();
                    self.c.push(self.t.get(i) ^ self.y.get(i));
                }
            }
        }
    }

    pub fn counts(&self) -> PipelineCounts {
        PipelineCounts {
            detections: self.blanker.seen(),
            accepted: self.s.len() as u64,
            blanked: self.blanker.blanked(),
            coincident: self.blanker.coincident(),
            ties: self.t1t2.ties(),
        }
    }

    /// Completes the run and stamps `duration_ps` on every stream.
    pub fn into_output(mut self, duration_ps: u64) -> PipelineOutput {
        self.finish();
        let counts = self.counts();
        let duration = ps_to_secs(duration_ps);
        let mut out = PipelineOutput {
            s: self.s,
            y: self.y,
            t: self.t,
            c: self.c,
            counts,
            duration,
        };
        for b in [&mut out.s, &mut out.y, &mut out.t, &mut out.c] {
            b.production_time = duration;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub s: BitStream,
    pub y: BitStream,
    pub t: BitStream,
    pub c: BitStream,
    pub counts: PipelineCounts,
    /// Simulated seconds.
    pub duration: f64,
}

impl PipelineOutput {
    /// Generated bits per second.
    pub fn f_g(&self) -> f64 {
        rate(self.c.len() as u64, self.duration)
    }

    /// Blanked pulses per second.
    pub fn f_b(&self) -> f64 {
        rate(self.counts.blanked, self.duration)
    }

    /// Accepted pulses per second.
    pub fn f_accepted(&self) -> f64 {
        rate(self.counts.accepted, self.duration)
    }
}

fn rate(n: u64, duration: f64) -> f64 {
    if duration > 0.0 {
        n as f64 / duration
    } else {
        0.0
    }
}

/// Runs the full extraction on complete detector outputs with sequential
/// pairing. `duration` is in seconds.
pub fn run_pipeline(
    d0: &[DetectionEvent],
    d1: &[DetectionEvent],
    blank: &BlankParams,
    clock: &ClockParams,
    duration: f64,
) -> Result<PipelineOutput> {
    run_pipeline_with(d0, d1, blank, clock, Pairing::Sequential, duration)
}

pub fn run_pipeline_with(
    d0: &[DetectionEvent],
    d1: &[DetectionEvent],
    blank: &BlankParams,
    clock: &ClockParams,
    pairing: Pairing,
    duration: f64,
) -> Result<PipelineOutput> {
    for (name, d) in [("d0", d0), ("d1", d1)] {
        if d.windows(2).any(|w| w[0].time > w[1].time) {
            return Err(Error::param(name, "detections must be sorted ascending"));
        }
    }
    let mut p = Pipeline::new(*blank, *clock, pairing)?;
    p.feed(d0, d1);
    Ok(p.into_output(crate::time::secs_to_ps(duration)))
}
