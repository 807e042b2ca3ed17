//! Shared inputs for the benchmarks.

use combo_core::arrival::{gen_poisson_arrivals, merge_with_injection, route_splitter};
use combo_core::detector::detect;
use combo_core::predict::{gen_markov_bits, MarkovBitModel};
use combo_core::{BitStream, Channel, DetectionEvent, DetectorParams};

/// Per-channel detections at the nominal operating point over `duration` s.
pub fn nominal_detections(duration: f64) -> (Vec<DetectionEvent>, Vec<DetectionEvent>) {
    let params = DetectorParams::default();
    let photons = gen_poisson_arrivals(25.6e6, duration, 1).expect("valid rate");
    let (p0, p1) = route_splitter(&photons, 0.5, 1).expect("valid split");
    let (a0, a1) = merge_with_injection(&p0, &p1, &[]);
    (
        detect(&a0, &params, Channel::D0, 1).expect("sorted"),
        detect(&a1, &params, Channel::D1, 1).expect("sorted"),
    )
}

pub fn fair_bits(n: usize, seed: u64) -> BitStream {
    gen_markov_bits(&MarkovBitModel::PERFECT, n, seed).expect("valid model")
}
