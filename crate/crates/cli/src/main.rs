use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use combo_core::config::{parse_duration_ps, parse_rate, SimConfig};
use combo_core::harness::{self, Monitoring, PointReport, Sweep, TraceOptions};
use combo_core::predict::{
    predict_deadtime_autocorr, predict_f0, predict_net_autocorr, propagate_pairxor, propagate_xor,
    required_sample_size, DeadTimeModel, MarkovBitModel,
};
use combo_core::sts::{export_bits, import_bits, run_suite, BitFormat, StsParams};
use combo_core::stats::{metrics, METRICS_CSV_HEADER};
use combo_core::{BitStream, StreamLabel};

const FULL_BITS: u64 = 1_000_000_000;

#[derive(Parser, Debug)]
#[command(name = "combo", version, about = "Spatio-temporal photonic random bit generator simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Global {
    /// Key-value config file; a previous run's manifest works too.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Bits of the target stream per point.
    #[arg(long, global = true)]
    bits: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for scenario points.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Full-scale statistics: 10^9 bits per point.
    #[arg(long, global = true)]
    full: bool,
    /// Dump raw arrival and detection traces for the first DURATION of
    /// every point (e.g. 10us).
    #[arg(long, global = true, value_name = "DURATION")]
    trace: Option<String>,
    /// Override one config key, e.g. --set blank_window=30ns. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Report,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Bits {
    Ascii,
    Packed,
}

impl From<Bits> for BitFormat {
    fn from(b: Bits) -> Self {
        match b {
            Bits::Ascii => BitFormat::Ascii,
            Bits::Packed => BitFormat::Packed,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Stream {
    S,
    Y,
    T,
    C,
}

impl Stream {
    fn pick(self, out: &combo_core::PipelineOutput) -> &BitStream {
        match self {
            Stream::S => &out.s,
            Stream::Y => &out.y,
            Stream::T => &out.t,
            Stream::C => &out.c,
        }
    }

    fn label(self) -> StreamLabel {
        match self {
            Stream::S => StreamLabel::S,
            Stream::Y => StreamLabel::Y,
            Stream::T => StreamLabel::T,
            Stream::C => StreamLabel::C,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Nominal operating point with full reports.
    Simulate,
    /// Lag-1 autocorrelation of S against per-detector rate.
    SweepRate,
    /// Metrics against blanking window.
    SweepBlank,
    /// D1 rate reduced towards zero.
    ScenarioFailure,
    /// Periodic injection into both detectors.
    ScenarioInject,
    /// f_G and f_B for the failure and attack scenarios, with alarms.
    Monitor,
    /// Analytic predictions.
    Predict(PredictArgs),
    /// Bias and autocorrelation of a bit file.
    Stats(FileArgs),
    /// Statistical test suite on a bit file or a fresh simulated stream.
    Test(TestArgs),
    /// Simulate the nominal point and write one stream as a bit file.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Afterpulse probability.
    #[arg(long)]
    pa: Option<f64>,
    #[arg(long, value_name = "DURATION")]
    dead_time: Option<String>,
    /// Detected rate for the dead-time autocorrelation.
    #[arg(long)]
    rate: Option<String>,
    /// Markov input (b, a) for pair-XOR propagation and sample size.
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    /// Second Markov input for XOR propagation.
    #[arg(long, allow_hyphen_values = true)]
    b2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a2: Option<f64>,
    #[arg(long, default_value_t = combo_core::predict::DEFAULT_Z)]
    z: f64,
}

#[derive(Args, Debug)]
struct FileArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Bits::Ascii)]
    bit_format: Bits,
    #[arg(long, default_value_t = 6)]
    k_max: usize,
}

#[derive(Args, Debug)]
struct TestArgs {
    /// Bit file; when absent the nominal C stream is simulated.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Bits::Ascii)]
    bit_format: Bits,
    #[arg(long, default_value_t = 1_000_000)]
    seq_len: usize,
    /// Sequences to simulate when no input is given.
    #[arg(long, default_value_t = 100)]
    sequences: usize,
    #[arg(long, default_value_t = 128)]
    block_len: usize,
    #[arg(long, default_value_t = 16)]
    serial_m: u32,
    #[arg(long, default_value_t = 10)]
    apen_m: u32,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long, value_enum, default_value_t = Stream::C)]
    stream: Stream,
    #[arg(long, value_enum, default_value_t = Bits::Ascii)]
    bit_format: Bits,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn command_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::Simulate => "simulate",
        Cmd::SweepRate => "sweep-rate",
        Cmd::SweepBlank => "sweep-blank",
        Cmd::ScenarioFailure => "scenario-failure",
        Cmd::ScenarioInject => "scenario-inject",
        Cmd::Monitor => "monitor",
        Cmd::Predict(_) => "predict",
        Cmd::Stats(_) => "stats",
        Cmd::Test(_) => "test",
        Cmd::Export(_) => "export",
    }
}

fn resolve_config(g: &Global) -> Result<SimConfig> {
    let mut cfg = match &g.config {
        Some(p) => SimConfig::from_file(p)?,
        None => SimConfig::default(),
    };
    for s in &g.sets {
        let (k, v) = s
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got `{s}`"))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if g.full {
        cfg.n_bits = FULL_BITS;
    }
    if let Some(n) = g.bits {
        cfg.n_bits = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The resolved config plus comment lines; loadable with `--config`.
fn manifest(cfg: &SimConfig, cmd: &str, extra: &[(&str, String)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# combo {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# command = {cmd}");
    for (k, v) in extra {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s.push_str(&cfg.to_kv());
    s
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    harness::write_file(dir, name, text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let name = command_name(&cli.cmd);
    if let Cmd::Predict(p) = &cli.cmd {
        print!("{}", predict(p)?);
        return Ok(());
    }
    let cfg = resolve_config(g)?;
    std::fs::create_dir_all(&g.out).with_context(|| format!("creating {}", g.out.display()))?;
    let trace = match &g.trace {
        Some(d) => {
            let until = parse_duration_ps(d).map_err(|e| anyhow::anyhow!("--trace: {e}"))?;
            let dir = g.out.join("trace");
            std::fs::create_dir_all(&dir)?;
            Some(TraceOptions { dir, until })
        }
        None => None,
    };
    let trace = trace.as_ref();
    let mut extra: Vec<(&str, String)> = vec![("jobs", g.jobs.to_string())];
    if let Some(t) = &g.trace {
        extra.push(("trace", t.clone()));
    }

    match &cli.cmd {
        Cmd::Simulate => {
            let p = harness::run_nominal(&cfg, trace)?;
            write_points(&g.out, "simulate", "rate_d0_cps", std::slice::from_ref(&p))?;
            write(&g.out, "report.txt", &harness::point_report_text(&p))?;
            emit(g.format, "rate_d0_cps", std::slice::from_ref(&p));
        }
        Cmd::SweepRate => {
            let sw = harness::sweep_rate(&cfg, g.jobs, trace)?;
            write_sweep(&g.out, &sw)?;
            let text = crossover_text(&sw);
            write(&g.out, "crossover.txt", &text)?;
            emit(g.format, sw.x_label, &sw.points);
            eprint!("{text}");
        }
        Cmd::SweepBlank => sweep_cmd(g, harness::sweep_blank(&cfg, g.jobs, trace)?)?,
        Cmd::ScenarioFailure => sweep_cmd(g, harness::scenario_failure(&cfg, g.jobs, trace)?)?,
        Cmd::ScenarioInject => sweep_cmd(g, harness::scenario_injection(&cfg, g.jobs, trace)?)?,
        Cmd::Monitor => {
            let m = harness::scenario_monitoring(&cfg, g.jobs, trace)?;
            let text = monitor_csv(&m);
            for (file, body) in &text {
                write(&g.out, file, body)?;
            }
            write(&g.out, "monitor-nominal.txt", &harness::point_report_text(&m.nominal))?;
            if g.format == Format::Csv {
                print!("{}", text[0].1);
            } else {
                print!("{}", monitor_summary(&m));
            }
        }
        Cmd::Stats(a) => {
            extra.push(("input", a.input.display().to_string()));
            let bits = import_bits(&a.input, a.bit_format.into())?;
            let m = metrics(&bits, a.k_max)?;
            let csv = format!("{METRICS_CSV_HEADER}\n{}", m.csv_rows());
            write(&g.out, "stats.csv", &csv)?;
            match g.format {
                Format::Csv => print!("{csv}"),
                Format::Report => print!("{}", m.to_kv("input")),
            }
        }
        Cmd::Test(a) => {
            let bits = match &a.input {
                Some(p) => {
                    extra.push(("input", p.display().to_string()));
                    import_bits(p, a.bit_format.into())?
                }
                None => {
                    extra.push(("sequences", a.sequences.to_string()));
                    let mut c = cfg.clone();
                    c.target_stream = StreamLabel::C;
                    c.n_bits = (a.seq_len * a.sequences) as u64;
                    let (_, _, out) = harness::simulate_streams(&c, harness::point_seed(c.seed, 0), trace)?;
                    out.c
                }
            };
            let params = StsParams {
                seq_len: a.seq_len,
                block_len: a.block_len,
                serial_m: a.serial_m,
                apen_m: a.apen_m,
                ..StsParams::default()
            };
            extra.push(("seq_len", a.seq_len.to_string()));
            extra.push(("block_len", a.block_len.to_string()));
            extra.push(("serial_m", a.serial_m.to_string()));
            extra.push(("apen_m", a.apen_m.to_string()));
            let res = run_suite(&bits, &params)?;
            let csv = res.to_csv();
            write(&g.out, "sts.csv", &csv)?;
            match g.format {
                Format::Csv => print!("{csv}"),
                Format::Report => {
                    for r in &res.rows {
                        println!(
                            "{:<28} {:>4}/{:<4} min {:>3}  uniformity {:.4}  {}",
                            r.test.name(),
                            r.pass_count,
                            r.sequences,
                            r.threshold.floor(),
                            r.uniformity_p,
                            if r.pass() { "PASS" } else { "FAIL" }
                        );
                    }
                }
            }
            if !res.all_pass() {
                write(&g.out, "manifest.txt", &manifest(&cfg, name, &extra))?;
                bail!("at least one test is below its pass threshold");
            }
        }
        Cmd::Export(a) => {
            let mut c = cfg.clone();
            c.target_stream = a.stream.label();
            let (_, _, out) = harness::simulate_streams(&c, harness::point_seed(c.seed, 0), trace)?;
            let bits = a.stream.pick(&out).prefix(c.n_bits as usize);
            let ext = match a.bit_format {
                Bits::Ascii => "txt",
                Bits::Packed => "bin",
            };
            let path = g.out.join(format!("{}.{ext}", a.stream.label()));
            export_bits(&bits, a.bit_format.into(), &path)?;
            extra.push(("stream", a.stream.label().to_string()));
            extra.push(("bit_format", BitFormat::from(a.bit_format).name().to_string()));
            println!("{} bits -> {}", bits.len(), path.display());
        }
        Cmd::Predict(_) => unreachable!(),
    }
    write(&g.out, "manifest.txt", &manifest(&cfg, name, &extra))?;
    Ok(())
}

fn write_points(dir: &Path, stem: &str, x_label: &str, pts: &[PointReport]) -> Result<()> {
    write(dir, &format!("{stem}.csv"), &harness::points_csv(x_label, pts))?;
    write(dir, &format!("{stem}-metrics.csv"), &harness::metrics_csv(pts))?;
    write(dir, &format!("{stem}-cross.csv"), &harness::cross_csv(pts))
}

fn write_sweep(dir: &Path, sw: &Sweep) -> Result<()> {
    write_points(dir, sw.name, sw.x_label, &sw.points)
}

fn sweep_cmd(g: &Global, sw: Sweep) -> Result<()> {
    write_sweep(&g.out, &sw)?;
    emit(g.format, sw.x_label, &sw.points);
    Ok(())
}

fn emit(format: Format, x_label: &str, pts: &[PointReport]) {
    match format {
        Format::Csv => print!("{}", harness::points_csv(x_label, pts)),
        Format::Report => {
            for p in pts {
                println!("[{x_label} = {}]", p.x);
                print!("{}", harness::point_report_text(p));
            }
        }
    }
}

fn crossover_text(sw: &Sweep) -> String {
    match sw.crossover(StreamLabel::S) {
        Some(c) => format!(
            "crossover.per_detector_cps = {:.6e}\ncrossover.combined_cps = {:.6e}\ncrossover.sign_changes = {}\n",
            c.x,
            2.0 * c.x,
            c.sign_changes
        ),
        None => "crossover = none (grid does not bracket a sign change)\n".into(),
    }
}

fn monitor_csv(m: &Monitoring) -> Vec<(String, String)> {
    m.curves()
        .iter()
        .map(|sw| {
            let mut s = format!("{},f_G,f_B,nominal_f_G,nominal_f_B,alarm\n", sw.x_label);
            for p in &sw.points {
                let _ = writeln!(
                    s,
                    "{},{:.6e},{:.6e},{:.6e},{:.6e},{}",
                    p.x,
                    p.f_g,
                    p.f_b,
                    m.nominal.f_g,
                    m.nominal.f_b,
                    m.alarm(p).name()
                );
            }
            (format!("{}.csv", sw.name), s)
        })
        .collect()
}

fn monitor_summary(m: &Monitoring) -> String {
    let mut s = format!("nominal f_G = {:.4e}  f_B = {:.4e}\n", m.nominal.f_g, m.nominal.f_b);
    for sw in m.curves() {
        let _ = writeln!(s, "[{}]", sw.name);
        for p in &sw.points {
            let _ = writeln!(
                s,
                "  {} = {:<10} f_G = {:.4e}  f_B = {:.4e}  alarm = {}",
                sw.x_label,
                p.x,
                p.f_g,
                p.f_b,
                m.alarm(p).name()
            );
        }
    }
    s
}

fn predict(p: &PredictArgs) -> Result<String> {
    let mut s = String::new();
    let tau_d = p
        .dead_time
        .as_deref()
        .map(|d| parse_duration_ps(d).map_err(|e| anyhow::anyhow!("--dead-time: {e}")))
        .transpose()?
        .map(|ps| ps as f64);
    let rate = p
        .rate
        .as_deref()
        .map(|r| parse_rate(r).map_err(|e| anyhow::anyhow!("--rate: {e}")))
        .transpose()?;
    if let (Some(pa), Some(td)) = (p.pa, tau_d) {
        let f0 = predict_f0(pa, td)?;
        let _ = writeln!(s, "f0_cps = {f0:.6e}");
        let _ = writeln!(s, "f0_Mcps = {:.4}", f0 / 1e6);
    }
    if let (Some(td), Some(r)) = (tau_d, rate) {
        let tau = 1e12 / r;
        let d = predict_deadtime_autocorr(td, tau)?;
        let _ = writeln!(s, "deadtime_a1 = {:.6e}\ndeadtime_a1_approx = {:.6e}", d.exact, d.approx);
        if let Some(pa) = p.pa {
            let net = predict_net_autocorr(&DeadTimeModel { tau_d: td, tau, p_a: pa })?;
            let _ = writeln!(s, "net_a1 = {net:.6e}");
        }
    }
    if let (Some(b), Some(a)) = (p.b, p.a) {
        let m = MarkovBitModel::new(b, a)?;
        s.push_str(&propagate_pairxor(&m)?.to_kv("pairxor"));
        match required_sample_size(&m, p.z) {
            Ok(n) => {
                let _ = writeln!(s, "required_bits = {n:.6e}");
            }
            Err(e) => {
                let _ = writeln!(s, "required_bits = inf ({e})");
            }
        }
        if let (Some(b2), Some(a2)) = (p.b2, p.a2) {
            let m2 = MarkovBitModel::new(b2, a2)?;
            s.push_str(&propagate_xor(&m, &m2)?.to_kv("xor"));
        }
    }
    if s.is_empty() {
        bail!("nothing to predict: give --pa with --dead-time, --dead-time with --rate, or --b with --a");
    }
    Ok(s)
}
