use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use eitsim::config::{key_reference, Config, GridConfig};
use eitsim::consts::TWO_PI;
use eitsim::counting::{eta_e2e, eta_intrinsic, mu1, snr};
use eitsim::domain::rabi_from_beam;
use eitsim::error::Error;
use eitsim::optimizer::optimize_control;
use eitsim::plot::LinePlot;
use eitsim::spectrum::fft_bandwidth;
use eitsim::sweep::{figure4_suite, linspace, run_sweep, ControlMode, Figure4Settings, SweepAxis, SweepSpec, SweepTable, Variant};
use eitsim::timetag::synth::{hbt_stream, memory_run, HbtSource, MemoryRun, PulseStatistics};
use eitsim::timetag::{arrival_histogram, g2_correlator, parse_tags, serialize_tags, window_counts, TagFormat, TagStream};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

fn after_help() -> String {
    format!(
        "Configuration keys (TOML sections; override with --set section.key=value or \
         EITSIM_SECTION__KEY=value; precedence file < --set < environment):\n\n{}\n\
         Exit codes: 0 ok, 2 configuration or input error, 3 numerical failure, 4 partial sweep failure.",
        key_reference()
    )
}

#[derive(Parser, Debug)]
#[command(name = "eitsim", version, about = "Broadband EIT quantum-memory simulator", after_help = after_help())]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set medium.od=7`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Worker threads for sweeps.
    #[arg(long, default_value_t = 1, global = true)]
    parallel: usize,
    /// Seed for stochastic steps (synthetic tag streams).
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "eitsim-out", global = true)]
    out: PathBuf,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    plot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One storage-and-retrieval run.
    Simulate,
    /// Sweep one parameter.
    Sweep(SweepArgs),
    /// Five-curve detuning comparison (Gaussian, optimal, parasitic-free).
    Fig4(Fig4Args),
    /// Optimize the control pulses at the configured detuning.
    Optimize,
    /// Efficiencies and noise figures from the [counts] section.
    Counts,
    /// Cross-correlation g2(τ) of a two-channel tag stream.
    G2(G2Args),
    /// Arrival-time histogram of a tag stream.
    Hist(HistArgs),
    /// Signal envelope, its bandwidth and the control Rabi frequency.
    Pulse,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AxisArg {
    Delta,
    Od,
    ControlPeak,
    StorageTime,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Full,
    NoParasitic,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Comma-separated axis values (delta in Hz, control_peak in rad/s, storage_time in s).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "range")]
    values: Vec<f64>,
    /// `start:end:n`, n uniformly spaced values.
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
    #[arg(long, value_enum, default_value = "full")]
    variant: VariantArg,
    /// Per-sweep overrides on top of the configuration (custom variant).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Optimize the control pulses at every point.
    #[arg(long)]
    optimal: bool,
}

#[derive(Args, Debug)]
struct Fig4Args {
    /// Detuning points of the Gaussian curves over −2…+0.5 GHz.
    #[arg(long, default_value_t = 61)]
    gaussian_points: usize,
    /// Detuning points of the optimized curves over −2…+0.5 GHz.
    #[arg(long, default_value_t = 11)]
    optimal_points: usize,
    /// Optical depth of the dense parasitic-free curve.
    #[arg(long, default_value_t = 35.0)]
    high_od: f64,
    /// Include the dark-time decay instead of reporting intrinsic efficiencies.
    #[arg(long)]
    with_decay: bool,
    /// Optimize on a reduced time grid of this many steps, then re-evaluate
    /// on the configured grid.
    #[arg(long)]
    optimize_nt: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Synthetic {
    /// Pulsed thermal light split onto two detectors.
    Thermal,
    /// Pulsed coherent light split onto two detectors.
    Coherent,
    /// Single-detector memory run with signal and noise.
    Memory,
}

#[derive(Args, Debug)]
struct TagInput {
    /// Tag file (`channel,timestamp_ps` CSV or TTG1 binary).
    file: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: TagFormat,
    /// Generate a synthetic stream (uses --seed) instead of reading a file.
    #[arg(long, value_enum, conflicts_with = "file")]
    synthetic: Option<Synthetic>,
    /// Number of sync periods of the synthetic stream.
    #[arg(long, default_value_t = 200_000)]
    pulses: u64,
    /// Write the synthetic stream to the output directory as well.
    #[arg(long)]
    emit_tags: bool,
}

#[derive(Args, Debug)]
struct G2Args {
    #[command(flatten)]
    input: TagInput,
    /// Largest |τ|, s.
    #[arg(long, default_value_t = 1.5e-6)]
    tau_max: f64,
    /// Bin width, s.
    #[arg(long, default_value_t = 10e-9)]
    bin: f64,
    /// |τ| of the normalization peaks, s.
    #[arg(long, default_value_t = 600e-9)]
    normalize_at: f64,
}

#[derive(Args, Debug)]
struct HistArgs {
    #[command(flatten)]
    input: TagInput,
    /// Sync period used for folding, s.
    #[arg(long, default_value_t = 600e-9)]
    sync_period: f64,
    /// Bin width, s.
    #[arg(long, default_value_t = 1.3e-9)]
    bin: f64,
    /// Also count events in `t_a,t_b` (s, folded).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    window: Option<Vec<f64>>,
}

/// Outputs written by one command, collected for the manifest.
struct Run {
    out: PathBuf,
    command: &'static str,
    files: Vec<String>,
    timings: Vec<(String, f64)>,
    config: Option<Value>,
    extra: Value,
}

impl Run {
    fn new(out: &Path, command: &'static str) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        Ok(Run {
            out: out.to_path_buf(),
            command,
            files: Vec::new(),
            timings: Vec::new(),
            config: None,
            extra: Value::Null,
        })
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn time<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let v = f();
        self.timings.push((label.to_string(), start.elapsed().as_secs_f64()));
        v
    }

    fn finish(mut self) -> Result<()> {
        let timings: serde_json::Map<String, Value> = self.timings.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let mut files = self.files.clone();
        files.push("manifest.json".into());
        let manifest = json!({
            "tool": "eitsim",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config.take(),
            "outputs": files,
            "timings_s": timings,
            "details": self.extra,
        });
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(self.out.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

fn envelope_csv(t0: f64, dt: f64, values: &[eitsim::C64], header: &str) -> String {
    let mut s = format!("{header}\n");
    for (i, v) in values.iter().enumerate() {
        s.push_str(&format!("{},{},{}\n", t0 + i as f64 * dt, v.re, v.im));
    }
    s
}

fn config_json(cfg: &Config) -> Value {
    serde_json::to_value(cfg).unwrap_or(Value::Null)
}

fn cmd_simulate(cli: &Cli, cfg: &Config) -> Result<u8> {
    let mut run = Run::new(&cli.out, "simulate")?;
    run.config = Some(config_json(cfg));
    let scenario = cfg.scenario()?;
    let result = run.time("solve", || scenario.run())?;
    let summary = json!({
        "eta_total": result.eta_total,
        "eta_storage": result.eta_storage,
        "leakage": result.leakage,
        "delta_hz": scenario.delta / TWO_PI,
        "peak_rabi_rad_s": scenario.peak_rabi,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    run.write("result.json", serde_json::to_string_pretty(&summary)? + "\n")?;
    let e = &result.e_out;
    run.write("e_out.csv", envelope_csv(e.t0(), e.dt(), e.amplitude(), "t_s,re,im"))?;
    if cli.plot {
        let mut p = LinePlot::new("Retrieved field", "t (ns)", "|E_out|² (arb.)");
        p.add(
            "output",
            e.amplitude().iter().enumerate().map(|(i, v)| (e.time(i) * 1e9, v.norm_sqr())).collect(),
        );
        run.write("e_out.svg", p.to_svg())?;
    }
    run.finish()?;
    Ok(0)
}

fn sweep_values(args: &SweepArgs) -> Result<Vec<f64>> {
    if let Some(r) = &args.range {
        let parts: Vec<&str> = r.split(':').collect();
        if parts.len() != 3 {
            bail!(Error::Config {
                key: "--range".into(),
                message: "expected start:end:n".into()
            });
        }
        let bad = |m: String| Error::Config {
            key: "--range".into(),
            message: m,
        };
        let a: f64 = parts[0].parse().map_err(|e| bad(format!("{e}")))?;
        let b: f64 = parts[1].parse().map_err(|e| bad(format!("{e}")))?;
        let n: usize = parts[2].parse().map_err(|e| bad(format!("{e}")))?;
        return Ok(linspace(a, b, n));
    }
    Ok(args.values.clone())
}

fn table_status(tables: &[&SweepTable]) -> u8 {
    let total: usize = tables.iter().map(|t| t.rows.len()).sum();
    let failed: usize = tables.iter().map(|t| t.failures()).sum();
    match failed {
        0 => 0,
        f if f == total => EXIT_NUMERIC,
        _ => EXIT_PARTIAL,
    }
}

fn cmd_sweep(cli: &Cli, cfg: &Config, args: &SweepArgs) -> Result<u8> {
    let mut run = Run::new(&cli.out, "sweep")?;
    let axis = match args.axis {
        AxisArg::Delta => SweepAxis::Delta,
        AxisArg::Od => SweepAxis::Od,
        AxisArg::ControlPeak => SweepAxis::ControlPeak,
        AxisArg::StorageTime => SweepAxis::StorageTime,
    };
    let mut spec = SweepSpec::new(axis, sweep_values(args)?, cfg.clone());
    spec.variant = match (args.variant, args.overrides.is_empty()) {
        (VariantArg::Full, true) => Variant::Full,
        (VariantArg::NoParasitic, true) => Variant::NoParasitic,
        (v, false) => {
            let mut sets = args.overrides.clone();
            if matches!(v, VariantArg::NoParasitic) {
                sets.insert(0, "medium.include_parasitic=false".into());
            }
            Variant::Custom(sets)
        }
    };
    if args.optimal {
        spec.control = ControlMode::Optimal;
    }
    run.config = Some(serde_json::to_value(&spec)?);
    let table = run.time("sweep", || run_sweep(&spec, cli.parallel))?;
    run.write("sweep.csv", table.to_csv())?;
    if cli.plot {
        let mut p = LinePlot::new("Sweep", axis.column(), "η_total");
        p.add("η_total", table.rows.iter().map(|r| (r.axis_value, r.eta_total)).collect());
        run.write("sweep.svg", p.to_svg())?;
    }
    let code = table_status(&[&table]);
    run.extra = json!({ "failures": table.failures() });
    run.finish()?;
    print!("{}", table.to_csv());
    Ok(code)
}

fn cmd_fig4(cli: &Cli, cfg: &Config, args: &Fig4Args) -> Result<u8> {
    let mut run = Run::new(&cli.out, "fig4")?;
    let settings = Figure4Settings {
        gaussian_deltas: linspace(-2.0e9, 0.5e9, args.gaussian_points),
        optimal_deltas: linspace(-2.0e9, 0.5e9, args.optimal_points),
        high_od: args.high_od,
        intrinsic: !args.with_decay,
        optimization_grid: args.optimize_nt.map(|nt| GridConfig { nt, ..cfg.grid.clone() }),
        ..Figure4Settings::default()
    };
    let fig = run.time("fig4", || figure4_suite(cfg, &settings, cli.parallel))?;
    let mut curves = Vec::new();
    for c in &fig.curves {
        let name = format!("curve_{}.csv", c.id);
        run.write(&name, c.table.to_csv())?;
        let peak = c.table.peak();
        curves.push(json!({
            "id": c.id,
            "label": c.label,
            "file": name,
            "peak_eta_total": peak.map(|r| r.eta_total),
            "peak_delta_hz": peak.map(|r| r.axis_value),
            "failures": c.table.failures(),
            "config": serde_json::to_value(&c.spec)?,
        }));
        println!(
            "({}) {:<48} peak η_total = {}",
            c.id,
            c.label,
            peak.map_or("n/a".to_string(), |r| format!("{:.4} at Δ/2π = {:.3} GHz", r.eta_total, r.axis_value / 1e9))
        );
    }
    if cli.plot {
        let mut p = LinePlot::new("Storage and retrieval efficiency", "Δ/2π (GHz)", "η_total");
        for c in &fig.curves {
            p.add(
                &format!("({}) {}", c.id, c.label),
                c.table.rows.iter().map(|r| (r.axis_value / 1e9, r.eta_total)).collect(),
            );
        }
        run.write("fig4.svg", p.to_svg())?;
    }
    run.config = Some(config_json(cfg));
    run.extra = json!({ "settings": serde_json::to_value(&settings)?, "curves": curves });
    let tables: Vec<&SweepTable> = fig.curves.iter().map(|c| &c.table).collect();
    let code = table_status(&tables);
    run.finish()?;
    Ok(code)
}

fn cmd_optimize(cli: &Cli, cfg: &Config) -> Result<u8> {
    let mut run = Run::new(&cli.out, "optimize")?;
    run.config = Some(config_json(cfg));
    let s = cfg.scenario()?;
    let ocfg = cfg.optimizer_config()?;
    let outcome = run.time("optimize", || {
        optimize_control(&s.medium, &s.grid, &s.signal, &s.control, s.delta, &s.timing, &ocfg)
    })?;
    let c = &outcome.control;
    run.write("control.csv", envelope_csv(c.t0(), c.dt(), c.amplitude(), "t_s,re_rabi,im_rabi"))?;
    let mut trace = String::from("iter,eta\n");
    for (i, e) in outcome.trace.iter().enumerate() {
        trace.push_str(&format!("{i},{e}\n"));
    }
    run.write("trace.csv", trace)?;
    if cli.plot {
        let mut p = LinePlot::new("Control pulses", "t (ns)", "|Ω|/2π (GHz)");
        let series = |env: &eitsim::domain::PulseEnvelope| {
            env.amplitude()
                .iter()
                .enumerate()
                .map(|(i, v)| (env.time(i) * 1e9, v.norm() / TWO_PI / 1e9))
                .collect()
        };
        p.add("initial", series(&s.control));
        p.add("optimized", series(c));
        run.write("control.svg", p.to_svg())?;
    }
    let summary = json!({
        "eta_initial": outcome.trace[0],
        "eta_final": outcome.final_efficiency(),
        "termination": format!("{:?}", outcome.termination),
        "gradient_evaluations": outcome.gradient_evaluations,
        "max_peak_rabi_rad_s": ocfg.max_peak_rabi,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    run.extra = summary;
    run.finish()?;
    Ok(0)
}

fn cmd_counts(cli: &Cli, cfg: &Config) -> Result<u8> {
    let counts = cfg.counts_or_err()?;
    let rec = counts.record();
    rec.validate()?;
    let storage_time = counts.storage_time.unwrap_or(cfg.protocol.storage_time);
    let tau = counts.lifetime_tau.unwrap_or(cfg.medium.lifetime_tau);
    let summary = if rec.n_signal == rec.n_noise {
        eprintln!("warning: n_signal equals n_noise; no retrieved signal above the noise floor");
        json!({"eta_e2e": 0.0, "snr": 0.0, "mu1": 0.0, "eta_int_at_storage": 0.0, "eta_int": 0.0})
    } else {
        let (at_t, total) = eta_intrinsic(&rec, storage_time, tau)?;
        json!({
            "eta_e2e": eta_e2e(&rec)?,
            "snr": snr(&rec)?,
            "mu1": mu1(&rec)?,
            "eta_int_at_storage": at_t,
            "eta_int": total,
        })
    };
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    print!("{text}");
    let mut run = Run::new(&cli.out, "counts")?;
    run.config = Some(config_json(cfg));
    run.write("counts.json", text)?;
    run.finish()?;
    Ok(0)
}

fn load_tags(cli: &Cli, input: &TagInput, run: &mut Run) -> Result<TagStream> {
    let stream = match (input.synthetic, &input.file) {
        (Some(kind), _) => {
            let stream = match kind {
                Synthetic::Thermal | Synthetic::Coherent => hbt_stream(
                    &HbtSource {
                        statistics: if matches!(kind, Synthetic::Thermal) {
                            PulseStatistics::Thermal
                        } else {
                            PulseStatistics::Coherent
                        },
                        period_ps: 600_000,
                        mean_per_detector: 0.1,
                        jitter_ps: 500.0,
                        pulses: input.pulses,
                    },
                    cli.seed,
                ),
                Synthetic::Memory => memory_run(
                    &MemoryRun {
                        period_ps: 600_000,
                        pulses: input.pulses,
                        p_signal: 0.02,
                        retrieval_at_ps: 55_000.0,
                        retrieval_width_ps: 2_000.0,
                        p_noise: 0.005,
                        noise_span_ps: (45_000.0, 80_000.0),
                    },
                    cli.seed,
                ),
            };
            if input.emit_tags {
                run.write("tags.csv", serialize_tags(&stream, TagFormat::Csv))?;
            }
            stream
        }
        (None, Some(path)) => {
            let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
            let stream = parse_tags(&bytes, input.format)?;
            if stream.resorted {
                eprintln!("warning: {} was not sorted by timestamp; events were re-sorted", path.display());
            }
            stream
        }
        (None, None) => bail!(Error::Config {
            key: "tag input".into(),
            message: "give a tag file or --synthetic".into()
        }),
    };
    Ok(stream)
}

fn cmd_g2(cli: &Cli, args: &G2Args) -> Result<u8> {
    let mut run = Run::new(&cli.out, "g2")?;
    let stream = load_tags(cli, &args.input, &mut run)?;
    let c = run.time("correlate", || g2_correlator(&stream, args.tau_max, args.bin, args.normalize_at))?;
    run.write("g2.csv", c.to_csv())?;
    if cli.plot {
        let mut p = LinePlot::new("Cross-correlation", "τ (ns)", "g2(τ)");
        p.add("g2", c.tau.iter().zip(&c.g2).map(|(t, g)| (t * 1e9, *g)).collect());
        run.write("g2.svg", p.to_svg())?;
    }
    let summary = json!({ "events": stream.len(), "g2_zero": c.value_at(0.0), "normalization": c.normalization });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    run.extra = summary;
    run.finish()?;
    Ok(0)
}

fn cmd_hist(cli: &Cli, args: &HistArgs) -> Result<u8> {
    let mut run = Run::new(&cli.out, "hist")?;
    let stream = load_tags(cli, &args.input, &mut run)?;
    let h = arrival_histogram(&stream, args.sync_period, args.bin)?;
    run.write("histogram.csv", h.to_csv())?;
    if cli.plot {
        let mut p = LinePlot::new("Arrival times", "t (ns)", "counts");
        p.add("counts", h.centers().iter().zip(&h.counts).map(|(t, c)| (t * 1e9, *c as f64)).collect());
        run.write("histogram.svg", p.to_svg())?;
    }
    let window = match &args.window {
        Some(w) if w.len() == 2 => Some(window_counts(&stream, args.sync_period, (w[0], w[1]))?),
        Some(_) => bail!(Error::Config {
            key: "--window".into(),
            message: "expected t_a,t_b".into()
        }),
        None => None,
    };
    let summary = json!({ "events": stream.len(), "total": h.total(), "window_counts": window });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    run.extra = summary;
    run.finish()?;
    Ok(0)
}

fn cmd_pulse(cli: &Cli, cfg: &Config) -> Result<u8> {
    let mut run = Run::new(&cli.out, "pulse")?;
    run.config = Some(config_json(cfg));
    let signal = cfg.signal.build(0.0)?;
    let intensity = signal.intensity_trace();
    let summary = json!({
        "flat_top_s": cfg.signal.resolved_flat_top()?,
        "intensity_bandwidth_hz": fft_bandwidth(&intensity)?,
        "field_bandwidth_hz": fft_bandwidth(&signal)?,
        "rabi_from_beam_rad_s": rabi_from_beam(&cfg.beam)?,
        "rabi_from_beam_hz": rabi_from_beam(&cfg.beam)? / TWO_PI,
        "control_peak_rad_s": cfg.peak_rabi()?,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    run.write(
        "pulse.csv",
        envelope_csv(signal.t0(), signal.dt(), signal.amplitude(), "t_s,re,im"),
    )?;
    run.extra = summary;
    run.finish()?;
    Ok(0)
}

fn dispatch(cli: &Cli) -> Result<u8> {
    let needs_config = !matches!(cli.command, Command::G2(_) | Command::Hist(_));
    let cfg = if needs_config {
        Config::load(cli.config.as_deref(), &cli.sets)?
    } else {
        Config::default()
    };
    match &cli.command {
        Command::Simulate => cmd_simulate(cli, &cfg),
        Command::Sweep(a) => cmd_sweep(cli, &cfg, a),
        Command::Fig4(a) => cmd_fig4(cli, &cfg, a),
        Command::Optimize => cmd_optimize(cli, &cfg),
        Command::Counts => cmd_counts(cli, &cfg),
        Command::G2(a) => cmd_g2(cli, a),
        Command::Hist(a) => cmd_hist(cli, a),
        Command::Pulse => cmd_pulse(cli, &cfg),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(
            Error::Config { .. }
            | Error::InvalidParameter { .. }
            | Error::ShapeMismatch(_)
            | Error::GridTooCoarse { .. }
            | Error::Parse { .. }
            | Error::MissingChannel(_)
            | Error::Io(_),
        ) => EXIT_CONFIG,
        Some(_) => EXIT_NUMERIC,
        None if err.chain().any(|e| e.is::<std::io::Error>()) => EXIT_CONFIG,
        None => EXIT_NUMERIC,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.parallel == 0 {
        eprintln!("error: --parallel must be at least 1");
        return ExitCode::from(EXIT_CONFIG);
    }
    match dispatch(&cli) {
        Ok(code) => {
            if code == EXIT_PARTIAL {
                eprintln!("warning: some sweep points failed; see the status column");
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
