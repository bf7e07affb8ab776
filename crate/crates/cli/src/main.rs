//! `wifi-load`: run user-count estimation experiments from the command line.
//!
//! Exit status is 0 on success, 2 for invalid configuration or arguments and
//! 3 when a run fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use wifi_load::harness::{
    bench_timing, emit_csv, emit_measurements, emit_metrics, emit_plot, emit_sweep_csv, load_csv,
    parse_estimators, run_experiment, run_sweep, Estimator, ExperimentConfig, PlotKind, Preset,
};
use wifi_load::{run_schedule, Error, MeasurementMode};

const CONFIG_ERROR: u8 = 2;
const RUNTIME_ERROR: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "wifi-load",
    version,
    about = "WiFi user-count estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the schedule and write the observation windows only.
    Simulate(Common),
    /// Simulate and run the enabled estimators; writes trace, metrics and plots.
    Run(Common),
    /// Time the Kalman and network update steps.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2000)]
        iters: usize,
        /// Number of stations during the timing run.
        #[arg(long)]
        users: Option<u32>,
    },
    /// Run the configured grid over process noise, detector thresholds and seeds.
    Sweep(Common),
    /// Render an SVG from a trace CSV.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "tracking")]
        kind: String,
        /// Output directory; the file is named after the plot kind.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// small-n or large-n; replaces any schedule from the config.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of kf,nn,raw.
    #[arg(long)]
    estimators: Option<String>,
    /// busy-corrected, busy-fraction or collision-share.
    #[arg(long)]
    measurement: Option<String>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).map_err(|e| match e {
                e @ Error::Config { .. } => e,
                other => Error::Config {
                    field: "--config".into(),
                    message: other.to_string(),
                },
            })?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(p) = &self.preset {
            cfg.preset = Some(p.parse::<Preset>()?);
            cfg.schedule = None;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(list) = &self.estimators {
            cfg.estimators = parse_estimators(list)?;
        }
        if let Some(m) = &self.measurement {
            cfg.measurement = m.parse::<MeasurementMode>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(err) if err.is_config() => CONFIG_ERROR,
        _ => RUNTIME_ERROR,
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(c) => simulate(&c.resolve()?),
        Command::Run(c) => run(&c.resolve()?),
        Command::Bench {
            common,
            iters,
            users,
        } => {
            let mut cfg = common.resolve()?;
            if let Some(n) = users {
                cfg.bench_users = n;
                cfg.validate()?;
            }
            bench(&cfg, iters)
        }
        Command::Sweep(c) => sweep(&c.resolve()?),
        Command::Plot { input, kind, out } => plot(&input, &kind, &out),
    }
}

fn simulate(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let stream = run_schedule(&cfg.schedule(), &cfg.model(), cfg.run_options())?;
    let path = cfg.out_dir.join("measurements.csv");
    emit_measurements(&stream, &path)?;
    println!("{} windows -> {}", stream.len(), path.display());
    Ok(())
}

fn run(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let exp = run_experiment(cfg).context("experiment failed")?;
    let out = &cfg.out_dir;
    emit_csv(&exp.trace, &out.join("trace.csv"))?;
    emit_metrics(&exp.metrics, &out.join("metrics.csv"))?;
    std::fs::write(out.join("config.toml"), cfg.to_toml_string())
        .with_context(|| format!("writing {}", out.join("config.toml").display()))?;
    emit_plot(&exp.trace, &out.join("tracking.svg"), PlotKind::Tracking)?;
    if cfg.enabled(Estimator::Nn) {
        emit_plot(&exp.trace, &out.join("loss.svg"), PlotKind::Loss)?;
    }
    if cfg.enabled(Estimator::Kf) || cfg.enabled(Estimator::Nn) {
        emit_plot(&exp.trace, &out.join("timing.svg"), PlotKind::Timing)?;
    }

    println!(
        "{:>4} {:>6} {:>4}  {:>8} {:>6} {:>6} {:>5}",
        "seg", "n", "est", "rmse", "conv", "det", "late"
    );
    for s in &exp.metrics {
        for m in &s.estimators {
            let opt = |v: Option<usize>| v.map_or("-".to_owned(), |x| x.to_string());
            println!(
                "{:>4} {:>6} {:>4}  {:>8.3} {:>6} {:>6} {:>5}",
                s.index,
                s.n_true,
                format!("{:?}", m.estimator).to_lowercase(),
                m.rmse_tail,
                opt(m.convergence_slots),
                opt(m.detection_delay),
                m.late_triggers
            );
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn bench(cfg: &ExperimentConfig, iters: usize) -> anyhow::Result<()> {
    let r = bench_timing(cfg, iters)?;
    println!("users {}  iterations {}", r.users, r.iters);
    for (name, t) in [("kf_step", r.kf), ("nn_step", r.nn)] {
        println!(
            "{name}  mean {:>9.3} us  median {:>9.3} us  min {:>9.3} us  max {:>9.3} us",
            t.mean_us, t.median_us, t.min_us, t.max_us
        );
    }
    let (kf_slot, nn_slot) = r.slot_us();
    println!(
        "observation window {:.1} us (modeled airtime)",
        r.observation_us
    );
    println!("slot total  kf {kf_slot:.1} us  nn {nn_slot:.1} us");
    println!("kf/nn step time ratio {:.3}", r.kf_over_nn());
    Ok(())
}

fn sweep(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let rows = run_sweep(cfg, &cfg.sweep)?;
    let path = cfg.out_dir.join("sweep.csv");
    emit_sweep_csv(&rows, &path)?;
    println!("{} rows -> {}", rows.len(), path.display());
    Ok(())
}

fn plot(input: &Path, kind: &str, out: &Path) -> anyhow::Result<()> {
    let kind: PlotKind = kind.parse()?;
    let trace = load_csv(input)?;
    let name = match kind {
        PlotKind::Tracking => "tracking.svg",
        PlotKind::Loss => "loss.svg",
        PlotKind::Timing => "timing.svg",
    };
    let path = out.join(name);
    emit_plot(&trace, &path, kind)?;
    println!("wrote {}", path.display());
    Ok(())
}
