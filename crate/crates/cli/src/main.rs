use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ffcr::experiment::{cfo_range, run_experiment, sweep_cfo, ExperimentConfig, SWEEP_HEADER};

/// Feedforward clock-recovery datapath simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one clock-offset point.
    Run(RunArgs),
    /// Simulate a list or range of clock-offset points.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Receiver symbols per run.
    #[arg(long)]
    symbols: Option<usize>,
    /// Channel SNR in dB (omit for a noiseless channel).
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    cfo_ppm: f64,
    /// Per-cycle trace CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// JSON result record.
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, allow_negative_numbers = true, requires_all = ["to", "step"], conflicts_with = "list")]
    from: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    to: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// Comma-separated CFO points in ppm.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    list: Option<Vec<f64>>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = common.symbols {
        cfg.stimulus.n_symbols = n;
    }
    if common.snr_db.is_some() {
        cfg.stimulus.snr_db = common.snr_db;
    }
    if let Some(seed) = common.seed {
        cfg.stimulus.seed = seed;
    }
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let mut cfg = load(&args.common)?;
    if args.trace_out.is_some() {
        cfg.trace_out = args.trace_out;
    }
    if args.json_out.is_some() {
        cfg.json_out = args.json_out;
    }
    let result = run_experiment(&cfg, args.cfo_ppm).context("run failed")?;
    println!("{}", serde_json::to_string(&result.record())?);
    Ok(ExitCode::SUCCESS)
}

fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let mut cfg = load(&args.common)?;
    if let Some(list) = args.list {
        cfg.sweep = list;
    } else if let (Some(from), Some(to), Some(step)) = (args.from, args.to, args.step) {
        cfg.sweep = cfo_range(from, to, step)?;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if args.csv_out.is_some() {
        cfg.csv_out = args.csv_out;
    }
    let rows = sweep_cfo(&cfg)?;
    println!("{SWEEP_HEADER}");
    for r in &rows {
        println!("{}", r.csv_line());
    }
    Ok(if rows.iter().any(|r| r.faulted()) { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
