//! End-to-end runs: stimulus, pipeline, measurement, and report files.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{
    align_and_count, decide_codes, pause_stats, phase_slope, sndr_for_alignment, AlignConfig, BerReport,
    PauseStats, SndrReport,
};
use crate::pipeline::{CycleTrace, Pipeline, PipelineConfig};
use crate::stimulus::{generate, StimulusConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub stimulus: StimulusConfig,
    pub pipeline: PipelineConfig,
    pub align: AlignConfig,
    /// CFO points for `sweep_cfo`, in ppm.
    pub sweep: Vec<f64>,
    /// Add the point index to the seed so sweep points see independent data.
    pub seed_per_point: bool,
    pub workers: usize,
    pub trace_out: Option<PathBuf>,
    pub json_out: Option<PathBuf>,
    pub csv_out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            stimulus: StimulusConfig::default(),
            pipeline: PipelineConfig::default(),
            align: AlignConfig::default(),
            sweep: vec![0.0],
            seed_per_point: false,
            workers: 1,
            trace_out: None,
            json_out: None,
            csv_out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(Error::Config("sweep list is empty".into()));
        }
        if self.sweep.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("sweep list holds a non-finite value".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.stimulus.validate()?;
        self.pipeline.validate()
    }

    /// Hex SHA-256 of the settings that determine one run's result.
    pub fn digest(&self, cfo_ppm: f64) -> String {
        let stimulus = StimulusConfig { cfo_ppm, ..self.stimulus.clone() };
        let canon = serde_json::json!({
            "stimulus": stimulus,
            "pipeline": self.pipeline,
            "align": self.align,
        });
        hex::encode(Sha256::digest(canon.to_string().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub cfo_ppm: f64,
    pub ber: BerReport,
    pub sndr: SndrReport,
    pub pauses: PauseStats,
    /// Accumulated-phase slope in samples per input sample.
    pub phase_slope: Option<f64>,
    pub cycles: u64,
    pub output_samples: usize,
    pub max_fill: usize,
    pub trace: Vec<CycleTrace>,
    pub config_digest: String,
}

/// The JSON result record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub cfo_ppm: f64,
    pub ber: f64,
    pub errors: u64,
    pub symbols: u64,
    pub sndr_db: f64,
    pub pause_count: usize,
    pub alignment_failed: bool,
    pub config_digest: String,
}

impl RunResult {
    pub fn record(&self) -> RunRecord {
        RunRecord {
            cfo_ppm: self.cfo_ppm,
            ber: self.ber.ber,
            errors: self.ber.errors,
            symbols: self.ber.symbols_counted,
            sndr_db: self.sndr.sndr_db,
            pause_count: self.pauses.pause_count,
            alignment_failed: self.ber.alignment_failed,
            config_digest: self.config_digest.clone(),
        }
    }
}

/// Runs one CFO point in memory. The trace is always collected here since the
/// pause statistics depend on it.
pub fn simulate(cfg: &ExperimentConfig, cfo_ppm: f64, seed: u64) -> Result<RunResult> {
    let stimulus = StimulusConfig { cfo_ppm, seed, ..cfg.stimulus.clone() };
    let rx = generate(&stimulus)?;
    let mut pipeline = Pipeline::reset(PipelineConfig { telemetry: true, ..cfg.pipeline.clone() })?;
    let out = pipeline.run(&rx.blocks)?;

    let decisions = decide_codes(&out.samples)?;
    let ber = align_and_count(&decisions.bits, &rx.tx_bits, &cfg.align)?;
    let sndr = sndr_for_alignment(&decisions, &rx.tx_bits, &ber)?;
    let stats = pipeline.stats();
    Ok(RunResult {
        cfo_ppm,
        pauses: pause_stats(&out.traces),
        phase_slope: phase_slope(&out.traces, cfg.pipeline.block_size),
        cycles: stats.cycles,
        output_samples: out.samples.len(),
        max_fill: stats.max_fill,
        ber,
        sndr,
        trace: out.traces,
        config_digest: cfg.digest(cfo_ppm),
    })
}

/// Runs one point and writes the trace CSV and JSON record if paths are set.
pub fn run_experiment(cfg: &ExperimentConfig, cfo_ppm: f64) -> Result<RunResult> {
    cfg.validate()?;
    let result = simulate(cfg, cfo_ppm, cfg.stimulus.seed)?;
    if let Some(path) = &cfg.trace_out {
        write_trace_csv(path, &result.trace)?;
    }
    if let Some(path) = &cfg.json_out {
        let mut text = serde_json::to_string_pretty(&result.record()).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text)?;
    }
    Ok(result)
}

pub const TRACE_HEADER: &str = "cycle,tau_code,phi_code,m,mu_code,en,fill";

pub fn write_trace_csv(path: &Path, trace: &[CycleTrace]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRACE_HEADER}")?;
    for t in trace {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            t.cycle, t.tau_code, t.phi_code, t.m, t.mu_code, u8::from(t.en), t.fill
        )?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cfo_ppm: f64,
    pub cfo_mhz: f64,
    pub ber: Option<f64>,
    pub log10_ber: Option<f64>,
    pub sndr_db: Option<f64>,
    pub pause_count: Option<usize>,
    pub mean_pause_interval: Option<f64>,
    /// `ok`, `alignment_failed`, or `fault: <message>`.
    pub status: String,
}

impl SweepRow {
    pub fn faulted(&self) -> bool {
        self.status.starts_with("fault")
    }

    fn from_result(cfo_ppm: f64, symbol_rate: f64, res: Result<RunResult>) -> Self {
        let cfo_mhz = cfo_ppm * symbol_rate * 1e-6 / 1e6;
        match res {
            Ok(r) => Self {
                cfo_ppm,
                cfo_mhz,
                ber: Some(r.ber.ber),
                log10_ber: Some(r.ber.log10_ber_or_floor),
                sndr_db: Some(r.sndr.sndr_db),
                pause_count: Some(r.pauses.pause_count),
                mean_pause_interval: r.pauses.mean_pause_interval,
                status: if r.ber.alignment_failed { "alignment_failed" } else { "ok" }.into(),
            },
            Err(e) => Self {
                cfo_ppm,
                cfo_mhz,
                ber: None,
                log10_ber: None,
                sndr_db: None,
                pause_count: None,
                mean_pause_interval: None,
                status: format!("fault: {e}"),
            },
        }
    }
}

/// Runs every sweep point on its own pipeline, `workers` at a time. A failing
/// point is recorded in its row and the sweep carries on.
pub fn sweep_cfo(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let rows = pool.install(|| {
        cfg.sweep
            .par_iter()
            .enumerate()
            .map(|(i, &cfo)| {
                let seed = if cfg.seed_per_point { cfg.stimulus.seed.wrapping_add(i as u64) } else { cfg.stimulus.seed };
                SweepRow::from_result(cfo, cfg.stimulus.symbol_rate, simulate(cfg, cfo, seed))
            })
            .collect::<Vec<_>>()
    });
    if let Some(path) = &cfg.csv_out {
        write_sweep_csv(path, &rows)?;
    }
    Ok(rows)
}

pub const SWEEP_HEADER: &str = "cfo_ppm,cfo_mhz,ber,log10_ber,sndr_db,pause_count,mean_pause_interval,status";

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

impl SweepRow {
    /// One CSV line in [`SWEEP_HEADER`] order, without the newline.
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.cfo_ppm,
            self.cfo_mhz,
            opt(&self.ber),
            opt(&self.log10_ber),
            opt(&self.sndr_db),
            opt(&self.pause_count),
            opt(&self.mean_pause_interval),
            self.status.replace([',', '\n'], ";")
        )
    }
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    w.flush()?;
    Ok(())
}

/// `from..=to` in `step` increments, robust to floating-point accumulation.
pub fn cfo_range(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(to >= from) {
        return Err(Error::Config("sweep range needs step > 0 and to >= from".into()));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| from + i as f64 * step).collect())
}
