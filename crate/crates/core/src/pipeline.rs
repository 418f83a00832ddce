//! The per-cycle clock-recovery datapath.
//!
//! Every call to [`Pipeline::clock_cycle`] advances all blocks exactly once:
//!
//! 1. the timing estimator consumes the incoming block and emits `tau`;
//! 2. the unwrapper accumulates `phi` and splits it into `m` and `mu`;
//! 3. the block that entered `data_delay_cycles` ago is written to the EB;
//! 4. the window the EB read last cycle is interpolated with last cycle's
//!    `mu` (the EB output register and the `mu` delay stage);
//! 5. the EB reads this cycle's window with `m`.
//!
//! A cycle without a window yields no output block and `en = 1`.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::elastic_buffer::{EbConfig, ElasticBuffer, ReadOutcome};
use crate::error::{Error, Result};
use crate::lagrange::LagrangeInterpolator;
use crate::phase_unwrap::{split_phase, PhaseUnwrapper};
use crate::stimulus::SampleBlock;
use crate::timing_estimator::{TimingEstimator, DEFAULT_EPSILON_POWER};
use crate::BLOCK_SIZE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub block_size: usize,
    pub ma_cycles: usize,
    pub data_delay_cycles: usize,
    pub eb: EbConfig,
    pub epsilon_power: f64,
    pub telemetry: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            block_size: BLOCK_SIZE,
            ma_cycles: 16,
            data_delay_cycles: 7,
            eb: EbConfig::default(),
            epsilon_power: DEFAULT_EPSILON_POWER,
            telemetry: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size != BLOCK_SIZE {
            return Err(Error::Config(format!("block_size must be {BLOCK_SIZE}")));
        }
        if self.ma_cycles == 0 {
            return Err(Error::Config("ma_cycles must be positive".into()));
        }
        if self.eb.write_width != self.block_size {
            return Err(Error::Config("EB write width must equal block_size".into()));
        }
        if !(self.epsilon_power >= 0.0) {
            return Err(Error::Config("epsilon_power must be non-negative".into()));
        }
        self.eb.validate()
    }
}

/// Per-cycle telemetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleTrace {
    pub cycle: u64,
    pub tau_code: i8,
    pub phi_code: i16,
    pub m: i16,
    pub mu_code: u8,
    /// 1 when no corrected block was emitted this cycle.
    pub en: bool,
    pub fill: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutput {
    pub block: Option<Vec<i8>>,
    pub trace: CycleTrace,
}

/// Running counters kept regardless of telemetry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PipelineStats {
    pub cycles: u64,
    pub output_blocks: u64,
    /// Cycles on which the EB underflowed (startup excluded).
    pub underflow_cycles: Vec<u64>,
    pub max_fill: usize,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    estimator: TimingEstimator,
    unwrapper: PhaseUnwrapper,
    delay_line: VecDeque<SampleBlock>,
    eb: ElasticBuffer<i8>,
    interp: LagrangeInterpolator,
    eb_out: Option<Vec<i8>>,
    mu_delayed: u8,
    stats: PipelineStats,
}

impl Pipeline {
    /// Builds a pipeline in its reset state.
    pub fn reset(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            estimator: TimingEstimator::new(cfg.ma_cycles, cfg.epsilon_power),
            unwrapper: PhaseUnwrapper::new(),
            delay_line: VecDeque::with_capacity(cfg.data_delay_cycles + 1),
            eb: ElasticBuffer::new(cfg.eb.clone())?,
            interp: LagrangeInterpolator::new(cfg.eb.out_width),
            eb_out: None,
            mu_delayed: 0,
            stats: PipelineStats::default(),
            cfg,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &PipelineStats {
        &self.stats
    }

    pub fn elastic_buffer(&self) -> &ElasticBuffer<i8> {
        &self.eb
    }

    pub fn clock_cycle(&mut self, block: &SampleBlock) -> Result<CycleOutput> {
        let cycle = self.stats.cycles;

        let tau = self.estimator.step(block);
        let phi = self.unwrapper.step(tau);
        let split = split_phase(phi);

        self.delay_line.push_back(block.clone());
        if self.delay_line.len() > self.cfg.data_delay_cycles {
            let delayed = self.delay_line.pop_front().expect("non-empty delay line");
            self.eb.write(&delayed)?;
        }

        let out = match self.eb_out.take() {
            Some(window) => Some(self.interp.process(&window, self.mu_delayed)?),
            None => None,
        };

        match self.eb.read(split.m)? {
            ReadOutcome::Window(w) => self.eb_out = Some(w),
            ReadOutcome::Underflow => self.stats.underflow_cycles.push(cycle),
            ReadOutcome::Starting => {}
        }
        self.mu_delayed = split.mu_code;

        self.stats.cycles += 1;
        self.stats.max_fill = self.stats.max_fill.max(self.eb.fill());
        if out.is_some() {
            self.stats.output_blocks += 1;
        }

        Ok(CycleOutput {
            trace: CycleTrace {
                cycle,
                tau_code: tau.code(),
                phi_code: phi.code(),
                m: split.m,
                mu_code: split.mu_code,
                en: out.is_none(),
                fill: self.eb.fill(),
            },
            block: out,
        })
    }

    /// Clocks every block through, concatenating output samples and (with
    /// telemetry on) collecting one trace record per cycle.
    pub fn run(&mut self, blocks: &[SampleBlock]) -> Result<RunOutput> {
        let mut samples = Vec::with_capacity(blocks.len() * self.cfg.eb.out_width);
        let mut traces = Vec::new();
        for block in blocks {
            let out = self.clock_cycle(block)?;
            if let Some(b) = out.block {
                samples.extend_from_slice(&b);
            }
            if self.cfg.telemetry {
                traces.push(out.trace);
            }
        }
        Ok(RunOutput { samples, traces })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub samples: Vec<i8>,
    pub traces: Vec<CycleTrace>,
}
