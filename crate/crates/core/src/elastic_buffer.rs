//! Overclocked elastic buffer.
//!
//! Samples are written `write_width` per cycle and read as a window of
//! `read_width = out_width + 3` per cycle, where `out_width > write_width`.
//! Consecutive windows overlap by the three samples of interpolator memory.
//! Because each active cycle drains at least `out_width - 1` samples, the
//! buffer cannot overflow; it underflows instead, and an underflow simply
//! pauses the reader for one cycle without losing its position.
//!
//! Integer-delay changes move the read window: an `m` decrement repeats one
//! sample (the window advances `out_width - 1`), an increment skips one.
//! The adjustment is applied to the window read in the same cycle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_unwrap::wrap_m_delta;

/// Samples the interpolator needs beyond its output width.
pub const INTERP_MEMORY: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EbConfig {
    pub write_width: usize,
    pub read_width: usize,
    pub out_width: usize,
    pub capacity: usize,
    pub start_fill: usize,
    /// Reserve above `read_width` that `start_fill` must leave for `m` excursions.
    pub m_headroom: usize,
    /// Largest accepted |dm| between consecutive reads.
    pub slew_limit: u32,
}

impl Default for EbConfig {
    fn default() -> Self {
        Self {
            write_width: 256,
            read_width: 261,
            out_width: 258,
            capacity: 1024,
            start_fill: 512,
            m_headroom: 64,
            slew_limit: 2,
        }
    }
}

impl EbConfig {
    /// The 3-in / 4-out illustration geometry.
    pub fn toy() -> Self {
        Self {
            write_width: 3,
            read_width: 7,
            out_width: 4,
            capacity: 12,
            start_fill: 7,
            m_headroom: 0,
            slew_limit: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.read_width != self.out_width + INTERP_MEMORY {
            return fail(format!(
                "read_width {} must equal out_width {} + {INTERP_MEMORY}",
                self.read_width, self.out_width
            ));
        }
        if self.out_width <= self.write_width {
            return fail("out_width must exceed write_width".into());
        }
        if self.start_fill < self.read_width + self.m_headroom {
            return fail("start_fill must cover read_width plus m headroom".into());
        }
        if self.capacity < self.start_fill + self.write_width {
            return fail("capacity must hold start_fill plus one write".into());
        }
        if self.slew_limit == 0 {
            return fail("slew_limit must be positive".into());
        }
        Ok(())
    }
}

/// Result of one read attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReadOutcome<T> {
    /// `read_width` consecutive samples for the interpolator.
    Window(Vec<T>),
    /// Still filling up to `start_fill`.
    Starting,
    /// Not enough samples for a full window; the reader waits a cycle.
    Underflow,
}

impl<T> ReadOutcome<T> {
    /// Active-high pause indicator.
    pub fn en(&self) -> bool {
        !matches!(self, ReadOutcome::Window(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElasticBuffer<T> {
    cfg: EbConfig,
    storage: Vec<T>,
    total_written: u64,
    read_position: u64,
    last_window_start: Option<u64>,
    last_m: i16,
    started: bool,
    paused_last_cycle: bool,
}

impl<T: Copy + Default> ElasticBuffer<T> {
    pub fn new(cfg: EbConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            storage: vec![T::default(); cfg.capacity],
            cfg,
            total_written: 0,
            read_position: 0,
            last_window_start: None,
            last_m: 0,
            started: false,
            paused_last_cycle: false,
        })
    }

    pub fn config(&self) -> &EbConfig {
        &self.cfg
    }

    /// Unread samples: written minus the next nominal read position.
    pub fn fill(&self) -> usize {
        (self.total_written - self.read_position) as usize
    }

    pub fn total_written(&self) -> u64 {
        self.total_written
    }

    pub fn read_position(&self) -> u64 {
        self.read_position
    }

    /// Absolute index of the first sample of the most recent window.
    pub fn last_window_start(&self) -> Option<u64> {
        self.last_window_start
    }

    pub fn started(&self) -> bool {
        self.started
    }

    pub fn paused_last_cycle(&self) -> bool {
        self.paused_last_cycle
    }

    /// Oldest sample a future window may still touch.
    fn oldest_needed(&self) -> u64 {
        self.read_position
            .saturating_sub(self.cfg.slew_limit as u64)
    }

    pub fn write(&mut self, samples: &[T]) -> Result<()> {
        if samples.len() != self.cfg.write_width {
            return Err(Error::WidthMismatch {
                expected: self.cfg.write_width,
                actual: samples.len(),
            });
        }
        let after = self.total_written + samples.len() as u64;
        if after - self.oldest_needed() > self.cfg.capacity as u64 {
            return Err(Error::BufferOverflow {
                incoming: samples.len(),
                fill: self.fill(),
                capacity: self.cfg.capacity,
            });
        }
        let cap = self.cfg.capacity as u64;
        for (i, &s) in samples.iter().enumerate() {
            self.storage[((self.total_written + i as u64) % cap) as usize] = s;
        }
        self.total_written = after;
        Ok(())
    }

    /// Reads one window for integer delay `m` (10-bit signed). Call after
    /// this cycle's write.
    pub fn read(&mut self, m: i16) -> Result<ReadOutcome<T>> {
        if !self.started {
            if self.fill() < self.cfg.start_fill {
                self.paused_last_cycle = true;
                return Ok(ReadOutcome::Starting);
            }
            self.started = true;
            self.last_m = m;
        }

        let dm = wrap_m_delta(m as i32 - self.last_m as i32);
        if dm.unsigned_abs() > self.cfg.slew_limit {
            return Err(Error::SlewExceeded {
                delta: dm,
                limit: self.cfg.slew_limit,
            });
        }
        let start = self.read_position as i64 + dm as i64;
        let oldest_stored = self.total_written.saturating_sub(self.cfg.capacity as u64) as i64;
        if start < oldest_stored {
            return Err(Error::BufferOverflow {
                incoming: 0,
                fill: self.fill(),
                capacity: self.cfg.capacity,
            });
        }
        let start = start as u64;
        if start + self.cfg.read_width as u64 > self.total_written {
            self.paused_last_cycle = true;
            return Ok(ReadOutcome::Underflow);
        }

        let cap = self.cfg.capacity as u64;
        let window = (start..start + self.cfg.read_width as u64)
            .map(|i| self.storage[(i % cap) as usize])
            .collect();
        self.read_position = start + self.cfg.out_width as u64;
        self.last_window_start = Some(start);
        self.last_m = m;
        self.paused_last_cycle = false;
        Ok(ReadOutcome::Window(window))
    }
}
