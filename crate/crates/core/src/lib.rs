//! Bit- and cycle-accurate model of an all-digital feedforward clock-recovery
//! datapath.
//!
//! The receiver processes 256 six-bit samples per clock cycle at two samples
//! per symbol. A spectral timing estimator feeds a phase unwrapper whose
//! accumulated delay is split into an integer part `m`, compensated by an
//! elastic buffer, and a fractional part `mu`, compensated by a cubic Lagrange
//! interpolator. The elastic buffer is written 256 samples per cycle but read
//! 258 (+3 interpolator memory) per cycle, so it can only ever underflow; an
//! underflow pauses the downstream datapath for one cycle.
//!
//! Around the datapath sit a stimulus generator (PRBS, raised-cosine NRZ,
//! clock-offset resampling, noise, ADC) and a BER/SNDR measurement harness.

pub mod elastic_buffer;
pub mod error;
pub mod experiment;
pub mod lagrange;
pub mod metrics;
pub mod phase_unwrap;
pub mod pipeline;
pub mod stimulus;
pub mod timing_estimator;

pub use error::{Error, Result};

/// Samples written into the datapath per clock cycle.
pub const BLOCK_SIZE: usize = 256;
/// Samples per symbol the estimator requires.
pub const SAMPLES_PER_SYMBOL: usize = 2;
