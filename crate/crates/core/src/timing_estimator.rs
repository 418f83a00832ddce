//! Block-wise spectral timing estimator for signals at two samples per symbol.
//!
//! Each 256-sample block is transformed and the bins that lie one symbol rate
//! (half the transform length) apart are correlated. The resulting phasor
//! rotates by pi per sample of delay. Sixteen consecutive phasors are
//! averaged before the angle is taken and quantized to a 7-bit code.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::stimulus::SampleBlock;
use crate::BLOCK_SIZE;

/// Symbol-rate spectral correlation of one block.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpectralCorrelation(pub Complex64);

impl SpectralCorrelation {
    pub fn zero() -> Self {
        Self(Complex64::new(0.0, 0.0))
    }
}

/// Quantized timing phase, `code / 64` receiver sample periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct TimingEstimate {
    code: i8,
}

impl TimingEstimate {
    pub const FRAC_BITS: u32 = 6;
    pub const MIN_CODE: i8 = -64;
    pub const MAX_CODE: i8 = 63;

    /// Panics if `code` is outside the 7-bit range.
    pub fn from_code(code: i8) -> Self {
        assert!(
            (Self::MIN_CODE..=Self::MAX_CODE).contains(&code),
            "timing code {code} outside 7 bits"
        );
        Self { code }
    }

    pub fn code(self) -> i8 {
        self.code
    }

    pub fn value(self) -> f64 {
        self.code as f64 / 64.0
    }

    /// Rounds `tau` (sample periods) to the nearest 1/64, folding +1 onto -1.
    pub fn quantize(tau: f64) -> Self {
        let code = (tau * 64.0).round() as i32;
        let code = (code + 64).rem_euclid(128) - 64;
        Self { code: code as i8 }
    }
}

/// Default hold-last threshold on |C|, relative to the largest correlation a
/// full-scale block can produce.
pub const DEFAULT_EPSILON_POWER: f64 =
    1e-12 * (BLOCK_SIZE as f64) * (BLOCK_SIZE as f64) * 32.0 * 32.0;

/// Computes `C = sum_{k < N/2} conj(X[k]) * X[k + N/2]`.
///
/// Summing only the lower half of the spectrum is essential: for a real block
/// the full circular sum is the real number `2 Re(C)` and carries no timing.
pub struct SpectralCorrelator {
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl SpectralCorrelator {
    pub fn new() -> Self {
        let fft = FftPlanner::new().plan_fft_forward(BLOCK_SIZE);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        Self {
            fft,
            buf: vec![Complex64::default(); BLOCK_SIZE],
            scratch,
        }
    }

    pub fn correlate(&mut self, block: &SampleBlock) -> SpectralCorrelation {
        for (dst, &s) in self.buf.iter_mut().zip(block.iter()) {
            *dst = Complex64::new(s as f64, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let half = BLOCK_SIZE / 2;
        let c = (0..half)
            .map(|k| self.buf[k].conj() * self.buf[k + half])
            .sum();
        SpectralCorrelation(c)
    }
}

impl Default for SpectralCorrelator {
    fn default() -> Self {
        Self::new()
    }
}

/// One-shot convenience wrapper around [`SpectralCorrelator`].
pub fn spectral_correlation(block: &SampleBlock) -> SpectralCorrelation {
    SpectralCorrelator::new().correlate(block)
}

/// Boxcar moving average over the last `len` complex correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct MaState {
    ring: Vec<Complex64>,
    head: usize,
    sum: Complex64,
}

impl MaState {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "moving average needs at least one tap");
        Self {
            ring: vec![Complex64::default(); len],
            head: 0,
            sum: Complex64::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn sum(&self) -> Complex64 {
        self.sum
    }

    pub fn contents(&self) -> &[Complex64] {
        &self.ring
    }

    /// Pushes `c` and returns the mean of the window that now includes it.
    pub fn update(&mut self, c: SpectralCorrelation) -> SpectralCorrelation {
        self.ring[self.head] = c.0;
        self.head = (self.head + 1) % self.ring.len();
        // Re-summed every cycle so the sum is always exactly the ring's.
        self.sum = self.ring.iter().sum();
        SpectralCorrelation(self.sum / self.ring.len() as f64)
    }
}

/// Converts a smoothed correlation into a timing estimate. Degenerate
/// (near-zero) correlations hold the previous estimate.
pub fn estimate_tau(c: SpectralCorrelation, prev: TimingEstimate, epsilon_power: f64) -> TimingEstimate {
    if !(c.0.norm() >= epsilon_power) || !c.0.is_finite() {
        return prev;
    }
    TimingEstimate::quantize(c.0.arg() / PI)
}

/// Correlator, moving average and angle quantizer in one per-cycle unit.
pub struct TimingEstimator {
    correlator: SpectralCorrelator,
    ma: MaState,
    last: TimingEstimate,
    epsilon_power: f64,
}

impl TimingEstimator {
    pub fn new(ma_cycles: usize, epsilon_power: f64) -> Self {
        Self {
            correlator: SpectralCorrelator::new(),
            ma: MaState::new(ma_cycles),
            last: TimingEstimate::default(),
            epsilon_power,
        }
    }

    pub fn step(&mut self, block: &SampleBlock) -> TimingEstimate {
        let c = self.correlator.correlate(block);
        let smoothed = self.ma.update(c);
        self.last = estimate_tau(smoothed, self.last, self.epsilon_power);
        self.last
    }

    pub fn ma(&self) -> &MaState {
        &self.ma
    }

    pub fn last(&self) -> TimingEstimate {
        self.last
    }
}
