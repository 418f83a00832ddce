//! Third-order (4-tap) Lagrange fractional-delay interpolator in fixed point.
//!
//! Taps sit at relative offsets -1, 0, +1, +2 and the output is taken at
//! `mu` in [0, 1) past the second tap. Coefficients are Q2.14; outputs are
//! rounded half away from zero and saturated to six bits.

use crate::elastic_buffer::INTERP_MEMORY;
use crate::error::{Error, Result};

pub const COEFF_FRAC_BITS: u32 = 14;
pub const COEFF_ONE: i32 = 1 << COEFF_FRAC_BITS;
pub const OUT_MIN: i32 = -32;
pub const OUT_MAX: i32 = 31;

/// Q2.14 tap weights for offsets -1, 0, +1, +2. They always sum to exactly 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterpCoeffs(pub [i32; 4]);

/// Real-valued cubic Lagrange weights at fraction `mu`.
pub fn lagrange_weights(mu: f64) -> [f64; 4] {
    [
        -mu * (mu - 1.0) * (mu - 2.0) / 6.0,
        (mu + 1.0) * (mu - 1.0) * (mu - 2.0) / 2.0,
        -(mu + 1.0) * mu * (mu - 2.0) / 2.0,
        (mu + 1.0) * mu * (mu - 1.0) / 6.0,
    ]
}

pub fn lagrange_basis(mu_code: u8) -> InterpCoeffs {
    debug_assert!(mu_code < 64);
    let w = lagrange_weights(mu_code as f64 / 64.0);
    let mut c = w.map(|v| (v * COEFF_ONE as f64).round() as i32);
    c[1] += COEFF_ONE - c.iter().sum::<i32>();
    InterpCoeffs(c)
}

/// Interpolator producing `out_width` samples from `out_width + 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagrangeInterpolator {
    out_width: usize,
}

impl LagrangeInterpolator {
    pub fn new(out_width: usize) -> Self {
        Self { out_width }
    }

    pub fn out_width(&self) -> usize {
        self.out_width
    }

    fn check(&self, len: usize) -> Result<()> {
        let expected = self.out_width + INTERP_MEMORY;
        if len != expected {
            return Err(Error::WidthMismatch { expected, actual: len });
        }
        Ok(())
    }

    /// Un-rounded Q.14 accumulator values, one per output sample.
    pub fn process_wide<T: Copy + Into<i64>>(&self, window: &[T], mu_code: u8) -> Result<Vec<i64>> {
        self.check(window.len())?;
        let c = lagrange_basis(mu_code).0.map(i64::from);
        Ok(window
            .windows(4)
            .map(|taps| {
                taps.iter()
                    .zip(&c)
                    .map(|(&x, &k)| x.into() * k)
                    .sum()
            })
            .collect())
    }

    pub fn process(&self, window: &[i8], mu_code: u8) -> Result<Vec<i8>> {
        Ok(self
            .process_wide(window, mu_code)?
            .into_iter()
            .map(round_saturate)
            .collect())
    }
}

/// Rounds a Q.14 value half away from zero and clamps to the 6-bit range.
pub fn round_saturate(acc: i64) -> i8 {
    let half = 1i64 << (COEFF_FRAC_BITS - 1);
    let mag = (acc.abs() + half) >> COEFF_FRAC_BITS;
    let v = if acc < 0 { -mag } else { mag };
    v.clamp(OUT_MIN as i64, OUT_MAX as i64) as i8
}

/// The 261 -> 258 interpolation used by the datapath.
pub fn interpolate(window: &[i8], mu_code: u8) -> Result<Vec<i8>> {
    LagrangeInterpolator::new(258).process(window, mu_code)
}
