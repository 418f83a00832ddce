//! Edge-detector phase unwrapping and the Q10.6 integer/fraction split.
//!
//! All arithmetic is on 1/64-sample codes. The estimate wraps modulo one
//! symbol (2 samples = 128 codes); the accumulator wraps modulo 2^16 codes.

use crate::timing_estimator::TimingEstimate;

/// Unwrapped per-cycle phase step, in 1/64-sample codes, within [-64, 64].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PhaseIncrement(pub i16);

impl PhaseIncrement {
    pub fn value(self) -> f64 {
        self.0 as f64 / 64.0
    }
}

/// Accumulated delay in Q10.6 two's complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct AccumulatedPhase(pub i16);

impl AccumulatedPhase {
    pub fn code(self) -> i16 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 64.0
    }
}

/// Integer delay `m` (10-bit signed) and fraction `mu = mu_code / 64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DelaySplit {
    pub m: i16,
    pub mu_code: u8,
}

impl DelaySplit {
    pub fn mu(self) -> f64 {
        self.mu_code as f64 / 64.0
    }
}

const WRAP_CODES: i16 = 128;

pub fn unwrap_step(now: TimingEstimate, prev: TimingEstimate) -> PhaseIncrement {
    let d = now.code() as i16 - prev.code() as i16;
    let d = if d > WRAP_CODES / 2 {
        d - WRAP_CODES
    } else if d < -WRAP_CODES / 2 {
        d + WRAP_CODES
    } else {
        d
    };
    PhaseIncrement(d)
}

pub fn accumulate(phi: AccumulatedPhase, delta: PhaseIncrement) -> AccumulatedPhase {
    AccumulatedPhase(phi.0.wrapping_add(delta.0))
}

pub fn split_phase(phi: AccumulatedPhase) -> DelaySplit {
    DelaySplit {
        m: phi.0 >> 6,
        mu_code: (phi.0 & 63) as u8,
    }
}

/// Sign-extends the low 10 bits of a difference of two integer delays.
pub fn wrap_m_delta(d: i32) -> i32 {
    ((d + 512).rem_euclid(1024)) - 512
}

/// Sequential unwrap state: previous estimate and accumulator, both cleared
/// on reset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhaseUnwrapper {
    prev: TimingEstimate,
    phi: AccumulatedPhase,
}

impl PhaseUnwrapper {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(&mut self, tau: TimingEstimate) -> AccumulatedPhase {
        self.phi = accumulate(self.phi, unwrap_step(tau, self.prev));
        self.prev = tau;
        self.phi
    }

    pub fn phase(&self) -> AccumulatedPhase {
        self.phi
    }
}
