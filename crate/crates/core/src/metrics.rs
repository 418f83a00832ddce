//! Symbol decisions, BER counting against the transmitted bits, SNDR, and
//! trace statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::CycleTrace;
use crate::SAMPLES_PER_SYMBOL;

/// Reported `log10(BER)` for runs with no errors.
pub const ERROR_FREE_LOG10_BER: f64 = -7.0;

/// SNDR reported when the fit residual vanishes.
pub const SNDR_CAP_DB: f64 = 60.0;

/// Samples (per parity) examined when choosing the decision phase.
const PARITY_PROBE: usize = 8192;

/// Linear-interpolated percentile of an ascending slice, `p` in [0, 100].
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = v.collect();
    v.sort_by(f64::total_cmp);
    v
}

fn midpoint_threshold(sorted: &[f64]) -> Option<f64> {
    let (p10, p90) = (percentile(sorted, 10.0), percentile(sorted, 90.0));
    (p90 > p10).then_some(0.5 * (p10 + p90))
}

/// Vertical eye opening of one sampling phase: the gap between the 5th
/// percentile of the upper class and the 95th percentile of the lower class.
fn eye_opening(samples: &[f64]) -> Option<f64> {
    let all = sorted(samples.iter().copied());
    let thr = midpoint_threshold(&all)?;
    let split = all.partition_point(|&v| v <= thr);
    let (lower, upper) = all.split_at(split);
    if lower.is_empty() || upper.is_empty() {
        return None;
    }
    Some(percentile(upper, 5.0) - percentile(lower, 95.0))
}

/// Hard decisions at one sample per symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Decisions {
    pub bits: Vec<u8>,
    /// The sample each bit was decided from.
    pub samples: Vec<f64>,
    /// Index of the first decided sample in the input stream (0 or 1).
    pub parity: usize,
    pub threshold: f64,
}

/// Decides OOK symbols from a 2-SPS stream, picking the sampling parity with
/// the wider eye over a window in the middle of the stream.
pub fn decide_symbols(stream: &[f64]) -> Result<Decisions> {
    if stream.len() < 2 * SAMPLES_PER_SYMBOL {
        return Err(Error::EmptyStream);
    }
    let per_parity = stream.len() / SAMPLES_PER_SYMBOL;
    let probe = per_parity.min(PARITY_PROBE);
    let first = (per_parity - probe) / 2;

    let mut best: Option<(f64, usize)> = None;
    for parity in 0..SAMPLES_PER_SYMBOL {
        let probe_samples: Vec<f64> = stream
            .iter()
            .skip(parity + SAMPLES_PER_SYMBOL * first)
            .step_by(SAMPLES_PER_SYMBOL)
            .take(probe)
            .copied()
            .collect();
        if let Some(open) = eye_opening(&probe_samples) {
            if best.is_none_or(|(b, _)| open > b) {
                best = Some((open, parity));
            }
        }
    }
    let (_, parity) = best.ok_or(Error::NoEye)?;

    let samples: Vec<f64> = stream.iter().skip(parity).step_by(SAMPLES_PER_SYMBOL).copied().collect();
    let threshold = midpoint_threshold(&sorted(samples.iter().copied())).ok_or(Error::NoEye)?;
    let bits = samples.iter().map(|&v| u8::from(v > threshold)).collect();
    Ok(Decisions { bits, samples, parity, threshold })
}

/// Convenience wrapper for integer sample streams.
pub fn decide_codes(stream: &[i8]) -> Result<Decisions> {
    let v: Vec<f64> = stream.iter().map(|&c| c as f64).collect();
    decide_symbols(&v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Leading decided symbols excluded from counting.
    pub guard: usize,
    /// Lags searched are `-max_lag..=max_lag`.
    pub max_lag: usize,
    /// Decided bits (after the guard) used to score each lag.
    pub probe: usize,
    pub min_agreement: f64,
    pub min_bits: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            guard: 512,
            max_lag: 2048,
            probe: 4096,
            min_agreement: 0.9,
            min_bits: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerReport {
    pub errors: u64,
    pub symbols_counted: u64,
    pub ber: f64,
    /// `decided[i]` is compared with `reference[i + alignment_lag]`.
    pub alignment_lag: i64,
    /// First decided index included in the count.
    pub first_counted: usize,
    pub agreement: f64,
    pub alignment_failed: bool,
    pub log10_ber_or_floor: f64,
}

impl BerReport {
    pub fn error_free(&self) -> bool {
        self.errors == 0 && !self.alignment_failed
    }
}

/// Index range of `decided` that overlaps `reference` at `lag`.
fn overlap(n_dec: usize, n_ref: usize, lag: i64) -> (usize, usize) {
    let lo = (-lag).max(0) as usize;
    let hi = (n_ref as i64 - lag).clamp(0, n_dec as i64) as usize;
    (lo, hi.max(lo))
}

fn agreement(decided: &[u8], reference: &[u8], lag: i64, from: usize, len: usize) -> (usize, usize) {
    let (lo, hi) = overlap(decided.len(), reference.len(), lag);
    let lo = lo.max(from);
    let hi = hi.min(from + len);
    if hi <= lo {
        return (0, 0);
    }
    let same = (lo..hi)
        .filter(|&i| decided[i] == reference[(i as i64 + lag) as usize])
        .count();
    (same, hi - lo)
}

/// Finds the lag that best matches `decided` to `reference` and counts bit
/// errors over the overlap, skipping the guard. A best agreement below
/// `min_agreement` flags the alignment as failed; the BER is still reported
/// as measured at the best lag.
pub fn align_and_count(decided: &[u8], reference: &[u8], cfg: &AlignConfig) -> Result<BerReport> {
    if decided.len() < cfg.min_bits {
        return Err(Error::TooFewBits { got: decided.len(), needed: cfg.min_bits });
    }
    let max_lag = cfg.max_lag as i64;
    // Lags whose overlap covers less than half the probe are not scored.
    let min_overlap = cfg.probe.min(decided.len().saturating_sub(cfg.guard)).div_ceil(2).max(1);
    let mut best = (0usize, 0usize, 0i64);
    for lag in -max_lag..=max_lag {
        let (same, n) = agreement(decided, reference, lag, cfg.guard, cfg.probe);
        if n >= min_overlap && same * best.1.max(1) > best.0 * n {
            best = (same, n, lag);
        }
    }
    let (probe_same, probe_n, lag) = best;
    if probe_n == 0 {
        return Err(Error::TooFewBits { got: 0, needed: cfg.min_bits });
    }

    let (same, counted) = agreement(decided, reference, lag, cfg.guard, usize::MAX - cfg.guard);
    if counted == 0 {
        return Err(Error::TooFewBits { got: 0, needed: cfg.min_bits });
    }
    let errors = (counted - same) as u64;
    let ber = errors as f64 / counted as f64;
    let agreement = probe_same as f64 / probe_n as f64;
    let (first_counted, _) = overlap(decided.len(), reference.len(), lag);
    Ok(BerReport {
        errors,
        symbols_counted: counted as u64,
        ber,
        alignment_lag: lag,
        first_counted: first_counted.max(cfg.guard),
        agreement,
        alignment_failed: agreement < cfg.min_agreement,
        log10_ber_or_floor: if errors == 0 { ERROR_FREE_LOG10_BER } else { ber.log10() },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SndrReport {
    pub sndr_db: f64,
    pub gain: f64,
    pub offset: f64,
}

/// Fits `y ~ gain * s + offset` by least squares and returns the ratio of
/// fitted signal variance to residual energy, capped at [`SNDR_CAP_DB`].
pub fn compute_sndr(y: &[f64], s: &[u8]) -> Result<SndrReport> {
    if y.len() != s.len() {
        return Err(Error::WidthMismatch { expected: s.len(), actual: y.len() });
    }
    if y.is_empty() {
        return Err(Error::EmptyStream);
    }
    let n = y.len() as f64;
    let mean_s = s.iter().map(|&b| b as f64).sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&yi, &si) in y.iter().zip(s) {
        let ds = si as f64 - mean_s;
        sxx += ds * ds;
        sxy += ds * (yi - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("reference bits are constant"));
    }
    let gain = sxy / sxx;
    let offset = mean_y - gain * mean_s;
    let signal = gain * gain * sxx;
    if !(signal > 0.0) {
        return Err(Error::DegenerateFit("fitted signal power is zero"));
    }
    let residual: f64 = y
        .iter()
        .zip(s)
        .map(|(&yi, &si)| (yi - (gain * si as f64 + offset)).powi(2))
        .sum();
    let sndr_db = if residual <= 0.0 {
        SNDR_CAP_DB
    } else {
        (10.0 * (signal / residual).log10()).min(SNDR_CAP_DB)
    };
    Ok(SndrReport { sndr_db, gain, offset })
}

/// SNDR over the window and lag that `report` counted.
pub fn sndr_for_alignment(decisions: &Decisions, reference: &[u8], report: &BerReport) -> Result<SndrReport> {
    let (lo, hi) = overlap(decisions.samples.len(), reference.len(), report.alignment_lag);
    let lo = lo.max(report.first_counted);
    if hi <= lo {
        return Err(Error::EmptyStream);
    }
    let refs: Vec<u8> = (lo..hi)
        .map(|i| reference[(i as i64 + report.alignment_lag) as usize])
        .collect();
    compute_sndr(&decisions.samples[lo..hi], &refs)
}

/// Pause statistics from a cycle trace. Cycles before the first output are
/// startup, not pauses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauseStats {
    pub pause_count: usize,
    pub pause_cycles: Vec<u64>,
    pub mean_pause_interval: Option<f64>,
}

pub fn pause_stats(trace: &[CycleTrace]) -> PauseStats {
    let Some(first_out) = trace.iter().position(|t| !t.en) else {
        return PauseStats { pause_count: 0, pause_cycles: Vec::new(), mean_pause_interval: None };
    };
    let pause_cycles: Vec<u64> = trace[first_out..].iter().filter(|t| t.en).map(|t| t.cycle).collect();
    let mean_pause_interval = (pause_cycles.len() >= 2).then(|| {
        (pause_cycles[pause_cycles.len() - 1] - pause_cycles[0]) as f64 / (pause_cycles.len() - 1) as f64
    });
    PauseStats { pause_count: pause_cycles.len(), pause_cycles, mean_pause_interval }
}

/// Least-squares slope of the accumulated phase, in samples per input
/// sample. The 16-bit phase code is unwrapped first.
pub fn phase_slope(trace: &[CycleTrace], block_size: usize) -> Option<f64> {
    if trace.len() < 2 {
        return None;
    }
    let mut acc = trace[0].phi_code as i64;
    let mut phi = vec![acc as f64 / 64.0];
    for w in trace.windows(2) {
        acc += w[1].phi_code.wrapping_sub(w[0].phi_code) as i64;
        phi.push(acc as f64 / 64.0);
    }
    let n = phi.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = phi.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (i, &p) in phi.iter().enumerate() {
        let dx = i as f64 - mx;
        sxx += dx * dx;
        sxy += dx * (p - my);
    }
    Some(sxy / sxx / block_size as f64)
}
