//! Received-waveform synthesis.
//!
//! PRBS bits drive a raised-cosine shaped NRZ waveform on a dense time grid.
//! The receiver clock offset (and optional sampling jitter) is emulated by
//! re-evaluating that waveform at the detuned receiver instants with an
//! 8-tap Lagrange interpolator, after which AWGN is added, the stream is
//! AC-coupled and a 6-bit ADC with static gain chops it into 256-sample
//! blocks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::{BLOCK_SIZE, SAMPLES_PER_SYMBOL};

/// One-sided raised-cosine truncation, in symbols.
pub const PULSE_SPAN_SYMBOLS: usize = 16;

/// Taps of the resampling interpolator on the dense grid.
const RESAMPLER_TAPS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StimulusConfig {
    /// Symbol rate in Hz. Also the reference for converting ppm to Hz.
    pub symbol_rate: f64,
    pub samples_per_symbol: usize,
    /// Receiver sampling clock offset; positive means the receiver is fast.
    pub cfo_ppm: f64,
    /// `None` disables the noise source.
    pub snr_db: Option<f64>,
    /// Receiver-side symbol periods captured (the stream holds twice as many samples).
    pub n_symbols: usize,
    pub seed: u64,
    pub rolloff: f64,
    /// Dense-grid points per receiver sample period.
    pub dense_oversampling: usize,
    pub adc_bits: u32,
    /// RMS sampling jitter in unit intervals (symbol periods).
    pub jitter_rms: f64,
    /// Sampling phase in receiver sample periods, within [0, 2).
    pub initial_phase: f64,
    /// Optional one-shot shift of the sampling instants.
    pub phase_step: Option<PhaseStep>,
}

/// From receiver sample `at_sample` on, every sampling instant moves by
/// `samples` receiver sample periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseStep {
    pub at_sample: usize,
    pub samples: f64,
}

impl Default for StimulusConfig {
    fn default() -> Self {
        Self {
            symbol_rate: 30e9,
            samples_per_symbol: SAMPLES_PER_SYMBOL,
            cfo_ppm: 0.0,
            snr_db: None,
            n_symbols: 1 << 18,
            seed: 1,
            rolloff: 0.3,
            dense_oversampling: 8,
            adc_bits: 6,
            jitter_rms: 0.0,
            initial_phase: 0.0,
            phase_step: None,
        }
    }
}

impl StimulusConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.samples_per_symbol != SAMPLES_PER_SYMBOL {
            return bad("samples_per_symbol must be 2");
        }
        if self.dense_oversampling < 8 {
            return bad("dense_oversampling must be at least 8");
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return bad("rolloff must lie in [0, 1]");
        }
        if self.n_symbols < 2 * BLOCK_SIZE {
            return bad("n_symbols must be at least 2 x block size");
        }
        if !(2..=6).contains(&self.adc_bits) {
            return bad("adc_bits must lie in 2..=6 (6-bit datapath)");
        }
        if !(0.0..2.0).contains(&self.initial_phase) {
            return bad("initial_phase must lie in [0, 2)");
        }
        if let Some(step) = self.phase_step {
            if !(step.samples.abs() <= 2.0) || (step.at_sample as f64) < -step.samples {
                return bad("phase_step must be within +-2 samples and start after it");
            }
        }
        if !(self.jitter_rms >= 0.0 && self.jitter_rms.is_finite()) {
            return bad("jitter_rms must be finite and non-negative");
        }
        if !(self.cfo_ppm.abs() < 1e5) {
            return bad("cfo_ppm out of range");
        }
        if !(self.symbol_rate > 0.0) {
            return bad("symbol_rate must be positive");
        }
        Ok(())
    }

    /// Relative clock offset, `cfo_ppm * 1e-6`.
    pub fn epsilon(&self) -> f64 {
        self.cfo_ppm * 1e-6
    }

    /// Receiver sample rate in Hz.
    pub fn sample_rate(&self) -> f64 {
        self.symbol_rate * self.samples_per_symbol as f64
    }

    /// Transmitted symbols needed so that every receiver instant lands well
    /// inside the synthesized waveform.
    pub fn tx_symbols(&self) -> usize {
        let span = self.n_symbols as f64 / (1.0 + self.epsilon());
        let jitter_margin = (8.0 * self.jitter_rms).ceil() as usize;
        let step_margin = self.phase_step.map_or(0, |p| p.samples.abs().ceil() as usize);
        span.ceil() as usize + PULSE_SPAN_SYMBOLS + 8 + jitter_margin + step_margin
    }
}

/// One clock cycle of ADC output: 256 signed 6-bit codes.
#[derive(Clone, PartialEq, Eq)]
pub struct SampleBlock([i8; BLOCK_SIZE]);

impl SampleBlock {
    pub const MIN: i8 = -32;
    pub const MAX: i8 = 31;

    pub fn new(samples: [i8; BLOCK_SIZE]) -> Result<Self> {
        if let Some(&bad) = samples.iter().find(|&&s| !(Self::MIN..=Self::MAX).contains(&s)) {
            return Err(Error::Config(format!("sample {bad} outside 6-bit range")));
        }
        Ok(Self(samples))
    }

    pub fn from_slice(samples: &[i8]) -> Result<Self> {
        let arr: [i8; BLOCK_SIZE] = samples.try_into().map_err(|_| Error::WidthMismatch {
            expected: BLOCK_SIZE,
            actual: samples.len(),
        })?;
        Self::new(arr)
    }

    pub fn zeros() -> Self {
        Self([0; BLOCK_SIZE])
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }
}

impl std::ops::Deref for SampleBlock {
    type Target = [i8];
    fn deref(&self) -> &[i8] {
        &self.0
    }
}

impl std::fmt::Debug for SampleBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SampleBlock({:?}..)", &self.0[..8])
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// PRBS-31 (x^31 + x^28 + 1) bit stream whose register is seeded from `seed`.
pub fn generate_bits(seed: u64, n: usize) -> Result<Vec<u8>> {
    if n == 0 {
        return Err(Error::EmptyStream);
    }
    const MASK: u32 = 0x7FFF_FFFF;
    let mut state = (splitmix64(seed) as u32) & MASK;
    if state == 0 {
        state = 1;
    }
    Ok((0..n)
        .map(|_| {
            let bit = ((state >> 30) ^ (state >> 27)) & 1;
            state = ((state << 1) | bit) & MASK;
            bit as u8
        })
        .collect())
}

/// A real waveform on a grid `oversampling` times denser than the receiver
/// sample grid. Index `origin` is t = 0, the centre of the first symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseWaveform {
    pub samples: Vec<f64>,
    pub oversampling: usize,
    pub origin: usize,
}

impl DenseWaveform {
    /// Grid points per symbol.
    pub fn points_per_symbol(&self) -> usize {
        self.oversampling * SAMPLES_PER_SYMBOL
    }
}

/// Raised-cosine impulse response at `t` symbol periods.
fn raised_cosine(t: f64, rolloff: f64) -> f64 {
    let sinc = if t == 0.0 { 1.0 } else { (PI * t).sin() / (PI * t) };
    let x = 2.0 * rolloff * t;
    if rolloff > 0.0 && (x.abs() - 1.0).abs() < 1e-9 {
        return PI / 4.0 * {
            let u = 1.0 / (2.0 * rolloff);
            (PI * u).sin() / (PI * u)
        };
    }
    sinc * (PI * rolloff * t).cos() / (1.0 - x * x)
}

/// Truncated, tapered raised-cosine taps. Every polyphase branch is scaled to
/// unit sum so a constant bit stream produces an exactly constant waveform.
fn pulse_taps(points_per_symbol: usize, rolloff: f64) -> Vec<f64> {
    let half = PULSE_SPAN_SYMBOLS * points_per_symbol;
    let mut taps: Vec<f64> = (0..=2 * half)
        .map(|n| {
            let t = (n as f64 - half as f64) / points_per_symbol as f64;
            let taper = 0.5 * (1.0 + (PI * t / PULSE_SPAN_SYMBOLS as f64).cos());
            raised_cosine(t, rolloff) * taper
        })
        .collect();
    for phase in 0..points_per_symbol {
        let sum: f64 = taps.iter().skip(phase).step_by(points_per_symbol).sum();
        taps.iter_mut()
            .skip(phase)
            .step_by(points_per_symbol)
            .for_each(|t| *t /= sum);
    }
    taps
}

/// Shapes `bits` (levels 0 and 1) with the configured raised-cosine pulse.
pub fn synthesize_waveform(bits: &[u8], cfg: &StimulusConfig) -> Result<DenseWaveform> {
    if bits.is_empty() {
        return Err(Error::EmptyStream);
    }
    let pps = cfg.dense_oversampling * SAMPLES_PER_SYMBOL;
    let taps = pulse_taps(pps, cfg.rolloff);
    let half = PULSE_SPAN_SYMBOLS * pps;
    let len = (bits.len() - 1) * pps + 2 * half + 1;
    let mut samples = vec![0.0; len];
    for (k, _) in bits.iter().enumerate().filter(|(_, &b)| b != 0) {
        let start = k * pps;
        samples[start..start + taps.len()]
            .iter_mut()
            .zip(&taps)
            .for_each(|(s, t)| *s += t);
    }
    Ok(DenseWaveform {
        samples,
        oversampling: cfg.dense_oversampling,
        origin: half,
    })
}

/// Evaluates the waveform at fractional dense-grid position `x`.
fn evaluate(wave: &[f64], x: f64) -> Option<f64> {
    let base = x.floor();
    let frac = x - base;
    let first = base as i64 - (RESAMPLER_TAPS as i64 / 2 - 1);
    if first < 0 || first as usize + RESAMPLER_TAPS > wave.len() {
        return None;
    }
    let taps = &wave[first as usize..first as usize + RESAMPLER_TAPS];
    // Lagrange nodes at -3..=4 relative to `base`.
    let nodes: [f64; RESAMPLER_TAPS] = std::array::from_fn(|j| j as f64 - 3.0);
    let mut acc = 0.0;
    for (j, &tap) in taps.iter().enumerate() {
        let mut w = 1.0;
        for (i, &node) in nodes.iter().enumerate() {
            if i != j {
                w *= (frac - node) / (nodes[j] - node);
            }
        }
        acc += w * tap;
    }
    Some(acc)
}

/// Samples the dense waveform at the detuned receiver instants
/// `t_k = k / (1 + eps) + phase + jitter_k` (receiver sample periods) and
/// adds white Gaussian noise at the configured SNR.
pub fn sample_with_cfo(wave: &DenseWaveform, cfg: &StimulusConfig) -> Result<Vec<f64>> {
    let n_out = cfg.n_symbols * cfg.samples_per_symbol;
    let scale = 1.0 / (1.0 + cfg.epsilon());
    let d = wave.oversampling as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ 0x5EED_CF0F));
    let jitter = Normal::new(0.0, cfg.jitter_rms * SAMPLES_PER_SYMBOL as f64)
        .map_err(|e| Error::Config(e.to_string()))?;

    let mut out = Vec::with_capacity(n_out);
    for k in 0..n_out {
        let mut t = k as f64 * scale + cfg.initial_phase;
        if cfg.jitter_rms > 0.0 {
            t += jitter.sample(&mut rng);
        }
        if let Some(step) = cfg.phase_step {
            if k >= step.at_sample {
                t += step.samples;
            }
        }
        let x = wave.origin as f64 + t * d;
        let v = evaluate(&wave.samples, x).ok_or(Error::Truncation {
            position: t,
            extent: wave.samples.len(),
        })?;
        out.push(v);
    }

    if let Some(snr_db) = cfg.snr_db {
        let power = out.iter().map(|v| v * v).sum::<f64>() / out.len() as f64;
        let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
        let noise = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
        out.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    }
    Ok(out)
}

/// Removes the run mean, as the AC-coupled receiver front end does.
pub fn ac_couple(stream: &mut [f64]) {
    if stream.is_empty() {
        return;
    }
    let mean = stream.iter().sum::<f64>() / stream.len() as f64;
    stream.iter_mut().for_each(|v| *v -= mean);
}

/// Static-gain ADC: the 99.9th-percentile magnitude maps onto full scale,
/// then a mid-rise quantizer with saturation emits signed `adc_bits` codes.
/// Trailing samples that do not fill a block are dropped.
pub fn quantize_adc(stream: &[f64], cfg: &StimulusConfig) -> Result<Vec<SampleBlock>> {
    if stream.len() < BLOCK_SIZE {
        return Err(Error::ShortStream {
            len: stream.len(),
            needed: BLOCK_SIZE,
        });
    }
    let mut mags: Vec<f64> = stream.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let idx = ((0.999 * mags.len() as f64).ceil() as usize).clamp(1, mags.len()) - 1;
    let mut reference = mags[idx];
    if reference <= 0.0 {
        reference = *mags.last().unwrap();
    }
    if !(reference > 0.0) || !reference.is_finite() {
        return Err(Error::DegenerateInputPower);
    }

    let full_scale = (1i32 << (cfg.adc_bits - 1)) as f64;
    let gain = full_scale / reference;
    let lo = -(1i32 << (cfg.adc_bits - 1));
    let hi = (1i32 << (cfg.adc_bits - 1)) - 1;
    stream
        .chunks_exact(BLOCK_SIZE)
        .map(|chunk| {
            let codes: [i8; BLOCK_SIZE] = std::array::from_fn(|i| {
                ((chunk[i] * gain).floor() as i32).clamp(lo, hi) as i8
            });
            SampleBlock::new(codes)
        })
        .collect()
}

/// Everything the receiver sees for one configuration, plus the transmitted
/// reference bits.
#[derive(Debug, Clone)]
pub struct Received {
    pub tx_bits: Vec<u8>,
    pub blocks: Vec<SampleBlock>,
}

pub fn generate(cfg: &StimulusConfig) -> Result<Received> {
    cfg.validate()?;
    let tx_bits = generate_bits(cfg.seed, cfg.tx_symbols())?;
    let wave = synthesize_waveform(&tx_bits, cfg)?;
    let mut stream = sample_with_cfo(&wave, cfg)?;
    ac_couple(&mut stream);
    let blocks = quantize_adc(&stream, cfg)?;
    Ok(Received { tx_bits, blocks })
}
