//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ffcr::elastic_buffer::{EbConfig, ElasticBuffer, ReadOutcome};
use ffcr::experiment::{simulate, ExperimentConfig, RunResult};
use ffcr::lagrange::{lagrange_basis, lagrange_weights, LagrangeInterpolator, COEFF_ONE};
use ffcr::metrics::pause_stats;
use ffcr::phase_unwrap::{split_phase, wrap_m_delta, AccumulatedPhase};
use ffcr::pipeline::{Pipeline, PipelineConfig};
use ffcr::stimulus::{generate, StimulusConfig};
use ffcr::{Error, Result, BLOCK_SIZE};

const SAMPLE_RATE: f64 = 60e9;
const MA_TAPS: usize = 16;
const BANDWIDTH_TARGET_HZ: f64 = 7.32e6;
const BANDWIDTH_TOL: f64 = 0.05;
const MIN_COUNTED: u64 = 1 << 17;
const MAX_SECONDS_PER_POINT: f64 = 60.0;
const FAIL_BER: f64 = 1e-2;
const ONSET_RANGE: (f64, f64) = (400.0, 550.0);
const TAU_TOL: f64 = 1.0 / 64.0 + 0.02;
const PAUSE_TOL: f64 = 0.15;
const NOISY_SNR_DB: f64 = 20.0;

struct Line {
    pass: bool,
    text: String,
}

fn line(id: &str, name: &str, pass: bool, detail: String) -> Line {
    let verdict = if pass { "PASS" } else { "FAIL" };
    Line { pass, text: format!("criterion {id:>2} {verdict} {name}: {detail}") }
}

type Runs = BTreeMap<i64, (Result<RunResult>, Duration)>;

fn run_points(cfg: &ExperimentConfig, cfos: &[i64], seed: u64) -> Runs {
    cfos.par_iter()
        .map(|&c| {
            let t = Instant::now();
            let r = simulate(cfg, c as f64, seed);
            (c, (r, t.elapsed()))
        })
        .collect()
}

fn error_free(r: &Result<RunResult>) -> bool {
    matches!(r, Ok(r) if r.ber.error_free())
}

fn describe(r: &Result<RunResult>) -> String {
    match r {
        Ok(r) if r.ber.alignment_failed => format!("ber {:.3e} (alignment failed)", r.ber.ber),
        Ok(r) => format!("{}/{}", r.ber.errors, r.ber.symbols_counted),
        Err(e) => format!("fault: {e}"),
    }
}

fn error_free_region(runs: &Runs) -> Line {
    let points = [0, 100, -100, 200, -200, 300, -300, 400, -400];
    let mut pass = true;
    let mut parts = Vec::new();
    for c in points {
        let (r, dt) = &runs[&c];
        let counted = r.as_ref().map_or(0, |r| r.ber.symbols_counted);
        let ok = error_free(r) && counted >= MIN_COUNTED && dt.as_secs_f64() < MAX_SECONDS_PER_POINT;
        pass &= ok;
        parts.push(format!("{c:+}ppm {} in {:.1}s", describe(r), dt.as_secs_f64()));
    }
    line("1", "error-free from -400 to +400 ppm", pass, parts.join(", "))
}

fn failed(r: &Result<RunResult>) -> bool {
    match r {
        Ok(r) => r.ber.alignment_failed || r.ber.ber > FAIL_BER,
        Err(_) => true,
    }
}

fn tracking_onset(runs: &Runs) -> Line {
    let at_400 = error_free(&runs[&400].0) && error_free(&runs[&-400].0);
    let at_600 = failed(&runs[&600].0) && failed(&runs[&-600].0);
    let mut onset = Vec::new();
    let mut onset_ok = true;
    for sign in [1, -1] {
        let first = (400..=600)
            .step_by(10)
            .find(|&a| runs.get(&(sign * a)).is_some_and(|(r, _)| !error_free(r)));
        let ok = first.is_some_and(|a| (ONSET_RANGE.0..=ONSET_RANGE.1).contains(&(a as f64)));
        onset_ok &= ok;
        onset.push(match first {
            Some(a) => format!("first failing {:+}ppm", sign * a),
            None => format!("no failure on the {} side", if sign > 0 { "+" } else { "-" }),
        });
    }
    let detail = format!(
        "+-400ppm {} / {}; +600ppm {}; -600ppm {}; {}",
        describe(&runs[&400].0),
        describe(&runs[&-400].0),
        describe(&runs[&600].0),
        describe(&runs[&-600].0),
        onset.join(", ")
    );
    line("2", "tracking-failure onset", at_400 && at_600 && onset_ok, detail)
}

/// Magnitude response of an `n`-tap boxcar at normalized frequency `f` (cycles/update).
fn boxcar_gain(n: usize, f: f64) -> f64 {
    if f == 0.0 {
        return 1.0;
    }
    ((n as f64 * PI * f).sin() / (n as f64 * (PI * f).sin())).abs()
}

fn bandwidth() -> Line {
    let update = SAMPLE_RATE / BLOCK_SIZE as f64;
    let target = 0.5f64.sqrt();
    let (mut lo, mut hi) = (0.0, 1.0 / MA_TAPS as f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if boxcar_gain(MA_TAPS, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let f3db = 0.5 * (lo + hi) * update;
    let rate_ok = update == 234.375e6;
    let rel = f3db / BANDWIDTH_TARGET_HZ - 1.0;
    let bw_ok = rel.abs() <= BANDWIDTH_TOL;
    line(
        "3",
        "update rate and boxcar 3-dB bandwidth",
        rate_ok && bw_ok,
        format!(
            "update rate {:.3} MHz, 3-dB frequency {:.4} MHz vs {:.2} MHz ({:+.1}%, limit +-{:.0}%)",
            update / 1e6,
            f3db / 1e6,
            BANDWIDTH_TARGET_HZ / 1e6,
            100.0 * rel,
            100.0 * BANDWIDTH_TOL
        ),
    )
}

fn forced_decrement() -> std::result::Result<usize, Error> {
    let cfg = EbConfig::default();
    let capacity = cfg.capacity;
    let mut eb = ElasticBuffer::<i8>::new(cfg)?;
    let block = [0i8; BLOCK_SIZE];
    let mut max_fill = 0;
    for c in 0..10_000i32 {
        eb.write(&block)?;
        let m = wrap_m_delta(-c) as i16;
        eb.read(m)?;
        max_fill = max_fill.max(eb.fill());
        if eb.fill() > capacity {
            return Err(Error::BufferOverflow { incoming: 0, fill: eb.fill(), capacity });
        }
    }
    Ok(max_fill)
}

fn no_overflow(runs: &Runs, capacity: usize) -> Line {
    let mut worst = 0;
    let mut faults = Vec::new();
    for (c, (r, _)) in runs {
        match r {
            Ok(r) => worst = worst.max(r.max_fill),
            Err(e) => faults.push(format!("{c:+}ppm: {e}")),
        }
    }
    let forced = forced_decrement();
    let pass = faults.is_empty() && worst <= capacity && forced.is_ok();
    let detail = format!(
        "{} sweep runs, max fill {worst}/{capacity}, faults [{}]; forced dm=-1 x 10^4: {}",
        runs.len(),
        faults.join("; "),
        match forced {
            Ok(f) => format!("max fill {f}"),
            Err(e) => format!("fault: {e}"),
        }
    );
    line("4", "no overflow", pass, detail)
}

fn sample_continuity() -> Line {
    let cfg = EbConfig::default();
    let interp = LagrangeInterpolator::new(cfg.out_width);
    let patterns: [(&str, fn(i64) -> i16); 3] = [
        ("hold", |_| 0),
        ("down-up", |c| if c < 200 { -(c / 7) as i16 } else { (-28 + (c - 200) / 4) as i16 }),
        // Triangle wave moving in steps of 2 every 13 cycles.
        ("jumps", |c| {
            let k = (c / 13) % 8;
            (2 * if k < 4 { k } else { 8 - k } - 4) as i16
        }),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, pattern) in patterns {
        let result = (|| -> std::result::Result<(usize, usize), String> {
            let mut eb = ElasticBuffer::<i64>::new(cfg.clone()).map_err(|e| e.to_string())?;
            let mut prev: Option<i64> = None;
            let mut last_m: Option<i16> = None;
            let (mut outputs, mut events) = (0, 0);
            for c in 0..600i64 {
                eb.write(&(256 * c..256 * (c + 1)).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
                let m = pattern(c);
                if let ReadOutcome::Window(w) = eb.read(m).map_err(|e| e.to_string())? {
                    let dm = last_m.map_or(0, |l| wrap_m_delta(m as i32 - l as i32) as i64);
                    events += usize::from(dm != 0);
                    let acc = interp.process_wide(&w, 0).map_err(|e| e.to_string())?;
                    for (j, a) in acc.iter().enumerate() {
                        if a % COEFF_ONE as i64 != 0 {
                            return Err(format!("cycle {c}: non-integer output"));
                        }
                        let v = a / COEFF_ONE as i64;
                        let step = if j == 0 { 1 + dm } else { 1 };
                        if let Some(p) = prev {
                            if v - p != step {
                                return Err(format!("cycle {c} sample {j}: step {} expected {step}", v - p));
                            }
                        }
                        prev = Some(v);
                        outputs += 1;
                    }
                    last_m = Some(m);
                }
            }
            Ok((outputs, events))
        })();
        match result {
            Ok((n, e)) => parts.push(format!("{name}: {n} samples, {e} dm events exact")),
            Err(msg) => {
                pass = false;
                parts.push(format!("{name}: {msg}"));
            }
        }
    }
    line("5", "sample continuity", pass, parts.join(", "))
}

fn circular_error(a: f64, b: f64) -> f64 {
    ((a - b + 1.0).rem_euclid(2.0) - 1.0).abs()
}

fn estimator_accuracy() -> Line {
    let taus: [f64; 6] = [-0.75, -0.5, -0.25, 0.0, 0.25, 0.5];
    let results: Vec<(f64, Result<f64>)> = taus
        .par_iter()
        .map(|&tau0| {
            let r = (|| {
                // Delaying the signal by tau0 moves the sampling instants by -tau0.
                let cfg = StimulusConfig {
                    n_symbols: 1 << 15,
                    initial_phase: (-tau0).rem_euclid(2.0),
                    ..Default::default()
                };
                let rx = generate(&cfg)?;
                let mut p = Pipeline::reset(PipelineConfig::default())?;
                let trace = p.run(&rx.blocks)?.traces;
                Ok(trace[MA_TAPS..]
                    .iter()
                    .map(|t| circular_error(t.tau_code as f64 / 64.0, tau0))
                    .fold(0.0, f64::max))
            })();
            (tau0, r)
        })
        .collect();
    let mut pass = true;
    let parts: Vec<String> = results
        .iter()
        .map(|(tau0, r)| match r {
            Ok(e) => {
                pass &= *e <= TAU_TOL;
                format!("{tau0:+}: max err {e:.4}")
            }
            Err(e) => {
                pass = false;
                format!("{tau0:+}: {e}")
            }
        })
        .collect();
    line("6", "estimator accuracy", pass, format!("{} (limit {TAU_TOL:.4})", parts.join(", ")))
}

fn pause_rate(runs: &Runs, eb: &EbConfig) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in [-400, 0, 400] {
        match &runs[&c].0 {
            Ok(r) => {
                let slope = r.phase_slope.unwrap_or(f64::NAN);
                let model = (eb.start_fill - eb.read_width) as f64 / (2.0 + BLOCK_SIZE as f64 * slope);
                let measured = pause_stats(&r.trace).mean_pause_interval.unwrap_or(f64::NAN);
                let rel = measured / model - 1.0;
                pass &= rel.abs() <= PAUSE_TOL;
                parts.push(format!("{c:+}ppm {measured:.1} vs {model:.1} ({:+.1}%)", 100.0 * rel));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{c:+}ppm fault: {e}"));
            }
        }
    }
    line("7", "pause-rate model", pass, parts.join(", "))
}

fn phase_split() -> Line {
    let bad = (i16::MIN..=i16::MAX)
        .filter(|&code| {
            let s = split_phase(AccumulatedPhase(code));
            let reconstructed = s.m as f64 + s.mu_code as f64 / 64.0;
            reconstructed != code as f64 / 64.0 || s.mu_code >= 64 || !(-512..=511).contains(&s.m)
        })
        .count();
    line("8", "phase-split identity", bad == 0, format!("65536 codes, {bad} mismatches"))
}

fn interpolator_exactness() -> Line {
    let interp = LagrangeInterpolator::new(258);
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0B1C);
    let mut worst_ratio: f64 = 0.0;
    let mut violations = 0;
    for mu in 0..64u8 {
        let real = lagrange_weights(mu as f64 / 64.0);
        let quant = lagrange_basis(mu).0.map(|c| c as f64 / COEFF_ONE as f64);
        let dc: Vec<f64> = real.iter().zip(&quant).map(|(r, q)| (q - r).abs()).collect();
        for _ in 0..8 {
            let k: [i64; 4] = std::array::from_fn(|_| rng.random_range(-3..=3));
            let p = |x: f64| k[0] as f64 + k[1] as f64 * x + k[2] as f64 * x * x / 8.0 + k[3] as f64 * x * x * x / 64.0;
            // Integer-valued window: sample the cubic on a grid scaled so values stay integral.
            let window: Vec<i64> = (0..261).map(|i| (p(i as f64 / 8.0) * 512.0 * 64.0).round() as i64).collect();
            let exact = |i: usize| p((i as f64 + 1.0 + mu as f64 / 64.0) / 8.0) * 512.0 * 64.0;
            let acc = interp.process_wide(&window, mu).unwrap();
            for (i, a) in acc.iter().enumerate() {
                let got = *a as f64 / COEFF_ONE as f64;
                let bound: f64 = (0..4).map(|j| dc[j] * window[i + j].abs() as f64).sum::<f64>() * (1.0 + 1e-9) + 1e-9;
                let err = (got - exact(i)).abs();
                worst_ratio = worst_ratio.max(err / bound);
                if err > bound {
                    violations += 1;
                }
            }
        }
    }
    line(
        "9",
        "interpolator exactness on cubics",
        violations == 0,
        format!("64 mu codes x 8 cubics, {violations} bound violations, worst error/bound {worst_ratio:.3}"),
    )
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn sndr_trend() -> Line {
    let cfg = ExperimentConfig {
        stimulus: StimulusConfig { snr_db: Some(NOISY_SNR_DB), ..Default::default() },
        ..Default::default()
    };
    let points: Vec<(i64, u64)> = [200, 300, 400, -200, -300, -400]
        .iter()
        .flat_map(|&c| (1..=3).map(move |s| (c, s)))
        .collect();
    let results: Vec<(i64, Result<f64>)> = points
        .par_iter()
        .map(|&(c, s)| (c, simulate(&cfg, c as f64, s).map(|r| r.sndr.sndr_db)))
        .collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for sign in [1, -1] {
        let mut medians = Vec::new();
        for a in [200, 300, 400] {
            let mut v: Vec<f64> = results
                .iter()
                .filter(|(c, _)| *c == sign * a)
                .map(|(_, r)| *r.as_ref().unwrap_or(&f64::NAN))
                .collect();
            medians.push(median(&mut v));
        }
        pass &= medians.windows(2).all(|w| w[1] <= w[0]);
        parts.push(format!(
            "{} side {}",
            if sign > 0 { "+" } else { "-" },
            medians.iter().map(|m| format!("{m:.2}")).collect::<Vec<_>>().join(" >= ")
        ));
    }
    line("10", "SNDR non-increasing with |cfo| at 20 dB SNR", pass, format!("median dB at 200/300/400 ppm: {}", parts.join(", ")))
}

fn main() -> ExitCode {
    let cfg = ExperimentConfig::default();
    let mut cfos: Vec<i64> = vec![0, 100, -100, 200, -200, 300, -300, 400, -400, 600, -600];
    for a in (410..=550).step_by(10) {
        cfos.extend([a, -a]);
    }
    let runs = run_points(&cfg, &cfos, cfg.stimulus.seed);

    let lines = [
        error_free_region(&runs),
        tracking_onset(&runs),
        bandwidth(),
        no_overflow(&runs, cfg.pipeline.eb.capacity),
        sample_continuity(),
        estimator_accuracy(),
        pause_rate(&runs, &cfg.pipeline.eb),
        phase_split(),
        interpolator_exactness(),
        sndr_trend(),
    ];
    for l in &lines {
        println!("{}", l.text);
    }
    let failed = lines.iter().filter(|l| !l.pass).count();
    println!("acceptance: {} passed, {failed} failed", lines.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
