use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub target: f64,
    pub tolerance: f64,
    pub tau_max: f64,
    /// Generation seeds; WER at a temperature is the mean over these.
    pub seeds: Vec<u64>,
    pub max_iterations: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            target: 0.0,
            tolerance: 0.002,
            tau_max: 64.0,
            seeds: (0..5).collect(),
            max_iterations: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub tau: f64,
    pub mean_wer: f64,
    /// WER of every seed at `tau`, in seed order.
    pub seed_wers: Vec<f64>,
    /// Largest minus smallest per-seed WER.
    pub spread: f64,
    /// Number of temperatures evaluated.
    pub evaluations: usize,
}

/// Per-seed WERs at `tau`, evaluated in parallel.
pub fn mean_wer<F>(wer_at: &F, tau: f64, seeds: &[u64]) -> Result<(f64, Vec<f64>)>
where
    F: Fn(f64, u64) -> Result<f64> + Sync,
{
    let wers = seeds
        .par_iter()
        .map(|&s| wer_at(tau, s))
        .collect::<Result<Vec<_>>>()?;
    Ok((wers.iter().sum::<f64>() / wers.len() as f64, wers))
}

/// Bisection on the temperature until the mean WER over the seeds is within
/// tolerance of the target.
///
/// `wer_at(tau, seed)` synthesizes the dev set at `tau` with generation seed
/// `seed`, decodes it and returns the aggregate WER. Every temperature is
/// evaluated on the same seeds, so differences between temperatures are not
/// masked by fresh noise.
pub fn calibrate_tau<F>(wer_at: F, cfg: &CalibrationConfig) -> Result<Calibration>
where
    F: Fn(f64, u64) -> Result<f64> + Sync,
{
    if !(0.0..1.0).contains(&cfg.target) {
        return Err(Error::InvalidArgument(format!(
            "target WER {} outside [0, 1)",
            cfg.target
        )));
    }
    if !(cfg.tolerance > 0.0) || !cfg.tau_max.is_finite() || cfg.tau_max <= 0.0 {
        return Err(Error::InvalidArgument(
            "tolerance and tau_max must be positive".into(),
        ));
    }
    if cfg.seeds.is_empty() {
        return Err(Error::InvalidArgument("no calibration seeds".into()));
    }
    let mut evaluations = 0;
    let mut eval = |tau: f64| -> Result<Calibration> {
        evaluations += 1;
        let (m, wers) = mean_wer(&wer_at, tau, &cfg.seeds)?;
        let hi = wers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = wers.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(Calibration {
            tau,
            mean_wer: m,
            seed_wers: wers,
            spread: hi - lo,
            evaluations,
        })
    };
    let hit = |c: &Calibration| (c.mean_wer - cfg.target).abs() <= cfg.tolerance;

    let low = eval(0.0)?;
    if hit(&low) {
        return Ok(low);
    }
    let high = eval(cfg.tau_max)?;
    if hit(&high) {
        return Ok(high);
    }
    if low.mean_wer > cfg.target || high.mean_wer < cfg.target {
        return Err(Error::Unreachable {
            target: cfg.target,
            tau_max: cfg.tau_max,
            wer_low: low.mean_wer,
            wer_high: high.mean_wer,
        });
    }
    let (mut lo, mut hi) = (0.0, cfg.tau_max);
    let mut last = high;
    for _ in 0..cfg.max_iterations {
        let mid = 0.5 * (lo + hi);
        let c = eval(mid)?;
        if hit(&c) {
            return Ok(c);
        }
        if c.mean_wer < cfg.target {
            lo = mid;
        } else {
            hi = mid;
        }
        last = c;
    }
    Err(Error::NotConverged {
        iterations: cfg.max_iterations,
        tau: last.tau,
        wer: last.mean_wer,
    })
}
