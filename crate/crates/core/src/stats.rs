//! Evaluation statistics: interquartile mean and percentile-bootstrap
//! confidence intervals, plus per-iteration aggregation across trials.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::rng::SplitMix64;

pub const DEFAULT_N_BOOT: usize = 5000;
pub const DEFAULT_LEVEL: f64 = 0.95;
/// Base seed for the aggregation bootstrap (per-iteration seeds derive from
/// it so CSV output is reproducible run to run).
pub const AGGREGATE_BOOT_SEED: u64 = 0x5EED_0000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub iqm: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    pub n_boot: usize,
    pub level: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
    #[error("level must be in (0, 1), got {0}")]
    BadLevel(f64),
    #[error("missing data: {0}")]
    MissingData(String),
}

/// Interquartile mean: drop the smallest and largest `floor(n/4)` values,
/// average the rest.
pub fn iqm(samples: &[f64]) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let trim = sorted.len() / 4;
    let kept = &sorted[trim..sorted.len() - trim];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

fn iqm_sorted_into(buf: &mut [f64]) -> f64 {
    buf.sort_by(f64::total_cmp);
    let trim = buf.len() / 4;
    let kept = &buf[trim..buf.len() - trim];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Empirical quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile bootstrap for the IQM: `n_boot` resamples with replacement,
/// interval from the `(1-level)/2` and `1-(1-level)/2` empirical quantiles.
pub fn bootstrap_ci(
    samples: &[f64],
    n_boot: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64), StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::BadLevel(level));
    }
    let n = samples.len();
    let mut rng = SplitMix64::new(seed);
    let mut resample = vec![0.0; n];
    let mut boots = Vec::with_capacity(n_boot);
    for _ in 0..n_boot {
        for slot in resample.iter_mut() {
            *slot = samples[rng.next_usize(n)];
        }
        boots.push(iqm_sorted_into(&mut resample));
    }
    boots.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile(&boots, alpha), quantile(&boots, 1.0 - alpha)))
}

/// Point estimate plus bootstrap interval, clipped to contain the plug-in
/// IQM.
pub fn summarize_scores(
    samples: &[f64],
    n_boot: usize,
    level: f64,
    seed: u64,
) -> Result<StatSummary, StatsError> {
    let point = iqm(samples)?;
    let (lo, hi) = bootstrap_ci(samples, n_boot, level, seed)?;
    Ok(StatSummary {
        iqm: point,
        ci_low: lo.min(point),
        ci_high: hi.max(point),
        n: samples.len(),
        n_boot,
        level,
    })
}

/// Pool re-evaluation scores across every trial of one `(variant, scenario)`
/// cell and summarize each iteration index.
pub fn aggregate(
    exp_root: &Path,
    variant: &str,
    scenario: &str,
    n_boot: usize,
    level: f64,
) -> Result<Vec<StatSummary>, StatsError> {
    let per_iteration = crate::runner::collect_cell_reeval_scores(exp_root, variant, scenario)
        .map_err(|e| StatsError::MissingData(e.to_string()))?;
    if per_iteration.is_empty() {
        return Err(StatsError::MissingData(format!(
            "no re-evaluation data under {}/{variant}/{scenario}",
            exp_root.display()
        )));
    }
    per_iteration
        .iter()
        .enumerate()
        .map(|(i, scores)| {
            if scores.is_empty() {
                return Err(StatsError::MissingData(format!(
                    "iteration {i} has no re-evaluation scores"
                )));
            }
            let samples: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
            summarize_scores(&samples, n_boot, level, AGGREGATE_BOOT_SEED + i as u64)
        })
        .collect()
}

/// CSV with one row per iteration: `iteration,iqm,ci_low,ci_high,n`.
pub fn to_csv(summaries: &[StatSummary]) -> String {
    let mut out = String::from("iteration,iqm,ci_low,ci_high,n\n");
    for (i, s) in summaries.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i, s.iqm, s.ci_low, s.ci_high, s.n
        ));
    }
    out
}
