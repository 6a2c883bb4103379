//! Confidence intervals for risk proportions: nonparametric bootstrap over
//! record-level flags, Wilson score, and Clopper-Pearson exact intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{RapidError, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    BootstrapPercentile,
    Wilson,
    ClopperPearson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: IntervalMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
}

fn check_level(level: f64) -> Result<()> {
    if !(0.0 < level && level < 1.0) {
        return Err(RapidError::InvalidThreshold(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    Ok(())
}

/// Percentile bootstrap over at-risk flags with the attacker held fixed:
/// record indices are resampled with replacement and the flag mean is
/// recomputed per replicate.
pub fn bootstrap_ci(flags: &[bool], r: usize, level: f64, rng_seed: u64) -> Result<IntervalEstimate> {
    if flags.is_empty() {
        return Err(RapidError::EmptyInput("bootstrap over empty flags".into()));
    }
    if r < 100 {
        return Err(RapidError::TooFewReplicates(r));
    }
    check_level(level)?;
    let n = flags.len();
    // replicates draw from per-replicate RNG streams, so the interval does
    // not depend on how rayon schedules them
    let mut scores: Vec<f64> = (0..r)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(1 + rep as u64);
            let hits = (0..n).filter(|_| flags[rng.gen_range(0..n)]).count();
            hits as f64 / n as f64
        })
        .collect();
    scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = 1.0 - level;
    Ok(IntervalEstimate {
        point: flags.iter().filter(|&&f| f).count() as f64 / n as f64,
        lower: stats::quantile_sorted(&scores, alpha / 2.0),
        upper: stats::quantile_sorted(&scores, 1.0 - alpha / 2.0),
        level,
        method: IntervalMethod::BootstrapPercentile,
        replicates: Some(r),
    })
}

fn check_counts(k: usize, n: usize) -> Result<()> {
    if n == 0 || k > n {
        return Err(RapidError::InvalidCounts { k, n });
    }
    Ok(())
}

/// Wilson score interval for a binomial proportion, clipped to [0, 1].
pub fn wilson_interval(k: usize, n: usize, level: f64) -> Result<IntervalEstimate> {
    check_counts(k, n)?;
    check_level(level)?;
    let z = stats::norm_quantile(1.0 - (1.0 - level) / 2.0);
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    Ok(IntervalEstimate {
        point: p,
        lower: if k == 0 { 0.0 } else { (center - half).max(0.0) },
        upper: if k == n { 1.0 } else { (center + half).min(1.0) },
        level,
        method: IntervalMethod::Wilson,
        replicates: None,
    })
}

/// Clopper-Pearson exact interval via Beta-distribution quantiles.
pub fn clopper_pearson_interval(k: usize, n: usize, level: f64) -> Result<IntervalEstimate> {
    check_counts(k, n)?;
    check_level(level)?;
    let alpha = 1.0 - level;
    let (kf, nf) = (k as f64, n as f64);
    let lower = if k == 0 {
        0.0
    } else {
        stats::beta_quantile(alpha / 2.0, kf, nf - kf + 1.0)
    };
    let upper = if k == n {
        1.0
    } else {
        stats::beta_quantile(1.0 - alpha / 2.0, kf + 1.0, nf - kf)
    };
    Ok(IntervalEstimate {
        point: kf / nf,
        lower,
        upper,
        level,
        method: IntervalMethod::ClopperPearson,
        replicates: None,
    })
}
