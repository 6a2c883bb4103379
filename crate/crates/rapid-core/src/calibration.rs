//! Threshold-sensitivity curves and permutation-null threshold selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{RapidError, Result};
use crate::learners::AttackerSpec;
use crate::risk::{rapid_assess, AssessOptions, RecordRisk};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    CategoricalTau,
    ContinuousEpsilon,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdCurve {
    pub grid: Vec<f64>,
    pub scores: Vec<f64>,
    pub kind: CurveKind,
    /// One score row per replicate, for min/max bands.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicate_scores: Option<Vec<Vec<f64>>>,
}

impl ThresholdCurve {
    /// Plot-ready CSV: threshold, score, and a min/max band when replicate
    /// rows are present.
    pub fn to_csv_string(&self) -> String {
        let band = self.replicate_scores.as_deref().filter(|r| !r.is_empty());
        let mut out = String::from(match band {
            Some(_) => "threshold,score,min,max\n",
            None => "threshold,score\n",
        });
        for (j, (&t, &s)) in self.grid.iter().zip(&self.scores).enumerate() {
            match band {
                Some(rows) => {
                    let lo = rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
                    let hi = rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
                    out.push_str(&format!("{t},{s},{lo},{hi}\n"));
                }
                None => out.push_str(&format!("{t},{s}\n")),
            }
        }
        out
    }
}

/// 0.05 to 0.95 in steps of 0.05.
pub fn default_tau_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(RapidError::EmptyInput("empty threshold grid".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RapidError::InvalidThreshold(
            "threshold grid must be strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Score at one threshold from stored per-record values — no retraining.
fn score_at(records: &[RecordRisk], kind: CurveKind, t: f64) -> f64 {
    let hits = records
        .iter()
        .filter(|rec| match (kind, rec) {
            (CurveKind::CategoricalTau, RecordRisk::Categorical(r)) => r.r > t,
            (CurveKind::ContinuousEpsilon, RecordRisk::Continuous(r)) => r.e < t,
            _ => unreachable!("mixed record kinds rejected earlier"),
        })
        .count();
    hits as f64 / records.len() as f64
}

fn curve_kind(records: &[RecordRisk]) -> Result<CurveKind> {
    let first = records
        .first()
        .ok_or_else(|| RapidError::EmptyInput("no records for threshold curve".into()))?;
    let kind = match first {
        RecordRisk::Categorical(_) => CurveKind::CategoricalTau,
        RecordRisk::Continuous(_) => CurveKind::ContinuousEpsilon,
    };
    let mixed = records.iter().any(|r| {
        matches!(r, RecordRisk::Categorical(_)) != matches!(kind, CurveKind::CategoricalTau)
    });
    if mixed {
        return Err(RapidError::MixedConfigurations(
            "records mix categorical and continuous risk".into(),
        ));
    }
    Ok(kind)
}

/// Re-thresholds stored per-record risk values over a grid.
pub fn threshold_curve(records: &[RecordRisk], grid: &[f64]) -> Result<ThresholdCurve> {
    check_grid(grid)?;
    let kind = curve_kind(records)?;
    let scores = grid.iter().map(|&t| score_at(records, kind, t)).collect();
    Ok(ThresholdCurve {
        grid: grid.to_vec(),
        scores,
        kind,
        replicate_scores: None,
    })
}

#[derive(Debug, Clone)]
pub struct PermutationNullOptions {
    pub n_perm: usize,
    /// Null quantile the observed score must exceed (default 0.95).
    pub quantile: f64,
    pub grid: Vec<f64>,
    pub assess: AssessOptions,
}

impl Default for PermutationNullOptions {
    fn default() -> Self {
        PermutationNullOptions {
            n_perm: 100,
            quantile: 0.95,
            grid: default_tau_grid(),
            assess: AssessOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PermutationNullResult {
    pub observed: ThresholdCurve,
    /// One row per permutation, one column per grid threshold.
    pub null_scores: Vec<Vec<f64>>,
    /// Per-threshold null quantile the observed curve is compared against.
    pub null_quantiles: Vec<f64>,
    /// Smallest threshold where observed risk exceeds the null quantile;
    /// `None` means no threshold separates the data from noise.
    pub selected_threshold: Option<f64>,
    pub quantile: f64,
}

/// No-information calibration: the released data's sensitive column is
/// permuted (severing the QI-to-target link the attacker learns), the
/// attacker retrained per permutation, and the observed curve compared with
/// the resulting null distribution. Quasi-identifier columns are untouched.
pub fn permutation_null_threshold(
    original: &Dataset,
    released: &Dataset,
    qi: &[String],
    sensitive: &str,
    spec: &AttackerSpec,
    options: &PermutationNullOptions,
    rng_seed: u64,
) -> Result<PermutationNullResult> {
    if options.n_perm < 20 {
        return Err(RapidError::TooFewPermutations(options.n_perm));
    }
    if !(0.0 < options.quantile && options.quantile < 1.0) {
        return Err(RapidError::InvalidThreshold(format!(
            "null quantile must lie in (0, 1), got {}",
            options.quantile
        )));
    }
    check_grid(&options.grid)?;
    if !original.column_def(sensitive)?.kind.is_categorical() {
        return Err(RapidError::Schema(
            "permutation-null calibration requires a categorical sensitive column".into(),
        ));
    }

    let observed_result = rapid_assess(original, released, qi, sensitive, spec, &options.assess)?;
    let observed = threshold_curve(&observed_result.records, &options.grid)?;

    // per-permutation seeds drawn up front so parallel order cannot matter
    let mut master = ChaCha8Rng::seed_from_u64(rng_seed);
    let perm_seeds: Vec<u64> = (0..options.n_perm).map(|_| master.gen()).collect();
    let null_scores: Vec<Vec<f64>> = perm_seeds
        .into_par_iter()
        .map(|seed| -> Result<Vec<f64>> {
            let permuted = released.permute_column(sensitive, seed)?;
            let res = rapid_assess(original, &permuted, qi, sensitive, spec, &options.assess)?;
            Ok(threshold_curve(&res.records, &options.grid)?.scores)
        })
        .collect::<Result<_>>()?;

    let null_quantiles: Vec<f64> = (0..options.grid.len())
        .map(|j| {
            let mut col: Vec<f64> = null_scores.iter().map(|row| row[j]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            stats::quantile_sorted(&col, options.quantile)
        })
        .collect();
    let selected_threshold = options
        .grid
        .iter()
        .zip(observed.scores.iter().zip(&null_quantiles))
        .find(|(_, (obs, null))| obs > null)
        .map(|(&t, _)| t);

    Ok(PermutationNullResult {
        observed,
        null_scores,
        null_quantiles,
        selected_threshold,
        quantile: options.quantile,
    })
}
