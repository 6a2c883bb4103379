//! Baseline-normalized disclosure risk: per-record gain scores, error
//! metrics, aggregate scores, the end-to-end assessment protocol, and
//! multi-model aggregation.
//!
//! For a categorical sensitive attribute, a record's risk is the normalized
//! gain r = (g - b) / (1 - b), where g is the attacker's probability on the
//! true class and b the class's marginal proportion in the original data.
//! The record is at risk when r exceeds the policy threshold tau. For a
//! continuous attribute, the record is at risk when the prediction error
//! falls below the tolerance epsilon.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{union_levels, ColumnData, ColumnKind, Dataset};
use crate::error::{RapidError, Result};
use crate::learners::{self, AttackerFamily, AttackerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "metric")]
pub enum ErrorMetric {
    /// 2|y - yhat| / (|y| + |yhat| + 2 delta)
    SymmetricRelative { delta: f64 },
    /// |y - yhat| / (|y| + delta)
    StabilisedRelative { delta: f64 },
    /// |y - yhat|, in target units
    Absolute,
}

impl Default for ErrorMetric {
    fn default() -> Self {
        ErrorMetric::SymmetricRelative { delta: 0.01 }
    }
}

impl ErrorMetric {
    pub fn validate(&self) -> Result<()> {
        match self {
            ErrorMetric::SymmetricRelative { delta } | ErrorMetric::StabilisedRelative { delta } => {
                if *delta <= 0.0 {
                    return Err(RapidError::InvalidThreshold(format!(
                        "relative error metrics require delta > 0, got {delta}"
                    )));
                }
            }
            ErrorMetric::Absolute => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoricalRecordRisk {
    pub g: f64,
    pub b: f64,
    pub r: f64,
    pub at_risk: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousRecordRisk {
    pub e: f64,
    pub at_risk: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordRisk {
    Categorical(CategoricalRecordRisk),
    Continuous(ContinuousRecordRisk),
}

impl RecordRisk {
    pub fn at_risk(&self) -> bool {
        match self {
            RecordRisk::Categorical(r) => r.at_risk,
            RecordRisk::Continuous(r) => r.at_risk,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    AllRecords,
    Holdout,
}

/// Point prediction attached to a record: the attacker's argmax class label
/// or its numeric estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Predicted {
    Label(String),
    Value(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RapidResult {
    /// Proportion of evaluated records at risk, in [0, 1].
    pub score: f64,
    pub n_at_risk: usize,
    pub n_evaluated: usize,
    pub records: Vec<RecordRisk>,
    pub tau: Option<f64>,
    pub epsilon: Option<f64>,
    pub metric: Option<ErrorMetric>,
    pub attacker: Option<AttackerFamily>,
    pub mode: EvaluationMode,
    /// Rows skipped because the sensitive value was missing.
    pub n_excluded_missing_sensitive: usize,
    /// Context only: attacker argmax accuracy on the evaluated records.
    pub accuracy: Option<f64>,
    /// Context only: mean absolute error on the evaluated records.
    pub mae: Option<f64>,
    pub baselines: Option<BTreeMap<String, f64>>,
    /// Aligned with `records`; populated by the end-to-end assessment.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted: Option<Vec<Predicted>>,
    /// Aligned with `records`; populated by the end-to-end assessment.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_values: Option<Vec<Predicted>>,
    /// Original-dataset row indices of the evaluated records.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluated_rows: Option<Vec<usize>>,
}

/// Marginal class proportions of a categorical column, skipping missing
/// values. Baselines always come from the original data, never the release.
pub fn baseline_marginals(data: &Dataset, column: &str) -> Result<BTreeMap<String, f64>> {
    let (levels, props) = baseline_proportions(data, column)?;
    Ok(levels
        .iter()
        .cloned()
        .zip(props.iter().copied())
        .collect())
}

/// Same marginals indexed by level position.
pub fn baseline_proportions(data: &Dataset, column: &str) -> Result<(Vec<String>, Vec<f64>)> {
    let def = data.column_def(column)?;
    let ColumnKind::Categorical { levels } = &def.kind else {
        return Err(RapidError::Schema(format!(
            "baseline requires a categorical column, {column:?} is continuous"
        )));
    };
    let ColumnData::Categorical(vals) = data.column(column)? else {
        unreachable!()
    };
    let mut counts = vec![0_usize; levels.len()];
    let mut total = 0_usize;
    for v in vals.iter().flatten() {
        counts[*v as usize] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(RapidError::EmptyColumn(column.to_string()));
    }
    let props = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok((levels.clone(), props))
}

/// Normalized confidence gain over the class-prevalence baseline. Returns 0
/// when b = 1: with a single class there is nothing left to disclose.
pub fn normalized_gain(g: f64, b: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&g) && (0.0..=1.0).contains(&b));
    if b >= 1.0 {
        0.0
    } else {
        (g - b) / (1.0 - b)
    }
}

pub fn prediction_error(y: f64, yhat: f64, metric: &ErrorMetric) -> f64 {
    let diff = (y - yhat).abs();
    match metric {
        ErrorMetric::SymmetricRelative { delta } => {
            2.0 * diff / (y.abs() + yhat.abs() + 2.0 * delta)
        }
        ErrorMetric::StabilisedRelative { delta } => diff / (y.abs() + delta),
        ErrorMetric::Absolute => diff,
    }
}

/// Aggregates per-record probabilities into the categorical RAPID score.
/// `baselines[c]` is the marginal proportion of class `c`; a NaN entry means
/// the class was absent from the supplied baselines.
pub fn rapid_categorical(
    probs: &[Vec<f64>],
    y_true: &[u32],
    baselines: &[f64],
    tau: f64,
) -> Result<RapidResult> {
    if !(0.0 < tau && tau < 1.0) {
        return Err(RapidError::InvalidThreshold(format!(
            "tau must lie in (0, 1), got {tau}"
        )));
    }
    if probs.len() != y_true.len() {
        return Err(RapidError::LengthMismatch(format!(
            "{} probability rows vs {} labels",
            probs.len(),
            y_true.len()
        )));
    }
    let mut records = Vec::with_capacity(probs.len());
    let mut n_at_risk = 0_usize;
    let mut n_correct = 0_usize;
    for (row, &y) in probs.iter().zip(y_true) {
        let y = y as usize;
        let b = *baselines
            .get(y)
            .filter(|b| b.is_finite())
            .ok_or_else(|| RapidError::ClassNotInBaseline(format!("class index {y}")))?;
        // a true class outside the attacker's class space gets g = 0: the
        // attacker literally cannot predict it
        let g = row.get(y).copied().unwrap_or(0.0);
        let r = normalized_gain(g, b);
        let at_risk = r > tau;
        n_at_risk += at_risk as usize;
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(c, _)| c);
        n_correct += (argmax == Some(y)) as usize;
        records.push(RecordRisk::Categorical(CategoricalRecordRisk {
            g,
            b,
            r,
            at_risk,
        }));
    }
    let n = records.len();
    Ok(RapidResult {
        score: if n == 0 { 0.0 } else { n_at_risk as f64 / n as f64 },
        n_at_risk,
        n_evaluated: n,
        records,
        tau: Some(tau),
        epsilon: None,
        metric: None,
        attacker: None,
        mode: EvaluationMode::AllRecords,
        n_excluded_missing_sensitive: 0,
        accuracy: Some(if n == 0 { 0.0 } else { n_correct as f64 / n as f64 }),
        mae: None,
        baselines: None,
        predicted: None,
        true_values: None,
        evaluated_rows: None,
    })
}

pub fn rapid_continuous(
    yhat: &[f64],
    y_true: &[f64],
    epsilon: f64,
    metric: &ErrorMetric,
) -> Result<RapidResult> {
    if epsilon <= 0.0 {
        return Err(RapidError::InvalidThreshold(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    metric.validate()?;
    if yhat.len() != y_true.len() {
        return Err(RapidError::LengthMismatch(format!(
            "{} predictions vs {} true values",
            yhat.len(),
            y_true.len()
        )));
    }
    let mut records = Vec::with_capacity(yhat.len());
    let mut n_at_risk = 0_usize;
    let mut abs_err_sum = 0.0;
    for (&p, &y) in yhat.iter().zip(y_true) {
        let e = prediction_error(y, p, metric);
        let at_risk = e < epsilon;
        n_at_risk += at_risk as usize;
        abs_err_sum += (y - p).abs();
        records.push(RecordRisk::Continuous(ContinuousRecordRisk { e, at_risk }));
    }
    let n = records.len();
    Ok(RapidResult {
        score: if n == 0 { 0.0 } else { n_at_risk as f64 / n as f64 },
        n_at_risk,
        n_evaluated: n,
        records,
        tau: None,
        epsilon: Some(epsilon),
        metric: Some(*metric),
        attacker: None,
        mode: EvaluationMode::AllRecords,
        n_excluded_missing_sensitive: 0,
        accuracy: None,
        mae: Some(if n == 0 { 0.0 } else { abs_err_sum / n as f64 }),
        baselines: None,
        predicted: None,
        true_values: None,
        evaluated_rows: None,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum BaselinePolicy {
    /// Marginals from every original record (default).
    AllOriginal,
    /// Marginals from the evaluated subset only (sensitivity analysis).
    TargetSubsetOnly,
    /// Caller-supplied marginals, e.g. training-fold marginals during CV.
    Provided(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssessOptions {
    pub tau: f64,
    pub epsilon: f64,
    pub metric: ErrorMetric,
    /// `None` scores all records; `Some(indices)` scores only the listed
    /// original rows (holdout mode).
    pub target_rows: Option<Vec<usize>>,
    pub baseline_policy: BaselinePolicy,
}

impl Default for AssessOptions {
    fn default() -> Self {
        AssessOptions {
            tau: 0.3,
            epsilon: 0.10,
            metric: ErrorMetric::default(),
            target_rows: None,
            baseline_policy: BaselinePolicy::AllOriginal,
        }
    }
}

/// End-to-end assessment: trains the attacker on the released data and
/// scores original records. Categorical quasi-identifier level spaces and
/// the sensitive level space are unioned across the two datasets first, so
/// training and scoring agree on one encoding.
pub fn rapid_assess(
    original: &Dataset,
    released: &Dataset,
    qi: &[String],
    sensitive: &str,
    spec: &AttackerSpec,
    options: &AssessOptions,
) -> Result<RapidResult> {
    let kind_orig = &original.column_def(sensitive)?.kind;
    let kind_rel = &released.column_def(sensitive)?.kind;
    if kind_orig.is_categorical() != kind_rel.is_categorical() {
        return Err(RapidError::IncompatibleKinds {
            column: sensitive.to_string(),
        });
    }
    if released.n() < 2 {
        return Err(RapidError::EmptyTraining);
    }
    let mut original = original.clone();
    let mut released = released.clone();
    let mut union_cols: Vec<&str> = qi
        .iter()
        .map(String::as_str)
        .filter(|c| {
            original
                .column_def(c)
                .map(|d| d.kind.is_categorical())
                .unwrap_or(false)
        })
        .collect();
    if kind_orig.is_categorical() {
        union_cols.push(sensitive);
    }
    for col in union_cols {
        let (o, r) = union_levels(&original, &released, col)?;
        original = o;
        released = r;
    }
    for name in qi {
        released.column_def(name)?; // qi must exist in the released data too
    }

    let model = learners::train(spec, &released, qi, sensitive)?;

    // target rows: drop records with a missing sensitive value
    let sensitive_col = original.column(sensitive)?;
    let candidates: Vec<usize> = match &options.target_rows {
        None => (0..original.n()).collect(),
        Some(rows) => {
            if rows.is_empty() {
                return Err(RapidError::EmptyTargetSet);
            }
            for &i in rows {
                if i >= original.n() {
                    return Err(RapidError::LengthMismatch(format!(
                        "holdout row {i} out of range (n = {})",
                        original.n()
                    )));
                }
            }
            rows.clone()
        }
    };
    let target_rows: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&i| !sensitive_col.is_missing(i))
        .collect();
    let n_excluded = candidates.len() - target_rows.len();
    if target_rows.is_empty() {
        return Err(RapidError::EmptyTargetSet);
    }
    let eval = original.subset(&target_rows);

    let mut result = if kind_orig.is_categorical() {
        let (levels, props) = match &options.baseline_policy {
            BaselinePolicy::AllOriginal => baseline_proportions(&original, sensitive)?,
            BaselinePolicy::TargetSubsetOnly => baseline_proportions(&eval, sensitive)?,
            BaselinePolicy::Provided(map) => {
                let ColumnKind::Categorical { levels } = &original.column_def(sensitive)?.kind
                else {
                    unreachable!()
                };
                let props = levels
                    .iter()
                    .map(|l| map.get(l).copied().unwrap_or(f64::NAN))
                    .collect();
                (levels.clone(), props)
            }
        };
        let ColumnData::Categorical(vals) = eval.column(sensitive)? else {
            unreachable!()
        };
        let y_true: Vec<u32> = vals.iter().map(|v| v.expect("filtered")).collect();
        let probs = learners::predict_proba(&model, &eval)?;
        let mut res = rapid_categorical(&probs, &y_true, &props, options.tau)?;
        res.predicted = Some(
            probs
                .iter()
                .map(|row| {
                    let argmax = row
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .map(|(c, _)| c)
                        .unwrap_or(0);
                    Predicted::Label(levels.get(argmax).cloned().unwrap_or_default())
                })
                .collect(),
        );
        res.true_values = Some(
            y_true
                .iter()
                .map(|&y| Predicted::Label(levels[y as usize].clone()))
                .collect(),
        );
        res.baselines = Some(
            levels
                .iter()
                .cloned()
                .zip(props.iter().copied())
                .filter(|(_, p)| p.is_finite())
                .collect(),
        );
        res
    } else {
        let ColumnData::Continuous(vals) = eval.column(sensitive)? else {
            unreachable!()
        };
        let y_true: Vec<f64> = vals.iter().map(|v| v.expect("filtered")).collect();
        let yhat = learners::predict_value(&model, &eval)?;
        let mut res = rapid_continuous(&yhat, &y_true, options.epsilon, &options.metric)?;
        res.predicted = Some(yhat.into_iter().map(Predicted::Value).collect());
        res.true_values = Some(y_true.into_iter().map(Predicted::Value).collect());
        res
    };
    result.attacker = Some(model.family);
    result.mode = if options.target_rows.is_some() {
        EvaluationMode::Holdout
    } else {
        EvaluationMode::AllRecords
    };
    result.n_excluded_missing_sensitive = n_excluded;
    result.evaluated_rows = Some(target_rows);
    Ok(result)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiModelSummary {
    pub mean_score: f64,
    pub max_score: f64,
    pub max_attacker: Option<AttackerFamily>,
    pub per_model: Vec<(Option<AttackerFamily>, f64)>,
}

/// Mean and conservative-envelope summary over an attacker suite.
pub fn aggregate_multi_model(results: &[RapidResult]) -> Result<MultiModelSummary> {
    let first = results
        .first()
        .ok_or_else(|| RapidError::EmptyInput("no results to aggregate".into()))?;
    for r in &results[1..] {
        if r.tau != first.tau
            || r.epsilon != first.epsilon
            || r.mode != first.mode
            || r.n_evaluated != first.n_evaluated
        {
            return Err(RapidError::MixedConfigurations(
                "results differ in thresholds, mode, or target set".into(),
            ));
        }
    }
    let mean_score = results.iter().map(|r| r.score).sum::<f64>() / results.len() as f64;
    let (max_attacker, max_score) = results
        .iter()
        .map(|r| (r.attacker, r.score))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    Ok(MultiModelSummary {
        mean_score,
        max_score,
        max_attacker,
        per_model: results.iter().map(|r| (r.attacker, r.score)).collect(),
    })
}
