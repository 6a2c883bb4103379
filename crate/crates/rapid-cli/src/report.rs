//! JSON report assembly: input digests, configuration echo, and result
//! summaries. Reports are byte-reproducible for fixed inputs and seed except
//! for the timing field.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use rapid_core::learners::AttackerFamily;
use rapid_core::risk::RapidResult;
use rapid_core::uncertainty::IntervalEstimate;

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn digest_file(path: &Path) -> Result<InputDigest, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: format!("{:x}", hasher.finalize()),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalBlock {
    pub bootstrap: IntervalEstimate,
    pub wilson: IntervalEstimate,
    pub clopper_pearson: IntervalEstimate,
}

/// Summary of one assessment (one released replicate under one attacker).
#[derive(Debug, Clone, Serialize)]
pub struct AssessmentSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attacker: Option<AttackerFamily>,
    pub score: f64,
    pub n_at_risk: usize,
    pub n_evaluated: usize,
    pub n_excluded_missing_sensitive: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baselines: Option<BTreeMap<String, f64>>,
    pub intervals: IntervalBlock,
}

impl AssessmentSummary {
    pub fn from_result(
        res: &RapidResult,
        boot: usize,
        level: f64,
        seed: u64,
    ) -> Result<AssessmentSummary, CliError> {
        let flags: Vec<bool> = res.records.iter().map(|r| r.at_risk()).collect();
        let intervals = IntervalBlock {
            bootstrap: rapid_core::uncertainty::bootstrap_ci(&flags, boot, level, seed)?,
            wilson: rapid_core::uncertainty::wilson_interval(
                res.n_at_risk,
                res.n_evaluated,
                level,
            )?,
            clopper_pearson: rapid_core::uncertainty::clopper_pearson_interval(
                res.n_at_risk,
                res.n_evaluated,
                level,
            )?,
        };
        Ok(AssessmentSummary {
            attacker: res.attacker,
            score: res.score,
            n_at_risk: res.n_at_risk,
            n_evaluated: res.n_evaluated,
            n_excluded_missing_sensitive: res.n_excluded_missing_sensitive,
            accuracy: res.accuracy,
            mae: res.mae,
            baselines: res.baselines.clone(),
            intervals,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report<C: Serialize, R: Serialize> {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub config: C,
    pub results: R,
    /// Wall-clock duration; excluded from reproducibility comparisons.
    pub timing_ms: u128,
}

pub fn write_report<C: Serialize, R: Serialize>(
    report: &Report<C, R>,
    path: Option<&Path>,
) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Data(format!("report serialization: {e}")))?;
    match path {
        Some(p) => std::fs::write(p, text + "\n")
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", p.display())))?,
        None => println!("{text}"),
    }
    Ok(())
}

pub fn report<C: Serialize, R: Serialize>(
    command: &str,
    inputs: Vec<InputDigest>,
    config: C,
    results: R,
    started: std::time::Instant,
) -> Report<C, R> {
    Report {
        tool: "rapid".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        inputs,
        config,
        results,
        timing_ms: started.elapsed().as_millis(),
    }
}
