//! Encoding of dataset columns into the numeric feature frames the learners
//! consume. The encoder is fitted on training data and stored inside the
//! trained model so prediction applies the same missing-value policy:
//! categorical missing values become a reserved extra level, continuous
//! missing values are imputed with the training median.

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnData, ColumnKind, Dataset};
use crate::error::{RapidError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub columns: Vec<EncoderColumn>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncoderColumn {
    pub name: String,
    pub enc: Enc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Enc {
    /// `n_levels` includes the reserved missing slot (index `n_levels - 1`).
    Cat { n_levels: usize },
    Num { impute: f64 },
}

/// Numeric view of a set of encoded columns.
pub struct FeatureFrame {
    pub n: usize,
    pub cols: Vec<FeatureColumn>,
}

pub enum FeatureColumn {
    /// Level indices. Values may exceed `n_levels` when the scored data carry
    /// levels unseen at training time; consumers must route those explicitly.
    Cat { values: Vec<u32>, n_levels: usize },
    Num(Vec<f64>),
}

impl FeatureEncoder {
    pub fn fit(data: &Dataset, columns: &[String]) -> Result<FeatureEncoder> {
        let mut out = Vec::with_capacity(columns.len());
        for name in columns {
            let def = data.column_def(name)?;
            let col = data.column(name)?;
            let enc = match (&def.kind, col) {
                (ColumnKind::Categorical { levels }, ColumnData::Categorical(_)) => Enc::Cat {
                    n_levels: levels.len() + 1,
                },
                (ColumnKind::Continuous, ColumnData::Continuous(vals)) => {
                    let mut present: Vec<f64> = vals.iter().flatten().copied().collect();
                    let impute = if present.is_empty() {
                        0.0
                    } else {
                        present.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        let m = present.len();
                        if m % 2 == 1 {
                            present[m / 2]
                        } else {
                            0.5 * (present[m / 2 - 1] + present[m / 2])
                        }
                    };
                    Enc::Num { impute }
                }
                _ => unreachable!("dataset construction enforces kind/storage agreement"),
            };
            out.push(EncoderColumn {
                name: name.clone(),
                enc,
            });
        }
        Ok(FeatureEncoder { columns: out })
    }

    pub fn encode(&self, data: &Dataset) -> Result<FeatureFrame> {
        let mut cols = Vec::with_capacity(self.columns.len());
        for ec in &self.columns {
            let def = data.column_def(&ec.name)?;
            let col = data.column(&ec.name)?;
            match (&ec.enc, &def.kind, col) {
                (Enc::Cat { n_levels }, ColumnKind::Categorical { .. }, ColumnData::Categorical(vals)) => {
                    let missing = (*n_levels - 1) as u32;
                    cols.push(FeatureColumn::Cat {
                        values: vals.iter().map(|v| v.unwrap_or(missing)).collect(),
                        n_levels: *n_levels,
                    });
                }
                (Enc::Num { impute }, ColumnKind::Continuous, ColumnData::Continuous(vals)) => {
                    cols.push(FeatureColumn::Num(
                        vals.iter().map(|v| v.unwrap_or(*impute)).collect(),
                    ));
                }
                _ => {
                    return Err(RapidError::SchemaMismatch(format!(
                        "column {:?} has a different kind than at training time",
                        ec.name
                    )))
                }
            }
        }
        Ok(FeatureFrame { n: data.n(), cols })
    }
}

/// Training target extracted from a dataset column. Rows with a missing
/// target are the caller's responsibility to filter out beforehand.
pub enum Target {
    Classes { values: Vec<u32>, n_classes: usize },
    Reals(Vec<f64>),
}

impl Target {
    pub fn len(&self) -> usize {
        match self {
            Target::Classes { values, .. } => values.len(),
            Target::Reals(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
