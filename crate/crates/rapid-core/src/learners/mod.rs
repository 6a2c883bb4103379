//! Attacker models behind one pluggable interface: CART trees, random
//! forests with averaged class probabilities, and L1-regularized multinomial
//! logistic regression.

pub mod features;
pub mod forest;
pub mod logistic;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnData, ColumnKind, Dataset};
use crate::error::{RapidError, Result};
use features::{FeatureEncoder, Target};
use forest::{Forest, ForestParams};
use logistic::{LogisticModel, LogisticParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tree::{Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackerFamily {
    Cart,
    RandomForest,
    LogisticL1,
}

impl std::fmt::Display for AttackerFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AttackerFamily::Cart => write!(f, "cart"),
            AttackerFamily::RandomForest => write!(f, "random_forest"),
            AttackerFamily::LogisticL1 => write!(f, "logistic_l1"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum AttackerModel {
    Cart(TreeParams),
    RandomForest(ForestParams),
    LogisticL1(LogisticParams),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackerSpec {
    pub model: AttackerModel,
    pub rng_seed: u64,
}

impl AttackerSpec {
    pub fn cart(rng_seed: u64) -> AttackerSpec {
        AttackerSpec {
            model: AttackerModel::Cart(TreeParams::default()),
            rng_seed,
        }
    }

    pub fn forest(rng_seed: u64) -> AttackerSpec {
        AttackerSpec {
            model: AttackerModel::RandomForest(ForestParams::default()),
            rng_seed,
        }
    }

    pub fn forest_with(n_trees: usize, rng_seed: u64) -> AttackerSpec {
        AttackerSpec {
            model: AttackerModel::RandomForest(ForestParams {
                n_trees,
                ..ForestParams::default()
            }),
            rng_seed,
        }
    }

    pub fn logistic(rng_seed: u64) -> AttackerSpec {
        AttackerSpec {
            model: AttackerModel::LogisticL1(LogisticParams::default()),
            rng_seed,
        }
    }

    pub fn family(&self) -> AttackerFamily {
        match &self.model {
            AttackerModel::Cart(_) => AttackerFamily::Cart,
            AttackerModel::RandomForest(_) => AttackerFamily::RandomForest,
            AttackerModel::LogisticL1(_) => AttackerFamily::LogisticL1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let problem = match &self.model {
            AttackerModel::Cart(p) => {
                (p.min_leaf < 1 || p.min_split < 1).then(|| "cart size limits must be >= 1")
            }
            AttackerModel::RandomForest(p) => (p.n_trees < 1 || p.min_leaf < 1 || p.min_split < 1)
                .then(|| "forest needs n_trees >= 1 and size limits >= 1"),
            AttackerModel::LogisticL1(p) => {
                (p.lambda < 0.0 || p.max_iter < 1).then(|| "logistic needs lambda >= 0")
            }
        };
        match problem {
            Some(msg) => Err(RapidError::Schema(msg.to_string())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TargetKind {
    Categorical { levels: Vec<String> },
    Continuous,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Fitted {
    Tree(Tree),
    Forest(Forest),
    Logistic(LogisticModel),
}

/// A fitted attacker. Immutable; prediction is a pure function of the model
/// and the input rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedAttacker {
    pub family: AttackerFamily,
    pub qi_columns: Vec<String>,
    pub target_column: String,
    pub target: TargetKind,
    encoder: FeatureEncoder,
    fitted: Fitted,
}

/// Serialization wrapper; the format is versioned but not promised stable.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    model: TrainedAttacker,
}

impl TrainedAttacker {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })
        .expect("model serialization")
    }

    pub fn from_json(text: &str) -> Result<TrainedAttacker> {
        let doc: ModelDocument = serde_json::from_str(text)
            .map_err(|e| RapidError::Schema(format!("model JSON: {e}")))?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(RapidError::Schema(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        Ok(doc.model)
    }

    pub fn is_categorical_target(&self) -> bool {
        matches!(self.target, TargetKind::Categorical { .. })
    }

    pub fn n_classes(&self) -> Option<usize> {
        match &self.target {
            TargetKind::Categorical { levels } => Some(levels.len()),
            TargetKind::Continuous => None,
        }
    }
}

/// Trains an attacker of the given family on `train_data`, predicting
/// `target` from `qi_columns`. Rows with a missing target are dropped.
pub fn train(
    spec: &AttackerSpec,
    train_data: &Dataset,
    qi_columns: &[String],
    target: &str,
) -> Result<TrainedAttacker> {
    spec.validate()?;
    let target_def = train_data.column_def(target)?;
    let target_col = train_data.column(target)?;
    let keep: Vec<usize> = (0..train_data.n())
        .filter(|&i| !target_col.is_missing(i))
        .collect();
    if keep.len() < 2 {
        return Err(RapidError::EmptyTraining);
    }
    let data = if keep.len() == train_data.n() {
        train_data.clone()
    } else {
        train_data.subset(&keep)
    };
    let encoder = FeatureEncoder::fit(&data, qi_columns)?;
    let frame = encoder.encode(&data)?;

    let (target_kind, target_values) = match (&target_def.kind, data.column(target)?) {
        (ColumnKind::Categorical { levels }, ColumnData::Categorical(vals)) => {
            let values: Vec<u32> = vals.iter().map(|v| v.expect("filtered")).collect();
            let kind = TargetKind::Categorical {
                levels: levels.clone(),
            };
            (kind, Target::Classes {
                values,
                n_classes: levels.len(),
            })
        }
        (ColumnKind::Continuous, ColumnData::Continuous(vals)) => (
            TargetKind::Continuous,
            Target::Reals(vals.iter().map(|v| v.expect("filtered")).collect()),
        ),
        _ => unreachable!(),
    };

    let fitted = match (&spec.model, &target_values) {
        (AttackerModel::LogisticL1(_), Target::Reals(_)) => {
            return Err(RapidError::SchemaMismatch(format!(
                "logistic attacker requires a categorical target, {target:?} is continuous"
            )))
        }
        (AttackerModel::LogisticL1(params), Target::Classes { values, n_classes }) => {
            let mut observed = vec![false; *n_classes];
            for &v in values {
                observed[v as usize] = true;
            }
            if observed.iter().filter(|&&o| o).count() < 2 {
                return Err(RapidError::DegenerateTarget(target.to_string()));
            }
            Fitted::Logistic(LogisticModel::fit(&frame, values, *n_classes, params))
        }
        (AttackerModel::Cart(params), _) => {
            let rows: Vec<u32> = (0..frame.n as u32).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
            Fitted::Tree(Tree::fit(&frame, &target_values, &rows, params, &mut rng))
        }
        (AttackerModel::RandomForest(params), _) => {
            Fitted::Forest(Forest::fit(&frame, &target_values, params, spec.rng_seed))
        }
    };

    Ok(TrainedAttacker {
        family: spec.family(),
        qi_columns: qi_columns.to_vec(),
        target_column: target.to_string(),
        target: target_kind,
        encoder,
        fitted,
    })
}

/// Class-probability matrix (rows x classes) for a categorical-target model.
pub fn predict_proba(model: &TrainedAttacker, rows: &Dataset) -> Result<Vec<Vec<f64>>> {
    let Some(_) = model.n_classes() else {
        return Err(RapidError::SchemaMismatch(
            "predict_proba requires a categorical target".into(),
        ));
    };
    let frame = model.encoder.encode(rows)?;
    Ok(match &model.fitted {
        Fitted::Tree(tree) => (0..frame.n)
            .map(|i| tree.predict_proba_row(&frame, i))
            .collect(),
        Fitted::Forest(forest) => (0..frame.n)
            .map(|i| forest.predict_proba_row(&frame, i))
            .collect(),
        Fitted::Logistic(model) => model.predict_proba(&frame),
    })
}

/// Point predictions for a continuous-target model.
pub fn predict_value(model: &TrainedAttacker, rows: &Dataset) -> Result<Vec<f64>> {
    if model.is_categorical_target() {
        return Err(RapidError::SchemaMismatch(
            "predict_value requires a continuous target".into(),
        ));
    }
    let frame = model.encoder.encode(rows)?;
    Ok(match &model.fitted {
        Fitted::Tree(tree) => (0..frame.n)
            .map(|i| tree.predict_value_row(&frame, i))
            .collect(),
        Fitted::Forest(forest) => (0..frame.n)
            .map(|i| forest.predict_value_row(&frame, i))
            .collect(),
        Fitted::Logistic(_) => unreachable!("logistic never has a continuous target"),
    })
}
