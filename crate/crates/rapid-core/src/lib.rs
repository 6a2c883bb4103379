//! Measures attribute-inference disclosure risk of a released tabular
//! dataset against the original data: attacker models are trained on the
//! release, scored on real records, and summarized as the proportion of
//! records whose inference beats a baseline by more than a policy threshold.

pub mod attribution;
pub mod calibration;
pub mod dataset;
pub mod error;
pub mod learners;
pub mod risk;
pub mod simgen;
pub mod stats;
pub mod synthesizer;
pub mod uncertainty;

pub use dataset::{ColumnData, ColumnDef, ColumnKind, Dataset, FoldAssignment, Role, Schema};
pub use error::{RapidError, Result};
pub use learners::{AttackerFamily, AttackerModel, AttackerSpec, TrainedAttacker};
pub use risk::{RapidResult, RecordRisk};
