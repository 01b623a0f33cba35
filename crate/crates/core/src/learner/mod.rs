//! Learning the resilience capacity from oracle answers.

mod active;
mod baseline;
mod dominance;
mod entropy;
pub mod forest;
mod eval;
mod sample;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::line_model::LineError;
use crate::oracle::{Label, Oracle, OracleError};

pub use active::{active_learn, ActiveOutcome, ActiveParams, DUPLICATE_TOL};
pub use baseline::{baseline_build, BaselineModel, BaselineOutcome};
pub use dominance::{balance_samples, dominance_label, DominanceModel};
pub use entropy::{binary_entropy, entropy_argmax, EntropyArgmax, SearchParams};
pub use eval::{
    classification_report, estimate_volume, generate_test_set, predict_all, ClassMetrics,
    ClassificationReport, Confusion, VolumeEstimate,
};
pub use forest::{train_forest, ForestModel, ForestParams};
pub use sample::{dominated_by, LabeledSample, SampleSet, Source};

/// Probabilities at or above this are read as feasible.
pub const THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("infeasible sample {infeasible} lies below feasible sample {feasible}")]
    MonotonicityConflict { feasible: usize, infeasible: usize },
    #[error("training data holds a single class (infeasible {}, feasible {})", counts[0], counts[1])]
    SingleClass { counts: [usize; 2] },
    #[error("budget {budget} is below the required {required}")]
    BudgetTooSmall { budget: usize, required: usize },
    #[error(
        "a class is (nearly) empty: {draws} draws gave infeasible {}, feasible {}",
        counts[0],
        counts[1]
    )]
    TestSetRejection { draws: usize, counts: [usize; 2] },
    #[error("{0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<LineError> for LearnerError {
    fn from(e: LineError) -> Self {
        LearnerError::Oracle(OracleError::Line(e))
    }
}

/// A probabilistic membership model of the capacity.
pub trait Classifier: Sync {
    fn dim(&self) -> usize;

    fn predict_proba(&self, d: &[f64]) -> Result<f64, LearnerError>;

    fn predict(&self, d: &[f64]) -> Result<Label, LearnerError> {
        Ok(Label::from_bool(self.predict_proba(d)? >= THRESHOLD))
    }
}

/// The exact oracle seen as a 0/1 classifier. Queries are not charged.
#[derive(Debug, Clone, Copy)]
pub struct OracleClassifier<'a>(pub &'a Oracle);

impl Classifier for OracleClassifier<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn predict_proba(&self, d: &[f64]) -> Result<f64, LearnerError> {
        Ok(self.0.label(d)?.as_u8() as f64)
    }
}

/// A learned model as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CapacityModel {
    Active(ForestModel),
    Baseline(BaselineModel),
}

impl CapacityModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnerError> {
        let m: Self = serde_json::from_str(text).map_err(|e| LearnerError::Parse(e.to_string()))?;
        match &m {
            CapacityModel::Active(f) => f.validate()?,
            CapacityModel::Baseline(b) => b.validate()?,
        }
        Ok(m)
    }
}

impl Classifier for CapacityModel {
    fn dim(&self) -> usize {
        match self {
            CapacityModel::Active(f) => f.dim,
            CapacityModel::Baseline(b) => b.dim,
        }
    }

    fn predict_proba(&self, d: &[f64]) -> Result<f64, LearnerError> {
        match self {
            CapacityModel::Active(f) => f.predict_proba(d),
            CapacityModel::Baseline(b) => Classifier::predict_proba(b, d),
        }
    }
}

/// Share of test points whose predicted label matches.
pub fn accuracy<C: Classifier + ?Sized>(predictor: &C, test: &SampleSet) -> Result<f64, LearnerError> {
    Ok(classification_report(predictor, test)?.accuracy)
}
