//! Prognostics: simulated degradation, forecast fitting and RUL.

mod forecast;
mod rul;
mod truth;

use thiserror::Error;

use crate::learner::LearnerError;
use crate::oracle::OracleError;

pub use forecast::{
    fit_forecast, sample_trajectory, ForecastModel, MachineForecast, Trajectory, LOG_FLOOR,
};
pub use rul::{
    pmf_from_probabilities, rul_over_time, rul_pmf, rul_summary, rul_summary_with,
    truth_exit_time, PhmRunParams, RulDistribution, RulPoint, RulSummary, DEFAULT_BAND,
    GROUND_TRUTH_TOL,
};
pub use truth::{
    simulate_diagnosis, simulate_truth, DiagnosisSeries, MachineTruth, TruthParams, TruthPoint,
};

#[derive(Debug, Error)]
pub enum PhmError {
    #[error("machine {machine}: only {usable} usable observations, need 3")]
    NotEnoughData { machine: usize, usable: usize },
    #[error("machine {machine}: all observation times coincide")]
    SingularDesign { machine: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}
