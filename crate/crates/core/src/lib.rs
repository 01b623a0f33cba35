//! Resilience-capacity learning for production lines.
//!
//! The crate answers "which combinations of machine degradation still let
//! the line meet its demand?" and uses the answer for remaining-useful-life
//! prognostics:
//!
//! - [`line_model`] describes the line and builds its LP/MILP models,
//! - [`lp`] is the simplex solver behind every feasibility query,
//! - [`oracle`] labels degradation vectors and finds boundary points,
//! - [`learner`] learns the capacity (dominance baseline, random forest with
//!   entropy-guided sampling) and measures it,
//! - [`phm`] fits degradation forecasts and turns them into RUL
//!   distributions,
//! - [`cli`] wires everything into the `rescap` command.

pub mod cli;
pub mod learner;
pub mod line_model;
pub mod lp;
pub mod oracle;
pub mod phm;
pub mod seed;
pub mod textfmt;
