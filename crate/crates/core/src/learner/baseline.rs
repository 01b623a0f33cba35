//! Boundary-sampling baseline with a dominance classifier.
//!
//! Boundary points come from maximizing each coordinate alone, then from
//! extending the average of two random boundary points along its ray. A
//! point is predicted feasible when some boundary point dominates it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sample::{dominated_by, LabeledSample, SampleSet, Source};
use super::{Classifier, LearnerError};
use crate::oracle::{Label, Oracle, OracleBudget, OracleError};
use crate::seed::{self, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineModel {
    pub dim: usize,
    /// Known feasible boundary points.
    pub boundary: Vec<Vec<f64>>,
    /// Label when no boundary point dominates the query.
    pub default: Label,
}

impl BaselineModel {
    pub fn label(&self, d: &[f64]) -> Result<Label, LearnerError> {
        if d.len() != self.dim {
            return Err(LearnerError::DimensionMismatch {
                expected: self.dim,
                got: d.len(),
            });
        }
        Ok(if self.boundary.iter().any(|b| dominated_by(d, b)) {
            Label::Feasible
        } else {
            self.default
        })
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        if let Some(b) = self.boundary.iter().find(|b| b.len() != self.dim) {
            return Err(LearnerError::DimensionMismatch {
                expected: self.dim,
                got: b.len(),
            });
        }
        Ok(())
    }
}

impl Classifier for BaselineModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_proba(&self, d: &[f64]) -> Result<f64, LearnerError> {
        Ok(self.label(d)?.as_u8() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub model: BaselineModel,
    pub samples: SampleSet,
    /// The budget ran out before the axis points were all found.
    pub partial: bool,
}

/// Spends the whole budget on boundary points. Every point costs one call.
pub fn baseline_build(
    oracle: &Oracle,
    budget: &OracleBudget,
    seed: u64,
) -> Result<BaselineOutcome, LearnerError> {
    let dim = oracle.dim();
    if budget.remaining() < dim {
        return Err(LearnerError::BudgetTooSmall {
            budget: budget.remaining(),
            required: dim,
        });
    }
    let mut samples = SampleSet::new();
    let finish = |samples: SampleSet, partial| {
        let model = BaselineModel {
            dim,
            boundary: samples.iter().map(|s| s.d.clone()).collect(),
            default: Label::Infeasible,
        };
        Ok(BaselineOutcome {
            model,
            samples,
            partial,
        })
    };

    // Without demand the whole cube is feasible and its corner is the
    // single boundary point that says so.
    if !oracle.line().has_demand() {
        let ones = crate::line_model::Degradation::new(vec![1.0; dim])?;
        let r = oracle.check_feasibility(&ones, budget)?;
        samples.push(LabeledSample::new(ones.into_inner(), r.label, Source::OracleQuery));
        return finish(samples, false);
    }

    for axis in 0..dim {
        match oracle.maximize_direction(axis, Some(budget)) {
            Ok(p) => samples.push(LabeledSample::new(p.into_inner(), Label::Feasible, Source::AxisSeed)),
            Err(OracleError::BudgetExhausted(_)) => return finish(samples, true),
            Err(e) => return Err(e.into()),
        }
    }

    let mut rng = seed::rng(seed::derive(seed, streams::PAIR, 0));
    while !budget.is_exhausted() {
        let n = samples.len();
        let dir: Vec<f64> = if n >= 2 {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            samples.samples[a]
                .d
                .iter()
                .zip(&samples.samples[b].d)
                .map(|(x, y)| (x + y) / 2.0)
                .collect()
        } else {
            Vec::new()
        };
        // Degenerate pairs (both at the origin, or a 1-D line) fall back to a
        // uniform random direction.
        let dir = if dir.iter().any(|&v| v > 0.0) {
            dir
        } else {
            (0..dim).map(|_| rng.random::<f64>() + f64::MIN_POSITIVE).collect()
        };
        match oracle.extend_ray(&dir, Some(budget)) {
            Ok(p) => samples.push(LabeledSample::new(p.into_inner(), Label::Feasible, Source::OracleQuery)),
            Err(OracleError::BudgetExhausted(_)) => break,
            Err(e) => return Err(e.into()),
        }
    }
    finish(samples, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::line_model::preset;

    fn analytic() -> Oracle {
        Oracle::new(preset("analytic2").unwrap()).unwrap()
    }

    #[test]
    fn two_axis_points_miss_the_interior() {
        let o = analytic();
        let b = OracleBudget::new(2);
        let out = baseline_build(&o, &b, 0).unwrap();
        assert_eq!(out.model.boundary.len(), 2);
        assert!((out.model.boundary[0][0] - 0.8).abs() < 1e-9);
        assert!((out.model.boundary[1][1] - 0.8).abs() < 1e-9);
        // Truly feasible, but nothing dominates it.
        assert_eq!(out.model.label(&[0.4, 0.4]).unwrap(), Label::Infeasible);
        assert_eq!(out.model.label(&[0.3, 0.0]).unwrap(), Label::Feasible);
        assert_eq!(b.used(), 2);
    }

    #[test]
    fn third_point_comes_from_the_diagonal_ray() {
        let o = analytic();
        let b = OracleBudget::new(3);
        let out = baseline_build(&o, &b, 0).unwrap();
        let p = &out.model.boundary[2];
        assert!((p[0] - 0.4).abs() < 1e-9 && (p[1] - 0.4).abs() < 1e-9);
        assert_eq!(out.model.label(&[0.3, 0.3]).unwrap(), Label::Feasible);
        assert_eq!(b.used(), 3);
        assert_eq!(o.lp_solves(), 3);
    }

    #[test]
    fn zero_demand_labels_everything_feasible() {
        let mut line = preset("desk6").unwrap();
        line.parts.iter_mut().for_each(|p| p.demand_quantity = 0.0);
        let o = Oracle::new(line).unwrap();
        let out = baseline_build(&o, &OracleBudget::new(6), 0).unwrap();
        let mut r = seed::rng(0);
        for _ in 0..100 {
            let d: Vec<f64> = (0..6).map(|_| r.random::<f64>()).collect();
            assert_eq!(out.model.label(&d).unwrap(), Label::Feasible);
        }
    }

    #[test]
    fn budget_below_dimension_is_rejected() {
        let o = Oracle::new(preset("desk6").unwrap()).unwrap();
        assert!(matches!(
            baseline_build(&o, &OracleBudget::new(5), 0),
            Err(LearnerError::BudgetTooSmall { budget: 5, required: 6 })
        ));
    }

    #[test]
    fn boundary_points_are_feasible_and_deterministic() {
        let o = Oracle::new(preset("desk6").unwrap()).unwrap();
        let a = baseline_build(&o, &OracleBudget::new(20), 4).unwrap();
        let b = baseline_build(&o, &OracleBudget::new(20), 4).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.samples.len(), 20);
        for p in &a.model.boundary {
            assert!(o.label(p).unwrap().is_feasible());
        }
    }
}
