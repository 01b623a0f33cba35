//! Entropy-guided active learning of the capacity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dominance::balance_samples;
use super::entropy::{entropy_argmax, SearchParams};
use super::forest::{train_forest, ForestModel, ForestParams};
use super::sample::{LabeledSample, SampleSet, Source};
use super::LearnerError;
use crate::line_model::Degradation;
use crate::oracle::{Label, Oracle, OracleBudget, OracleError};
use crate::seed::{self, streams};

/// Queries closer than this (ℓ∞) to a known sample are replaced by a random one.
pub const DUPLICATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActiveParams {
    pub retrain_every: usize,
    /// Charge the axis-maximization LPs against the budget.
    pub charge_seeds: bool,
    pub forest: ForestParams,
    pub search: SearchParams,
}

impl Default for ActiveParams {
    fn default() -> Self {
        Self {
            retrain_every: 1,
            charge_seeds: false,
            forest: ForestParams::default(),
            search: SearchParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ActiveOutcome {
    pub model: ForestModel,
    pub samples: SampleSet,
    /// Oracle queries made after seeding, in order.
    pub queries: Vec<Vec<f64>>,
    /// Queries that replaced a duplicate or degenerate entropy maximizer.
    pub random_queries: usize,
    pub retrains: usize,
}

/// The seed set: each axis boundary point, the infeasible point
/// `b + (1−b)/2` beyond it (it dominates a point past the axis maximum),
/// and the origin.
fn seed_samples(
    oracle: &Oracle,
    budget: Option<&OracleBudget>,
) -> Result<SampleSet, LearnerError> {
    let dim = oracle.dim();
    let mut s = SampleSet::new();
    for axis in 0..dim {
        let b = oracle.maximize_direction(axis, budget)?.into_inner();
        if b[axis] < 1.0 {
            let beyond = b.iter().map(|v| v + (1.0 - v) / 2.0).collect();
            s.push(LabeledSample::new(b, Label::Feasible, Source::AxisSeed));
            s.push(LabeledSample::new(beyond, Label::Infeasible, Source::BalancedDerived));
        } else {
            s.push(LabeledSample::new(b, Label::Feasible, Source::AxisSeed));
        }
    }
    s.push(LabeledSample::new(vec![0.0; dim], Label::Feasible, Source::AxisSeed));
    Ok(s)
}

fn near_known(samples: &SampleSet, q: &[f64]) -> bool {
    samples.iter().any(|s| {
        s.d.iter()
            .zip(q)
            .all(|(a, b)| (a - b).abs() <= DUPLICATE_TOL)
    })
}

/// Runs the loop until the budget is spent: query the entropy maximizer of
/// the current forest, label it, add its balanced derivative, retrain every
/// `retrain_every` queries.
pub fn active_learn(
    oracle: &Oracle,
    budget: &OracleBudget,
    params: &ActiveParams,
    seed: u64,
) -> Result<ActiveOutcome, LearnerError> {
    let dim = oracle.dim();
    if budget.remaining() < dim + 1 {
        return Err(LearnerError::BudgetTooSmall {
            budget: budget.remaining(),
            required: dim + 1,
        });
    }
    if params.retrain_every == 0 {
        return Err(LearnerError::Invalid("retrain_every must be positive".into()));
    }
    let mut samples = seed_samples(oracle, params.charge_seeds.then_some(budget))?;
    let mut queries = Vec::new();
    let mut random_queries = 0;
    let mut round = 0u64;

    let mut ask = |samples: &mut SampleSet, q: Vec<f64>| -> Result<bool, LearnerError> {
        let d = Degradation::new(q)?;
        match oracle.check_feasibility(&d, budget) {
            Ok(r) => {
                let s = LabeledSample::new(d.into_inner(), r.label, Source::OracleQuery);
                let derived = balance_samples(&s);
                queries.push(s.d.clone());
                samples.push(s);
                samples.extend(derived);
                Ok(true)
            }
            Err(OracleError::BudgetExhausted(_)) => Ok(false),
            Err(e) => Err(e.into()),
        }
    };
    let uniform = |round: u64| -> Vec<f64> {
        let mut r = seed::rng(seed::derive(seed, streams::QUERY_FALLBACK, round));
        (0..dim).map(|_| r.random::<f64>()).collect()
    };

    // Seeds of a single class (no axis binds) cannot train a forest yet.
    while samples.class_counts().contains(&0) {
        if !ask(&mut samples, uniform(round))? {
            return Err(LearnerError::SingleClass {
                counts: samples.class_counts(),
            });
        }
        random_queries += 1;
        round += 1;
    }

    let train = |samples: &SampleSet, round: u64| {
        train_forest(
            samples,
            &params.forest,
            seed::derive(seed, streams::TRAINING, round),
        )
    };
    let mut model = train(&samples, round)?;
    let mut retrains = 1;
    let mut pending = 0;
    while !budget.is_exhausted() {
        let found = entropy_argmax(
            &model,
            &params.search,
            seed::derive(seed, streams::ACTIVE_ROUND, round),
        )?;
        let q = if found.degenerate || near_known(&samples, &found.point) {
            random_queries += 1;
            uniform(round)
        } else {
            found.point
        };
        if !ask(&mut samples, q)? {
            break;
        }
        round += 1;
        pending += 1;
        if pending == params.retrain_every {
            model = train(&samples, round)?;
            retrains += 1;
            pending = 0;
        }
    }
    if pending > 0 {
        model = train(&samples, round)?;
        retrains += 1;
    }
    Ok(ActiveOutcome {
        model,
        samples,
        queries,
        random_queries,
        retrains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::line_model::preset;

    fn analytic() -> Oracle {
        Oracle::new(preset("analytic2").unwrap()).unwrap()
    }

    #[test]
    fn seeds_hold_both_classes() {
        let s = seed_samples(&analytic(), None).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.class_counts(), [2, 3]);
        s.check_consistency().unwrap();
        let o = analytic();
        for x in &s {
            assert_eq!(o.label(&x.d).unwrap(), x.label);
        }
    }

    #[test]
    fn minimal_budget_still_returns_a_model() {
        let o = analytic();
        let p = ActiveParams {
            charge_seeds: true,
            ..Default::default()
        };
        let b = OracleBudget::new(3);
        let out = active_learn(&o, &b, &p, 1).unwrap();
        assert_eq!(out.queries.len(), 1);
        assert_eq!(b.used(), 3);
        assert_eq!(o.lp_solves(), 3);
        assert!(out.model.predict_proba(&[0.0, 0.0]).unwrap() >= 0.5);
    }

    #[test]
    fn uncharged_seeds_leave_the_budget_for_queries() {
        let o = analytic();
        let b = OracleBudget::new(5);
        let out = active_learn(&o, &b, &ActiveParams::default(), 2).unwrap();
        assert_eq!(out.queries.len(), 5);
        assert_eq!(out.samples.iter().filter(|s| s.source == Source::OracleQuery).count(), 5);
        out.samples.check_consistency().unwrap();
    }

    #[test]
    fn derived_labels_agree_with_the_oracle() {
        let o = Oracle::new(preset("desk6").unwrap()).unwrap();
        let p = ActiveParams {
            forest: ForestParams {
                n_trees: 20,
                ..Default::default()
            },
            search: SearchParams {
                restarts: 8,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = active_learn(&o, &OracleBudget::new(15), &p, 3).unwrap();
        for s in &out.samples {
            assert_eq!(o.label(&s.d).unwrap(), s.label, "{:?}", s);
        }
    }

    #[test]
    fn budget_below_n_plus_one_is_rejected() {
        assert!(matches!(
            active_learn(&analytic(), &OracleBudget::new(2), &ActiveParams::default(), 0),
            Err(LearnerError::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn zero_demand_never_sees_an_infeasible_point() {
        let mut line = preset("analytic2").unwrap();
        line.parts[0].demand_quantity = 0.0;
        let o = Oracle::new(line).unwrap();
        assert!(matches!(
            active_learn(&o, &OracleBudget::new(4), &ActiveParams::default(), 0),
            Err(LearnerError::SingleClass { .. })
        ));
    }
}
