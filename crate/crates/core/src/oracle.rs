//! Feasibility oracle over degradation space.
//!
//! A degradation vector is feasible when the aggregated LP relaxation of
//! the line is feasible. The relaxation is a necessary condition for a valid
//! schedule, so an `Infeasible` answer is a proof that no schedule exists.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::line_model::{
    build_aggregated_lp, build_axis_lp, build_ray_lp, Degradation, LineConfig, LineError,
};
use crate::lp::{solve, LpError, LpProblem, LpStatus};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle budget of {0} calls exhausted")]
    BudgetExhausted(usize),
    #[error(transparent)]
    Line(#[from] LineError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("demand is unsatisfiable even without degradation")]
    OriginInfeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Infeasible = 0,
    Feasible = 1,
}

impl Label {
    pub fn from_bool(feasible: bool) -> Self {
        if feasible {
            Label::Feasible
        } else {
            Label::Infeasible
        }
    }

    pub fn is_feasible(self) -> bool {
        self == Label::Feasible
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

/// Where a label came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Solver(LpStatus),
    /// A demanded part has no capable machine at some stage; no LP was solved.
    Structural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeasibilityLabel {
    pub label: Label,
    pub provenance: Provenance,
    /// 1-based position of this call within its budget.
    pub call_index: usize,
}

/// Fixed number of charged oracle calls. The counter is atomic so
/// concurrent queries are each charged exactly once.
#[derive(Debug)]
pub struct OracleBudget {
    max_calls: usize,
    used: AtomicUsize,
}

impl OracleBudget {
    pub fn new(max_calls: usize) -> Self {
        Self {
            max_calls,
            used: AtomicUsize::new(0),
        }
    }

    pub fn max_calls(&self) -> usize {
        self.max_calls
    }

    pub fn used(&self) -> usize {
        self.used.load(Ordering::SeqCst).min(self.max_calls)
    }

    pub fn remaining(&self) -> usize {
        self.max_calls - self.used()
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining() == 0
    }

    /// Reserves one call and returns its 1-based index.
    pub fn charge(&self) -> Result<usize, OracleError> {
        self.used
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |u| {
                (u < self.max_calls).then_some(u + 1)
            })
            .map(|prev| prev + 1)
            .map_err(|_| OracleError::BudgetExhausted(self.max_calls))
    }
}

/// Oracle bound to one line. Counts every LP it solves.
#[derive(Debug)]
pub struct Oracle {
    line: LineConfig,
    solves: AtomicUsize,
}

impl Oracle {
    pub fn new(line: LineConfig) -> Result<Self, OracleError> {
        line.validate()?;
        Ok(Self {
            line,
            solves: AtomicUsize::new(0),
        })
    }

    pub fn line(&self) -> &LineConfig {
        &self.line
    }

    pub fn dim(&self) -> usize {
        self.line.dim()
    }

    /// Total LPs solved by this oracle, charged or not.
    pub fn lp_solves(&self) -> usize {
        self.solves.load(Ordering::SeqCst)
    }

    fn run(&self, p: &LpProblem) -> Result<LpStatus, OracleError> {
        self.solves.fetch_add(1, Ordering::SeqCst);
        Ok(solve(p)?.status)
    }

    fn evaluate(&self, d: &Degradation) -> Result<(Label, Provenance), OracleError> {
        match build_aggregated_lp(&self.line, d) {
            Ok(p) => {
                let status = self.run(&p)?;
                Ok((
                    Label::from_bool(status == LpStatus::Optimal),
                    Provenance::Solver(status),
                ))
            }
            Err(LineError::StructurallyInfeasible { .. }) => {
                Ok((Label::Infeasible, Provenance::Structural))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Uncharged label, for test-set generation and ground truth.
    pub fn label(&self, d: &[f64]) -> Result<Label, OracleError> {
        let d = Degradation::new(d.to_vec())?;
        Ok(self.evaluate(&d)?.0)
    }

    /// Charged feasibility query.
    pub fn check_feasibility(
        &self,
        d: &Degradation,
        budget: &OracleBudget,
    ) -> Result<FeasibilityLabel, OracleError> {
        self.line.check_degradation(d)?;
        let call_index = budget.charge()?;
        let (label, provenance) = self.evaluate(d)?;
        Ok(FeasibilityLabel {
            label,
            provenance,
            call_index,
        })
    }

    fn maximize(&self, lp: crate::line_model::DegradationLp) -> Result<f64, OracleError> {
        self.solves.fetch_add(1, Ordering::SeqCst);
        let sol = solve(&lp.problem)?;
        match sol.status {
            LpStatus::Optimal => Ok(sol.z[lp.target.0]),
            _ => Err(OracleError::OriginInfeasible),
        }
    }

    /// The boundary point `(0, …, d*, …, 0)` with `d*` the largest feasible
    /// degradation of machine `axis` alone. Charged when `budget` is given.
    pub fn maximize_direction(
        &self,
        axis: usize,
        budget: Option<&OracleBudget>,
    ) -> Result<Degradation, OracleError> {
        let lp = match build_axis_lp(&self.line, axis) {
            Err(LineError::StructurallyInfeasible { .. }) => {
                return Err(OracleError::OriginInfeasible)
            }
            other => other?,
        };
        if let Some(b) = budget {
            b.charge()?;
        }
        let top = self.maximize(lp)?.clamp(0.0, 1.0);
        let mut d = vec![0.0; self.dim()];
        d[axis] = top;
        Ok(Degradation::new(d)?)
    }

    /// `α*·u` for the largest `α ≥ 0` keeping the point in the cube and in the
    /// capacity. Charged when `budget` is given.
    pub fn extend_ray(
        &self,
        direction: &[f64],
        budget: Option<&OracleBudget>,
    ) -> Result<Degradation, OracleError> {
        let lp = match build_ray_lp(&self.line, direction) {
            Err(LineError::StructurallyInfeasible { .. }) => {
                return Err(OracleError::OriginInfeasible)
            }
            other => other?,
        };
        if let Some(b) = budget {
            b.charge()?;
        }
        let alpha = self.maximize(lp)?;
        Ok(Degradation::clamped(
            direction.iter().map(|u| alpha * u).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::line_model::preset;

    fn analytic() -> Oracle {
        Oracle::new(preset("analytic2").unwrap()).unwrap()
    }

    fn d(v: &[f64]) -> Degradation {
        Degradation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn analytic_labels() {
        let o = analytic();
        let b = OracleBudget::new(10);
        assert_eq!(o.check_feasibility(&d(&[0.0, 0.0]), &b).unwrap().label, Label::Feasible);
        assert_eq!(o.check_feasibility(&d(&[1.0, 1.0]), &b).unwrap().label, Label::Infeasible);
        let r = o.check_feasibility(&d(&[0.5, 0.4]), &b).unwrap();
        assert_eq!(r.label, Label::Infeasible);
        assert_eq!(r.call_index, 3);
        assert_eq!(r.provenance, Provenance::Solver(LpStatus::Infeasible));
        assert_eq!(b.used(), 3);
    }

    #[test]
    fn budget_is_enforced() {
        let o = analytic();
        let b = OracleBudget::new(1);
        o.check_feasibility(&d(&[0.0, 0.0]), &b).unwrap();
        assert!(matches!(
            o.check_feasibility(&d(&[0.0, 0.0]), &b),
            Err(OracleError::BudgetExhausted(1))
        ));
        assert_eq!(b.used(), 1);
        assert_eq!(o.lp_solves(), 1);
    }

    #[test]
    fn axis_maximum() {
        let o = analytic();
        let p = o.maximize_direction(0, None).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-9 && p[1] == 0.0);
    }

    #[test]
    fn unconstrained_axis_reaches_one() {
        // A third machine that processes a part nobody orders.
        let mut line = preset("analytic2").unwrap();
        let mut extra = line.machines[0].clone();
        extra.id = 2;
        extra.rates = [(1, 10.0)].into_iter().collect();
        line.machines.push(extra);
        line.parts.push(crate::line_model::PartSpec {
            id: 1,
            demand_quantity: 0.0,
            aging_intervals: 0,
        });
        let o = Oracle::new(line).unwrap();
        assert_eq!(o.maximize_direction(2, None).unwrap()[2], 1.0);
    }

    #[test]
    fn zero_demand_axes_reach_one() {
        let mut line = preset("desk6").unwrap();
        line.parts.iter_mut().for_each(|p| p.demand_quantity = 0.0);
        let o = Oracle::new(line).unwrap();
        for i in 0..6 {
            assert_eq!(o.maximize_direction(i, None).unwrap()[i], 1.0);
        }
    }

    #[test]
    fn ray_extension() {
        let o = analytic();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = o.extend_ray(&[s, s], None).unwrap();
        assert!((p[0] - 0.4).abs() < 1e-9 && (p[1] - 0.4).abs() < 1e-9);
        // Along an axis the ray and the axis maximum agree.
        let a = o.extend_ray(&[1.0, 0.0], None).unwrap();
        let m = o.maximize_direction(0, None).unwrap();
        assert!((a[0] - m[0]).abs() < 1e-9 && a[1] == 0.0);
    }

    #[test]
    fn infeasible_origin_has_no_ray() {
        let mut line = preset("analytic2").unwrap();
        line.parts[0].demand_quantity = 25.0;
        let o = Oracle::new(line).unwrap();
        assert!(matches!(o.extend_ray(&[1.0, 1.0], None), Err(OracleError::OriginInfeasible)));
        assert!(matches!(o.maximize_direction(0, None), Err(OracleError::OriginInfeasible)));
    }

    #[test]
    fn charged_boundary_calls_are_counted() {
        let o = analytic();
        let b = OracleBudget::new(5);
        o.maximize_direction(0, Some(&b)).unwrap();
        o.extend_ray(&[1.0, 1.0], Some(&b)).unwrap();
        o.check_feasibility(&d(&[0.1, 0.1]), &b).unwrap();
        assert_eq!(b.used(), 3);
        assert_eq!(o.lp_solves(), b.used());
    }

    #[test]
    fn structural_infeasibility_skips_the_solver() {
        let mut line = preset("analytic2").unwrap();
        line.machines.iter_mut().for_each(|m| {
            m.rates.clear();
            m.setup_times.clear();
        });
        let o = Oracle::new(line).unwrap();
        let b = OracleBudget::new(1);
        let r = o.check_feasibility(&d(&[0.0, 0.0]), &b).unwrap();
        assert_eq!(r.provenance, Provenance::Structural);
        assert_eq!(r.label, Label::Infeasible);
        assert_eq!(o.lp_solves(), 0);
    }
}
