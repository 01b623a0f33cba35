//! Linear programs in triplet form and the built-in bounded simplex solver.
//!
//! A problem is `min cᵀz` subject to `A_eq z = b_eq`, `A_ineq z ≤ b_ineq` and
//! `lower ≤ z ≤ upper`. Matrices are stored as coordinate triplets in the
//! order rows were added; duplicates are summed when the solver densifies.
//! Integrality flags are carried for auditing only and never enforced.

mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use simplex::{solve, solve_with, SolverOptions};

pub const DEFAULT_FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{what} has {got} entries, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("triplet ({row}, {col}) outside a {rows}x{cols} matrix")]
    TripletOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("invalid bounds on variable {0}")]
    InvalidBound(usize),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("basis became numerically singular")]
    SingularBasis,
    #[error("optimal point fails the residual audit ({0:e})")]
    AuditFailed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub val: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Triplet>,
}

impl SparseMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    /// `A z` computed straight from the triplets.
    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for t in &self.entries {
            out[t.row] += t.val * z[t.col];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub names: Vec<String>,
    pub objective: Vec<f64>,
    pub a_eq: SparseMatrix,
    pub b_eq: Vec<f64>,
    pub eq_names: Vec<String>,
    pub a_ineq: SparseMatrix,
    pub b_ineq: Vec<f64>,
    pub ineq_names: Vec<String>,
    #[serde(with = "extended_reals")]
    pub lower: Vec<f64>,
    #[serde(with = "extended_reals")]
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
}

impl LpProblem {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Structural checks performed before any solve.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        for (what, got) in [
            ("names", self.names.len()),
            ("lower", self.lower.len()),
            ("upper", self.upper.len()),
            ("integer", self.integer.len()),
            ("a_eq columns", self.a_eq.cols),
            ("a_ineq columns", self.a_ineq.cols),
        ] {
            if got != n {
                return Err(LpError::Dimension {
                    what,
                    got,
                    expected: n,
                });
            }
        }
        if self.b_eq.len() != self.a_eq.rows {
            return Err(LpError::Dimension {
                what: "b_eq",
                got: self.b_eq.len(),
                expected: self.a_eq.rows,
            });
        }
        if self.b_ineq.len() != self.a_ineq.rows {
            return Err(LpError::Dimension {
                what: "b_ineq",
                got: self.b_ineq.len(),
                expected: self.a_ineq.rows,
            });
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        if self.b_eq.iter().chain(&self.b_ineq).any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("right-hand side"));
        }
        for m in [&self.a_eq, &self.a_ineq] {
            for t in &m.entries {
                if !t.val.is_finite() {
                    return Err(LpError::NonFinite("constraint matrix"));
                }
                if t.row >= m.rows || t.col >= m.cols {
                    return Err(LpError::TripletOutOfRange {
                        row: t.row,
                        col: t.col,
                        rows: m.rows,
                        cols: m.cols,
                    });
                }
            }
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::InvalidBound(j));
            }
        }
        Ok(())
    }

    /// Independent residual audit of a candidate point against the raw data.
    pub fn audit(&self, z: &[f64]) -> Audit {
        let eq = self.a_eq.mul_vec(z);
        let max_eq_residual = eq
            .iter()
            .zip(&self.b_eq)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let ineq = self.a_ineq.mul_vec(z);
        let max_ineq_violation = ineq
            .iter()
            .zip(&self.b_ineq)
            .map(|(a, b)| (a - b).max(0.0))
            .fold(0.0, f64::max);
        let max_bound_violation = z
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max);
        let max_integrality_violation = z
            .iter()
            .zip(&self.integer)
            .filter(|(_, &int)| int)
            .map(|(&v, _)| (v - v.round()).abs())
            .fold(0.0, f64::max);
        Audit {
            max_eq_residual,
            max_ineq_violation,
            max_bound_violation,
            max_integrality_violation,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lp problems always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Audit {
    pub max_eq_residual: f64,
    pub max_ineq_violation: f64,
    pub max_bound_violation: f64,
    pub max_integrality_violation: f64,
}

impl Audit {
    /// Largest continuous violation (integrality excluded).
    pub fn worst(&self) -> f64 {
        self.max_eq_residual
            .max(self.max_ineq_violation)
            .max(self.max_bound_violation)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point, empty unless `status` is `Optimal`.
    pub z: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Sum of artificial values at the end of phase 1.
    pub phase1_objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

/// Incremental construction of an [`LpProblem`].
#[derive(Debug, Default, Clone)]
pub struct LpBuilder {
    names: Vec<String>,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    integer: Vec<bool>,
    eq: Vec<Triplet>,
    b_eq: Vec<f64>,
    eq_names: Vec<String>,
    ineq: Vec<Triplet>,
    b_ineq: Vec<f64>,
    ineq_names: Vec<String>,
}

impl LpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.names.push(name.into());
        self.objective.push(0.0);
        self.lower.push(lower);
        self.upper.push(upper);
        self.integer.push(false);
        VarId(self.names.len() - 1)
    }

    pub fn int_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        let v = self.var(name, lower, upper);
        self.integer[v.0] = true;
        v
    }

    pub fn set_cost(&mut self, v: VarId, cost: f64) {
        self.objective[v.0] = cost;
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v.0]
    }

    fn push_row(target: &mut Vec<Triplet>, row: usize, terms: &[(VarId, f64)]) {
        target.extend(
            terms
                .iter()
                .filter(|(_, a)| *a != 0.0)
                .map(|&(v, val)| Triplet { row, col: v.0, val }),
        );
    }

    pub fn eq(&mut self, name: impl Into<String>, terms: &[(VarId, f64)], rhs: f64) {
        Self::push_row(&mut self.eq, self.b_eq.len(), terms);
        self.b_eq.push(rhs);
        self.eq_names.push(name.into());
    }

    pub fn le(&mut self, name: impl Into<String>, terms: &[(VarId, f64)], rhs: f64) {
        Self::push_row(&mut self.ineq, self.b_ineq.len(), terms);
        self.b_ineq.push(rhs);
        self.ineq_names.push(name.into());
    }

    /// `Σ a·z ≥ rhs`, stored as `−Σ a·z ≤ −rhs`.
    pub fn ge(&mut self, name: impl Into<String>, terms: &[(VarId, f64)], rhs: f64) {
        let negated: Vec<_> = terms.iter().map(|&(v, a)| (v, -a)).collect();
        self.le(name, &negated, -rhs);
    }

    pub fn build(self) -> LpProblem {
        let n = self.names.len();
        LpProblem {
            a_eq: SparseMatrix {
                rows: self.b_eq.len(),
                cols: n,
                entries: self.eq,
            },
            a_ineq: SparseMatrix {
                rows: self.b_ineq.len(),
                cols: n,
                entries: self.ineq,
            },
            names: self.names,
            objective: self.objective,
            b_eq: self.b_eq,
            eq_names: self.eq_names,
            b_ineq: self.b_ineq,
            ineq_names: self.ineq_names,
            lower: self.lower,
            upper: self.upper,
            integer: self.integer,
        }
    }
}

/// Serializes `±∞` as the strings `"inf"` / `"-inf"` since JSON has no
/// infinity literal.
mod extended_reals {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let out: Vec<Repr> = v
            .iter()
            .map(|&x| {
                if x == f64::INFINITY {
                    Repr::Text("inf".into())
                } else if x == f64::NEG_INFINITY {
                    Repr::Text("-inf".into())
                } else {
                    Repr::Num(x)
                }
            })
            .collect();
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Repr::Num(x) => Ok(x),
                Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
                Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
                Repr::Text(t) => Err(D::Error::custom(format!("bad bound {t:?}"))),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_negates_ge_rows() {
        let mut b = LpBuilder::new();
        let x = b.var("x", 0.0, f64::INFINITY);
        b.ge("x_min", &[(x, 2.0)], 3.0);
        let p = b.build();
        assert_eq!(p.a_ineq.entries, vec![Triplet { row: 0, col: 0, val: -2.0 }]);
        assert_eq!(p.b_ineq, vec![-3.0]);
    }

    #[test]
    fn json_dump_keeps_infinite_bounds() {
        let mut b = LpBuilder::new();
        b.var("free", f64::NEG_INFINITY, f64::INFINITY);
        let p = b.build();
        let text = p.to_json();
        assert!(text.contains("\"-inf\""));
        assert_eq!(LpProblem::from_json(&text).unwrap(), p);
    }

    #[test]
    fn audit_reports_each_kind() {
        let mut b = LpBuilder::new();
        let x = b.int_var("x", 0.0, 1.0);
        let y = b.var("y", 0.0, 1.0);
        b.eq("sum", &[(x, 1.0), (y, 1.0)], 1.0);
        b.le("cap", &[(y, 1.0)], 0.25);
        let p = b.build();
        let a = p.audit(&[0.5, 0.75]);
        assert!((a.max_eq_residual - 0.25).abs() < 1e-15);
        assert!((a.max_ineq_violation - 0.5).abs() < 1e-15);
        assert_eq!(a.max_bound_violation, 0.0);
        assert!((a.max_integrality_violation - 0.5).abs() < 1e-15);
    }

    #[test]
    fn validate_rejects_nan() {
        let mut b = LpBuilder::new();
        let x = b.var("x", 0.0, 1.0);
        b.le("r", &[(x, f64::NAN)], 1.0);
        assert_eq!(b.build().validate(), Err(LpError::NonFinite("constraint matrix")));
    }
}
