//! Bounded two-phase primal revised simplex.
//!
//! The basis inverse is held densely and updated with product-form pivots,
//! with a fresh Gauss-Jordan refactorization every `refactor_every` pivots.
//! Pricing is Dantzig's rule until `3 × (rows + columns)` iterations have
//! elapsed, after which Bland's rule takes over to rule out cycling.
//! Everything is sequential, so identical inputs give identical outputs.

use super::{LpError, LpProblem, LpSolution, LpStatus, DEFAULT_FEAS_TOL};

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub pivot_tol: f64,
    pub dual_tol: f64,
    pub refactor_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: DEFAULT_FEAS_TOL,
            pivot_tol: 1e-10,
            dual_tol: 1e-9,
            refactor_every: 64,
        }
    }
}

pub fn solve(p: &LpProblem) -> Result<LpSolution, LpError> {
    solve_with(p, &SolverOptions::default())
}

pub fn solve_with(p: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    p.validate()?;
    if (0..p.num_vars()).any(|j| p.lower[j] > p.upper[j]) {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            z: Vec::new(),
            objective: f64::NAN,
            iterations: 0,
            phase1_objective: f64::INFINITY,
        });
    }

    let mut t = Simplex::new(p, opts);
    let mut iterations = 0;

    t.set_phase_one_costs();
    if t.run(&mut iterations)? == Phase::Unbounded {
        // Phase one is bounded below by zero, so this only happens on
        // numerical breakdown.
        return Err(LpError::SingularBasis);
    }
    t.refactor()?;
    let phase1_objective: f64 = t.artificials.iter().map(|&a| t.x[a]).sum();
    if phase1_objective > opts.feas_tol {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            z: Vec::new(),
            objective: f64::NAN,
            iterations,
            phase1_objective,
        });
    }

    t.fix_artificials();
    t.set_phase_two_costs(&p.objective);
    if t.run(&mut iterations)? == Phase::Unbounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            z: Vec::new(),
            objective: f64::NEG_INFINITY,
            iterations,
            phase1_objective,
        });
    }
    t.refactor()?;

    let z = t.x[..t.n_struct].to_vec();
    let audit = p.audit(&z);
    if !audit.holds(opts.feas_tol) {
        return Err(LpError::AuditFailed(audit.worst()));
    }
    let objective = p.objective.iter().zip(&z).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        z,
        objective,
        iterations,
        phase1_objective,
    })
}

#[derive(Debug, PartialEq, Eq)]
enum Phase {
    Optimal,
    Unbounded,
}

struct Simplex {
    m: usize,
    n_struct: usize,
    /// Sparse columns of `[A | slacks | artificials]` after row scaling.
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>,
    artificials: Vec<usize>,
    since_refactor: usize,
    opts: SolverOptions,
    // scratch
    y: Vec<f64>,
    w: Vec<f64>,
}

impl Simplex {
    fn new(p: &LpProblem, opts: &SolverOptions) -> Self {
        let n = p.num_vars();
        let m_eq = p.a_eq.rows;
        let m = m_eq + p.a_ineq.rows;

        // Dense accumulation merges duplicate triplets.
        let mut dense = vec![0.0; m * n];
        for t in &p.a_eq.entries {
            dense[t.row * n + t.col] += t.val;
        }
        for t in &p.a_ineq.entries {
            dense[(m_eq + t.row) * n + t.col] += t.val;
        }
        let mut b: Vec<f64> = p.b_eq.iter().chain(&p.b_ineq).copied().collect();
        for r in 0..m {
            let row = &mut dense[r * n..(r + 1) * n];
            let scale = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if scale > 0.0 {
                row.iter_mut().for_each(|v| *v /= scale);
                b[r] /= scale;
            }
        }

        let mut cols: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|j| {
                (0..m)
                    .filter_map(|r| {
                        let v = dense[r * n + j];
                        (v != 0.0).then_some((r, v))
                    })
                    .collect()
            })
            .collect();
        let mut lower = p.lower.clone();
        let mut upper = p.upper.clone();
        let mut x: Vec<f64> = (0..n)
            .map(|j| {
                if lower[j].is_finite() {
                    lower[j]
                } else if upper[j].is_finite() {
                    upper[j]
                } else {
                    0.0
                }
            })
            .collect();

        let mut residual = b.clone();
        for (j, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                residual[r] -= v * x[j];
            }
        }

        let mut basis = vec![usize::MAX; m];
        let mut diag = vec![1.0; m];
        let mut artificials = Vec::new();
        for r in m_eq..m {
            let s = cols.len();
            cols.push(vec![(r, 1.0)]);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            if residual[r] >= 0.0 {
                x.push(residual[r]);
                basis[r] = s;
            } else {
                x.push(0.0);
            }
        }
        for r in 0..m {
            if basis[r] != usize::MAX {
                continue;
            }
            let sign = if residual[r] >= 0.0 { 1.0 } else { -1.0 };
            let a = cols.len();
            cols.push(vec![(r, sign)]);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(residual[r].abs());
            basis[r] = a;
            diag[r] = sign;
            artificials.push(a);
        }

        let total = cols.len();
        let mut in_basis = vec![false; total];
        for &v in &basis {
            in_basis[v] = true;
        }
        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m + r] = 1.0 / diag[r];
        }

        Self {
            m,
            n_struct: n,
            cols,
            b,
            lower,
            upper,
            cost: vec![0.0; total],
            x,
            basis,
            in_basis,
            binv,
            artificials,
            since_refactor: 0,
            opts: *opts,
            y: vec![0.0; m],
            w: vec![0.0; m],
        }
    }

    fn set_phase_one_costs(&mut self) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        for &a in &self.artificials {
            self.cost[a] = 1.0;
        }
    }

    fn set_phase_two_costs(&mut self, c: &[f64]) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        self.cost[..self.n_struct].copy_from_slice(c);
    }

    fn fix_artificials(&mut self) {
        for &a in &self.artificials {
            self.upper[a] = 0.0;
            if !self.in_basis[a] {
                self.x[a] = 0.0;
            }
        }
    }

    fn run(&mut self, iterations: &mut usize) -> Result<Phase, LpError> {
        let expected = self.m + self.cols.len();
        let bland_after = 3 * expected;
        let limit = 50 * expected + 1000;
        let mut local = 0usize;
        loop {
            if local >= limit {
                return Err(LpError::IterationLimit(limit));
            }
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
            }
            let bland = local >= bland_after;
            let Some((q, dir)) = self.price(bland) else {
                return Ok(Phase::Optimal);
            };
            self.ftran(q);
            match self.ratio_test(q, dir, bland) {
                None => return Ok(Phase::Unbounded),
                Some((step, leave)) => self.update(q, dir, step, leave),
            }
            local += 1;
            *iterations += 1;
        }
    }

    fn price(&mut self, bland: bool) -> Option<(usize, f64)> {
        let m = self.m;
        self.y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &bv) in self.basis.iter().enumerate() {
            let c = self.cost[bv];
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, bk) in self.y.iter_mut().zip(row) {
                    *yk += c * bk;
                }
            }
        }
        let tol = self.opts.dual_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.cols.len() {
            if self.in_basis[j] || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.cost[j] - self.cols[j].iter().map(|&(r, v)| self.y[r] * v).sum::<f64>();
            let can_up = self.x[j] < self.upper[j];
            let can_down = self.x[j] > self.lower[j];
            let dir = if d < -tol && can_up {
                1.0
            } else if d > tol && can_down {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, s)| d.abs() > s) {
                best = Some((j, dir, d.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn ftran(&mut self, q: usize) {
        let m = self.m;
        self.w.iter_mut().for_each(|v| *v = 0.0);
        for &(r, v) in &self.cols[q] {
            for i in 0..m {
                self.w[i] += self.binv[i * m + r] * v;
            }
        }
    }

    /// Returns the step length and the leaving basis position (`None` for a
    /// bound flip of the entering variable), or `None` when unbounded.
    fn ratio_test(&self, q: usize, dir: f64, bland: bool) -> Option<(f64, Option<usize>)> {
        let ptol = self.opts.pivot_tol;
        let mut best_step = f64::INFINITY;
        let mut candidates: Vec<(usize, f64)> = Vec::new();
        for i in 0..self.m {
            let delta = -dir * self.w[i];
            let bv = self.basis[i];
            let limit = if delta < -ptol && self.lower[bv].is_finite() {
                ((self.x[bv] - self.lower[bv]) / -delta).max(0.0)
            } else if delta > ptol && self.upper[bv].is_finite() {
                ((self.upper[bv] - self.x[bv]) / delta).max(0.0)
            } else {
                continue;
            };
            candidates.push((i, limit));
            best_step = best_step.min(limit);
        }
        let flip = self.upper[q] - self.lower[q];
        if flip.is_finite() && flip <= best_step {
            return Some((flip, None));
        }
        if best_step.is_infinite() {
            return None;
        }
        let slack = 1e-12 * (1.0 + best_step);
        let leave = candidates
            .into_iter()
            .filter(|&(_, l)| l <= best_step + slack)
            .min_by(|a, b| {
                if bland {
                    self.basis[a.0].cmp(&self.basis[b.0])
                } else {
                    self.w[b.0]
                        .abs()
                        .partial_cmp(&self.w[a.0].abs())
                        .unwrap()
                        .then(a.0.cmp(&b.0))
                }
            })
            .map(|(i, _)| i);
        Some((best_step, leave))
    }

    fn update(&mut self, q: usize, dir: f64, step: f64, leave: Option<usize>) {
        let m = self.m;
        for i in 0..m {
            let bv = self.basis[i];
            self.x[bv] -= dir * self.w[i] * step;
        }
        match leave {
            None => {
                self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
            }
            Some(r) => {
                self.x[q] += dir * step;
                let out = self.basis[r];
                let delta = -dir * self.w[r];
                self.x[out] = if delta < 0.0 { self.lower[out] } else { self.upper[out] };
                self.basis[r] = q;
                self.in_basis[out] = false;
                self.in_basis[q] = true;

                let piv = self.w[r];
                for k in 0..m {
                    self.binv[r * m + k] /= piv;
                }
                for i in 0..m {
                    if i == r || self.w[i] == 0.0 {
                        continue;
                    }
                    let f = self.w[i];
                    for k in 0..m {
                        self.binv[i * m + k] -= f * self.binv[r * m + k];
                    }
                }
                self.since_refactor += 1;
            }
        }
    }

    /// Rebuilds `B⁻¹` from scratch and recomputes basic values from the
    /// nonbasic ones.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        let mut a = vec![0.0; m * m];
        for (pos, &bv) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[bv] {
                a[r * m + pos] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&i, &j| a[i * m + c].abs().partial_cmp(&a[j * m + c].abs()).unwrap())
                .unwrap();
            if a[p * m + c].abs() < 1e-13 {
                return Err(LpError::SingularBasis);
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let piv = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= piv;
                inv[c * m + k] /= piv;
            }
            for i in 0..m {
                if i == c {
                    continue;
                }
                let f = a[i * m + c];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[i * m + k] -= f * a[c * m + k];
                    inv[i * m + k] -= f * inv[c * m + k];
                }
            }
        }
        self.binv = inv;

        let mut rhs = self.b.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.in_basis[j] || self.x[j] == 0.0 {
                continue;
            }
            for &(r, v) in col {
                rhs[r] -= v * self.x[j];
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.x[self.basis[i]] = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
        }
        Ok(())
    }
}
