//! Single-interval LP relaxation used as the feasibility oracle.
//!
//! Per capable (virtual machine `m`, part `j`) pair the LP has an effective
//! mode share `x[m,j] ∈ [0,1]` and a throughput `u[m,j] ∈ [0, λmax]`.
//! The effective share already includes the machine's health, so the
//! degraded-rate bound `u ≤ (1−d)·μ·share` becomes the two linear rows
//!
//! ```text
//! u[m,j] − μ[m,j]·x[m,j] ≤ 0
//! Σ_j x[m,j] + d[parent(m)] ≤ 1
//! ```
//!
//! which keeps `d` on the right-hand side. That is what lets the axis and ray
//! problems below treat `d` (or a scalar along a ray) as a decision variable
//! while staying linear.

use crate::lp::{LpBuilder, LpProblem, VarId};

use super::{expand_virtual_machines, Degradation, ExpandedLine, LineConfig, LineError};

/// A degradation-as-variable LP together with the variable it maximizes.
#[derive(Debug, Clone)]
pub struct DegradationLp {
    pub problem: LpProblem,
    pub target: VarId,
}

enum DegTerm<'a> {
    Fixed(&'a [f64]),
    Axis { axis: usize, var: VarId },
    Ray { dir: &'a [f64], alpha: VarId },
}

impl DegTerm<'_> {
    /// Constant part and optional variable term of `d[i]`.
    fn of(&self, i: usize) -> (f64, Option<(VarId, f64)>) {
        match *self {
            DegTerm::Fixed(d) => (d[i], None),
            DegTerm::Axis { axis, var } if axis == i => (0.0, Some((var, 1.0))),
            DegTerm::Axis { .. } => (0.0, None),
            DegTerm::Ray { dir, alpha } if dir[i] > 0.0 => (0.0, Some((alpha, dir[i]))),
            DegTerm::Ray { .. } => (0.0, None),
        }
    }
}

fn add_flow_model(b: &mut LpBuilder, ex: &ExpandedLine, deg: &DegTerm) -> Result<(), LineError> {
    let line = &ex.config;
    line.check_structure()?;

    // Variables and per-machine rows, ordered by (stage, machine, part).
    let n_stages = line.stages.len();
    let n_parts = line.parts.len();
    let mut stage_u: Vec<Vec<Vec<VarId>>> = vec![vec![Vec::new(); n_parts]; n_stages];
    for s in 0..n_stages {
        for m in line.machines_in_stage(s) {
            let parent = ex.parent[m.id];
            let (d_const, d_var) = deg.of(parent);
            let mut shares = Vec::new();
            for j in m.capable_parts() {
                let mu = m.rate(j).unwrap();
                let x = b.var(format!("x[{},{}]", m.id, j), 0.0, 1.0);
                let u = b.var(format!("u[{},{}]", m.id, j), 0.0, line.input_cap(m.id, j));
                b.le(format!("cap[{},{}]", m.id, j), &[(u, 1.0), (x, -mu)], 0.0);
                stage_u[s][j].push(u);
                shares.push(x);
            }
            let mut push_share = |name: String, xs: &[VarId]| {
                let mut terms: Vec<_> = xs.iter().map(|&x| (x, 1.0)).collect();
                terms.extend(d_var);
                b.le(name, &terms, 1.0 - d_const);
            };
            if line.share_constraint {
                push_share(format!("share[{}]", m.id), &shares);
            } else {
                for (&x, j) in shares.iter().zip(m.capable_parts()) {
                    push_share(format!("share[{},{}]", m.id, j), &[x]);
                }
            }
        }
    }

    // Downstream throughput cannot exceed upstream throughput.
    for s in 1..n_stages {
        for j in 0..n_parts {
            let mut terms: Vec<_> = stage_u[s][j].iter().map(|&u| (u, 1.0)).collect();
            terms.extend(stage_u[s - 1][j].iter().map(|&u| (u, -1.0)));
            if !terms.is_empty() {
                b.le(format!("flow[{},{}]", s, j), &terms, 0.0);
            }
        }
    }

    for (j, part) in line.parts.iter().enumerate() {
        if part.demand_quantity <= 0.0 {
            continue;
        }
        let last: Vec<_> = stage_u[n_stages - 1][j].iter().map(|&u| (u, 1.0)).collect();
        b.ge(format!("demand[{j}]"), &last, line.demand_rate(j));
        if part.aging_intervals > 0 {
            let first: Vec<_> = stage_u[0][j].iter().map(|&u| (u, 1.0)).collect();
            b.ge(format!("aging[{j}]"), &first, line.aged_demand_rate(j));
        }
    }
    Ok(())
}

/// Aggregated single-interval LP at a fixed degradation vector.
pub fn build_aggregated_lp(line: &LineConfig, d: &Degradation) -> Result<LpProblem, LineError> {
    line.check_degradation(d)?;
    let ex = expand_virtual_machines(line);
    let mut b = LpBuilder::new();
    add_flow_model(&mut b, &ex, &DegTerm::Fixed(d.as_slice()))?;
    let costs: Vec<f64> = (0..b.num_vars())
        .map(|v| line.cost_policy.cost_of(b.name(VarId(v))))
        .collect();
    for (v, c) in costs.into_iter().enumerate() {
        b.set_cost(VarId(v), c);
    }
    Ok(b.build())
}

/// Maximizes `d[axis]` over the capacity with every other coordinate at 0.
pub fn build_axis_lp(line: &LineConfig, axis: usize) -> Result<DegradationLp, LineError> {
    if axis >= line.dim() {
        return Err(LineError::BadAxis {
            axis,
            dim: line.dim(),
        });
    }
    let ex = expand_virtual_machines(line);
    let mut b = LpBuilder::new();
    let var = b.var(format!("d[{axis}]"), 0.0, 1.0);
    b.set_cost(var, -1.0);
    add_flow_model(&mut b, &ex, &DegTerm::Axis { axis, var })?;
    Ok(DegradationLp {
        problem: b.build(),
        target: var,
    })
}

/// Maximizes `α` such that `α·dir` stays in the cube and in the capacity.
pub fn build_ray_lp(line: &LineConfig, dir: &[f64]) -> Result<DegradationLp, LineError> {
    if dir.len() != line.dim() {
        return Err(LineError::DimensionMismatch {
            expected: line.dim(),
            got: dir.len(),
        });
    }
    let top = dir.iter().copied().fold(0.0, f64::max);
    if dir.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || top <= 0.0 {
        return Err(LineError::BadDirection);
    }
    let ex = expand_virtual_machines(line);
    let mut b = LpBuilder::new();
    let alpha = b.var("alpha", 0.0, 1.0 / top);
    b.set_cost(alpha, -1.0);
    add_flow_model(&mut b, &ex, &DegTerm::Ray { dir, alpha })?;
    Ok(DegradationLp {
        problem: b.build(),
        target: alpha,
    })
}
