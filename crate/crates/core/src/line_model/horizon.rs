//! Full-horizon scheduling MILP.
//!
//! Decision vector, in blocks of `P × n_T` entries (P capable virtual
//! machine/part pairs ordered by stage, machine, part; then interval):
//!
//! | block | meaning                                   | bounds          |
//! |-------|-------------------------------------------|-----------------|
//! | `Q`   | queue at the end of interval `k`          | `[0, Qmax]`     |
//! | `x`   | mode indicator `θ[k] = j` (integral)      | `[0, 1]`        |
//! | `s`   | switched-into-`j` indicator               | `[0, 1]`        |
//! | `λ`   | input rate                                | `[0, λmax]`     |
//! | `u`   | output rate `μ̄`                           | `[0, ∞)`        |
//!
//! followed by `n_parts × n_T` final-stage output rates. The switch
//! indicator is the product `x[k]·(1 − x[k−1])`, written with the usual
//! three linear rows; it is exact whenever `x` is binary, so no big-M
//! constant is needed. The problem is only constructed and audited here.

use crate::lp::{LpBuilder, LpProblem, VarId};

use super::{
    effective_rate, expand_virtual_machines, Degradation, ExpandedLine, LineConfig, LineError,
    Mode,
};

/// `plan[v][k]` is the mode of virtual machine `v` during interval `k`.
pub type ModePlan = Vec<Vec<Mode>>;

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonLayout {
    /// Capable (virtual machine, part) pairs in variable order.
    pub pairs: Vec<(usize, usize)>,
    pub intervals: usize,
    pub parts: usize,
}

impl HorizonLayout {
    fn block(&self, b: usize, pair: usize, k: usize) -> usize {
        (b * self.pairs.len() + pair) * self.intervals + k
    }
    pub fn queue(&self, pair: usize, k: usize) -> usize {
        self.block(0, pair, k)
    }
    pub fn mode(&self, pair: usize, k: usize) -> usize {
        self.block(1, pair, k)
    }
    pub fn switch(&self, pair: usize, k: usize) -> usize {
        self.block(2, pair, k)
    }
    pub fn input(&self, pair: usize, k: usize) -> usize {
        self.block(3, pair, k)
    }
    pub fn output(&self, pair: usize, k: usize) -> usize {
        self.block(4, pair, k)
    }
    pub fn final_output(&self, part: usize, k: usize) -> usize {
        5 * self.pairs.len() * self.intervals + part * self.intervals + k
    }

    /// `(5·P + n_parts) · n_T`.
    pub fn var_count(&self) -> usize {
        (5 * self.pairs.len() + self.parts) * self.intervals
    }

    pub fn pair_index(&self, machine: usize, part: usize) -> Option<usize> {
        self.pairs.iter().position(|&p| p == (machine, part))
    }
}

#[derive(Debug, Clone)]
pub struct HorizonMilp {
    pub problem: LpProblem,
    pub layout: HorizonLayout,
    pub expanded: ExpandedLine,
    degradation: Vec<f64>,
}

pub fn build_horizon_milp(line: &LineConfig, d: &Degradation) -> Result<HorizonMilp, LineError> {
    if line.horizon_intervals == 0 {
        return Err(LineError::ZeroHorizon);
    }
    line.check_degradation(d)?;
    line.check_structure()?;
    let ex = expand_virtual_machines(line);
    let cfg = &ex.config;
    let n_t = cfg.horizon_intervals as usize;
    let n_stages = cfg.stages.len();
    let n_parts = cfg.parts.len();

    let mut pairs = Vec::new();
    for s in 0..n_stages {
        for m in cfg.machines_in_stage(s) {
            pairs.extend(m.capable_parts().map(|j| (m.id, j)));
        }
    }
    let layout = HorizonLayout {
        pairs: pairs.clone(),
        intervals: n_t,
        parts: n_parts,
    };

    let mut b = LpBuilder::new();
    let inf = f64::INFINITY;
    for tag in ["Q", "x", "s", "lambda", "u"] {
        for &(m, j) in &pairs {
            for k in 0..n_t {
                let name = format!("{tag}[{m},{j},{k}]");
                match tag {
                    "Q" => b.var(name, 0.0, cfg.queue_cap(m, j)),
                    "x" => b.int_var(name, 0.0, 1.0),
                    "s" => b.var(name, 0.0, 1.0),
                    "lambda" => b.var(name, 0.0, cfg.input_cap(m, j)),
                    _ => b.var(name, 0.0, inf),
                };
            }
        }
    }
    for j in 0..n_parts {
        for k in 0..n_t {
            b.var(format!("muC[{j},{k}]"), 0.0, inf);
        }
    }
    debug_assert_eq!(b.num_vars(), layout.var_count());
    let v = VarId;

    // Queue dynamics: Q[k] − Q[k−1] − λ[k] + u[k] = 0 with Q[−1] = 0.
    for (p, &(m, j)) in pairs.iter().enumerate() {
        for k in 0..n_t {
            let mut terms = vec![
                (v(layout.queue(p, k)), 1.0),
                (v(layout.input(p, k)), -1.0),
                (v(layout.output(p, k)), 1.0),
            ];
            if k > 0 {
                terms.push((v(layout.queue(p, k - 1)), -1.0));
            }
            b.eq(format!("queue[{m},{j},{k}]"), &terms, 0.0);
        }
    }
    // Flow conservation between consecutive stages.
    let stage_of = |m: usize| cfg.stage_index(&cfg.machines[m].stage);
    for s in 1..n_stages {
        for j in 0..n_parts {
            for k in 0..n_t {
                let mut terms = Vec::new();
                for (p, &(m, pj)) in pairs.iter().enumerate() {
                    if pj != j {
                        continue;
                    }
                    if stage_of(m) == s {
                        terms.push((v(layout.input(p, k)), 1.0));
                    } else if stage_of(m) == s - 1 {
                        terms.push((v(layout.output(p, k)), -1.0));
                    }
                }
                b.eq(format!("flow[{s},{j},{k}]"), &terms, 0.0);
            }
        }
    }
    // Final-stage output definition.
    for j in 0..n_parts {
        for k in 0..n_t {
            let mut terms = vec![(v(layout.final_output(j, k)), 1.0)];
            for (p, &(m, pj)) in pairs.iter().enumerate() {
                if pj == j && stage_of(m) == n_stages - 1 {
                    terms.push((v(layout.output(p, k)), -1.0));
                }
            }
            b.eq(format!("muC[{j},{k}]"), &terms, 0.0);
        }
    }

    let t = cfg.control_interval_hours;
    for (p, &(m, j)) in pairs.iter().enumerate() {
        let spec = &cfg.machines[m];
        let health = 1.0 - d[ex.parent[m]];
        let mu = spec.rate(j).unwrap();
        let mu_s = effective_rate(spec, j, Mode::Idle, Mode::Part(j), t)?;
        for k in 0..n_t {
            let (x, s, u) = (
                v(layout.mode(p, k)),
                v(layout.switch(p, k)),
                v(layout.output(p, k)),
            );
            b.le(
                format!("rate[{m},{j},{k}]"),
                &[(u, 1.0), (x, -health * mu), (s, health * (mu - mu_s))],
                0.0,
            );
            let prev = (k > 0).then(|| v(layout.mode(p, k - 1)));
            let mut lower = vec![(x, 1.0), (s, -1.0)];
            lower.extend(prev.map(|x0| (x0, -1.0)));
            b.le(format!("switch_lo[{m},{j},{k}]"), &lower, 0.0);
            b.le(format!("switch_on[{m},{j},{k}]"), &[(s, 1.0), (x, -1.0)], 0.0);
            if let Some(x0) = prev {
                b.le(format!("switch_prev[{m},{j},{k}]"), &[(s, 1.0), (x0, 1.0)], 1.0);
            }
        }
    }
    // One mode per machine and interval.
    for s in 0..n_stages {
        for mach in cfg.machines_in_stage(s) {
            for k in 0..n_t {
                let terms: Vec<_> = pairs
                    .iter()
                    .enumerate()
                    .filter(|(_, &(m, _))| m == mach.id)
                    .map(|(p, _)| (v(layout.mode(p, k)), 1.0))
                    .collect();
                b.le(format!("mode[{},{k}]", mach.id), &terms, 1.0);
            }
        }
    }
    // Production targets.
    for (j, part) in cfg.parts.iter().enumerate() {
        if part.demand_quantity <= 0.0 {
            continue;
        }
        let terms: Vec<_> = (0..n_t).map(|k| (v(layout.final_output(j, k)), 1.0)).collect();
        b.ge(format!("demand[{j}]"), &terms, part.demand_quantity);
        if part.aging_intervals > 0 {
            let window = n_t - part.aging_intervals as usize;
            let mut terms = Vec::new();
            for (p, &(m, pj)) in pairs.iter().enumerate() {
                if pj == j && stage_of(m) == 0 {
                    terms.extend((0..window).map(|k| (v(layout.output(p, k)), 1.0)));
                }
            }
            b.ge(format!("aging[{j}]"), &terms, part.demand_quantity);
        }
    }

    let mut problem = b.build();
    for (c, name) in problem.objective.iter_mut().zip(&problem.names) {
        *c = line.cost_policy.cost_of(name);
    }
    Ok(HorizonMilp {
        problem,
        layout,
        expanded: ex,
        degradation: d.as_slice().to_vec(),
    })
}

impl HorizonMilp {
    /// Builds a candidate decision vector by running `plan` forward.
    ///
    /// First-stage machines are fed exactly what they can process in their
    /// current mode. Output of stage `s` is routed to stage `s+1` machines of
    /// the same part, each taking up to its current capacity, with any excess
    /// queued at the first capable machine. Machines process
    /// `min(capacity, queue + input)`.
    pub fn simulate(&self, plan: &ModePlan) -> Result<Vec<f64>, LineError> {
        let cfg = &self.expanded.config;
        let lay = &self.layout;
        if plan.len() != cfg.machines.len() || plan.iter().any(|r| r.len() != lay.intervals) {
            return Err(LineError::Invalid(format!(
                "mode plan must be {} machines x {} intervals",
                cfg.machines.len(),
                lay.intervals
            )));
        }
        let t = cfg.control_interval_hours;
        let n_stages = cfg.stages.len();
        let stage_of = |m: usize| cfg.stage_index(&cfg.machines[m].stage);
        let mut z = vec![0.0; lay.var_count()];
        let mut queue = vec![0.0; lay.pairs.len()];

        for k in 0..lay.intervals {
            let mut capacity = vec![0.0; lay.pairs.len()];
            for (p, &(m, j)) in lay.pairs.iter().enumerate() {
                let prev = if k == 0 { Mode::Idle } else { plan[m][k - 1] };
                let cur = plan[m][k];
                let rate = effective_rate(&cfg.machines[m], j, prev, cur, t)?;
                capacity[p] = (1.0 - self.degradation[self.expanded.parent[m]]) * rate;
                let on = (cur == Mode::Part(j)) as u8 as f64;
                let was_on = (k > 0 && prev == Mode::Part(j)) as u8 as f64;
                z[lay.mode(p, k)] = on;
                z[lay.switch(p, k)] = on * (1.0 - was_on);
            }
            for s in 0..n_stages {
                let members: Vec<usize> =
                    (0..lay.pairs.len()).filter(|&p| stage_of(lay.pairs[p].0) == s).collect();
                if s == 0 {
                    for &p in &members {
                        z[lay.input(p, k)] = capacity[p];
                    }
                } else {
                    for j in 0..lay.parts {
                        let mut supply: f64 = (0..lay.pairs.len())
                            .filter(|&p| lay.pairs[p].1 == j && stage_of(lay.pairs[p].0) == s - 1)
                            .map(|p| z[lay.output(p, k)])
                            .sum();
                        let takers: Vec<usize> =
                            members.iter().copied().filter(|&p| lay.pairs[p].1 == j).collect();
                        for &p in &takers {
                            let take = supply.min(capacity[p]);
                            z[lay.input(p, k)] = take;
                            supply -= take;
                        }
                        if let Some(&first) = takers.first() {
                            z[lay.input(first, k)] += supply;
                        }
                    }
                }
                for &p in &members {
                    let out = capacity[p].min(queue[p] + z[lay.input(p, k)]);
                    z[lay.output(p, k)] = out;
                    queue[p] += z[lay.input(p, k)] - out;
                    z[lay.queue(p, k)] = queue[p];
                }
            }
            for (p, &(m, j)) in lay.pairs.iter().enumerate() {
                if stage_of(m) == n_stages - 1 {
                    z[lay.final_output(j, k)] += z[lay.output(p, k)];
                }
            }
        }
        Ok(z)
    }
}
