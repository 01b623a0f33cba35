//! Queue recursion and switching-reduced production rates.

use std::collections::BTreeMap;

use super::{LineConfig, LineError, MachineSpec};

/// Machine configuration during one control interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Idle,
    Part(usize),
}

/// Parts waiting at each (machine, part) queue.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueueState {
    pub levels: BTreeMap<(usize, usize), f64>,
}

impl QueueState {
    /// All capable (machine, part) queues of `line`, empty.
    pub fn empty(line: &LineConfig) -> Self {
        let levels = line
            .machines
            .iter()
            .flat_map(|m| m.capable_parts().map(move |j| ((m.id, j), 0.0)))
            .collect();
        Self { levels }
    }

    pub fn get(&self, machine: usize, part: usize) -> f64 {
        self.levels.get(&(machine, part)).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueViolation {
    pub machine: usize,
    pub part: usize,
    pub level: f64,
    pub cap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueStep {
    pub next: QueueState,
    /// Queues that left `[0, cap]`. Levels are reported as computed, never
    /// clamped.
    pub violations: Vec<QueueViolation>,
}

/// `Q[k+1] = Q[k] + λ[k] − μ̄[k]` for every queue of `q`.
///
/// `inflow` and `outflow` may omit queues (treated as 0) but may not name a
/// pair that is not a capable queue of `line`.
pub fn step_queues(
    line: &LineConfig,
    q: &QueueState,
    inflow: &BTreeMap<(usize, usize), f64>,
    outflow: &BTreeMap<(usize, usize), f64>,
) -> Result<QueueStep, LineError> {
    for &(machine, part) in inflow.keys().chain(outflow.keys()).chain(q.levels.keys()) {
        let capable = line
            .machines
            .get(machine)
            .is_some_and(|m| m.rates.contains_key(&part));
        if !capable {
            return Err(LineError::UnknownQueue { machine, part });
        }
    }
    let mut next = QueueState::default();
    let mut violations = Vec::new();
    for m in &line.machines {
        for j in m.capable_parts() {
            let key = (m.id, j);
            let level = q.get(m.id, j)
                + inflow.get(&key).copied().unwrap_or(0.0)
                - outflow.get(&key).copied().unwrap_or(0.0);
            let cap = line.queue_cap(m.id, j);
            if !(0.0..=cap).contains(&level) {
                violations.push(QueueViolation {
                    machine: m.id,
                    part: j,
                    level,
                    cap,
                });
            }
            next.levels.insert(key, level);
        }
    }
    Ok(QueueStep { next, violations })
}

/// Output rate of `machine` for `part` during an interval in mode `cur`
/// that followed an interval in mode `prev`.
///
/// Switching into `part` costs the setup time: the rate becomes
/// `μ (T − T_setup) / T`.
pub fn effective_rate(
    machine: &MachineSpec,
    part: usize,
    prev: Mode,
    cur: Mode,
    control_interval_hours: f64,
) -> Result<f64, LineError> {
    if cur != Mode::Part(part) {
        return Ok(0.0);
    }
    let mu = machine.rate(part).ok_or(LineError::Incapable {
        machine: machine.id,
        part,
    })?;
    if prev == cur {
        Ok(mu)
    } else {
        let t = control_interval_hours;
        Ok(mu * (t - machine.setup_time(part)) / t)
    }
}
