//! Multi-stage production line: configuration, queue dynamics, and the two
//! optimization problems built from it.
//!
//! Rates are expressed in parts per control interval, setup times in hours.
//! A line runs for `horizon_intervals` control intervals, so the delivery
//! deadline is `horizon_intervals × control_interval_hours`.

mod aggregated;
mod dynamics;
mod horizon;
mod presets;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aggregated::{build_aggregated_lp, build_axis_lp, build_ray_lp, DegradationLp};
pub use dynamics::{effective_rate, step_queues, Mode, QueueState, QueueStep, QueueViolation};
pub use horizon::{build_horizon_milp, HorizonLayout, HorizonMilp, ModePlan};
pub use presets::{preset, PRESET_NAMES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LineError {
    #[error("invalid line configuration: {0}")]
    Invalid(String),
    #[error("degradation vector has {got} entries, line has {expected} machines")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degradation entry {index} = {value} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("machine {machine} cannot process part {part}")]
    Incapable { machine: usize, part: usize },
    #[error("queue entry ({machine}, {part}) is not a capable machine/part pair")]
    UnknownQueue { machine: usize, part: usize },
    #[error("part {part} has demand but stage {stage:?} has no capable machine")]
    StructurallyInfeasible { part: usize, stage: String },
    #[error("horizon has zero intervals")]
    ZeroHorizon,
    #[error("ray direction must be nonnegative and nonzero")]
    BadDirection,
    #[error("axis {axis} out of range for {dim} machines")]
    BadAxis { axis: usize, dim: usize },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartSpec {
    pub id: usize,
    /// Units to deliver by the deadline.
    pub demand_quantity: f64,
    /// Stage-one output must be complete this many intervals early.
    #[serde(default)]
    pub aging_intervals: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSpec {
    pub id: usize,
    pub stage: String,
    /// Part → production rate. A missing key means the machine cannot
    /// process that part.
    pub rates: BTreeMap<usize, f64>,
    #[serde(default)]
    pub setup_times: BTreeMap<usize, f64>,
    #[serde(default)]
    pub queue_caps: BTreeMap<usize, f64>,
    #[serde(default)]
    pub input_caps: BTreeMap<usize, f64>,
    #[serde(default = "one")]
    pub parallel_slots: u32,
}

fn one() -> u32 {
    1
}

fn yes() -> bool {
    true
}

impl MachineSpec {
    pub fn rate(&self, part: usize) -> Option<f64> {
        self.rates.get(&part).copied()
    }

    pub fn setup_time(&self, part: usize) -> f64 {
        self.setup_times.get(&part).copied().unwrap_or(0.0)
    }

    pub fn capable_parts(&self) -> impl Iterator<Item = usize> + '_ {
        self.rates.keys().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostPolicy {
    #[default]
    Zero,
    /// Per-variable costs keyed by variable name; missing names cost 0.
    Supplied { costs: BTreeMap<String, f64> },
}

impl CostPolicy {
    pub fn cost_of(&self, name: &str) -> f64 {
        match self {
            CostPolicy::Zero => 0.0,
            CostPolicy::Supplied { costs } => costs.get(name).copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub stages: Vec<String>,
    pub control_interval_hours: f64,
    pub horizon_intervals: u32,
    pub machines: Vec<MachineSpec>,
    pub parts: Vec<PartSpec>,
    /// Couple the parts of a machine through `Σ_j share ≤ 1`.
    #[serde(default = "yes")]
    pub share_constraint: bool,
    #[serde(default)]
    pub cost_policy: CostPolicy,
}

impl LineConfig {
    pub fn from_json(text: &str) -> Result<Self, LineError> {
        let line: LineConfig =
            serde_json::from_str(text).map_err(|e| LineError::Invalid(e.to_string()))?;
        line.validate()?;
        Ok(line)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("line configs always serialize")
    }

    pub fn validate(&self) -> Result<(), LineError> {
        let bad = |msg: String| Err(LineError::Invalid(msg));
        if self.stages.is_empty() {
            return bad("at least one stage is required".into());
        }
        for (i, s) in self.stages.iter().enumerate() {
            if self.stages[..i].contains(s) {
                return bad(format!("duplicate stage {s:?}"));
            }
        }
        if !(self.control_interval_hours.is_finite() && self.control_interval_hours > 0.0) {
            return bad("control_interval_hours must be positive".into());
        }
        if self.horizon_intervals == 0 {
            return bad("horizon_intervals must be at least 1".into());
        }
        let n_parts = self.parts.len();
        for (j, p) in self.parts.iter().enumerate() {
            if p.id != j {
                return bad(format!("part at position {j} has id {}", p.id));
            }
            if !(p.demand_quantity.is_finite() && p.demand_quantity >= 0.0) {
                return bad(format!("part {j}: demand_quantity must be >= 0"));
            }
            if p.aging_intervals >= self.horizon_intervals {
                return bad(format!("part {j}: aging_intervals must be < horizon_intervals"));
            }
        }
        for (i, m) in self.machines.iter().enumerate() {
            if m.id != i {
                return bad(format!("machine at position {i} has id {}", m.id));
            }
            if !self.stages.contains(&m.stage) {
                return bad(format!("machine {i}: unknown stage {:?}", m.stage));
            }
            if m.parallel_slots == 0 {
                return bad(format!("machine {i}: parallel_slots must be >= 1"));
            }
            for (what, map) in [
                ("rates", &m.rates),
                ("setup_times", &m.setup_times),
                ("queue_caps", &m.queue_caps),
                ("input_caps", &m.input_caps),
            ] {
                for (&j, &v) in map {
                    if j >= n_parts {
                        return bad(format!("machine {i}: {what} names unknown part {j}"));
                    }
                    if !(v.is_finite() && v >= 0.0) {
                        return bad(format!("machine {i}: {what}[{j}] must be finite and >= 0"));
                    }
                }
            }
            for (&j, &t) in &m.setup_times {
                if t >= self.control_interval_hours {
                    return bad(format!(
                        "machine {i}: setup time for part {j} must be shorter than the control interval"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Number of degradation coordinates (physical machines).
    pub fn dim(&self) -> usize {
        self.machines.len()
    }

    pub fn stage_index(&self, label: &str) -> usize {
        self.stages
            .iter()
            .position(|s| s == label)
            .expect("validated line")
    }

    pub fn has_demand(&self) -> bool {
        self.parts.iter().any(|p| p.demand_quantity > 0.0)
    }

    pub fn deadline_hours(&self) -> f64 {
        self.horizon_intervals as f64 * self.control_interval_hours
    }

    /// Average final-stage output per interval needed to meet the demand.
    pub fn demand_rate(&self, part: usize) -> f64 {
        self.parts[part].demand_quantity / self.horizon_intervals as f64
    }

    /// First-stage output per interval when the stage-one window is shortened
    /// by the part's aging time.
    pub fn aged_demand_rate(&self, part: usize) -> f64 {
        let p = &self.parts[part];
        p.demand_quantity / (self.horizon_intervals - p.aging_intervals) as f64
    }

    fn max_demand(&self) -> f64 {
        self.parts.iter().map(|p| p.demand_quantity).fold(0.0, f64::max)
    }

    fn max_rate(&self) -> f64 {
        self.machines
            .iter()
            .flat_map(|m| m.rates.values().copied())
            .fold(0.0, f64::max)
    }

    pub fn queue_cap(&self, machine: usize, part: usize) -> f64 {
        self.machines[machine]
            .queue_caps
            .get(&part)
            .copied()
            .unwrap_or_else(|| 10.0 * self.max_demand())
    }

    pub fn input_cap(&self, machine: usize, part: usize) -> f64 {
        self.machines[machine]
            .input_caps
            .get(&part)
            .copied()
            .unwrap_or_else(|| 10.0 * self.max_rate())
    }

    pub fn check_degradation(&self, d: &Degradation) -> Result<(), LineError> {
        if d.dim() != self.dim() {
            return Err(LineError::DimensionMismatch {
                expected: self.dim(),
                got: d.dim(),
            });
        }
        Ok(())
    }

    /// Machines of `stage` in id order.
    pub fn machines_in_stage(&self, stage: usize) -> impl Iterator<Item = &MachineSpec> + '_ {
        let label = &self.stages[stage];
        self.machines.iter().filter(move |m| &m.stage == label)
    }

    /// Errors when a demanded part has no capable machine at some stage.
    pub fn check_structure(&self) -> Result<(), LineError> {
        for p in self.parts.iter().filter(|p| p.demand_quantity > 0.0) {
            for (s, label) in self.stages.iter().enumerate() {
                if !self.machines_in_stage(s).any(|m| m.rates.contains_key(&p.id)) {
                    return Err(LineError::StructurallyInfeasible {
                        part: p.id,
                        stage: label.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// A line whose parallel-slot machines were split into single-slot virtual
/// machines. `parent[v]` is the physical machine of virtual machine `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedLine {
    pub config: LineConfig,
    pub parent: Vec<usize>,
    pub physical_machines: usize,
}

/// Replaces every machine with `s > 1` parallel slots by `s` copies with one
/// slot each. Copies keep the parent's rates, setup times and caps, and share
/// its degradation coordinate.
pub fn expand_virtual_machines(line: &LineConfig) -> ExpandedLine {
    let mut machines = Vec::new();
    let mut parent = Vec::new();
    for (i, m) in line.machines.iter().enumerate() {
        for _ in 0..m.parallel_slots {
            let mut v = m.clone();
            v.id = machines.len();
            v.parallel_slots = 1;
            machines.push(v);
            parent.push(i);
        }
    }
    ExpandedLine {
        config: LineConfig {
            machines,
            ..line.clone()
        },
        parent,
        physical_machines: line.machines.len(),
    }
}

/// Normalized per-machine capacity loss: 0 is healthy, 1 is failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Degradation(Vec<f64>);

impl Degradation {
    pub fn new(values: Vec<f64>) -> Result<Self, LineError> {
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(LineError::OutOfRange { index, value });
            }
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Clamps each entry into `[0, 1]`. NaN becomes 0.
    pub fn clamped(values: Vec<f64>) -> Self {
        Self(
            values
                .into_iter()
                .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Degradation {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion_splits_parallel_slots() {
        let line = preset("desk6").unwrap();
        let ex = expand_virtual_machines(&line);
        assert_eq!(ex.config.machines.len(), 8);
        assert_eq!(ex.parent, vec![0, 1, 2, 2, 3, 3, 4, 5]);
        assert!(ex.config.machines.iter().all(|m| m.parallel_slots == 1));
    }

    #[test]
    fn expansion_of_single_slot_line_is_identity() {
        let line = preset("analytic2").unwrap();
        let ex = expand_virtual_machines(&line);
        assert_eq!(ex.config, line);
        assert_eq!(ex.parent, vec![0, 1]);
    }

    #[test]
    fn three_slots_two_parts() {
        let mut line = preset("desk6").unwrap();
        line.machines[2].parallel_slots = 3;
        let ex = expand_virtual_machines(&line);
        let copies: Vec<_> = ex
            .config
            .machines
            .iter()
            .zip(&ex.parent)
            .filter(|(_, &p)| p == 2)
            .map(|(m, _)| m)
            .collect();
        assert_eq!(copies.len(), 3);
        for m in copies {
            assert_eq!(m.capable_parts().collect::<Vec<_>>(), vec![0, 1]);
        }
    }

    #[test]
    fn expansion_preserves_stage_capacity() {
        let line = preset("desk6").unwrap();
        let ex = expand_virtual_machines(&line);
        for (i, m) in line.machines.iter().enumerate() {
            for j in m.capable_parts() {
                let virt: f64 = ex
                    .config
                    .machines
                    .iter()
                    .zip(&ex.parent)
                    .filter(|(_, &p)| p == i)
                    .map(|(v, _)| v.rate(j).unwrap())
                    .sum();
                assert_eq!(virt, m.parallel_slots as f64 * m.rate(j).unwrap());
            }
        }
    }

    #[test]
    fn rejects_out_of_range_degradation() {
        assert!(matches!(
            Degradation::new(vec![0.2, 1.5]),
            Err(LineError::OutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn schema_violations_are_reported() {
        let mut line = preset("desk6").unwrap();
        line.machines[0].stage = "Z".into();
        assert!(line.validate().is_err());

        let mut line = preset("desk6").unwrap();
        line.parts[0].aging_intervals = line.horizon_intervals;
        assert!(line.validate().is_err());

        assert!(LineConfig::from_json("{\"stages\": []}").is_err());
        assert!(LineConfig::from_json("not json").is_err());
    }

    #[test]
    fn json_round_trip() {
        for name in PRESET_NAMES {
            let line = preset(name).unwrap();
            assert_eq!(LineConfig::from_json(&line.to_json()).unwrap(), line);
        }
    }

    #[test]
    fn default_caps_are_generous() {
        let line = preset("analytic2").unwrap();
        assert_eq!(line.queue_cap(0, 0), 120.0);
        assert_eq!(line.input_cap(1, 0), 100.0);
    }
}
