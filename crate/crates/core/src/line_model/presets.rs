//! Built-in desk-scale lines.

use std::collections::BTreeMap;

use super::{CostPolicy, LineConfig, LineError, MachineSpec, PartSpec};

pub const PRESET_NAMES: [&str; 2] = ["analytic2", "desk6"];

/// Hours in the weekly control interval used by both presets.
const WEEK_HOURS: f64 = 168.0;

pub fn preset(name: &str) -> Result<LineConfig, LineError> {
    match name {
        "analytic2" => Ok(analytic2()),
        "desk6" => Ok(desk6()),
        other => Err(LineError::UnknownPreset(other.to_string())),
    }
}

fn machine(id: usize, stage: &str, parts: &[usize], slots: u32, setup: f64) -> MachineSpec {
    MachineSpec {
        id,
        stage: stage.to_string(),
        rates: parts.iter().map(|&j| (j, 10.0)).collect(),
        setup_times: parts.iter().map(|&j| (j, setup)).collect(),
        queue_caps: BTreeMap::new(),
        input_caps: BTreeMap::new(),
        parallel_slots: slots,
    }
}

/// One stage, two machines at rate 10, one part demanded at 12 per interval.
/// The capacity is exactly `{d₁ + d₂ ≤ 0.8}`.
fn analytic2() -> LineConfig {
    LineConfig {
        stages: vec!["A".into()],
        control_interval_hours: WEEK_HOURS,
        horizon_intervals: 1,
        machines: vec![machine(0, "A", &[0], 1, 0.0), machine(1, "A", &[0], 1, 0.0)],
        parts: vec![PartSpec {
            id: 0,
            demand_quantity: 12.0,
            aging_intervals: 0,
        }],
        share_constraint: true,
        cost_policy: CostPolicy::Zero,
    }
}

/// Stages A, B, C with two machines each; both parts at rate 10 everywhere,
/// stage-B machines run two parallel slots. Each part needs 12 units over a
/// two-interval horizon.
fn desk6() -> LineConfig {
    let both = [0, 1];
    LineConfig {
        stages: vec!["A".into(), "B".into(), "C".into()],
        control_interval_hours: WEEK_HOURS,
        horizon_intervals: 2,
        machines: vec![
            machine(0, "A", &both, 1, 24.0),
            machine(1, "A", &both, 1, 24.0),
            machine(2, "B", &both, 2, 12.0),
            machine(3, "B", &both, 2, 12.0),
            machine(4, "C", &both, 1, 24.0),
            machine(5, "C", &both, 1, 24.0),
        ],
        parts: (0..2)
            .map(|id| PartSpec {
                id,
                demand_quantity: 12.0,
                aging_intervals: 0,
            })
            .collect(),
        share_constraint: true,
        cost_policy: CostPolicy::Zero,
    }
}
