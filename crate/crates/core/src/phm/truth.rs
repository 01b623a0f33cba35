//! Ground-truth degradation and simulated diagnosis.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::PhmError;
use crate::seed::{self, streams};

/// Exponential degradation of one machine: `d(t) = φ + θ·e^{β t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineTruth {
    #[serde(default)]
    pub phi: f64,
    pub theta: f64,
    pub beta: f64,
    /// Log-scale noise of the exponential model. The simulated truth is
    /// deterministic; σ only enters the reparameterized intercept.
    #[serde(default)]
    pub sigma: f64,
}

impl MachineTruth {
    /// Intercept of the log-linear model, `ln θ − σ²/2`.
    pub fn theta_hat(&self) -> f64 {
        self.theta.ln() - self.sigma * self.sigma / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthParams {
    pub machines: Vec<MachineTruth>,
}

impl TruthParams {
    pub fn dim(&self) -> usize {
        self.machines.len()
    }

    pub fn validate(&self) -> Result<(), PhmError> {
        if self.machines.is_empty() {
            return Err(PhmError::Invalid("truth needs at least one machine".into()));
        }
        for (i, m) in self.machines.iter().enumerate() {
            let finite = [m.phi, m.theta, m.beta, m.sigma].iter().all(|v| v.is_finite());
            if !finite || m.phi < 0.0 || m.theta <= 0.0 || m.sigma < 0.0 || m.phi + m.theta > 1.0 {
                return Err(PhmError::Invalid(format!(
                    "machine {i}: need φ ≥ 0, θ > 0, σ ≥ 0 and φ + θ ≤ 1"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, PhmError> {
        let p: Self = serde_json::from_str(text).map_err(|e| PhmError::Parse(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("truth serializes")
    }

    pub fn phi(&self) -> Vec<f64> {
        self.machines.iter().map(|m| m.phi).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthPoint {
    pub d: Vec<f64>,
    /// Machines whose value was capped at 1.
    pub clipped: Vec<usize>,
}

/// `d_i(t) = min(1, φ_i + θ_i e^{β_i t})`.
pub fn simulate_truth(p: &TruthParams, t: f64) -> Result<TruthPoint, PhmError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(PhmError::Invalid(format!("time {t} must be finite and ≥ 0")));
    }
    let mut clipped = Vec::new();
    let d = p
        .machines
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let v = m.phi + m.theta * (m.beta * t).exp();
            if v > 1.0 {
                clipped.push(i);
                1.0
            } else {
                v
            }
        })
        .collect();
    Ok(TruthPoint { d, clipped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisSeries {
    pub times: Vec<f64>,
    /// `values[k][i]`: estimate for machine `i` at `times[k]`.
    pub values: Vec<Vec<f64>>,
    pub sigma_obs: f64,
    /// Number of observations clipped into `[0, 1]`.
    pub clip_events: usize,
}

impl DiagnosisSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Observations with `t <= until`.
    pub fn prefix(&self, until: f64) -> DiagnosisSeries {
        let k = self.times.iter().take_while(|&&t| t <= until).count();
        DiagnosisSeries {
            times: self.times[..k].to_vec(),
            values: self.values[..k].to_vec(),
            sigma_obs: self.sigma_obs,
            clip_events: self.clip_events,
        }
    }
}

/// `d̂_i(t_k) = clip(d_i(t_k) + N(0, σ_obs²), 0, 1)`. The noise at time
/// index `k` comes from its own derived stream.
pub fn simulate_diagnosis(
    p: &TruthParams,
    times: &[f64],
    sigma_obs: f64,
    seed: u64,
) -> Result<DiagnosisSeries, PhmError> {
    if !(sigma_obs >= 0.0 && sigma_obs.is_finite()) {
        return Err(PhmError::Invalid("observation noise must be ≥ 0".into()));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PhmError::Invalid("observation times must increase strictly".into()));
    }
    let mut clip_events = 0;
    let mut values = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let truth = simulate_truth(p, t)?;
        let mut rng = seed::rng(seed::derive(seed, streams::DIAGNOSIS, k as u64));
        let row = truth
            .d
            .iter()
            .map(|&v| {
                let z: f64 = rng.sample(StandardNormal);
                let x = v + sigma_obs * z;
                if !(0.0..=1.0).contains(&x) {
                    clip_events += 1;
                }
                x.clamp(0.0, 1.0)
            })
            .collect();
        values.push(row);
    }
    Ok(DiagnosisSeries {
        times: times.to_vec(),
        values,
        sigma_obs,
        clip_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(phi: f64, theta: f64, beta: f64) -> TruthParams {
        TruthParams {
            machines: vec![MachineTruth {
                phi,
                theta,
                beta,
                sigma: 0.0,
            }],
        }
    }

    #[test]
    fn truth_examples() {
        let flat = one(0.0, 0.1, 0.0);
        for t in [0.0, 3.0, 1e4] {
            assert_eq!(simulate_truth(&flat, t).unwrap().d, vec![0.1]);
        }
        let doubling = one(0.0, 0.1, std::f64::consts::LN_2);
        assert!((simulate_truth(&doubling, 1.0).unwrap().d[0] - 0.2).abs() < 1e-15);
        let sat = simulate_truth(&doubling, 10.0).unwrap();
        assert_eq!(sat.d, vec![1.0]);
        assert_eq!(sat.clipped, vec![0]);
        assert!(simulate_truth(&flat, -1.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(one(0.0, 0.1, 0.0).validate().is_ok());
        assert!(one(0.5, 0.6, 0.0).validate().is_err());
        assert!(one(0.0, 0.0, 0.0).validate().is_err());
        assert!(TruthParams::from_json(r#"{"machines":[{"theta":0.1,"beta":0.02}]}"#).is_ok());
        assert!(TruthParams::from_json(r#"{"machines":[{"theta":0.1}]}"#).is_err());
    }

    #[test]
    fn noiseless_diagnosis_is_the_truth() {
        let p = one(0.0, 0.1, 0.05);
        let times: Vec<f64> = (0..10).map(f64::from).collect();
        let s = simulate_diagnosis(&p, &times, 0.0, 3).unwrap();
        for (t, row) in times.iter().zip(&s.values) {
            assert_eq!(row, &simulate_truth(&p, *t).unwrap().d);
        }
        assert_eq!(s.clip_events, 0);
    }

    #[test]
    fn diagnosis_noise_level_and_determinism() {
        let p = one(0.0, 0.3, 0.0);
        let times: Vec<f64> = (0..100).map(f64::from).collect();
        let s = simulate_diagnosis(&p, &times, 0.05, 11).unwrap();
        assert_eq!(s, simulate_diagnosis(&p, &times, 0.05, 11).unwrap());
        let r: Vec<f64> = s.values.iter().map(|v| v[0] - 0.3).collect();
        let m = r.iter().sum::<f64>() / r.len() as f64;
        let sd = (r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r.len() - 1) as f64).sqrt();
        assert!((0.03..=0.07).contains(&sd), "{sd}");
        assert!(simulate_diagnosis(&p, &[1.0, 1.0], 0.1, 0).is_err());
    }
}
