//! Log-linear forecast model and trajectory sampling.
//!
//! With `y = ln(d − φ)` the exponential model is linear in `(θ̂, β)`:
//! `y = θ̂ + β t + ε`. The fit is ordinary least squares; its Gaussian
//! posterior has the OLS mean and covariance `σ̂² (XᵀX)⁻¹`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::truth::DiagnosisSeries;
use super::PhmError;
use crate::seed::{self, splitmix64, streams};

/// Observations must exceed `φ` by this much to enter the fit.
pub const LOG_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineForecast {
    pub phi: f64,
    /// Posterior mean of `(θ̂, β)`.
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    /// Residual variance.
    pub sigma2: f64,
    pub n_points: usize,
    /// Points at or below `φ + LOG_FLOOR`, left out of the fit.
    pub excluded: usize,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastModel {
    pub machines: Vec<MachineForecast>,
}

impl ForecastModel {
    /// A model with no parameter uncertainty and no noise.
    pub fn deterministic(phi: &[f64], theta_hat: &[f64], beta: &[f64]) -> Self {
        let machines = phi
            .iter()
            .zip(theta_hat)
            .zip(beta)
            .map(|((&phi, &a), &b)| MachineForecast {
                phi,
                mean: [a, b],
                cov: [[0.0; 2]; 2],
                sigma2: 0.0,
                n_points: 0,
                excluded: 0,
                r_squared: 1.0,
            })
            .collect();
        Self { machines }
    }

    pub fn dim(&self) -> usize {
        self.machines.len()
    }

    /// Plug-in forecast `clip(φ + e^{θ̂ + β t}, 0, 1)`.
    pub fn mean_forecast(&self, t: f64) -> Vec<f64> {
        self.machines
            .iter()
            .map(|m| (m.phi + (m.mean[0] + m.mean[1] * t).exp()).clamp(0.0, 1.0))
            .collect()
    }
}

fn fit_machine(times: &[f64], obs: &[f64], phi: f64, machine: usize) -> Result<MachineForecast, PhmError> {
    let (t, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(obs)
        .filter(|(_, &d)| d > phi + LOG_FLOOR)
        .map(|(&t, &d)| (t, (d - phi).ln()))
        .unzip();
    let n = t.len();
    let excluded = times.len() - n;
    if n < 3 {
        return Err(PhmError::NotEnoughData { machine, usable: n });
    }
    let nf = n as f64;
    let t_bar = t.iter().sum::<f64>() / nf;
    let y_bar = y.iter().sum::<f64>() / nf;
    let sxx: f64 = t.iter().map(|v| (v - t_bar).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(PhmError::SingularDesign { machine });
    }
    let sxy: f64 = t.iter().zip(&y).map(|(a, b)| (a - t_bar) * (b - y_bar)).sum();
    let beta = sxy / sxx;
    let alpha = y_bar - beta * t_bar;
    let rss: f64 = t
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - alpha - beta * a).powi(2))
        .sum();
    let sst: f64 = y.iter().map(|b| (b - y_bar).powi(2)).sum();
    let sigma2 = rss / (nf - 2.0);
    // (XᵀX)⁻¹ for X = [1, t], written with centred sums for stability.
    let inv = [
        [1.0 / nf + t_bar * t_bar / sxx, -t_bar / sxx],
        [-t_bar / sxx, 1.0 / sxx],
    ];
    let cov = [
        [sigma2 * inv[0][0], sigma2 * inv[0][1]],
        [sigma2 * inv[1][0], sigma2 * inv[1][1]],
    ];
    let r_squared = if sst > 0.0 { 1.0 - rss / sst } else { 1.0 };
    Ok(MachineForecast {
        phi,
        mean: [alpha, beta],
        cov,
        sigma2,
        n_points: n,
        excluded,
        r_squared,
    })
}

/// Fits every machine of `series` given known offsets `phi`.
pub fn fit_forecast(series: &DiagnosisSeries, phi: &[f64]) -> Result<ForecastModel, PhmError> {
    let machines = (0..phi.len())
        .map(|i| {
            let obs: Vec<f64> = series
                .values
                .iter()
                .map(|row| {
                    row.get(i).copied().ok_or_else(|| {
                        PhmError::Invalid(format!("observation row lacks machine {i}"))
                    })
                })
                .collect::<Result<_, _>>()?;
            fit_machine(&series.times, &obs, phi[i], i)
        })
        .collect::<Result<_, _>>()?;
    Ok(ForecastModel { machines })
}

/// One forecast path: parameters drawn once, noise drawn per time point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    phi: Vec<f64>,
    coef: Vec<[f64; 2]>,
    sigma: Vec<f64>,
    noise_seed: u64,
}

/// Standard normal from two 64-bit hashes (Box–Muller).
fn hashed_normal(h: u64) -> f64 {
    let a = splitmix64(h);
    let b = splitmix64(a);
    let u1 = ((a >> 11) + 1) as f64 / (1u64 << 53) as f64;
    let u2 = (b >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

impl Trajectory {
    pub fn coefficients(&self) -> &[[f64; 2]] {
        &self.coef
    }

    /// `log(d_i(t) − φ_i)` before clipping.
    pub fn log_excess(&self, i: usize, t: f64) -> f64 {
        let [a, b] = self.coef[i];
        let eps = if self.sigma[i] > 0.0 {
            let h = seed::derive(self.noise_seed, i as u64, t.to_bits());
            self.sigma[i] * hashed_normal(h)
        } else {
            0.0
        };
        a + b * t + eps
    }

    /// `clip(φ_i + e^{θ̂_i + β_i t + ε}, 0, 1)`. The noise at a given `t`
    /// is a fixed function of the trajectory seed, so re-evaluating a time
    /// gives the same point.
    pub fn at(&self, t: f64) -> Vec<f64> {
        (0..self.phi.len())
            .map(|i| (self.phi[i] + self.log_excess(i, t).exp()).clamp(0.0, 1.0))
            .collect()
    }
}

/// Draws `(θ̂_i, β_i)` from each machine's posterior.
pub fn sample_trajectory(m: &ForecastModel, seed: u64) -> Trajectory {
    let mut rng = seed::rng(seed::derive(seed, streams::TRAJECTORY, 0));
    let coef = m
        .machines
        .iter()
        .map(|f| {
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            // Cholesky factor of a 2×2 PSD matrix, tolerant of zeros.
            let l00 = f.cov[0][0].max(0.0).sqrt();
            let l10 = if l00 > 0.0 { f.cov[1][0] / l00 } else { 0.0 };
            let l11 = (f.cov[1][1] - l10 * l10).max(0.0).sqrt();
            [f.mean[0] + l00 * z0, f.mean[1] + l10 * z0 + l11 * z1]
        })
        .collect();
    Trajectory {
        phi: m.machines.iter().map(|f| f.phi).collect(),
        coef,
        sigma: m.machines.iter().map(|f| f.sigma2.max(0.0).sqrt()).collect(),
        noise_seed: seed::derive(seed, streams::TRAJECTORY_NOISE, 0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phm::truth::{simulate_diagnosis, MachineTruth, TruthParams};

    fn series(theta_hat: f64, beta: f64, n: usize) -> DiagnosisSeries {
        let times: Vec<f64> = (0..n).map(|k| k as f64).collect();
        DiagnosisSeries {
            values: times.iter().map(|t| vec![(theta_hat + beta * t).exp()]).collect(),
            times,
            sigma_obs: 0.0,
            clip_events: 0,
        }
    }

    #[test]
    fn noiseless_fit_is_exact() {
        let m = fit_forecast(&series(-2.3, 0.05, 12), &[0.0]).unwrap();
        let f = &m.machines[0];
        assert!((f.mean[0] + 2.3).abs() < 1e-9 && (f.mean[1] - 0.05).abs() < 1e-9);
        assert!(f.sigma2 < 1e-20);
        assert_eq!(f.n_points, 12);
    }

    #[test]
    fn fit_errors() {
        let mut s = series(-2.3, 0.05, 12);
        assert!(matches!(
            fit_forecast(&s, &[0.5]),
            Err(PhmError::NotEnoughData { machine: 0, usable: 0 })
        ));
        s.times = vec![1.0; 12];
        assert!(matches!(fit_forecast(&s, &[0.0]), Err(PhmError::SingularDesign { machine: 0 })));
    }

    #[test]
    fn posterior_covariance_is_psd() {
        let p = TruthParams {
            machines: vec![MachineTruth {
                phi: 0.0,
                theta: 0.1,
                beta: 0.03,
                sigma: 0.0,
            }],
        };
        let times: Vec<f64> = (0..30).map(f64::from).collect();
        let s = simulate_diagnosis(&p, &times, 0.01, 5).unwrap();
        let f = &fit_forecast(&s, &[0.0]).unwrap().machines[0];
        assert_eq!(f.cov[0][1], f.cov[1][0]);
        assert!(f.cov[0][0] >= 0.0 && f.cov[1][1] >= 0.0);
        assert!(f.cov[0][0] * f.cov[1][1] - f.cov[0][1] * f.cov[1][0] >= 0.0);
        assert!(f.sigma2 > 0.0 && f.r_squared <= 1.0);
    }

    #[test]
    fn zero_uncertainty_trajectory_is_the_mean_forecast() {
        let m = ForecastModel::deterministic(&[0.05], &[-2.0], &[0.04]);
        let tr = sample_trajectory(&m, 9);
        for t in [0.0, 1.5, 20.0] {
            assert_eq!(tr.at(t), m.mean_forecast(t));
        }
    }

    #[test]
    fn draws_depend_on_the_seed() {
        let mut m = fit_forecast(&series(-2.3, 0.05, 12), &[0.0]).unwrap();
        m.machines[0].cov = [[0.01, 0.0], [0.0, 1e-4]];
        m.machines[0].sigma2 = 0.01;
        let a = sample_trajectory(&m, 1);
        let b = sample_trajectory(&m, 2);
        assert_ne!(a.at(3.0), b.at(3.0));
        assert_eq!(a.at(3.0), a.at(3.0));
    }

    #[test]
    fn monte_carlo_log_mean_matches() {
        let mut m = ForecastModel::deterministic(&[0.0], &[-2.0], &[0.05]);
        m.machines[0].cov = [[0.02, -0.001], [-0.001, 1e-4]];
        m.machines[0].sigma2 = 0.04;
        let t = 4.0;
        let ys: Vec<f64> = (0..1000).map(|s| sample_trajectory(&m, s).log_excess(0, t)).collect();
        let mean = ys.iter().sum::<f64>() / 1000.0;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 999.0;
        let target = -2.0 + 0.05 * t;
        assert!((mean - target).abs() < 3.0 * (var / 1000.0).sqrt(), "{mean} vs {target}");
    }
}
