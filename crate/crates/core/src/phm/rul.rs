//! Remaining-useful-life distribution through the capacity classifier.
//!
//! For one trajectory with membership probabilities `c_1, …, c_K` on the
//! grid, `P(T = t_k) = c_1 ⋯ c_{k−1} (1 − c_k)` and the survival mass is
//! `c_1 ⋯ c_K`; these telescope to 1. The distribution averages that over
//! sampled forecast trajectories.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forecast::{fit_forecast, sample_trajectory, ForecastModel};
use super::truth::{simulate_diagnosis, simulate_truth, TruthParams};
use super::PhmError;
use crate::learner::Classifier;
use crate::oracle::Oracle;
use crate::seed::{self, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulDistribution {
    /// Absolute grid times `t_1 < … < t_K`.
    pub grid: Vec<f64>,
    pub pmf: Vec<f64>,
    pub survival: f64,
    pub n_mc: usize,
    pub seed: u64,
}

/// Exit pmf and survival mass of one probability sequence. Once the
/// running product reaches 0 the remaining entries are 0.
pub fn pmf_from_probabilities(c: &[f64]) -> (Vec<f64>, f64) {
    let mut pmf = vec![0.0; c.len()];
    let mut alive = 1.0;
    for (p, &ck) in pmf.iter_mut().zip(c) {
        if alive == 0.0 {
            break;
        }
        *p = alive * (1.0 - ck);
        alive *= ck;
    }
    (pmf, alive)
}

fn validate_grid(grid: &[f64]) -> Result<(), PhmError> {
    if grid.is_empty() {
        return Err(PhmError::Invalid("empty RUL grid".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PhmError::Invalid("RUL grid must be finite and increasing".into()));
    }
    Ok(())
}

/// Monte-Carlo RUL distribution. Trajectory `j` uses seed
/// `derive(seed, TRAJECTORY, j)`; results are summed in index order.
pub fn rul_pmf<C: Classifier + ?Sized>(
    model: &ForecastModel,
    classifier: &C,
    grid: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<RulDistribution, PhmError> {
    validate_grid(grid)?;
    if n_mc == 0 {
        return Err(PhmError::Invalid("n_mc must be at least 1".into()));
    }
    if classifier.dim() != model.dim() {
        return Err(PhmError::Invalid(format!(
            "classifier has dimension {}, forecast {}",
            classifier.dim(),
            model.dim()
        )));
    }
    let per_traj: Vec<(Vec<f64>, f64)> = (0..n_mc)
        .into_par_iter()
        .map(|j| {
            let tr = sample_trajectory(model, seed::derive(seed, streams::TRAJECTORY, j as u64));
            let mut c = Vec::with_capacity(grid.len());
            // Probabilities past a certain exit are never needed.
            for &t in grid {
                let p = classifier.predict_proba(&tr.at(t))?;
                c.push(p);
                if p == 0.0 {
                    break;
                }
            }
            let (mut pmf, alive) = pmf_from_probabilities(&c);
            pmf.resize(grid.len(), 0.0);
            Ok((pmf, alive))
        })
        .collect::<Result<_, PhmError>>()?;
    let mut pmf = vec![0.0; grid.len()];
    let mut survival = 0.0;
    for (p, s) in &per_traj {
        for (acc, v) in pmf.iter_mut().zip(p) {
            *acc += v;
        }
        survival += s;
    }
    let n = n_mc as f64;
    pmf.iter_mut().for_each(|v| *v /= n);
    Ok(RulDistribution {
        grid: grid.to_vec(),
        pmf,
        survival: survival / n,
        n_mc,
        seed,
    })
}

/// Times are remaining life, i.e. grid time minus `now`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulSummary {
    /// Mean conditional on an exit inside the grid.
    pub mean: Option<f64>,
    /// Earliest most likely exit.
    pub ml: Option<f64>,
    pub q_low: Option<f64>,
    pub q_high: Option<f64>,
    pub survival: f64,
    /// No probability of exiting within the grid.
    pub no_exit: bool,
}

pub const DEFAULT_BAND: (f64, f64) = (0.05, 0.95);

pub fn rul_summary(dist: &RulDistribution, now: f64) -> RulSummary {
    rul_summary_with(dist, now, DEFAULT_BAND)
}

pub fn rul_summary_with(dist: &RulDistribution, now: f64, band: (f64, f64)) -> RulSummary {
    let mass: f64 = dist.pmf.iter().sum();
    if mass <= 0.0 {
        return RulSummary {
            mean: None,
            ml: None,
            q_low: None,
            q_high: None,
            survival: dist.survival,
            no_exit: true,
        };
    }
    let rel: Vec<f64> = dist.grid.iter().map(|t| t - now).collect();
    let mean = rel.iter().zip(&dist.pmf).map(|(t, p)| t * p).sum::<f64>() / mass;
    let mut ml = 0;
    for (k, &p) in dist.pmf.iter().enumerate() {
        if p > dist.pmf[ml] {
            ml = k;
        }
    }
    // First index whose conditional cdf reaches the level.
    let quantile = |level: f64| {
        let mut cum = 0.0;
        for (k, &p) in dist.pmf.iter().enumerate() {
            cum += p;
            if cum >= level * mass {
                return rel[k];
            }
        }
        rel[rel.len() - 1]
    };
    RulSummary {
        mean: Some(mean),
        ml: Some(rel[ml]),
        q_low: Some(quantile(band.0)),
        q_high: Some(quantile(band.1)),
        survival: dist.survival,
        no_exit: false,
    }
}

/// First time in `[0, horizon]` at which the truth leaves the oracle's
/// capacity, located by a grid scan with step `dt` and then bisection to
/// `tol`. `None` if the truth stays inside.
pub fn truth_exit_time(
    truth: &TruthParams,
    oracle: &Oracle,
    horizon: f64,
    dt: f64,
    tol: f64,
) -> Result<Option<f64>, PhmError> {
    let inside = |t: f64| -> Result<bool, PhmError> {
        Ok(oracle.label(&simulate_truth(truth, t)?.d)?.is_feasible())
    };
    if !inside(0.0)? {
        return Ok(Some(0.0));
    }
    let mut lo = 0.0;
    let mut k = 1;
    loop {
        let hi = (k as f64 * dt).min(horizon);
        if !inside(hi)? {
            let mut hi = hi;
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if inside(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(Some(hi));
        }
        if hi >= horizon {
            return Ok(None);
        }
        lo = hi;
        k += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhmRunParams {
    pub observation_times: Vec<f64>,
    pub refit_times: Vec<f64>,
    pub sigma_obs: f64,
    /// Grid step `Δt` and number of grid points `K` after each refit.
    pub dt: f64,
    pub horizon_steps: usize,
    pub n_mc: usize,
}

impl Default for PhmRunParams {
    fn default() -> Self {
        Self {
            observation_times: (0..=45).map(f64::from).collect(),
            refit_times: (1..=9).map(|k| 5.0 * k as f64).collect(),
            sigma_obs: 0.01,
            dt: 1.0,
            horizon_steps: 100,
            n_mc: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulPoint {
    pub now: f64,
    pub summary: RulSummary,
    /// Remaining life of the true trajectory, when it exits within the run.
    pub ground_truth: Option<f64>,
}

pub const GROUND_TRUTH_TOL: f64 = 1e-6;

/// Refits the forecast at each refit time on the observations made so far
/// and reports the RUL summary against the ground truth.
pub fn rul_over_time<C: Classifier + ?Sized>(
    truth: &TruthParams,
    oracle: &Oracle,
    classifier: &C,
    params: &PhmRunParams,
    seed: u64,
) -> Result<Vec<RulPoint>, PhmError> {
    truth.validate()?;
    let increasing = |v: &[f64]| !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]);
    if !increasing(&params.observation_times) || !increasing(&params.refit_times) {
        return Err(PhmError::Invalid("schedules must be non-empty and increasing".into()));
    }
    if !(params.dt > 0.0) || params.horizon_steps == 0 {
        return Err(PhmError::Invalid("grid needs Δt > 0 and K ≥ 1".into()));
    }
    if truth.dim() != oracle.dim() {
        return Err(PhmError::Invalid(format!(
            "truth has {} machines, line has {}",
            truth.dim(),
            oracle.dim()
        )));
    }
    let series = simulate_diagnosis(
        truth,
        &params.observation_times,
        params.sigma_obs,
        seed::derive(seed, streams::DIAGNOSIS, u64::MAX),
    )?;
    let last = params.refit_times[params.refit_times.len() - 1];
    let horizon = last + params.dt * params.horizon_steps as f64;
    let exit = truth_exit_time(truth, oracle, horizon, params.dt, GROUND_TRUTH_TOL)?;
    let phi = truth.phi();
    params
        .refit_times
        .iter()
        .enumerate()
        .map(|(r, &now)| {
            let model = fit_forecast(&series.prefix(now), &phi)?;
            let grid: Vec<f64> = (1..=params.horizon_steps)
                .map(|k| now + k as f64 * params.dt)
                .collect();
            let dist = rul_pmf(
                &model,
                classifier,
                &grid,
                params.n_mc,
                seed::derive(seed, streams::PHM_RUN, r as u64),
            )?;
            Ok(RulPoint {
                now,
                summary: rul_summary(&dist, now),
                ground_truth: exit.map(|t| t - now),
            })
        })
        .collect()
}
