//! Uncertainty objective and its maximizer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, LearnerError};
use crate::seed::{self, streams};

/// `H(p) = −(p ln p + (1−p) ln(1−p))` in nats, with `0·ln 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { q * q.ln() };
    -(term(p) + term(1.0 - p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub restarts: usize,
    pub initial_step: f64,
    pub min_step: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            restarts: 64,
            initial_step: 0.25,
            min_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyArgmax {
    pub point: Vec<f64>,
    pub entropy: f64,
    /// Restart that produced `point`.
    pub restart: usize,
    /// Set when no restart found any uncertainty (entropy 0 everywhere visited).
    pub degenerate: bool,
}

const MAX_MOVES: usize = 10_000;

/// Entropy gains below this are ties. `H(p)` and `H(1−p)` can differ in the
/// last bit because `1 − p` is rounded.
const TIE_TOL: f64 = 1e-12;

/// Coordinate pattern search from one start point. Each round polls
/// `x ± step·e_i` (clipped to the cube) and moves to the best strict
/// improvement; without one the step halves until it drops below `min_step`.
fn pattern_search<C: Classifier + ?Sized>(
    model: &C,
    mut x: Vec<f64>,
    p: &SearchParams,
) -> Result<(Vec<f64>, f64), LearnerError> {
    let h_max = binary_entropy(0.5);
    let mut fx = binary_entropy(model.predict_proba(&x)?);
    let mut step = p.initial_step;
    let mut moves = 0;
    let mut trial = x.clone();
    while step >= p.min_step && fx < h_max - TIE_TOL && moves < MAX_MOVES {
        let mut best: Option<(usize, f64, f64)> = None;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let v = (x[i] + dir * step).clamp(0.0, 1.0);
                if v == x[i] {
                    continue;
                }
                trial.copy_from_slice(&x);
                trial[i] = v;
                let f = binary_entropy(model.predict_proba(&trial)?);
                if f > best.map_or(fx, |b| b.2) + TIE_TOL {
                    best = Some((i, v, f));
                }
            }
        }
        match best {
            Some((i, v, f)) => {
                x[i] = v;
                fx = f;
                moves += 1;
            }
            None => step /= 2.0,
        }
    }
    Ok((x, fx))
}

/// Multi-start maximizer of `H(predict_proba(d))` over `[0,1]^n`. Start
/// points are uniform draws from per-restart derived seeds; ties go to the
/// earliest restart. Stops early once a restart reaches `ln 2`, since no
/// later restart could beat it.
pub fn entropy_argmax<C: Classifier + ?Sized>(
    model: &C,
    params: &SearchParams,
    seed: u64,
) -> Result<EntropyArgmax, LearnerError> {
    if params.restarts == 0 {
        return Err(LearnerError::Invalid("at least one restart is required".into()));
    }
    if !(params.initial_step > 0.0 && params.min_step > 0.0) {
        return Err(LearnerError::Invalid("search steps must be positive".into()));
    }
    let dim = model.dim();
    let h_max = binary_entropy(0.5);
    let mut best: Option<EntropyArgmax> = None;
    for r in 0..params.restarts {
        let mut rng = seed::rng(seed::derive(seed, streams::RESTART, r as u64));
        let start: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let (x, h) = pattern_search(model, start, params)?;
        if best.as_ref().is_none_or(|b| h > b.entropy + TIE_TOL) {
            best = Some(EntropyArgmax {
                point: x,
                entropy: h,
                restart: r,
                degenerate: false,
            });
        }
        if h >= h_max - TIE_TOL {
            break;
        }
    }
    let mut best = best.expect("at least one restart ran");
    best.degenerate = best.entropy <= 0.0;
    Ok(best)
}
