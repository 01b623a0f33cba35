//! Labels implied by monotonicity of the capacity.
//!
//! Anything below a feasible point is feasible and anything above an
//! infeasible point is infeasible, so one oracle answer labels a whole orthant.

use super::sample::{dominated_by, LabeledSample, SampleSet, Source};
use super::LearnerError;
use crate::oracle::Label;

/// The balanced derivative of a labeled sample: `d/2` for a feasible parent,
/// `d + (1−d)/2` for an infeasible one. Returns nothing when the rule maps
/// the point onto itself (origin, all-ones vector).
pub fn balance_samples(s: &LabeledSample) -> Vec<LabeledSample> {
    let d: Vec<f64> = match s.label {
        Label::Feasible => s.d.iter().map(|v| v / 2.0).collect(),
        Label::Infeasible => s.d.iter().map(|v| v + (1.0 - v) / 2.0).collect(),
    };
    if d == s.d {
        return Vec::new();
    }
    vec![LabeledSample::new(d, s.label, Source::BalancedDerived)]
}

/// Known feasible and infeasible points, checked for consistency once.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceModel {
    dim: usize,
    feasible: Vec<Vec<f64>>,
    infeasible: Vec<Vec<f64>>,
}

impl DominanceModel {
    pub fn new(dim: usize, known: &SampleSet) -> Result<Self, LearnerError> {
        known.check_consistency()?;
        if let Some(got) = known.dim().filter(|&k| k != dim) {
            return Err(LearnerError::DimensionMismatch { expected: dim, got });
        }
        let (f, i): (Vec<_>, Vec<_>) = known.iter().partition(|s| s.label.is_feasible());
        Ok(Self {
            dim,
            feasible: f.into_iter().map(|s| s.d.clone()).collect(),
            infeasible: i.into_iter().map(|s| s.d.clone()).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn feasible_points(&self) -> &[Vec<f64>] {
        &self.feasible
    }

    pub fn label(&self, d: &[f64]) -> Option<Label> {
        if self.feasible.iter().any(|f| dominated_by(d, f)) {
            Some(Label::Feasible)
        } else if self.infeasible.iter().any(|i| dominated_by(i, d)) {
            Some(Label::Infeasible)
        } else {
            None
        }
    }
}

/// One-shot form of [`DominanceModel::label`].
pub fn dominance_label(d: &[f64], known: &SampleSet) -> Result<Option<Label>, LearnerError> {
    let dim = known.dim().unwrap_or(d.len());
    if dim != d.len() {
        return Err(LearnerError::DimensionMismatch {
            expected: dim,
            got: d.len(),
        });
    }
    Ok(DominanceModel::new(dim, known)?.label(d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(d: &[f64], label: Label) -> LabeledSample {
        LabeledSample::new(d.to_vec(), label, Source::OracleQuery)
    }

    #[test]
    fn balancing_rules() {
        let f = balance_samples(&sample(&[0.4, 0.6], Label::Feasible));
        assert_eq!(f[0].d, vec![0.2, 0.3]);
        assert_eq!(f[0].label, Label::Feasible);
        assert_eq!(f[0].source, Source::BalancedDerived);

        let i = balance_samples(&sample(&[0.6, 0.8], Label::Infeasible));
        assert!((i[0].d[0] - 0.8).abs() < 1e-15 && (i[0].d[1] - 0.9).abs() < 1e-15);
        assert_eq!(i[0].label, Label::Infeasible);

        assert!(balance_samples(&sample(&[0.0, 0.0, 0.0], Label::Feasible)).is_empty());
        assert!(balance_samples(&sample(&[1.0, 1.0], Label::Infeasible)).is_empty());
    }

    #[test]
    fn dominance_examples() {
        let known: SampleSet = [
            sample(&[0.8, 0.0], Label::Feasible),
            sample(&[0.0, 0.8], Label::Feasible),
        ]
        .into_iter()
        .collect();
        assert_eq!(dominance_label(&[0.1, 0.1], &known).unwrap(), None);
        assert_eq!(dominance_label(&[0.3, 0.0], &known).unwrap(), Some(Label::Feasible));

        let known: SampleSet = [sample(&[0.6, 0.8], Label::Infeasible)].into_iter().collect();
        assert_eq!(dominance_label(&[0.9, 0.9], &known).unwrap(), Some(Label::Infeasible));
        assert!(dominance_label(&[0.9], &known).is_err());
    }

    #[test]
    fn conflicting_knowledge_is_rejected() {
        let known: SampleSet = [
            sample(&[0.5, 0.5], Label::Feasible),
            sample(&[0.2, 0.5], Label::Infeasible),
        ]
        .into_iter()
        .collect();
        assert!(matches!(
            DominanceModel::new(2, &known),
            Err(LearnerError::MonotonicityConflict { .. })
        ));
    }
}
