//! Test sets, classification reports and Monte-Carlo volume.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sample::{LabeledSample, SampleSet, Source};
use super::{Classifier, LearnerError};
use crate::oracle::{Label, Oracle};
use crate::seed::{self, streams};

const BATCH: usize = 256;

/// Uniform points of the cube labeled by the (uncharged) oracle. With
/// `balanced`, draws are rejection-sampled until each class holds half of
/// `n` (infeasible takes the odd one).
pub fn generate_test_set(
    oracle: &Oracle,
    n: usize,
    seed: u64,
    balanced: bool,
) -> Result<SampleSet, LearnerError> {
    if n < 2 {
        return Err(LearnerError::Invalid("test set needs at least 2 points".into()));
    }
    let dim = oracle.dim();
    let quota = [n - n / 2, n / 2];
    let max_draws = 1000 * n;
    let mut rng = seed::rng(seed::derive(seed, streams::TEST_SET, 0));
    let mut set = SampleSet::new();
    let mut counts = [0usize; 2];
    let mut draws = 0;
    while set.len() < n {
        if draws >= max_draws {
            return Err(LearnerError::TestSetRejection { draws, counts });
        }
        // Draw sequentially, label in parallel, accept in draw order.
        let k = BATCH.min(max_draws - draws);
        let points: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
            .collect();
        draws += k;
        let labels: Vec<Label> = points
            .par_iter()
            .map(|p| oracle.label(p))
            .collect::<Result<_, _>>()?;
        for (p, l) in points.into_iter().zip(labels) {
            let c = l.as_u8() as usize;
            if set.len() == n || (balanced && counts[c] == quota[c]) {
                continue;
            }
            counts[c] += 1;
            set.push(LabeledSample::new(p, l, Source::OracleQuery));
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    #[serde(rename = "f1-score")]
    pub f1_score: f64,
    pub support: usize,
}

/// Confusion counts with feasible as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tp: usize,
}

impl Confusion {
    pub fn add(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Infeasible, Label::Infeasible) => self.tn += 1,
            (Label::Infeasible, Label::Feasible) => self.fp += 1,
            (Label::Feasible, Label::Infeasible) => self.fn_ += 1,
            (Label::Feasible, Label::Feasible) => self.tp += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tn + self.fp + self.fn_ + self.tp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub infeasible: ClassMetrics,
    pub feasible: ClassMetrics,
    pub accuracy: f64,
    #[serde(rename = "macro avg")]
    pub macro_avg: ClassMetrics,
    #[serde(rename = "weighted avg")]
    pub weighted_avg: ClassMetrics,
    pub confusion: Confusion,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn metrics(tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1_score = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1_score,
        support: tp + fn_,
    }
}

impl ClassificationReport {
    /// Undefined ratios (no predicted or no true members) are reported as 0.
    pub fn from_confusion(c: Confusion) -> Self {
        let feasible = metrics(c.tp, c.fp, c.fn_);
        let infeasible = metrics(c.tn, c.fn_, c.fp);
        let total = c.total();
        let avg = |f: fn(&ClassMetrics) -> f64, weighted: bool| {
            if weighted {
                (f(&infeasible) * infeasible.support as f64 + f(&feasible) * feasible.support as f64)
                    / total as f64
            } else {
                (f(&infeasible) + f(&feasible)) / 2.0
            }
        };
        let row = |weighted| ClassMetrics {
            precision: avg(|m| m.precision, weighted),
            recall: avg(|m| m.recall, weighted),
            f1_score: avg(|m| m.f1_score, weighted),
            support: total,
        };
        Self {
            infeasible,
            feasible,
            accuracy: ratio(c.tp + c.tn, total),
            macro_avg: row(false),
            weighted_avg: row(true),
            confusion: c,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Predictions of `predictor` on every test point, in test order.
pub fn predict_all<C: Classifier + ?Sized>(
    predictor: &C,
    test: &SampleSet,
) -> Result<Vec<Label>, LearnerError> {
    test.samples
        .par_iter()
        .map(|s| predictor.predict(&s.d))
        .collect()
}

pub fn classification_report<C: Classifier + ?Sized>(
    predictor: &C,
    test: &SampleSet,
) -> Result<ClassificationReport, LearnerError> {
    if test.is_empty() {
        return Err(LearnerError::Invalid("empty test set".into()));
    }
    let mut c = Confusion::default();
    for (s, p) in test.iter().zip(predict_all(predictor, test)?) {
        c.add(s.label, p);
    }
    Ok(ClassificationReport::from_confusion(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub mean: f64,
    /// Wald 95% half width, `1.96·√(p(1−p)/n)`.
    pub half_width_95: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Fraction of uniform cube samples accepted by `predicate`.
pub fn estimate_volume<F>(
    dim: usize,
    predicate: F,
    n: usize,
    seed: u64,
) -> Result<VolumeEstimate, LearnerError>
where
    F: Fn(&[f64]) -> Result<bool, LearnerError> + Sync,
{
    if n < 100 {
        return Err(LearnerError::Invalid("volume needs at least 100 samples".into()));
    }
    let mut rng = seed::rng(seed::derive(seed, streams::VOLUME, 0));
    let points: Vec<f64> = (0..n * dim).map(|_| rng.random::<f64>()).collect();
    let hits = points
        .par_chunks(dim.max(1))
        .take(n)
        .map(|p| predicate(p).map(usize::from))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .sum::<usize>();
    let mean = hits as f64 / n as f64;
    Ok(VolumeEstimate {
        mean,
        half_width_95: 1.96 * (mean * (1.0 - mean) / n as f64).sqrt(),
        n_samples: n,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::OracleClassifier;
    use crate::line_model::preset;

    struct Always(Label);

    impl Classifier for Always {
        fn dim(&self) -> usize {
            2
        }

        fn predict_proba(&self, _: &[f64]) -> Result<f64, LearnerError> {
            Ok(self.0.as_u8() as f64)
        }
    }

    fn balanced_set(n: usize) -> SampleSet {
        (0..n)
            .map(|i| LabeledSample::new(vec![0.5, 0.5], Label::from_bool(i % 2 == 0), Source::OracleQuery))
            .collect()
    }

    #[test]
    fn hand_built_confusion() {
        let r = ClassificationReport::from_confusion(Confusion {
            tp: 3,
            fp: 1,
            fn_: 2,
            tn: 4,
        });
        assert_eq!(r.feasible.precision, 0.75);
        assert_eq!(r.feasible.recall, 0.6);
        assert!((r.feasible.f1_score - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.accuracy, 0.7);
        assert_eq!(r.feasible.support, 5);
        assert_eq!(r.infeasible.support, 5);
    }

    #[test]
    fn always_infeasible_on_balanced_set() {
        let r = classification_report(&Always(Label::Infeasible), &balanced_set(10)).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.feasible.precision, 0.0);
        assert_eq!(r.feasible.recall, 0.0);
        assert_eq!(r.feasible.f1_score, 0.0);
        assert_eq!(r.infeasible.recall, 1.0);
    }

    #[test]
    fn perfect_predictor() {
        let o = Oracle::new(preset("analytic2").unwrap()).unwrap();
        let t = generate_test_set(&o, 40, 1, true).unwrap();
        let r = classification_report(&OracleClassifier(&o), &t).unwrap();
        for m in [r.feasible, r.infeasible, r.macro_avg, r.weighted_avg] {
            assert_eq!((m.precision, m.recall, m.f1_score), (1.0, 1.0, 1.0));
        }
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn report_json_uses_the_familiar_keys() {
        let r = ClassificationReport::from_confusion(Confusion {
            tp: 1,
            fp: 0,
            fn_: 0,
            tn: 1,
        });
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert!(v["macro avg"]["f1-score"].is_number());
        assert!(v["weighted avg"]["support"].is_number());
        assert_eq!(serde_json::from_value::<ClassificationReport>(v).unwrap(), r);
    }

    #[test]
    fn test_sets() {
        let o = Oracle::new(preset("analytic2").unwrap()).unwrap();
        let t = generate_test_set(&o, 1000, 3, false).unwrap();
        let frac = t.class_counts()[1] as f64 / 1000.0;
        assert!((frac - 0.32).abs() <= 0.05, "{frac}");
        let b = generate_test_set(&o, 100, 3, true).unwrap();
        assert_eq!(b.class_counts(), [50, 50]);
        assert_eq!(generate_test_set(&o, 100, 3, true).unwrap(), b);
        assert!(generate_test_set(&o, 1, 3, true).is_err());

        let mut line = preset("analytic2").unwrap();
        line.parts[0].demand_quantity = 0.0;
        let o = Oracle::new(line).unwrap();
        assert!(matches!(
            generate_test_set(&o, 10, 0, true),
            Err(LearnerError::TestSetRejection { draws: 10_000, counts: [0, 5] })
        ));
    }

    #[test]
    fn volumes() {
        let v = estimate_volume(3, |_| Ok(true), 500, 0).unwrap();
        assert_eq!((v.mean, v.half_width_95), (1.0, 0.0));
        assert_eq!(estimate_volume(3, |_| Ok(false), 500, 0).unwrap().mean, 0.0);
        let o = Oracle::new(preset("analytic2").unwrap()).unwrap();
        let v = estimate_volume(2, |d| Ok(o.label(d)?.is_feasible()), 10_000, 1).unwrap();
        assert!((v.mean - 0.32).abs() <= 0.02, "{v:?}");
        assert!(v.half_width_95 > 0.0 && v.half_width_95 < 0.02);
        assert!(estimate_volume(2, |_| Ok(true), 99, 0).is_err());
    }
}
