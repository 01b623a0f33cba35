//! Invariants of samples, models, reports and RUL distributions.

use proptest::prelude::*;
use rescap::learner::{
    balance_samples, train_forest, CapacityModel, ClassificationReport, Classifier, Confusion,
    ForestParams, LabeledSample, SampleSet, Source,
};
use rescap::oracle::Label;
use rescap::phm::pmf_from_probabilities;
use rescap::textfmt::{fmt_num, round_sig};

fn labeled(n: usize, dim: usize) -> impl Strategy<Value = Vec<LabeledSample>> {
    prop::collection::vec(
        (prop::collection::vec(0.0..=1.0f64, dim), any::<bool>()),
        n,
    )
    .prop_map(|v| {
        v.into_iter()
            .map(|(d, f)| LabeledSample::new(d, Label::from_bool(f), Source::OracleQuery))
            .collect()
    })
}

/// Points labeled by the half-plane `d1 + d2 <= 0.8`.
fn half_plane(n: usize) -> impl Strategy<Value = SampleSet> {
    prop::collection::vec(prop::collection::vec(0.0..=1.0f64, 2), n).prop_map(|pts| {
        pts.into_iter()
            .map(|d| {
                let l = Label::from_bool(d[0] + d[1] <= 0.8);
                LabeledSample::new(d, l, Source::OracleQuery)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn csv_round_trip_is_exact(samples in labeled(12, 3)) {
        let set: SampleSet = samples.into_iter().collect();
        let back = SampleSet::read_csv(set.to_csv_string().as_bytes()).unwrap();
        prop_assert_eq!(back, set);
    }

    #[test]
    fn balanced_derivatives_keep_the_true_label(set in half_plane(20)) {
        for s in set.iter() {
            for b in balance_samples(s) {
                prop_assert_eq!(b.label, Label::from_bool(b.d[0] + b.d[1] <= 0.8));
                prop_assert!(b.d.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn forest_probabilities_are_valid_and_reproducible(set in half_plane(30), seed in any::<u64>()) {
        let [inf, feas] = set.class_counts();
        prop_assume!(inf > 0 && feas > 0);
        let params = ForestParams { n_trees: 15, ..ForestParams::default() };
        let a = train_forest(&set, &params, seed).unwrap();
        let b = train_forest(&set, &params, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let model = CapacityModel::Active(a);
        let back = CapacityModel::from_json(&model.to_json()).unwrap();
        prop_assert_eq!(&back, &model);
        for s in set.iter() {
            let p = model.predict_proba(&s.d).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn report_is_consistent(tn in 0usize..50, fp in 0usize..50, fn_ in 0usize..50, tp in 0usize..50) {
        prop_assume!(tn + fp + fn_ + tp > 0);
        let r = ClassificationReport::from_confusion(Confusion { tn, fp, fn_, tp });
        let total = (tn + fp + fn_ + tp) as f64;
        prop_assert!((r.accuracy - (tn + tp) as f64 / total).abs() < 1e-15);
        prop_assert_eq!(r.infeasible.support, tn + fp);
        prop_assert_eq!(r.feasible.support, fn_ + tp);
        for m in [r.infeasible, r.feasible, r.macro_avg, r.weighted_avg] {
            for v in [m.precision, m.recall, m.f1_score] {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
        }
        // Weighted recall equals accuracy by definition.
        prop_assert!((r.weighted_avg.recall - r.accuracy).abs() < 1e-12);
    }

    #[test]
    fn pmf_and_survival_sum_to_one(c in prop::collection::vec(0.0..=1.0f64, 1..60)) {
        let (pmf, alive) = pmf_from_probabilities(&c);
        prop_assert_eq!(pmf.len(), c.len());
        prop_assert!(pmf.iter().all(|&p| p >= 0.0));
        let total: f64 = pmf.iter().sum::<f64>() + alive;
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nine_digit_rounding_is_stable(x in -1e12..1e12f64) {
        let r = round_sig(x);
        prop_assert_eq!(round_sig(r), r);
        prop_assert_eq!(fmt_num(x).parse::<f64>().unwrap(), r);
        if x != 0.0 {
            prop_assert!(((r - x) / x).abs() <= 5e-9);
        }
    }
}
