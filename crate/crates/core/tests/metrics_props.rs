mod common;

use gbm_ssrf::metrics::{auc_roc, build_report, confusion};
use proptest::prelude::*;

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..200).prop_flat_map(|n| {
        (
            prop::collection::vec(0u8..2, n),
            // coarse scores so that ties are frequent
            prop::collection::vec(0u8..12, n),
        )
            .prop_map(|(y, s)| {
                let mut y: Vec<f64> = y.into_iter().map(f64::from).collect();
                y[0] = 1.0;
                y[1] = 0.0;
                (y, s.into_iter().map(|v| v as f64 / 11.0).collect())
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn auc_equals_all_pairs_oracle((y, s) in scored()) {
        let got = auc_roc(&y, &s).unwrap();
        let want = common::all_pairs_auc(&y, &s);
        prop_assert!((got - want).abs() <= 1e-12, "{} vs {}", got, want);
    }

    #[test]
    fn auc_ignores_strictly_increasing_transforms((y, s) in scored()) {
        let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert_eq!(auc_roc(&y, &s).unwrap(), auc_roc(&y, &t).unwrap());
    }

    #[test]
    fn auc_of_negated_scores_mirrors((y, s) in scored()) {
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let sum = auc_roc(&y, &s).unwrap() + auc_roc(&y, &neg).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn confusion_counts_cover_every_row((y, s) in scored(), t in 0.0f64..1.0) {
        let c = confusion(&y, &s, t).unwrap();
        prop_assert_eq!(c.total() as usize, y.len());
        let flagged = s.iter().filter(|&&p| p > t).count() as u64;
        prop_assert_eq!(c.tp + c.fp, flagged);
        let r = build_report(&y, &s, t).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.accuracy));
        if let (Some(p), Some(rc), Some(f)) = (r.precision, r.recall, r.f1) {
            let lo = p.min(rc) - 1e-12;
            let hi = p.max(rc) + 1e-12;
            prop_assert!(f >= lo && f <= hi);
        }
    }

    #[test]
    fn reports_do_not_depend_on_row_order((y, s) in scored(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut idx: Vec<usize> = (0..y.len()).collect();
        idx.shuffle(&mut common::rng(seed));
        let y2: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let s2: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
        prop_assert_eq!(build_report(&y, &s, 0.5).unwrap(), build_report(&y2, &s2, 0.5).unwrap());
    }
}
