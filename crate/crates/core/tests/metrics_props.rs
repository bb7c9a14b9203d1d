//! Metric invariants over randomized label sets.

use hcvae_core::metrics::f1_scores;
use proptest::prelude::*;

fn labels(classes: usize, len: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(0..classes, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn micro_f1_equals_accuracy(
        (preds, truths) in (2usize..10, 5usize..60).prop_flat_map(|(classes, len)| {
            (labels(classes, len), labels(classes, len))
        })
    ) {
        let classes = 10;
        let report = f1_scores(&preds, &truths, classes).unwrap();
        let correct = preds.iter().zip(&truths).filter(|(p, t)| p == t).count();
        let accuracy = correct as f64 / preds.len() as f64;
        prop_assert!((report.micro_f1 - accuracy).abs() < 1e-12);
    }

    #[test]
    fn scores_are_bounded(
        (preds, truths) in (2usize..8, 5usize..40).prop_flat_map(|(classes, len)| {
            (labels(classes, len), labels(classes, len))
        })
    ) {
        let report = f1_scores(&preds, &truths, 8).unwrap();
        for v in [report.macro_f1, report.micro_f1, report.weighted_f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn weighted_equals_macro_for_balanced_supports(
        perm_seed in 0u64..1000,
        classes in 2usize..6,
        per_class in 2usize..8,
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        // Balanced truths; arbitrary predictions.
        let truths: Vec<usize> = (0..classes).flat_map(|c| std::iter::repeat(c).take(per_class)).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed);
        let mut preds = truths.clone();
        preds.shuffle(&mut rng);
        let report = f1_scores(&preds, &truths, classes).unwrap();
        prop_assert!((report.weighted_f1 - report.macro_f1).abs() < 1e-12);
    }
}
