use std::collections::BTreeSet;

use metaphor_forge_core::eval::spearman;
use metaphor_forge_core::masking::{build_dataset, LabeledVerbInstance, MaskingConfig, VerbLabel, MET_TOKEN};
use proptest::prelude::*;

fn nonconstant(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u8..6, len)
        .prop_filter("constant", |v| v.iter().any(|&x| x != v[0]))
        .prop_map(|v| v.into_iter().map(f64::from).collect())
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..12).prop_flat_map(|n| (nonconstant(n..n + 1), nonconstant(n..n + 1)))
}

fn instance() -> impl Strategy<Value = LabeledVerbInstance> {
    (prop::collection::vec("[a-z]{1,4}", 1..30), any::<prop::sample::Index>(), any::<bool>()).prop_map(
        |(tokens, at, met)| {
            let v = at.index(tokens.len());
            let label = if met { VerbLabel::Metaphoric } else { VerbLabel::Literal };
            LabeledVerbInstance::new(tokens, v, label, "prop").unwrap()
        },
    )
}

proptest! {
    #[test]
    fn spearman_is_symmetric((xs, ys) in pair()) {
        let a = spearman(&xs, &ys).unwrap();
        let b = spearman(&ys, &xs).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn spearman_ignores_monotone_transforms((xs, ys) in pair(), scale in 0.1f64..10.0) {
        let warped: Vec<f64> = xs.iter().map(|x| (x * scale).exp()).collect();
        let a = spearman(&xs, &ys).unwrap();
        prop_assert!((a - spearman(&warped, &ys).unwrap()).abs() < 1e-12);
        let flipped: Vec<f64> = xs.iter().map(|x| -x).collect();
        prop_assert!((a + spearman(&flipped, &ys).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn one_pair_per_instance_and_one_mask_per_metaphor(corpus in prop::collection::vec(instance(), 1..40)) {
        let config = MaskingConfig::default();
        let ds = build_dataset(&corpus, &config, &BTreeSet::new()).unwrap();
        let metaphoric = corpus.iter().filter(|i| i.label == VerbLabel::Metaphoric).count();
        prop_assert_eq!(ds.pairs.len(), corpus.len());
        prop_assert_eq!(ds.counts.masked, metaphoric);
        for p in &ds.pairs {
            prop_assert!(p.source.len() <= 2 * config.window + 1);
            prop_assert_eq!(p.source.len(), p.target.len());
            prop_assert!(p.source.iter().filter(|t| *t == MET_TOKEN).count() <= 1);
            prop_assert!(!p.target.iter().any(|t| t == MET_TOKEN));
        }
    }
}
