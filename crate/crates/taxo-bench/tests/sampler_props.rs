//! Property checks for the sub-taxonomy sampler.

use proptest::prelude::*;
use taxo_bench::{sample_in_band, sample_subtaxonomy, synthetic_tree};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn samples_are_rooted_subtrees_of_the_requested_size(
        n in 2usize..120,
        depth in 1usize..7,
        tree_seed in any::<u64>(),
        seed in any::<u64>(),
        frac in 0.0f64..1.0,
    ) {
        let gold = synthetic_tree(n, depth, tree_seed);
        let target = 1 + ((gold.len() - 1) as f64 * frac) as usize;
        let sample = sample_subtaxonomy(&gold, target, seed).unwrap();
        prop_assert_eq!(sample.len(), target);
        prop_assert_eq!(sample.root(), gold.root());
        for edge in sample.edges() {
            prop_assert_eq!(gold.parent(&edge.child), Some(&edge.parent));
        }
        prop_assert_eq!(sample, sample_subtaxonomy(&gold, target, seed).unwrap());
    }

    #[test]
    fn band_samples_stay_in_the_band(
        n in 2usize..80,
        tree_seed in any::<u64>(),
        seed in any::<u64>(),
        lo in 1usize..40,
        width in 0usize..40,
    ) {
        let gold = synthetic_tree(n, 5, tree_seed);
        let min = lo.min(gold.len());
        let max = min + width;
        let sample = sample_in_band(&gold, min, max, seed).unwrap();
        prop_assert!(sample.len() >= min && sample.len() <= max.min(gold.len()));
    }

    #[test]
    fn oversized_targets_are_rejected(n in 1usize..50, extra in 1usize..10, seed in any::<u64>()) {
        let gold = synthetic_tree(n, 4, seed);
        prop_assert!(sample_subtaxonomy(&gold, gold.len() + extra, seed).is_err());
    }
}
