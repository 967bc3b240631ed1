//! Seeded sub-taxonomy sampling.
//!
//! A sample grows from the root: each step picks one edge uniformly from the
//! current frontier (edges whose parent is already sampled and whose child
//! is not) and adds its child. The result is always connected and rooted.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taxo_core::{Edge, Entity, Taxonomy};

use crate::dataset::DatasetRecord;
use crate::error::SampleError;

/// Default number of repeats per size, with seeds `seed + 0 .. seed + 4`.
pub const DEFAULT_REPEATS: usize = 5;

fn grow(gold: &Taxonomy, target: usize, rng: &mut ChaCha8Rng) -> Taxonomy {
    let mut chosen: HashSet<&Entity> = HashSet::from([gold.root()]);
    let mut frontier: Vec<&Entity> = gold.children(gold.root());
    while chosen.len() < target {
        let pick = rng.random_range(0..frontier.len());
        let child = frontier.swap_remove(pick);
        chosen.insert(child);
        frontier.extend(gold.children(child));
    }
    let edges: Vec<Edge> = gold.edges().into_iter().filter(|e| chosen.contains(&e.child)).collect();
    Taxonomy::build(gold.root().clone(), &edges).expect("a rooted subset of a valid tree is valid")
}

/// Samples exactly `target` nodes. Edges keep their order in `gold`.
pub fn sample_subtaxonomy(gold: &Taxonomy, target: usize, seed: u64) -> Result<Taxonomy, SampleError> {
    if target == 0 {
        return Err(SampleError::ZeroTarget);
    }
    if target > gold.len() {
        return Err(SampleError::TargetTooLarge {
            target,
            available: gold.len(),
        });
    }
    if target == gold.len() {
        return Ok(gold.clone());
    }
    Ok(grow(gold, target, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Samples a size drawn uniformly from `min..=max`, clipped to the size of
/// `gold`.
pub fn sample_in_band(gold: &Taxonomy, min: usize, max: usize, seed: u64) -> Result<Taxonomy, SampleError> {
    if min == 0 {
        return Err(SampleError::ZeroTarget);
    }
    if min > max {
        return Err(SampleError::EmptyBand { min, max });
    }
    if min > gold.len() {
        return Err(SampleError::TargetTooLarge {
            target: min,
            available: gold.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.random_range(min..=max.min(gold.len()));
    if target == gold.len() {
        return Ok(gold.clone());
    }
    Ok(grow(gold, target, &mut rng))
}

/// Samples a record. The entity list keeps the record's own order.
pub fn sample_record(record: &DatasetRecord, target: usize, seed: u64) -> Result<DatasetRecord, SampleError> {
    let gold = sample_subtaxonomy(&record.gold, target, seed)?;
    let entities = record.entities.iter().filter(|e| gold.contains(e)).cloned().collect();
    Ok(DatasetRecord {
        name: format!("{}-n{target}-s{seed}", record.name),
        root: record.root.clone(),
        entities,
        gold,
        split: record.split,
    })
}

/// `repeats` samples per size with seeds `seed, seed + 1, ...`.
pub fn sample_grid(
    record: &DatasetRecord,
    sizes: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<DatasetRecord>, SampleError> {
    let mut out = Vec::with_capacity(sizes.len() * repeats);
    for &size in sizes {
        for r in 0..repeats as u64 {
            out.push(sample_record(record, size, seed.wrapping_add(r))?);
        }
    }
    Ok(out)
}

/// A random tree with `n` nodes named `node 0 .. node n-1`, rooted at
/// `node 0`. Node `i` hangs under a uniformly chosen earlier node whose
/// depth is below `max_depth`.
pub fn synthetic_tree(n: usize, max_depth: usize, seed: u64) -> Taxonomy {
    assert!(n >= 1, "a tree needs a root");
    let name = |i: usize| Entity::new(&format!("node {i}")).expect("non-empty name");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut depth = vec![0usize];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for i in 1..n {
        let open: Vec<usize> = (0..i).filter(|&j| depth[j] < max_depth).collect();
        let parent = open[rng.random_range(0..open.len())];
        depth.push(depth[parent] + 1);
        edges.push(Edge::new(name(parent), name(i)));
    }
    Taxonomy::build(name(0), &edges).expect("generated edges form a tree")
}

#[cfg(test)]
mod tests {
    use super::*;
    use taxo_core::fixtures;

    fn is_rooted_subtree(sample: &Taxonomy, gold: &Taxonomy) -> bool {
        sample.root() == gold.root()
            && sample
                .nodes()
                .skip(1)
                .all(|n| sample.parent(n).is_some() && sample.parent(n) == gold.parent(n))
    }

    #[test]
    fn full_size_is_identity() {
        let gold = fixtures::maneuver();
        assert_eq!(sample_subtaxonomy(&gold, gold.len(), 3).unwrap(), gold);
    }

    #[test]
    fn size_one_is_the_root() {
        let gold = fixtures::maneuver();
        let s = sample_subtaxonomy(&gold, 1, 3).unwrap();
        assert_eq!(s, Taxonomy::singleton(gold.root().clone()));
    }

    #[test]
    fn five_nodes_on_maneuver() {
        let gold = fixtures::maneuver();
        for seed in 0..20 {
            let s = sample_subtaxonomy(&gold, 5, seed).unwrap();
            assert_eq!(s.len(), 5);
            assert!(is_rooted_subtree(&s, &gold));
            assert_eq!(s, sample_subtaxonomy(&gold, 5, seed).unwrap());
        }
    }

    #[test]
    fn errors() {
        let gold = fixtures::maneuver();
        assert_eq!(
            sample_subtaxonomy(&gold, 15, 0),
            Err(SampleError::TargetTooLarge { target: 15, available: 14 })
        );
        assert_eq!(sample_subtaxonomy(&gold, 0, 0), Err(SampleError::ZeroTarget));
        assert_eq!(sample_in_band(&gold, 5, 4, 0), Err(SampleError::EmptyBand { min: 5, max: 4 }));
    }

    #[test]
    fn band_sizes_stay_in_band() {
        let gold = synthetic_tree(200, 6, 1);
        for seed in 0..30 {
            let s = sample_in_band(&gold, 80, 120, seed).unwrap();
            assert!((80..=120).contains(&s.len()));
            assert!(is_rooted_subtree(&s, &gold));
        }
    }

    #[test]
    fn seeds_give_different_samples() {
        let gold = synthetic_tree(200, 6, 1);
        let distinct: HashSet<Vec<Edge>> = (0..5).map(|s| sample_subtaxonomy(&gold, 40, s).unwrap().edges()).collect();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn record_sampling_keeps_entity_order() {
        let record = DatasetRecord::from_taxonomy("m", fixtures::maneuver(), crate::dataset::Split::Test);
        let s = sample_record(&record, 6, 11).unwrap();
        let positions: Vec<usize> = s
            .entities
            .iter()
            .map(|e| record.entities.iter().position(|x| x == e).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s.entities.len(), 6);
        assert_eq!(s.name, "m-n6-s11");
    }

    #[test]
    fn synthetic_tree_respects_depth() {
        let t = synthetic_tree(200, 6, 9);
        assert_eq!(t.len(), 200);
        assert!(t.level_count() <= 7);
    }
}
