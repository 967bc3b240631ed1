//! Bundled scripted transcripts and randomized scripted sessions.
//!
//! The transcripts are the ones shipped under `fixtures/`; they are compiled
//! in so tests and the CLI can replay them without touching the disk.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taxo_core::{render_outline, Entity, Taxonomy};
use taxo_induce::{
    induce, EngineError, FilterConfig, FnScorer, HypernymScorer, InductionConfig, InductionMode, InductionReport,
    OracleScorer, ReplayMode, ScriptRecord, ScriptedBackend, Template,
};

use crate::sample::synthetic_tree;

pub const COL_MANEUVER: &str = include_str!("../fixtures/transcripts/col/maneuver.ndjson");
pub const COL_CUTLERY: &str = include_str!("../fixtures/transcripts/col/cutlery.ndjson");
pub const HF_MANEUVER: &str = include_str!("../fixtures/transcripts/hf/maneuver.ndjson");
pub const HF_CUTLERY: &str = include_str!("../fixtures/transcripts/hf/cutlery.ndjson");
/// CoL session on the maneuver entities in which "roll" first appears under
/// "flight maneuver" and is offered again one layer later under "maneuver".
pub const ROLL_REQUEUE: &str = include_str!("../fixtures/scenarios/roll_requeue.ndjson");
/// CoL session on the maneuver entities where the model stops producing
/// outlines after the opening turn.
pub const REFUSAL: &str = include_str!("../fixtures/scenarios/refusal.ndjson");

/// Parses NDJSON transcript text into a digest-mode scripted backend.
pub fn backend_from_ndjson(text: &str) -> ScriptedBackend {
    let records: Vec<ScriptRecord> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("bundled transcripts are valid"))
        .collect();
    ScriptedBackend::new(records, ReplayMode::Digest)
}

/// One randomized scripted session and the facts needed to check it.
#[derive(Debug)]
pub struct RandomSession {
    pub seed: u64,
    pub gold: Taxonomy,
    pub entities: Vec<Entity>,
    pub config: InductionConfig,
    pub outcome: Result<InductionReport, EngineError>,
}

impl RandomSession {
    /// The report, including the partial one of an aborted session.
    pub fn report(&self) -> Option<&InductionReport> {
        match &self.outcome {
            Ok(r) => Some(r),
            Err(EngineError::Aborted { partial, .. }) => Some(partial),
            Err(_) => None,
        }
    }
}

fn perturbed_layer(gold: &Taxonomy, k: usize, tag: u64, prose: bool, rng: &mut ChaCha8Rng) -> String {
    if prose && rng.random_bool(0.1) {
        return "I am not sure how to continue from here.".into();
    }
    let mut t = gold.truncate(k);
    let newest: Vec<Entity> = t.level(k - 1).into_iter().cloned().collect();
    if !newest.is_empty() && k > 1 {
        if rng.random_bool(0.3) {
            let victim = newest.choose(rng).expect("non-empty");
            if let Ok((next, _)) = t.remove_subtree(victim) {
                t = next;
            }
        }
        if rng.random_bool(0.3) {
            let moved = newest.choose(rng).expect("non-empty").clone();
            if t.contains(&moved) {
                if let Ok((next, _)) = t.remove_subtree(&moved) {
                    let hosts: Vec<Entity> = next.nodes().cloned().collect();
                    let host = hosts.choose(rng).expect("root is always there").clone();
                    t = next.with_leaf(&host, moved).expect("fresh leaf");
                }
            }
        }
    }
    if rng.random_bool(0.3) {
        let hosts: Vec<Entity> = t.nodes().cloned().collect();
        let host = hosts.choose(rng).expect("root is always there").clone();
        let phantom = Entity::new(&format!("phantom {tag} {k}")).expect("non-empty");
        t = t.with_leaf(&host, phantom).expect("fresh leaf");
    }
    format!("The current taxonomy is:\n{}", render_outline(&t))
}

fn noisy_scorer(salt: u64) -> impl HypernymScorer {
    FnScorer::new("noisy", move |q: &Entity, a: &Entity, t: &Template| {
        let h = q
            .key()
            .bytes()
            .chain([0u8])
            .chain(a.key().bytes())
            .chain(t.as_str().bytes())
            .fold(salt ^ 0xcbf29ce484222325, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3));
        (h % 1000) as f64
    })
}

/// Runs one strict-mode session with a scripted model that omits, moves
/// and invents entities, sometimes answers a layer in prose, and answers the check
/// prompt at random. The filter, its scorer, `top_k` and the stall guard
/// are drawn from the seed as well.
pub fn random_session(seed: u64) -> RandomSession {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=18);
    let gold = synthetic_tree(n, 4, seed);
    let mut entities: Vec<Entity> = gold.nodes().cloned().collect();
    entities.shuffle(&mut rng);

    let mode = if rng.random_bool(0.2) {
        InductionMode::HfOneshot
    } else {
        InductionMode::Col
    };
    let max_iterations = rng.random_range(2..=8);
    let config = InductionConfig {
        mode,
        filter_enabled: rng.random_bool(0.5),
        filter: FilterConfig {
            top_k: rng.random_range(1..=6),
            ..FilterConfig::default()
        },
        max_iterations,
        stall_limit: rng.random_range(0..=3),
        strict_entity_set: true,
        ..InductionConfig::default()
    };

    let mut replies = Vec::new();
    match mode {
        InductionMode::HfOneshot => replies.push(perturbed_layer(&gold, gold.level_count(), seed, false, &mut rng)),
        InductionMode::Col => {
            for k in 1..=max_iterations {
                replies.push(perturbed_layer(&gold, k, seed, true, &mut rng));
                replies.push(if rng.random_bool(0.5) { "Yes" } else { "No" }.to_string());
            }
        }
    }
    // A short script now and then exercises the aborted path.
    if rng.random_bool(0.05) && replies.len() > 1 {
        replies.pop();
    }
    let backend = ScriptedBackend::from_replies(replies);
    let oracle = rng.random_bool(0.3);
    let outcome = if oracle {
        induce(&entities, gold.root(), &config, &backend, &OracleScorer::new(gold.clone()))
    } else {
        induce(&entities, gold.root(), &config, &backend, &noisy_scorer(seed))
    };
    RandomSession {
        seed,
        gold,
        entities,
        config,
        outcome,
    }
}

/// Checks that after every iteration the placed, remaining and dropped
/// entities are pairwise disjoint and together equal the given entity set.
pub fn check_conservation(entities: &[Entity], report: &InductionReport) -> Result<(), String> {
    let all: HashSet<&Entity> = entities.iter().collect();
    for record in &report.iterations {
        let placed: HashSet<&Entity> = record.placed_after.iter().collect();
        let remaining: HashSet<&Entity> = record.remaining_after.iter().collect();
        let dropped: HashSet<&Entity> = record.dropped_after.iter().collect();
        let sizes = placed.len() + remaining.len() + dropped.len();
        let union: HashSet<&Entity> = placed.iter().chain(&remaining).chain(&dropped).copied().collect();
        if union != all || sizes != all.len() {
            return Err(format!(
                "iteration {}: placed {} + remaining {} + dropped {} vs {} entities (union {})",
                record.k,
                placed.len(),
                remaining.len(),
                dropped.len(),
                all.len(),
                union.len()
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_transcripts_parse() {
        for (text, n) in [(COL_MANEUVER, 8), (HF_CUTLERY, 1), (ROLL_REQUEUE, 8), (REFUSAL, 6)] {
            let backend = backend_from_ndjson(text);
            assert_eq!(backend.served(), 0);
            assert_eq!(text.lines().filter(|l| !l.trim().is_empty()).count(), n);
        }
    }

    #[test]
    fn random_sessions_are_deterministic() {
        for seed in 0..10 {
            let a = random_session(seed);
            let b = random_session(seed);
            assert_eq!(a.report().map(|r| &r.final_taxonomy), b.report().map(|r| &r.final_taxonomy));
            assert_eq!(a.report().map(|r| r.iterations.len()), b.report().map(|r| r.iterations.len()));
        }
    }
}
