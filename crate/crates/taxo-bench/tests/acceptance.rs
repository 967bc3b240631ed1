//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taxo_bench::scenarios::{
    backend_from_ndjson, check_conservation, random_session, COL_MANEUVER, HF_CUTLERY, ROLL_REQUEUE,
};
use taxo_bench::{run_experiment, sample_subtaxonomy, synthetic_tree, Cell, Method, RunConfig};
use taxo_core::{evaluate, fixtures, parse_outline, parse_taxonomy, render_outline, Edge, Entity, Taxonomy};
use taxo_induce::{
    ensemble_from_ranks, induce_col, induce_hf, ranks_from_scores, InductionConfig, InductionMode, LexicalScorer,
    OracleScorer, PinnedRankScorer, RankMap, Termination,
};

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn e(s: &str) -> Entity {
    Entity::new(s).unwrap()
}

fn within(limit: Duration, started: Instant) -> Check {
    let took = started.elapsed();
    ensure!(took < limit, "took {took:?}, limit {limit:?}");
    Ok(())
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn golden_replay() -> Check {
    let started = Instant::now();
    let gold = fixtures::maneuver();
    let config = InductionConfig::default();
    let report = induce_col(
        &fixtures::maneuver_entities(),
        gold.root(),
        &config,
        &backend_from_ndjson(COL_MANEUVER),
        &LexicalScorer::default(),
    )
    .map_err(|e| e.to_string())?;
    let m = evaluate(&report.final_taxonomy, &gold);
    ensure!(m.edge.f1 == 1.0, "edge F1 {}", m.edge.f1);
    ensure!(m.node.f1 == 1.0, "node F1 {}", m.node.f1);
    ensure!(report.termination == Termination::PoolEmpty, "termination {:?}", report.termination);
    ensure!(report.final_taxonomy == gold, "final taxonomy differs from gold");
    within(Duration::from_secs(1), started)
}

fn filter_requeue() -> Check {
    let started = Instant::now();
    let gold = fixtures::maneuver();
    let roll = e("roll");
    let flight = e("flight maneuver");
    let scorer = PinnedRankScorer::new(OracleScorer::new(gold.clone())).pin(roll.clone(), flight.clone(), 12);
    let config = InductionConfig {
        filter_enabled: true,
        ..InductionConfig::default()
    };
    let report = induce_col(
        &fixtures::maneuver_entities(),
        gold.root(),
        &config,
        &backend_from_ndjson(ROLL_REQUEUE),
        &scorer,
    )
    .map_err(|e| e.to_string())?;
    let removed_at = report
        .iterations
        .iter()
        .find_map(|it| {
            let f = it.filter.as_ref()?;
            f.removed
                .iter()
                .find(|d| d.edge == Edge::new(flight.clone(), roll.clone()))
                .map(|d| (it.k, d.rank))
        })
        .ok_or("edge flight maneuver -> roll was never removed")?;
    ensure!(removed_at.1 > 10, "removed with rank {}", removed_at.1);
    let removal_iteration = &report.iterations[removed_at.0 - 1];
    ensure!(
        removal_iteration.remaining_after.contains(&roll),
        "roll was not requeued after iteration {}",
        removed_at.0
    );
    let committed_at = report
        .iterations
        .iter()
        .find(|it| it.committed.iter().any(|c| c.child == roll))
        .map(|it| it.k)
        .ok_or("roll was never committed")?;
    ensure!(committed_at > removed_at.0, "roll committed at {committed_at}, removed at {}", removed_at.0);
    ensure!(report.final_taxonomy.contains(&roll), "roll missing from the final taxonomy");
    within(Duration::from_secs(1), started)
}

fn hallucination_pruning() -> Check {
    let started = Instant::now();
    let gold = fixtures::cutlery();
    let entities = fixtures::cutlery_entities();
    let run = |strict: bool| {
        let config = InductionConfig {
            mode: InductionMode::HfOneshot,
            strict_entity_set: strict,
            ..InductionConfig::default()
        };
        induce_hf(&entities, gold.root(), &config, &backend_from_ndjson(HF_CUTLERY), &LexicalScorer::default())
            .map_err(|e| e.to_string())
    };
    let strict = run(true)?;
    ensure!(
        strict.dropped_hallucinations == vec![e("knife")],
        "dropped {:?}",
        strict.dropped_hallucinations
    );
    for child in ["table knife", "fish knife", "butter knife", "steak knife", "case knife"] {
        ensure!(
            strict.final_taxonomy.parent(&e(child)) == Some(&e("cutlery")),
            "{child} was not promoted to the knife's parent"
        );
    }
    let strict_m = evaluate(&strict.final_taxonomy, &gold);
    ensure!(strict_m.node.precision == 1.0, "strict node precision {}", strict_m.node.precision);
    let lenient = run(false)?;
    let lenient_m = evaluate(&lenient.final_taxonomy, &gold);
    ensure!(
        lenient_m.node.precision < strict_m.node.precision,
        "lenient node precision {} not below strict {}",
        lenient_m.node.precision,
        strict_m.node.precision
    );
    within(Duration::from_secs(1), started)
}

fn ranks(pairs: &[(&str, usize)]) -> RankMap {
    pairs.iter().map(|(n, r)| (e(n), *r)).collect()
}

fn ensemble_arithmetic() -> Check {
    // Candidate "x" at rank 1 under one template and 4 under the other.
    let t1 = ranks(&[("x", 1), ("a", 2), ("b", 3), ("c", 4)]);
    let t2 = ranks(&[("a", 1), ("b", 2), ("c", 3), ("x", 4)]);
    let table = ensemble_from_ranks(&e("q"), &[t1, t2]);
    let x = table.score(&e("x")).ok_or("x not scored")?;
    ensure!((x - 0.625).abs() < 1e-12, "score {x}, expected 0.625");

    // Last place under every template among n candidates.
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in 1..=20usize {
        let names: Vec<Entity> = (0..n).map(|i| e(&format!("c{i}"))).collect();
        let maps: Vec<RankMap> = (0..6)
            .map(|_| {
                let mut order = names[..n - 1].to_vec();
                order.shuffle(&mut rng);
                order.push(names[n - 1].clone());
                order.into_iter().zip(1..).collect()
            })
            .collect();
        let t = ensemble_from_ranks(&e("q"), &maps);
        let last = t.score(&names[n - 1]).ok_or("last not scored")?;
        ensure!((last - 1.0 / n as f64).abs() < 1e-12, "n={n}: last-place score {last}");
    }

    // Template permutations never change the table.
    for case in 0..100 {
        let m = rng.random_range(2..=8);
        let n = rng.random_range(2..=15);
        let maps: Vec<RankMap> = (0..m)
            .map(|_| {
                let scored: Vec<(Entity, f64)> =
                    (0..n).map(|i| (e(&format!("c{i}")), rng.random::<f64>())).collect();
                ranks_from_scores(&scored)
            })
            .collect();
        let reference = ensemble_from_ranks(&e("q"), &maps);
        for _ in 0..5 {
            let mut shuffled = maps.clone();
            shuffled.shuffle(&mut rng);
            ensure!(
                ensemble_from_ranks(&e("q"), &shuffled) == reference,
                "table {case}: a template permutation changed the result"
            );
        }
    }
    Ok(())
}

/// Parent map of a random tree over names `n0..`, rooted at `n0`, with
/// `size` nodes drawn from a pool of `pool` names.
fn random_parent_map(rng: &mut ChaCha8Rng, size: usize, pool: usize) -> Vec<(String, String)> {
    let mut names: Vec<usize> = (1..pool).collect();
    names.shuffle(rng);
    let mut placed = vec![0usize];
    let mut edges = Vec::new();
    for &child in names.iter().take(size - 1) {
        let parent = placed[rng.random_range(0..placed.len())];
        edges.push((format!("n{parent}"), format!("n{child}")));
        placed.push(child);
    }
    edges
}

struct OracleScores {
    values: [f64; 9],
}

fn oracle_prf(pred: &BTreeSet<(String, String)>, gold: &BTreeSet<(String, String)>) -> [f64; 3] {
    prf_counts(pred.intersection(gold).count(), pred.len(), gold.len())
}

fn prf_counts(overlap: usize, pred: usize, gold: usize) -> [f64; 3] {
    if pred == 0 && gold == 0 {
        return [1.0, 1.0, 1.0];
    }
    let p = if pred == 0 { 0.0 } else { overlap as f64 / pred as f64 };
    let r = if gold == 0 { 0.0 } else { overlap as f64 / gold as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    [p, r, f]
}

/// Every (ancestor, descendant) pair, by walking parent links.
fn brute_ancestors(edges: &[(String, String)]) -> BTreeSet<(String, String)> {
    let parent: HashMap<&str, &str> = edges.iter().map(|(p, c)| (c.as_str(), p.as_str())).collect();
    let mut out = BTreeSet::new();
    for (_, c) in edges {
        let mut cur = c.as_str();
        while let Some(p) = parent.get(cur) {
            out.insert((p.to_string(), c.clone()));
            cur = p;
        }
    }
    out
}

fn brute_metrics(pred: &[(String, String)], gold: &[(String, String)]) -> OracleScores {
    let nodes = |edges: &[(String, String)]| -> BTreeSet<(String, String)> {
        std::iter::once("n0".to_string())
            .chain(edges.iter().map(|(_, c)| c.clone()))
            .map(|n| (n, String::new()))
            .collect()
    };
    let a = oracle_prf(&brute_ancestors(pred), &brute_ancestors(gold));
    let ed = oracle_prf(&pred.iter().cloned().collect(), &gold.iter().cloned().collect());
    let n = oracle_prf(&nodes(pred), &nodes(gold));
    OracleScores {
        values: [a[0], a[1], a[2], ed[0], ed[1], ed[2], n[0], n[1], n[2]],
    }
}

fn to_taxonomy(edges: &[(String, String)]) -> Taxonomy {
    let edges: Vec<Edge> = edges.iter().map(|(p, c)| Edge::from_names(p, c).unwrap()).collect();
    Taxonomy::build(e("n0"), &edges).unwrap()
}

fn metrics_oracle() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..1000 {
        let pool = rng.random_range(2..=16);
        let (gold_size, pred_size) = (rng.random_range(1..=pool.min(12)), rng.random_range(1..=pool.min(12)));
        let gold_edges = random_parent_map(&mut rng, gold_size, pool);
        let pred_edges = random_parent_map(&mut rng, pred_size, pool);
        let (gold, pred) = (to_taxonomy(&gold_edges), to_taxonomy(&pred_edges));
        let m = evaluate(&pred, &gold);
        let got = [
            m.ancestor.precision,
            m.ancestor.recall,
            m.ancestor.f1,
            m.edge.precision,
            m.edge.recall,
            m.edge.f1,
            m.node.precision,
            m.node.recall,
            m.node.f1,
        ];
        let want = brute_metrics(&pred_edges, &gold_edges).values;
        ensure!(got == want, "case {case}: got {got:?}, oracle {want:?}");
        let identity = evaluate(&gold, &gold);
        ensure!(identity.values() == [1.0; 9], "case {case}: identity pair not all ones");
    }
    within(Duration::from_secs(10), started)
}

fn metric_anchor() -> Check {
    // Gold: a root with 21 children. Prediction: 19 of those edges plus two
    // edges that hang the last two children under the first one.
    let child = |i: usize| format!("c{i}");
    let gold_edges: Vec<(String, String)> = (1..=21).map(|i| ("n0".into(), child(i))).collect();
    let mut pred_edges: Vec<(String, String)> = (1..=19).map(|i| ("n0".into(), child(i))).collect();
    pred_edges.push((child(1), child(20)));
    pred_edges.push((child(1), child(21)));
    ensure!(gold_edges.len() == 21 && pred_edges.len() == 21, "edge counts");
    let shared = pred_edges.iter().filter(|e| gold_edges.contains(e)).count();
    ensure!(shared == 19, "shared edges {shared}");
    let oracle = {
        let p = shared as f64 / pred_edges.len() as f64;
        let r = shared as f64 / gold_edges.len() as f64;
        2.0 * p * r / (p + r)
    };
    let m = evaluate(&to_taxonomy(&pred_edges), &to_taxonomy(&gold_edges));
    ensure!((m.edge.f1 - 0.9048).abs() <= 1e-4, "edge F1 {}", m.edge.f1);
    ensure!((m.edge.f1 - oracle).abs() < 1e-15, "edge F1 {} vs set oracle {oracle}", m.edge.f1);
    Ok(())
}

fn outline_round_trip() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..1000 {
        let n = rng.random_range(1..=50);
        let depth = rng.random_range(1..=6);
        let t = synthetic_tree(n, depth, rng.random());
        ensure!(t.level_count() <= 7, "generator exceeded depth 6");
        let text = render_outline(&t);
        let (_, diagnostics) = parse_outline(&text).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(diagnostics.is_empty(), "case {case}: diagnostics {diagnostics:?}");
        let (back, more) = parse_taxonomy(&text).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(more.is_empty(), "case {case}: diagnostics {more:?}");
        ensure!(back == t, "case {case}: round trip changed the tree");
        ensure!(back.edges() == t.edges(), "case {case}: sibling order changed");
    }
    within(Duration::from_secs(5), started)
}

fn conservation() -> Check {
    let mut filtered = 0;
    let mut stalled = 0;
    let mut iterations = 0;
    for seed in 0..100 {
        let session = random_session(seed);
        let report = session
            .report()
            .ok_or_else(|| format!("seed {seed}: session failed: {:?}", session.outcome.as_ref().err()))?;
        check_conservation(&session.entities, report).map_err(|e| format!("seed {seed}: {e}"))?;
        iterations += report.iterations.len();
        if report.iterations.iter().any(|it| it.filter.as_ref().is_some_and(|f| !f.removed.is_empty())) {
            filtered += 1;
        }
        if report.termination == Termination::Stalled {
            stalled += 1;
        }
    }
    ensure!(filtered > 0, "no session had a filter removal");
    ensure!(stalled > 0, "no session stalled");
    println!("      {iterations} iterations checked; {filtered} sessions with filter removals, {stalled} stalled");
    Ok(())
}

fn sampler_validity() -> Check {
    let gold = synthetic_tree(200, 8, 3);
    ensure!(gold.len() == 200, "synthetic tree size {}", gold.len());
    let gold_edges: HashSet<Edge> = gold.edge_set();
    for size in [20, 40, 80] {
        for seed in 0..5u64 {
            let s = sample_subtaxonomy(&gold, size, seed).map_err(|e| e.to_string())?;
            ensure!(s.len() == size, "size {size} seed {seed}: got {} nodes", s.len());
            ensure!(s.root() == gold.root(), "size {size} seed {seed}: wrong root");
            ensure!(s.edges().iter().all(|e| gold_edges.contains(e)), "size {size} seed {seed}: foreign edge");
            // Reachability from the root over the sample's own edges.
            let mut children: BTreeMap<&Entity, Vec<&Entity>> = BTreeMap::new();
            let edges = s.edges();
            for e in &edges {
                children.entry(&e.parent).or_default().push(&e.child);
            }
            let mut seen: HashSet<&Entity> = HashSet::from([s.root()]);
            let mut stack = vec![s.root()];
            while let Some(n) = stack.pop() {
                for c in children.get(n).into_iter().flatten() {
                    if seen.insert(c) {
                        stack.push(c);
                    }
                }
            }
            ensure!(seen.len() == size, "size {size} seed {seed}: only {} reachable", seen.len());
            let again = sample_subtaxonomy(&gold, size, seed).map_err(|e| e.to_string())?;
            ensure!(again == s && again.edges() == s.edges(), "size {size} seed {seed}: not deterministic");
        }
    }
    Ok(())
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != "timing.json") {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn ablation_parity() -> Check {
    let text = fs::read_to_string(fixtures_dir().join("ablation.toml")).map_err(|e| e.to_string())?;
    let config = RunConfig::from_toml(&text).map_err(|e| e.to_string())?;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_experiment(&config, &fixtures_dir(), a.path()).map_err(|e| e.to_string())?;
    run_experiment(&config, &fixtures_dir(), b.path()).map_err(|e| e.to_string())?;

    ensure!(first.manifests.len() == 4, "{} manifests", first.manifests.len());
    let cells: BTreeSet<(bool, bool)> =
        first.manifests.iter().map(|m| (m.method == Method::Col, m.filter)).collect();
    ensure!(cells.len() == 4, "cells {cells:?}");
    let header: Vec<&str> = first.table.columns.iter().map(String::as_str).collect();
    ensure!(
        header == ["Dataset", "CoL", "Filter", "Pe", "Re", "F1e", "Pa", "Ra", "F1a"],
        "columns {header:?}"
    );
    let rows: BTreeSet<(bool, bool)> = first.table.rows.iter().map(|r| (r.col, r.filter)).collect();
    ensure!(first.table.rows.len() == 4 && rows == cells, "rows {rows:?}");
    ensure!(first.failures() == 0, "{} record runs failed", first.failures());

    let (fa, fb) = (files_under(a.path()), files_under(b.path()));
    ensure!(!fa.is_empty() && fa.keys().eq(fb.keys()), "reruns wrote different file sets");
    for (path, bytes) in &fa {
        ensure!(fb[path] == *bytes, "{} differs between reruns", path.display());
    }

    // Each cell run alone yields the same manifest bytes.
    for m in &first.manifests {
        let single = RunConfig {
            cells: vec![Cell {
                method: m.method,
                filter: m.filter,
            }],
            ..config.clone()
        };
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&single, &fixtures_dir(), dir.path()).map_err(|e| e.to_string())?;
        let path = Path::new(&m.run_id).join("manifest.json");
        let alone = fs::read(dir.path().join(&path)).map_err(|e| e.to_string())?;
        ensure!(alone == fa[&path], "{} differs from the grid run", m.run_id);
    }
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("golden replay", golden_replay),
        ("filter re-queue", filter_requeue),
        ("hallucination pruning", hallucination_pruning),
        ("ensemble arithmetic", ensemble_arithmetic),
        ("metrics oracle equivalence", metrics_oracle),
        ("edge-F1 anchor 19/21", metric_anchor),
        ("outline round trip", outline_round_trip),
        ("conservation invariant", conservation),
        ("sampler validity", sampler_validity),
        ("ablation harness parity", ablation_parity),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let ms = started.elapsed().as_millis();
        match outcome {
            Ok(()) => println!("PASS  {name} ({ms} ms)"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({ms} ms): {why}");
            }
        }
    }
    println!("{} of {} criteria passed", 10 - failed, 10);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
