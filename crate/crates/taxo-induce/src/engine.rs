//! Induction sessions: one-shot, layer-by-layer, and generation of
//! demonstrations without gold data.
//!
//! The engine owns all bookkeeping. Replies from the model are parsed into
//! proposals and merged into the working taxonomy only as additions; the
//! model can never move or delete what an earlier turn committed.

use std::collections::HashMap;

use log::{debug, info};
use serde::{Deserialize, Serialize};
use taxo_core::{parse_taxonomy, Edge, Entity, EntityPool, Taxonomy};

use crate::error::{EngineError, GatewayError};
use crate::filter::{filter_layer, Detach, FilterConfig, FilterReport, HypernymScorer};
use crate::gateway::{ChatBackend, ChatRequest};
use crate::prompt::{
    build_check_prompt, build_hf_instruction, build_iteration_prompt, build_zero_shot_demo_request,
    demonstration_with_rules, ChatMessage, ChatTranscript, Demonstration, PromptMode, RuleSet, SYSTEM_PROMPT,
};

pub const DEFAULT_MAX_ITERATIONS: usize = 10;
pub const DEFAULT_STALL_LIMIT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InductionMode {
    HfOneshot,
    Col,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InductionConfig {
    pub mode: InductionMode,
    pub rules: RuleSet,
    pub demonstrations: Vec<Demonstration>,
    pub filter_enabled: bool,
    pub filter: FilterConfig,
    /// Upper bound on outline-producing turns, the opening turn included.
    /// Ignored in one-shot mode.
    pub max_iterations: usize,
    /// Consecutive iterations without a committed edge before giving up.
    /// Zero disables the guard.
    pub stall_limit: usize,
    /// Prune entities outside the given list instead of keeping them.
    pub strict_entity_set: bool,
    /// Stop when the model answers "Yes" to the check prompt even though
    /// entities remain.
    pub honor_model_completion: bool,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for InductionConfig {
    fn default() -> Self {
        Self {
            mode: InductionMode::Col,
            rules: RuleSet::full(),
            demonstrations: Vec::new(),
            filter_enabled: false,
            filter: FilterConfig::default(),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            stall_limit: DEFAULT_STALL_LIMIT,
            strict_entity_set: true,
            honor_model_completion: false,
            model: "gpt-4".into(),
            temperature: 0.0,
            max_tokens: 2048,
        }
    }
}

impl InductionConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.max_iterations == 0 {
            return Err(EngineError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(EngineError::InvalidConfig(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.filter_enabled {
            self.filter.validate()?;
        }
        Ok(())
    }

    fn request(&self, messages: ChatTranscript) -> ChatRequest {
        ChatRequest {
            messages,
            model: self.model.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    PoolEmpty,
    MaxIterations,
    Stalled,
    ModelDeclaredCompleteEarly,
    /// The backend failed; the report holds whatever was committed.
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub reply: String,
    /// Entities accepted from the reply before filtering.
    pub selected: Vec<Entity>,
    /// Edges that survived filtering.
    pub committed: Vec<Edge>,
    /// Entities the filter took back out.
    pub filtered: Vec<Entity>,
    /// Out-of-set entities pruned from the reply.
    pub hallucinations: Vec<Entity>,
    /// Out-of-set entities kept because the entity set is not strict.
    pub extras: Vec<Entity>,
    pub filter: Option<FilterReport>,
    /// `Some(true)` when the model said the remaining list is empty.
    pub check_answer: Option<bool>,
    pub diagnostics: Vec<String>,
    pub placed_after: Vec<Entity>,
    pub remaining_after: Vec<Entity>,
    pub dropped_after: Vec<Entity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InductionReport {
    pub final_taxonomy: Taxonomy,
    /// Given entities that never made it into the taxonomy.
    pub unplaced: Vec<Entity>,
    pub dropped_hallucinations: Vec<Entity>,
    /// Given entities removed by the filter in one-shot mode.
    pub filtered_out: Vec<Entity>,
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    pub transcript: ChatTranscript,
}

impl InductionReport {
    fn new(root: &Entity) -> Self {
        Self {
            final_taxonomy: Taxonomy::singleton(root.clone()),
            unplaced: Vec::new(),
            dropped_hallucinations: Vec::new(),
            filtered_out: Vec::new(),
            iterations: Vec::new(),
            termination: Termination::Aborted,
            transcript: Vec::new(),
        }
    }

    fn finish(&mut self, t: &Taxonomy, pool: &EntityPool, termination: Termination) {
        self.final_taxonomy = t.clone();
        self.unplaced = pool.remaining().iter().cloned().collect();
        self.filtered_out = pool.dropped().iter().cloned().collect();
        self.termination = termination;
    }
}

/// What a single reply contributed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MergeOutcome {
    pub added: Vec<Edge>,
    pub hallucinations: Vec<Entity>,
    pub extras: Vec<Entity>,
    pub diagnostics: Vec<String>,
}

/// Adds the new parts of `proposal` to `t`.
///
/// Nodes are visited parents first. A node already in `t` keeps its
/// position; its new children still attach to it. A new in-set node that is
/// waiting in `pool` attaches under the nearest proposal ancestor that is
/// in the working taxonomy. In strict mode out-of-set nodes are pruned and
/// their children promoted; otherwise they are kept.
pub fn merge_layer(t: &Taxonomy, proposal: &Taxonomy, pool: &mut EntityPool, strict: bool) -> (Taxonomy, MergeOutcome) {
    let mut out = MergeOutcome::default();
    let mut current = t.clone();
    let root = t.root();
    if proposal.root() != root && !proposal.contains(root) {
        out.diagnostics.push(format!(
            "reply is rooted at '{}', not '{}'; nothing merged",
            proposal.root(),
            root
        ));
        return (current, out);
    }
    if proposal.root() != root {
        out.diagnostics.push(format!(
            "reply is rooted at '{}'; using its '{}' subtree",
            proposal.root(),
            root
        ));
    }
    let mut resolved: HashMap<Entity, Entity> = HashMap::new();
    resolved.insert(root.clone(), root.clone());
    for node in proposal.subtree_entities(root).into_iter().skip(1) {
        let proposed_parent = proposal.parent(node).expect("non-root node has a parent");
        let anchor = resolved[proposed_parent].clone();
        if let Some(placed) = current.get(node.key()).cloned() {
            if current.parent(&placed) != Some(&anchor) && &placed != root {
                out.diagnostics.push(format!(
                    "'{}' is already under '{}'; ignoring move to '{}'",
                    placed,
                    current.parent(&placed).map(Entity::surface).unwrap_or(""),
                    anchor
                ));
            } else if &placed == root {
                out.diagnostics.push(format!("root '{placed}' repeated below '{anchor}'; ignored"));
            }
            resolved.insert(node.clone(), placed);
            continue;
        }
        if let Some(given) = pool.all().get(node).cloned() {
            if pool.is_remaining(&given) {
                current = current
                    .with_leaf(&anchor, given.clone())
                    .expect("anchor is placed and the node is new");
                pool.select(&given);
                out.added.push(Edge::new(anchor.clone(), given.clone()));
                resolved.insert(node.clone(), given);
            } else {
                out.diagnostics.push(format!("'{given}' is no longer available; skipped"));
                resolved.insert(node.clone(), anchor);
            }
            continue;
        }
        if strict {
            out.hallucinations.push(node.clone());
            resolved.insert(node.clone(), anchor);
        } else {
            current = current
                .with_leaf(&anchor, node.clone())
                .expect("anchor is placed and the node is new");
            out.added.push(Edge::new(anchor, node.clone()));
            out.extras.push(node.clone());
            resolved.insert(node.clone(), node.clone());
        }
    }
    (current, out)
}

/// Reads the model's reply to the check prompt.
pub fn parse_check_answer(reply: &str) -> Option<bool> {
    let lower = reply.to_lowercase();
    let after = match lower.find("answer:") {
        Some(i) => &lower[i + "answer:".len()..],
        None => lower.as_str(),
    };
    let word: String = after
        .trim_start()
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect();
    match word.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

fn system_and_demos(config: &InductionConfig, one_shot: bool) -> Result<ChatTranscript, EngineError> {
    let mut messages = vec![ChatMessage::system(SYSTEM_PROMPT)];
    for demo in &config.demonstrations {
        if one_shot {
            messages.extend(demo.one_shot_messages()?);
        } else {
            messages.extend(demo.dialogue.iter().cloned());
        }
    }
    Ok(messages)
}

fn snapshot(record: &mut IterationRecord, t: &Taxonomy, pool: &EntityPool) {
    record.placed_after = t.nodes().cloned().collect();
    record.remaining_after = pool.remaining().iter().cloned().collect();
    record.dropped_after = pool.dropped().iter().cloned().collect();
}

fn abort(mut report: InductionReport, t: &Taxonomy, pool: &EntityPool, source: GatewayError) -> EngineError {
    report.finish(t, pool, Termination::Aborted);
    EngineError::Aborted {
        partial: Box::new(report),
        source,
    }
}

/// One request carrying the whole task; the reply is the full taxonomy.
///
/// With the filter on, every edge is scored top-down and rejected subtrees
/// are dropped for good, since there is no later turn to place them.
pub fn induce_hf<B, S>(
    entities: &[Entity],
    root: &Entity,
    config: &InductionConfig,
    backend: &B,
    scorer: &S,
) -> Result<InductionReport, EngineError>
where
    B: ChatBackend + ?Sized,
    S: HypernymScorer + ?Sized,
{
    config.validate()?;
    let mut messages = system_and_demos(config, true)?;
    messages.push(build_hf_instruction(root, entities, &config.rules, PromptMode::OneShot)?);
    let root = entities.iter().find(|e| *e == root).expect("checked by the instruction builder");
    let mut pool = EntityPool::new(entities, root);
    let mut report = InductionReport::new(root);
    let t = Taxonomy::singleton(root.clone());

    let reply = match backend.complete(&config.request(messages.clone())) {
        Ok(r) => r,
        Err(e) => {
            report.transcript = messages;
            return Err(abort(report, &t, &pool, e));
        }
    };
    messages.push(ChatMessage::assistant(reply.clone()));
    report.transcript = messages;

    let (proposal, diagnostics) = parse_taxonomy(&reply)?;
    pool.begin_iteration();
    let (mut t, merged) = merge_layer(&t, &proposal, &mut pool, config.strict_entity_set);
    let mut record = IterationRecord {
        k: 1,
        reply,
        selected: pool.selected().to_vec(),
        hallucinations: merged.hallucinations.clone(),
        extras: merged.extras,
        diagnostics: diagnostics.iter().map(ToString::to_string).chain(merged.diagnostics).collect(),
        ..IterationRecord::default()
    };
    let mut committed = merged.added;
    if config.filter_enabled {
        let (next, filtered) = filter_layer(&t, &committed, &mut pool, &config.filter, scorer, Detach::Drop)?;
        t = next;
        committed.retain(|e| t.contains_edge(e));
        record.filtered = filtered.detached.clone();
        record.filter = Some(filtered);
    }
    record.committed = committed;
    snapshot(&mut record, &t, &pool);
    report.dropped_hallucinations = merged.hallucinations;
    report.iterations.push(record);
    let termination = if pool.is_exhausted() {
        Termination::PoolEmpty
    } else {
        Termination::MaxIterations
    };
    report.finish(&t, &pool, termination);
    Ok(report)
}

/// Layer-by-layer session.
///
/// Iteration 1 is the opening instruction, whose reply names the root.
/// Iteration `k >= 2` asks for the `k`-level entities. Every iteration ends
/// with the check prompt; the engine records the answer but decides
/// completion from its own pool unless `honor_model_completion` is set.
pub fn induce_col<B, S>(
    entities: &[Entity],
    root: &Entity,
    config: &InductionConfig,
    backend: &B,
    scorer: &S,
) -> Result<InductionReport, EngineError>
where
    B: ChatBackend + ?Sized,
    S: HypernymScorer + ?Sized,
{
    config.validate()?;
    let mut messages = system_and_demos(config, false)?;
    messages.push(build_hf_instruction(root, entities, &config.rules, PromptMode::Layered)?);
    let root = entities.iter().find(|e| *e == root).expect("checked by the instruction builder");
    let mut pool = EntityPool::new(entities, root);
    let mut report = InductionReport::new(root);
    let mut t = Taxonomy::singleton(root.clone());
    let mut stalled_for = 0;

    for k in 1..=config.max_iterations {
        if k > 1 {
            messages.push(build_iteration_prompt(k)?);
        }
        pool.begin_iteration();
        let reply = match backend.complete(&config.request(messages.clone())) {
            Ok(r) => r,
            Err(e) => {
                report.transcript = messages;
                return Err(abort(report, &t, &pool, e));
            }
        };
        messages.push(ChatMessage::assistant(reply.clone()));

        let mut record = IterationRecord {
            k,
            reply: reply.clone(),
            ..IterationRecord::default()
        };
        match parse_taxonomy(&reply) {
            Ok((proposal, diagnostics)) => {
                record.diagnostics.extend(diagnostics.iter().map(ToString::to_string));
                let (next, merged) = merge_layer(&t, &proposal, &mut pool, config.strict_entity_set);
                t = next;
                record.selected = pool.selected().to_vec();
                record.committed = merged.added;
                record.hallucinations = merged.hallucinations;
                record.extras = merged.extras;
                record.diagnostics.extend(merged.diagnostics);
            }
            Err(e) => {
                debug!("iteration {k}: no outline in reply ({e})");
                record.diagnostics.push(format!("no outline in reply: {e}"));
            }
        }
        if config.filter_enabled && !record.committed.is_empty() {
            let (next, filtered) =
                filter_layer(&t, &record.committed, &mut pool, &config.filter, scorer, Detach::Requeue)?;
            t = next;
            record.committed.retain(|e| t.contains_edge(e));
            record.filtered = filtered.detached.clone();
            record.filter = Some(filtered);
        }
        report.dropped_hallucinations.extend(record.hallucinations.iter().cloned());

        messages.push(build_check_prompt());
        let answer = match backend.complete(&config.request(messages.clone())) {
            Ok(r) => r,
            Err(e) => {
                snapshot(&mut record, &t, &pool);
                report.iterations.push(record);
                report.transcript = messages;
                return Err(abort(report, &t, &pool, e));
            }
        };
        messages.push(ChatMessage::assistant(answer.clone()));
        record.check_answer = parse_check_answer(&answer);
        snapshot(&mut record, &t, &pool);
        info!(
            "iteration {k}: {} committed, {} filtered, {} remaining",
            record.committed.len(),
            record.filtered.len(),
            pool.remaining().len()
        );

        // The opening turn only names the root, so it never counts as a stall.
        if k > 1 {
            stalled_for = if record.committed.is_empty() { stalled_for + 1 } else { 0 };
        }
        let model_says_done = record.check_answer == Some(true);
        report.iterations.push(record);

        let termination = if pool.is_exhausted() {
            Some(Termination::PoolEmpty)
        } else if config.stall_limit > 0 && stalled_for >= config.stall_limit {
            Some(Termination::Stalled)
        } else if model_says_done && config.honor_model_completion {
            Some(Termination::ModelDeclaredCompleteEarly)
        } else if k == config.max_iterations {
            Some(Termination::MaxIterations)
        } else {
            None
        };
        if let Some(termination) = termination {
            report.transcript = messages;
            report.finish(&t, &pool, termination);
            return Ok(report);
        }
    }
    unreachable!("the last iteration always terminates")
}

/// Runs the session selected by `config.mode`.
pub fn induce<B, S>(
    entities: &[Entity],
    root: &Entity,
    config: &InductionConfig,
    backend: &B,
    scorer: &S,
) -> Result<InductionReport, EngineError>
where
    B: ChatBackend + ?Sized,
    S: HypernymScorer + ?Sized,
{
    match config.mode {
        InductionMode::HfOneshot => induce_hf(entities, root, config, backend, scorer),
        InductionMode::Col => induce_col(entities, root, config, backend, scorer),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZeroShotConfig {
    /// Rules in the generation request and in the resulting dialogues. The
    /// closed-world rule is not allowed here.
    pub rules: RuleSet,
    pub temperature: f64,
    /// Requests spent on each demonstration before it is given up.
    pub max_attempts: usize,
    pub model: String,
    pub max_tokens: u32,
}

impl Default for ZeroShotConfig {
    fn default() -> Self {
        Self {
            rules: RuleSet::free_form(),
            temperature: 0.7,
            max_attempts: 3,
            model: "gpt-4".into(),
            max_tokens: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroShotDemos {
    pub demonstrations: Vec<Demonstration>,
    pub diagnostics: Vec<String>,
}

/// Samples `count` taxonomies under `root` from the model and turns each
/// into a demonstration dialogue. The entity list of a generated
/// demonstration is its own node set in key order.
pub fn generate_zero_shot_demos<B: ChatBackend + ?Sized>(
    root: &Entity,
    count: usize,
    config: &ZeroShotConfig,
    backend: &B,
) -> Result<ZeroShotDemos, EngineError> {
    if count == 0 {
        return Err(EngineError::InvalidConfig("count must be at least 1".into()));
    }
    if config.max_attempts == 0 {
        return Err(EngineError::InvalidConfig("max_attempts must be at least 1".into()));
    }
    let messages = build_zero_shot_demo_request(root, &config.rules)?;
    let request = ChatRequest {
        messages,
        model: config.model.clone(),
        temperature: config.temperature,
        max_tokens: config.max_tokens,
    };
    let mut demonstrations = Vec::with_capacity(count);
    let mut diagnostics = Vec::new();
    for i in 0..count {
        for attempt in 1..=config.max_attempts {
            let reply = backend.complete(&request)?;
            match parse_taxonomy(&reply) {
                Ok((t, _)) if t.root() == root => {
                    let mut entities: Vec<Entity> = t.nodes().cloned().collect();
                    entities.sort();
                    demonstrations.push(demonstration_with_rules(&t, &entities, &config.rules)?);
                    break;
                }
                Ok((t, _)) => diagnostics.push(format!(
                    "sample {} attempt {attempt}: rooted at '{}', expected '{root}'",
                    i + 1,
                    t.root()
                )),
                Err(e) => diagnostics.push(format!("sample {} attempt {attempt}: {e}", i + 1)),
            }
        }
    }
    if demonstrations.len() < count {
        return Err(EngineError::InsufficientDemos {
            wanted: count,
            got: demonstrations.len(),
        });
    }
    Ok(ZeroShotDemos {
        demonstrations,
        diagnostics,
    })
}
