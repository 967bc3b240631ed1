//! Ensemble ranking filter for newly proposed parent-child edges.
//!
//! Each new edge `(parent, child)` is checked by asking a scorer to rank
//! every candidate parent for `child` under several hypernymy templates.
//! The per-template ranks are fused into one score per candidate (the mean
//! of reciprocal ranks), candidates are re-ranked by that score, and the
//! edge survives only if its parent lands in the top `k`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};
use taxo_core::{normalize_key, Edge, Entity, EntityPool, Taxonomy};

use crate::error::{FilterError, ScorerError};

pub const QUERY_SLOT: &str = "<query>";
pub const ANCHOR_SLOT: &str = "<anchor>";
pub const DEFAULT_TOP_K: usize = 10;

pub const DEFAULT_TEMPLATES: [&str; 6] = [
    "<query> is a/an <anchor>",
    "<query> is a kind of <anchor>",
    "<query> is a type of <anchor>",
    "<query> is an example of <anchor>",
    "<anchor> such as <query>",
    "A/An <anchor> such as <query>",
];

/// A hypernymy probe sentence with one `<query>` and one `<anchor>` slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Template(String);

impl Template {
    pub fn new(text: impl Into<String>) -> Result<Self, FilterError> {
        let text = text.into();
        if text.matches(QUERY_SLOT).count() != 1 || text.matches(ANCHOR_SLOT).count() != 1 {
            return Err(FilterError::BadTemplate(text));
        }
        Ok(Self(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Fills both slots, choosing "a"/"an" (and "A"/"An") by the first
    /// letter of the word that follows.
    pub fn instantiate(&self, query: &str, anchor: &str) -> String {
        let filled = self.0.replace(QUERY_SLOT, query).replace(ANCHOR_SLOT, anchor);
        resolve_articles(&filled)
    }
}

fn resolve_articles(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find("/An ").or_else(|| rest.find("/an ")) {
        let start = pos.saturating_sub(1);
        let lower = &rest[start..start + 1] == "a";
        let after = &rest[pos + 4..];
        let vowel = after
            .chars()
            .next()
            .map(|c| "aeiouAEIOU".contains(c))
            .unwrap_or(false);
        out.push_str(&rest[..start]);
        out.push_str(match (lower, vowel) {
            (true, true) => "an ",
            (true, false) => "a ",
            (false, true) => "An ",
            (false, false) => "A ",
        });
        rest = after;
    }
    out.push_str(rest);
    out
}

impl TryFrom<String> for Template {
    type Error = FilterError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Template::new(value)
    }
}

impl From<Template> for String {
    fn from(t: Template) -> String {
        t.0
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    templates: Vec<Template>,
}

impl TemplateSet {
    pub fn new(templates: Vec<Template>) -> Result<Self, FilterError> {
        if templates.is_empty() {
            return Err(FilterError::BadTemplate("empty template set".into()));
        }
        Ok(Self { templates })
    }

    pub fn from_texts<I, S>(texts: I) -> Result<Self, FilterError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(texts.into_iter().map(Template::new).collect::<Result<_, _>>()?)
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::from_texts(DEFAULT_TEMPLATES).expect("default templates are well formed")
    }
}

/// Candidate to 1-based rank.
pub type RankMap = BTreeMap<Entity, usize>;

/// Ranks by descending score; equal scores fall back to key order.
pub fn ranks_from_scores(scores: &[(Entity, f64)]) -> RankMap {
    let mut order: Vec<&(Entity, f64)> = scores.iter().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    order
        .into_iter()
        .enumerate()
        .map(|(i, (e, _))| (e.clone(), i + 1))
        .collect()
}

fn check_candidates(query: &Entity, candidates: &[Entity]) -> Result<(), ScorerError> {
    if candidates.is_empty() {
        return Err(ScorerError::InvalidInput(format!("no candidates for '{query}'")));
    }
    if candidates.contains(query) {
        return Err(ScorerError::InvalidInput(format!("'{query}' is among its own candidates")));
    }
    let distinct: HashSet<&Entity> = candidates.iter().collect();
    if distinct.len() != candidates.len() {
        return Err(ScorerError::InvalidInput(format!("duplicate candidates for '{query}'")));
    }
    Ok(())
}

/// Ranks candidate parents for a query under slot templates.
pub trait HypernymScorer: Send + Sync {
    /// A bijection from `candidates` onto `1..=candidates.len()`.
    fn rank(&self, query: &Entity, candidates: &[Entity], template: &Template) -> Result<RankMap, ScorerError>;

    /// One rank map per template, in template order.
    fn rank_all(
        &self,
        query: &Entity,
        candidates: &[Entity],
        templates: &TemplateSet,
    ) -> Result<Vec<RankMap>, ScorerError> {
        templates
            .templates()
            .iter()
            .map(|t| self.rank(query, candidates, t))
            .collect()
    }

    fn describe(&self) -> String;
}

impl<S: HypernymScorer + ?Sized> HypernymScorer for &S {
    fn rank(&self, query: &Entity, candidates: &[Entity], template: &Template) -> Result<RankMap, ScorerError> {
        (**self).rank(query, candidates, template)
    }

    fn rank_all(&self, query: &Entity, candidates: &[Entity], templates: &TemplateSet) -> Result<Vec<RankMap>, ScorerError> {
        (**self).rank_all(query, candidates, templates)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<S: HypernymScorer + ?Sized> HypernymScorer for Box<S> {
    fn rank(&self, query: &Entity, candidates: &[Entity], template: &Template) -> Result<RankMap, ScorerError> {
        (**self).rank(query, candidates, template)
    }

    fn rank_all(&self, query: &Entity, candidates: &[Entity], templates: &TemplateSet) -> Result<Vec<RankMap>, ScorerError> {
        (**self).rank_all(query, candidates, templates)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<S: HypernymScorer + ?Sized> HypernymScorer for Arc<S> {
    fn rank(&self, query: &Entity, candidates: &[Entity], template: &Template) -> Result<RankMap, ScorerError> {
        (**self).rank(query, candidates, template)
    }

    fn rank_all(&self, query: &Entity, candidates: &[Entity], templates: &TemplateSet) -> Result<Vec<RankMap>, ScorerError> {
        (**self).rank_all(query, candidates, templates)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// Validated single-template ranking.
pub fn rank_under_template<S: HypernymScorer + ?Sized>(
    query: &Entity,
    candidates: &[Entity],
    template: &Template,
    scorer: &S,
) -> Result<RankMap, ScorerError> {
    check_candidates(query, candidates)?;
    let ranks = scorer.rank(query, candidates, template)?;
    check_bijection(candidates, &ranks)?;
    Ok(ranks)
}

fn check_bijection(candidates: &[Entity], ranks: &RankMap) -> Result<(), ScorerError> {
    let n = candidates.len();
    let mut seen = vec![false; n];
    if ranks.len() != n || candidates.iter().any(|c| !ranks.contains_key(c)) {
        return Err(ScorerError::Malformed("rank map does not cover the candidates".into()));
    }
    for r in ranks.values() {
        if *r == 0 || *r > n || std::mem::replace(&mut seen[*r - 1], true) {
            return Err(ScorerError::Malformed(format!("ranks are not a permutation of 1..={n}")));
        }
    }
    Ok(())
}

/// Lexical stand-in for a language-model scorer. The template is ignored.
///
/// `2w` when the anchor is the query's last token, `w` when one string is a
/// token or substring of the other, otherwise character-trigram Jaccard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexicalScorer {
    pub weight: f64,
}

impl Default for LexicalScorer {
    fn default() -> Self {
        Self { weight: 1.0 }
    }
}

impl LexicalScorer {
    pub fn score(&self, query: &Entity, anchor: &Entity) -> f64 {
        let q = query.key();
        let a = anchor.key();
        let tokens: Vec<&str> = q.split(' ').collect();
        if tokens.last() == Some(&a) {
            return 2.0 * self.weight;
        }
        if tokens.contains(&a) || q.contains(a) || a.contains(q) {
            return self.weight;
        }
        trigram_jaccard(q, a)
    }
}

fn trigrams(s: &str) -> HashSet<String> {
    let chars: Vec<char> = s.chars().collect();
    if chars.len() < 3 {
        return std::iter::once(s.to_string()).collect();
    }
    chars.windows(3).map(|w| w.iter().collect()).collect()
}

pub fn trigram_jaccard(a: &str, b: &str) -> f64 {
    let ta = trigrams(a);
    let tb = trigrams(b);
    let union = ta.union(&tb).count();
    if union == 0 {
        return 0.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

impl HypernymScorer for LexicalScorer {
    fn rank(&self, query: &Entity, candidates: &[Entity], _template: &Template) -> Result<RankMap, ScorerError> {
        let scores: Vec<(Entity, f64)> = candidates.iter().map(|c| (c.clone(), self.score(query, c))).collect();
        Ok(ranks_from_scores(&scores))
    }

    fn describe(&self) -> String {
        "lexical".into()
    }
}

/// Ranks from an arbitrary raw-score function `(query, anchor, template)`.
pub struct FnScorer<F> {
    score: F,
    label: String,
}

impl<F> FnScorer<F>
where
    F: Fn(&Entity, &Entity, &Template) -> f64 + Send + Sync,
{
    pub fn new(label: impl Into<String>, score: F) -> Self {
        Self {
            score,
            label: label.into(),
        }
    }
}

impl<F> HypernymScorer for FnScorer<F>
where
    F: Fn(&Entity, &Entity, &Template) -> f64 + Send + Sync,
{
    fn rank(&self, query: &Entity, candidates: &[Entity], template: &Template) -> Result<RankMap, ScorerError> {
        let scores: Vec<(Entity, f64)> = candidates
            .iter()
            .map(|c| (c.clone(), (self.score)(query, c, template)))
            .collect();
        Ok(ranks_from_scores(&scores))
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// Knows the answer: the gold parent scores 2, other gold ancestors 1,
/// everything else 0.
#[derive(Debug, Clone)]
pub struct OracleScorer {
    gold: Taxonomy,
}

impl OracleScorer {
    pub fn new(gold: Taxonomy) -> Self {
        Self { gold }
    }
}

impl HypernymScorer for OracleScorer {
    fn rank(&self, query: &Entity, candidates: &[Entity], _template: &Template) -> Result<RankMap, ScorerError> {
        let parent = self.gold.parent(query);
        let ancestors = self.gold.ancestors(query);
        let scores: Vec<(Entity, f64)> = candidates
            .iter()
            .map(|c| {
                let s = if Some(c) == parent {
                    2.0
                } else if ancestors.contains(&c) {
                    1.0
                } else {
                    0.0
                };
                (c.clone(), s)
            })
            .collect();
        Ok(ranks_from_scores(&scores))
    }

    fn describe(&self) -> String {
        "oracle".into()
    }
}

/// Forces chosen `(query, anchor)` pairs to a fixed rank under every
/// template, shifting the other candidates to keep a bijection.
pub struct PinnedRankScorer<S> {
    inner: S,
    pins: Vec<(Entity, Entity, usize)>,
}

impl<S: HypernymScorer> PinnedRankScorer<S> {
    pub fn new(inner: S) -> Self {
        Self { inner, pins: Vec::new() }
    }

    /// Pins `anchor` at `position` (1-based, clamped to the candidate count)
    /// whenever `query` is ranked.
    pub fn pin(mut self, query: Entity, anchor: Entity, position: usize) -> Self {
        self.pins.push((query, anchor, position.max(1)));
        self
    }
}

impl<S: HypernymScorer> HypernymScorer for PinnedRankScorer<S> {
    fn rank(&self, query: &Entity, candidates: &[Entity], template: &Template) -> Result<RankMap, ScorerError> {
        let ranks = self.inner.rank(query, candidates, template)?;
        let mut by_rank: Vec<(&Entity, usize)> = ranks.iter().map(|(e, r)| (e, *r)).collect();
        by_rank.sort_by_key(|(_, r)| *r);
        let mut order: Vec<Entity> = by_rank.into_iter().map(|(e, _)| e.clone()).collect();
        for (q, anchor, position) in &self.pins {
            if q != query {
                continue;
            }
            if let Some(at) = order.iter().position(|e| e == anchor) {
                let moved = order.remove(at);
                let to = (*position - 1).min(order.len());
                order.insert(to, moved);
            }
        }
        Ok(order.into_iter().enumerate().map(|(i, e)| (e, i + 1)).collect())
    }

    fn describe(&self) -> String {
        format!("pinned({})", self.inner.describe())
    }
}

/// Always fails, for exercising the fail-open path.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnavailableScorer;

impl HypernymScorer for UnavailableScorer {
    fn rank(&self, query: &Entity, _candidates: &[Entity], template: &Template) -> Result<RankMap, ScorerError> {
        Err(ScorerError::Unavailable {
            query: query.to_string(),
            template: template.to_string(),
            detail: "scorer offline".into(),
        })
    }

    fn describe(&self) -> String {
        "unavailable".into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteScorerConfig {
    /// Base URL; requests go to `{base_url}/rank`.
    pub base_url: String,
    pub timeout_seconds: f64,
    pub retry_count: u32,
    pub retry_backoff_ms: u64,
}

impl Default for RemoteScorerConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8080".into(),
            timeout_seconds: 30.0,
            retry_count: 2,
            retry_backoff_ms: 200,
        }
    }
}

#[derive(Serialize)]
struct RankRequest<'a> {
    query: &'a str,
    candidates: Vec<&'a str>,
    templates: Vec<&'a str>,
}

#[derive(Deserialize)]
struct RankResponse {
    per_template_ranks: BTreeMap<String, BTreeMap<String, usize>>,
}

/// Client for an HTTP service that ranks anchors with a masked language
/// model.
pub struct RemoteScorer {
    config: RemoteScorerConfig,
    client: reqwest::blocking::Client,
}

impl RemoteScorer {
    pub fn new(config: RemoteScorerConfig) -> Result<Self, ScorerError> {
        if !(config.timeout_seconds > 0.0) {
            return Err(ScorerError::InvalidInput("timeout must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_seconds))
            .build()
            .map_err(|e| ScorerError::InvalidInput(e.to_string()))?;
        Ok(Self { config, client })
    }

    fn url(&self) -> String {
        format!("{}/rank", self.config.base_url.trim_end_matches('/'))
    }

    fn request(
        &self,
        query: &Entity,
        candidates: &[Entity],
        templates: &[&Template],
    ) -> Result<Vec<RankMap>, ScorerError> {
        let body = RankRequest {
            query: query.surface(),
            candidates: candidates.iter().map(Entity::surface).collect(),
            templates: templates.iter().map(|t| t.as_str()).collect(),
        };
        let template_label = templates.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(" | ");
        let unavailable = |detail: String| ScorerError::Unavailable {
            query: query.to_string(),
            template: template_label.clone(),
            detail,
        };
        let mut last = String::new();
        for attempt in 0..=self.config.retry_count {
            if attempt > 0 && self.config.retry_backoff_ms > 0 {
                thread::sleep(Duration::from_millis(self.config.retry_backoff_ms << (attempt - 1).min(6)));
            }
            let response = match self.client.post(self.url()).json(&body).send() {
                Ok(r) => r,
                Err(e) => {
                    warn!("scorer request failed: {e}");
                    last = e.to_string();
                    continue;
                }
            };
            let status = response.status().as_u16();
            let text = response.text().map_err(|e| ScorerError::Malformed(e.to_string()))?;
            match status {
                200..=299 => return self.decode(&text, candidates, templates),
                400 | 422 => return Err(ScorerError::Rejected(format!("HTTP {status}: {text}"))),
                _ => {
                    warn!("scorer returned HTTP {status}");
                    last = format!("HTTP {status}");
                }
            }
        }
        Err(unavailable(last))
    }

    fn decode(&self, body: &str, candidates: &[Entity], templates: &[&Template]) -> Result<Vec<RankMap>, ScorerError> {
        let response: RankResponse = serde_json::from_str(body).map_err(|e| ScorerError::Malformed(e.to_string()))?;
        let mut out = Vec::with_capacity(templates.len());
        for t in templates {
            let ranks = response
                .per_template_ranks
                .get(t.as_str())
                .ok_or_else(|| ScorerError::Malformed(format!("no ranks for template {t:?}")))?;
            let mut map = RankMap::new();
            for (surface, rank) in ranks {
                let key = normalize_key(surface);
                let entity = candidates
                    .iter()
                    .find(|c| c.key() == key)
                    .ok_or_else(|| ScorerError::Malformed(format!("unknown candidate {surface:?}")))?;
                map.insert(entity.clone(), *rank);
            }
            check_bijection(candidates, &map)?;
            out.push(map);
        }
        Ok(out)
    }
}

impl HypernymScorer for RemoteScorer {
    fn rank(&self, query: &Entity, candidates: &[Entity], template: &Template) -> Result<RankMap, ScorerError> {
        Ok(self.request(query, candidates, &[template])?.remove(0))
    }

    /// One request for all templates.
    fn rank_all(&self, query: &Entity, candidates: &[Entity], templates: &TemplateSet) -> Result<Vec<RankMap>, ScorerError> {
        let refs: Vec<&Template> = templates.templates().iter().collect();
        self.request(query, candidates, &refs)
    }

    fn describe(&self) -> String {
        format!("remote:{}", self.config.base_url)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub query: Entity,
    pub scores: BTreeMap<Entity, f64>,
    pub ranks: BTreeMap<Entity, usize>,
}

impl ScoreTable {
    pub fn score(&self, candidate: &Entity) -> Option<f64> {
        self.scores.get(candidate).copied()
    }

    pub fn rank(&self, candidate: &Entity) -> Option<usize> {
        self.ranks.get(candidate).copied()
    }
}

/// Mean reciprocal rank across templates, then a rank by that mean.
///
/// The reciprocals are summed in ascending order so the result does not
/// depend on template order, even in the last bit.
pub fn ensemble_from_ranks(query: &Entity, per_template: &[RankMap]) -> ScoreTable {
    let m = per_template.len() as f64;
    let mut scores = BTreeMap::new();
    if let Some(first) = per_template.first() {
        for candidate in first.keys() {
            let mut recips: Vec<f64> = per_template
                .iter()
                .map(|ranks| 1.0 / ranks[candidate] as f64)
                .collect();
            recips.sort_by(f64::total_cmp);
            scores.insert(candidate.clone(), recips.iter().sum::<f64>() / m);
        }
    }
    let pairs: Vec<(Entity, f64)> = scores.iter().map(|(e, s)| (e.clone(), *s)).collect();
    ScoreTable {
        query: query.clone(),
        ranks: ranks_from_scores(&pairs),
        scores,
    }
}

pub fn ensemble_score<S: HypernymScorer + ?Sized>(
    query: &Entity,
    candidates: &[Entity],
    templates: &TemplateSet,
    scorer: &S,
) -> Result<ScoreTable, ScorerError> {
    check_candidates(query, candidates)?;
    let per_template = scorer.rank_all(query, candidates, templates)?;
    if per_template.len() != templates.len() {
        return Err(ScorerError::Malformed("one rank map per template expected".into()));
    }
    for ranks in &per_template {
        check_bijection(candidates, ranks)?;
    }
    Ok(ensemble_from_ranks(query, &per_template))
}

/// Which entities compete as parents when an edge is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidatePool {
    /// The whole entity set minus the query.
    #[default]
    AllEntities,
    /// Nodes already in the taxonomy minus the query.
    PlacedNodes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub templates: TemplateSet,
    pub top_k: usize,
    pub candidate_pool: CandidatePool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            templates: TemplateSet::default(),
            top_k: DEFAULT_TOP_K,
            candidate_pool: CandidatePool::AllEntities,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if self.top_k == 0 {
            return Err(FilterError::ZeroTopK);
        }
        Ok(())
    }
}

/// What happens to entities under a rejected edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Detach {
    /// Back to the remaining list for a later iteration.
    Requeue,
    /// Out of play for the rest of the session.
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub edge: Edge,
    pub rank: usize,
    pub score: f64,
    pub pool_size: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FilterReport {
    pub kept: Vec<FilterDecision>,
    pub removed: Vec<FilterDecision>,
    /// Edges that passed on their own but sat below a removed edge.
    pub cascaded: Vec<FilterDecision>,
    /// Every entity taken out of the taxonomy, in removal order.
    pub detached: Vec<Entity>,
    /// Set when the scorer failed and the layer was kept unfiltered.
    pub skipped: Option<String>,
}

impl FilterReport {
    pub fn was_skipped(&self) -> bool {
        self.skipped.is_some()
    }
}

fn candidates_for(query: &Entity, parent: &Entity, t: &Taxonomy, pool: &EntityPool, which: CandidatePool) -> Vec<Entity> {
    let mut out: Vec<Entity> = match which {
        CandidatePool::AllEntities => pool.all().iter().filter(|e| *e != query).cloned().collect(),
        CandidatePool::PlacedNodes => t.nodes().filter(|e| *e != query).cloned().collect(),
    };
    if !out.contains(parent) {
        out.push(parent.clone());
    }
    out
}

/// Scores every edge in `new_edges` and detaches those whose parent ranks
/// below `top_k`.
///
/// Edges are applied top-down, so rejecting an edge takes the whole
/// subtree under its child with it. All detached in-set entities are
/// requeued or dropped per `detach`. If the scorer fails on any edge the
/// taxonomy and pool are left untouched and the report says why.
pub fn filter_layer<S: HypernymScorer + ?Sized>(
    t: &Taxonomy,
    new_edges: &[Edge],
    pool: &mut EntityPool,
    config: &FilterConfig,
    scorer: &S,
    detach: Detach,
) -> Result<(Taxonomy, FilterReport), FilterError> {
    config.validate()?;
    let mut report = FilterReport::default();
    for edge in new_edges {
        if !t.contains_edge(edge) {
            return Err(FilterError::Taxonomy(taxo_core::TaxonomyError::MissingEdge(edge.clone())));
        }
    }
    let mut ordered: Vec<&Edge> = new_edges.iter().collect();
    ordered.sort_by_key(|e| t.depth(&e.child));

    let mut decisions = Vec::with_capacity(ordered.len());
    for edge in &ordered {
        let candidates = candidates_for(&edge.child, &edge.parent, t, pool, config.candidate_pool);
        match ensemble_score(&edge.child, &candidates, &config.templates, scorer) {
            Ok(table) => decisions.push(FilterDecision {
                edge: (*edge).clone(),
                rank: table.rank(&edge.parent).expect("parent is a candidate"),
                score: table.score(&edge.parent).expect("parent is a candidate"),
                pool_size: candidates.len(),
            }),
            Err(e) => {
                warn!("filter skipped: {e}");
                report.skipped = Some(e.to_string());
                return Ok((t.clone(), report));
            }
        }
    }

    let mut current = t.clone();
    for decision in decisions {
        if !current.contains(&decision.edge.child) {
            report.cascaded.push(decision);
            continue;
        }
        if decision.rank <= config.top_k {
            report.kept.push(decision);
            continue;
        }
        let (next, removed) = current.remove_subtree(&decision.edge.child)?;
        current = next;
        for entity in removed {
            match detach {
                Detach::Requeue => pool.requeue(&entity),
                Detach::Drop => pool.drop_entity(&entity),
            }
            report.detached.push(entity);
        }
        report.removed.push(decision);
    }
    Ok((current, report))
}
