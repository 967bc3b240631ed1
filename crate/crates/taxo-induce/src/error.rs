use taxo_core::{Entity, OutlineError, TaxonomyError};
use thiserror::Error;

use crate::engine::InductionReport;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("root '{0}' is not in the entity list")]
    RootNotInEntityList(Entity),
    #[error("layer prompts start at 2, got {0}")]
    InvalidLayer(usize),
    #[error("zero-shot demonstration requests cannot bind the model to an entity list")]
    ClosedWorldRuleInZeroShot,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("no response after {attempts} attempt(s): {detail}")]
    Timeout { attempts: u32, detail: String },
    #[error("scripted transcript exhausted after {served} repl(ies)")]
    ScriptExhausted { served: usize },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("server returned HTTP {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("transcript line {line}: {detail}")]
    TranscriptFormat { line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("scorer unavailable for query '{query}' under '{template}': {detail}")]
    Unavailable {
        query: String,
        template: String,
        detail: String,
    },
    #[error("scorer rejected the request: {0}")]
    Rejected(String),
    #[error("malformed scorer response: {0}")]
    Malformed(String),
    #[error("invalid scoring input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("template must contain <query> and <anchor> exactly once: {0:?}")]
    BadTemplate(String),
    #[error("top-k must be positive")]
    ZeroTopK,
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Outline(#[from] OutlineError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("invalid induction config: {0}")]
    InvalidConfig(String),
    #[error("only {got} of {wanted} demonstrations could be generated")]
    InsufficientDemos { wanted: usize, got: usize },
    #[error("session aborted: {source}")]
    Aborted {
        partial: Box<InductionReport>,
        #[source]
        source: GatewayError,
    },
}
