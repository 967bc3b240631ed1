//! Taxonomy induction with chat models.
//!
//! [`prompt`] builds every message of the dialogue, [`gateway`] talks to a
//! chat backend (live or scripted), [`filter`] scores proposed edges, and
//! [`engine`] runs whole sessions.

pub mod engine;
pub mod error;
pub mod filter;
pub mod gateway;
pub mod prompt;

pub use engine::{
    generate_zero_shot_demos, induce, induce_col, induce_hf, merge_layer, parse_check_answer, InductionConfig,
    InductionMode, InductionReport, IterationRecord, MergeOutcome, Termination, ZeroShotConfig, ZeroShotDemos,
};
pub use error::{EngineError, FilterError, GatewayError, PromptError, ScorerError};
pub use filter::{
    ensemble_from_ranks, ensemble_score, filter_layer, rank_under_template, ranks_from_scores, CandidatePool,
    Detach, FilterConfig, FilterDecision, FilterReport, FnScorer, HypernymScorer, LexicalScorer, OracleScorer,
    PinnedRankScorer, RankMap, RemoteScorer, RemoteScorerConfig, ScoreTable, Template, TemplateSet,
    UnavailableScorer,
};
pub use gateway::{
    load_transcript, record_session, BackendConfig, ChatBackend, ChatRequest, HttpBackend, HttpConfig,
    RecordingBackend, ReplayMode, ScriptRecord, ScriptedBackend, ScriptedConfig,
};
pub use prompt::{
    build_check_prompt, build_hf_instruction, build_iteration_prompt, build_zero_shot_demo_request,
    demonstration_from_taxonomy, demonstration_with_rules, ChatMessage, ChatTranscript, Demonstration,
    PromptMode, Role, Rule, RuleSet,
};
