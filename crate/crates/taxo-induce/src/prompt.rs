//! Every message of the induction dialogue.
//!
//! The strings here are frozen: scripted replays key on request digests, so
//! any change to a phrase invalidates recorded transcripts.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use taxo_core::{render_outline, Entity, Taxonomy};

use crate::error::PromptError;

pub const SYSTEM_PROMPT: &str = "You are an expert in constructing a taxonomy from a list of concepts.";
pub const FORMAT_SPEC: &str =
    "The format of the generated taxonomy is: 1. Parent Concept 1.1 Child Concept.";
pub const KEEP_NAMES: &str = "Do not change any entity names when building the taxonomy.";
pub const NO_COMMENTS: &str = "Do not add any comments.";
pub const SINGLE_ROOT: &str = "There should be one and only one root node of the taxonomy.";
pub const CLOSED_WORLD: &str = "All entities in the entity list must appear in the taxonomy and don't add any entities that are not in the entity list.";
pub const STEP_BY_STEP: &str = "Let's do it step by step.";
pub const CHECK_PROMPT: &str = "Check: Is the remaining entity list empty?";
pub const ANSWER_NO: &str = "Answer: No.";
pub const ANSWER_YES: &str = "Answer: Yes.\nThe taxonomy is complete.";
pub const CURRENT_TAXONOMY: &str = "The current taxonomy is:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// Use only the given entities, and all of them.
    EntityClosedWorld,
    SingleRoot,
    NoComments,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    rules: BTreeSet<Rule>,
}

impl RuleSet {
    /// All three rules, used with a fixed entity list.
    pub fn full() -> Self {
        Self {
            rules: [Rule::EntityClosedWorld, Rule::SingleRoot, Rule::NoComments].into(),
        }
    }

    /// Single root and no comments; the entity list is not binding.
    pub fn free_form() -> Self {
        Self {
            rules: [Rule::SingleRoot, Rule::NoComments].into(),
        }
    }

    pub fn from_rules(rules: impl IntoIterator<Item = Rule>) -> Self {
        Self {
            rules: rules.into_iter().collect(),
        }
    }

    pub fn contains(&self, rule: Rule) -> bool {
        self.rules.contains(&rule)
    }
}

impl Default for RuleSet {
    fn default() -> Self {
        Self::full()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }
}

pub type ChatTranscript = Vec<ChatMessage>;

/// Whether the instruction opens a layer-by-layer dialogue or asks for the
/// whole taxonomy in one reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptMode {
    Layered,
    OneShot,
}

/// Renders names the way a Python list literal prints them.
pub fn render_entity_list(entities: &[Entity]) -> String {
    let items: Vec<String> = entities.iter().map(|e| py_str_repr(e.surface())).collect();
    format!("[{}]", items.join(", "))
}

fn py_str_repr(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

fn rule_sentences(rules: &RuleSet) -> Vec<&'static str> {
    let mut out = Vec::new();
    if rules.contains(Rule::EntityClosedWorld) {
        out.push(KEEP_NAMES);
    }
    if rules.contains(Rule::NoComments) {
        out.push(NO_COMMENTS);
    }
    if rules.contains(Rule::SingleRoot) {
        out.push(SINGLE_ROOT);
    }
    if rules.contains(Rule::EntityClosedWorld) {
        out.push(CLOSED_WORLD);
    }
    out
}

/// The task instruction: task statement, output format, rules, and the
/// entity list.
pub fn build_hf_instruction(
    root: &Entity,
    entities: &[Entity],
    rules: &RuleSet,
    mode: PromptMode,
) -> Result<ChatMessage, PromptError> {
    let Some(root) = entities.iter().find(|e| *e == root) else {
        return Err(PromptError::RootNotInEntityList(root.clone()));
    };
    let mut head = vec![
        format!(
            "Build a taxonomy whose root concept is {} with the given list of entities.",
            root.surface()
        ),
        FORMAT_SPEC.to_string(),
    ];
    head.extend(rule_sentences(rules).into_iter().map(str::to_string));
    let mut content = head.join(" ");
    content.push_str("\nEntity list: ");
    content.push_str(&render_entity_list(entities));
    if mode == PromptMode::Layered {
        content.push('\n');
        content.push_str(STEP_BY_STEP);
    }
    Ok(ChatMessage::user(content))
}

/// "Then, let's find all the k-level entities ..." for layers k >= 2.
pub fn build_iteration_prompt(layer: usize) -> Result<ChatMessage, PromptError> {
    if layer < 2 {
        return Err(PromptError::InvalidLayer(layer));
    }
    Ok(ChatMessage::user(format!(
        "Then, let's find all the {layer}-level entities from the remaining entity list."
    )))
}

pub fn build_check_prompt() -> ChatMessage {
    ChatMessage::user(CHECK_PROMPT)
}

/// Opening assistant turn naming the root.
pub fn opening_reply(root: &Entity) -> String {
    format!(
        "First, the entity in the first level of the taxonomy is {}.\n{CURRENT_TAXONOMY}\n1. {}",
        root.surface(),
        root.surface()
    )
}

pub fn layer_reply(partial: &Taxonomy) -> String {
    format!("{CURRENT_TAXONOMY}\n{}", render_outline(partial))
}

/// Request for a freely generated taxonomy under `root`, with no entity
/// list.
pub fn build_zero_shot_demo_request(root: &Entity, rules: &RuleSet) -> Result<ChatTranscript, PromptError> {
    if rules.contains(Rule::EntityClosedWorld) {
        return Err(PromptError::ClosedWorldRuleInZeroShot);
    }
    let mut parts = vec![
        format!("Build a taxonomy whose root concept is {}.", root.surface()),
        FORMAT_SPEC.to_string(),
    ];
    parts.extend(rule_sentences(rules).into_iter().map(str::to_string));
    Ok(vec![
        ChatMessage::system(SYSTEM_PROMPT),
        ChatMessage::user(parts.join(" ")),
    ])
}

/// A gold taxonomy replayed as a layer-by-layer dialogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub taxonomy: Taxonomy,
    pub entities: Vec<Entity>,
    pub rules: RuleSet,
    pub dialogue: ChatTranscript,
}

impl Demonstration {
    /// Instruction and the complete outline as a single exchange, for
    /// one-shot prompting.
    pub fn one_shot_messages(&self) -> Result<ChatTranscript, PromptError> {
        Ok(vec![
            build_hf_instruction(self.taxonomy.root(), &self.entities, &self.rules, PromptMode::OneShot)?,
            ChatMessage::assistant(render_outline(&self.taxonomy)),
        ])
    }
}

/// Builds the demonstration dialogue for `gold` under the full rule set.
pub fn demonstration_from_taxonomy(gold: &Taxonomy, entities: &[Entity]) -> Result<Demonstration, PromptError> {
    demonstration_with_rules(gold, entities, &RuleSet::full())
}

pub fn demonstration_with_rules(
    gold: &Taxonomy,
    entities: &[Entity],
    rules: &RuleSet,
) -> Result<Demonstration, PromptError> {
    let levels = gold.level_count();
    let mut dialogue = vec![
        build_hf_instruction(gold.root(), entities, rules, PromptMode::Layered)?,
        ChatMessage::assistant(opening_reply(gold.root())),
    ];
    for level in 1..=levels {
        if level > 1 {
            dialogue.push(build_iteration_prompt(level)?);
            dialogue.push(ChatMessage::assistant(layer_reply(&gold.truncate(level))));
        }
        dialogue.push(build_check_prompt());
        let answer = if level == levels { ANSWER_YES } else { ANSWER_NO };
        dialogue.push(ChatMessage::assistant(answer));
    }
    Ok(Demonstration {
        taxonomy: gold.clone(),
        entities: entities.to_vec(),
        rules: rules.clone(),
        dialogue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use taxo_core::{fixtures, parse_outline, outline_to_taxonomy};

    const MANEUVER_INSTRUCTION: &str = "Build a taxonomy whose root concept is maneuver with the given list of entities. The format of the generated taxonomy is: 1. Parent Concept 1.1 Child Concept. Do not change any entity names when building the taxonomy. Do not add any comments. There should be one and only one root node of the taxonomy. All entities in the entity list must appear in the taxonomy and don't add any entities that are not in the entity list.\nEntity list: ['outside loop', 'roll', 'vertical bank', 'bank', 'barrel roll', 'flight maneuver', 'straight-arm', 'clinch', 'chandelle', 'inside loop', 'loop', 'slip', 'snap roll', 'maneuver']\nLet's do it step by step.";

    fn e(s: &str) -> Entity {
        Entity::new(s).unwrap()
    }

    #[test]
    fn maneuver_instruction_matches_transcript() {
        let msg = build_hf_instruction(&e("maneuver"), &fixtures::maneuver_entities(), &RuleSet::full(), PromptMode::Layered)
            .unwrap();
        assert_eq!(msg.role, Role::User);
        assert_eq!(msg.content, MANEUVER_INSTRUCTION);
    }

    #[test]
    fn free_form_rules_drop_closed_world() {
        let msg = build_hf_instruction(
            &e("maneuver"),
            &fixtures::maneuver_entities(),
            &RuleSet::free_form(),
            PromptMode::OneShot,
        )
        .unwrap();
        assert!(!msg.content.contains(CLOSED_WORLD));
        assert!(!msg.content.contains(KEEP_NAMES));
        assert!(msg.content.contains(SINGLE_ROOT));
        assert!(!msg.content.contains(STEP_BY_STEP));
    }

    #[test]
    fn root_must_be_listed() {
        assert_eq!(
            build_hf_instruction(&e("vehicle"), &fixtures::maneuver_entities(), &RuleSet::full(), PromptMode::Layered),
            Err(PromptError::RootNotInEntityList(e("vehicle")))
        );
    }

    #[test]
    fn python_style_quoting() {
        let list = render_entity_list(&[e("o'clock"), e("plain"), e("say \"hi\" it's")]);
        assert_eq!(list, r#"["o'clock", 'plain', 'say "hi" it\'s']"#);
    }

    #[test]
    fn iteration_and_check_prompts() {
        assert_eq!(
            build_iteration_prompt(3).unwrap().content,
            "Then, let's find all the 3-level entities from the remaining entity list."
        );
        assert_eq!(build_check_prompt().content, "Check: Is the remaining entity list empty?");
        assert_eq!(build_iteration_prompt(1), Err(PromptError::InvalidLayer(1)));
    }

    #[test]
    fn neuropteron_demonstration_matches_table() {
        let demo = demonstration_from_taxonomy(&fixtures::neuropteron(), &fixtures::neuropteron_entities()).unwrap();
        let d = &demo.dialogue;
        // instruction + opening + 4 checks/answers + 3 layer exchanges
        assert_eq!(d.len(), 2 + 4 * 2 + 3 * 2);
        assert_eq!(
            d[1].content,
            "First, the entity in the first level of the taxonomy is neuropteron.\nThe current taxonomy is:\n1. neuropteron"
        );
        assert_eq!(d[2].content, CHECK_PROMPT);
        assert_eq!(d[3].content, ANSWER_NO);
        assert_eq!(d[4].content, "Then, let's find all the 2-level entities from the remaining entity list.");
        assert_eq!(
            d[5].content,
            "The current taxonomy is:\n1. neuropteron\n1.1 snakefly\n1.2 spongefly\n1.3 lacewing\n1.4 ant lion\n1.5 dobson\n1.6 alderfly\n1.7 fish fly\n1.8 mantispid"
        );
        assert_eq!(d[d.len() - 2].content, CHECK_PROMPT);
        assert_eq!(d[d.len() - 1].content, "Answer: Yes.\nThe taxonomy is complete.");
        assert!(d[d.len() - 3].content.ends_with("1.3.2.1 goldeneye\n1.4 ant lion\n1.5 dobson\n1.6 alderfly\n1.7 fish fly\n1.8 mantispid"));
        let roles: Vec<Role> = d.iter().map(|m| m.role).collect();
        for pair in roles.chunks(2) {
            assert_eq!(pair, [Role::User, Role::Assistant]);
        }
    }

    #[test]
    fn singleton_demonstration() {
        let t = Taxonomy::singleton(e("science"));
        let demo = demonstration_from_taxonomy(&t, &[e("science")]).unwrap();
        let answers: Vec<&str> = demo.dialogue.iter().filter(|m| m.content.starts_with("Answer")).map(|m| m.content.as_str()).collect();
        assert_eq!(answers, vec![ANSWER_YES]);
        assert_eq!(demo.dialogue.len(), 4);
    }

    #[test]
    fn maneuver_round_three_places_bank_third() {
        let demo = demonstration_from_taxonomy(&fixtures::maneuver(), &fixtures::maneuver_entities()).unwrap();
        let layer3 = demo
            .dialogue
            .iter()
            .position(|m| m.content.contains("3-level"))
            .unwrap();
        let reply = &demo.dialogue[layer3 + 1].content;
        assert!(reply.contains("1.2.3 bank"));
        assert!(!reply.contains("inside loop"));
    }

    #[test]
    fn demonstration_outlines_are_truncations() {
        let gold = fixtures::maneuver();
        let demo = demonstration_from_taxonomy(&gold, &fixtures::maneuver_entities()).unwrap();
        let outlines: Vec<&ChatMessage> = demo
            .dialogue
            .iter()
            .filter(|m| m.role == Role::Assistant && m.content.contains(CURRENT_TAXONOMY))
            .collect();
        assert_eq!(outlines.len(), gold.level_count());
        for (i, m) in outlines.iter().enumerate() {
            let (o, _) = parse_outline(&m.content).unwrap();
            assert_eq!(outline_to_taxonomy(&o).unwrap(), gold.truncate(i + 1));
        }
    }

    #[test]
    fn zero_shot_request() {
        let t = build_zero_shot_demo_request(&e("maneuver"), &RuleSet::free_form()).unwrap();
        assert_eq!(t[0], ChatMessage::system(SYSTEM_PROMPT));
        assert!(t[1].content.contains(FORMAT_SPEC));
        assert!(t[1].content.contains(SINGLE_ROOT));
        assert!(t[1].content.contains(NO_COMMENTS));
        assert!(!t[1].content.contains("Entity list"));
        assert_eq!(
            build_zero_shot_demo_request(&e("maneuver"), &RuleSet::full()),
            Err(PromptError::ClosedWorldRuleInZeroShot)
        );
    }

    #[test]
    fn instruction_is_deterministic() {
        let a = build_hf_instruction(&e("maneuver"), &fixtures::maneuver_entities(), &RuleSet::full(), PromptMode::Layered);
        let b = build_hf_instruction(&e("maneuver"), &fixtures::maneuver_entities(), &RuleSet::full(), PromptMode::Layered);
        assert_eq!(a, b);
    }
}
