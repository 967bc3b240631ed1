//! The hierarchical numbering format models read and write:
//!
//! ```text
//! 1. maneuver
//! 1.1 straight-arm
//! 1.2 flight maneuver
//! 1.2.1 loop
//! ```
//!
//! The root line carries a trailing dot, deeper lines do not. Parsing is
//! tolerant: prose lines are skipped and structural defects are repaired
//! with a [`Diagnostic`] for each repair.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::OutlineError;
use crate::taxonomy::{Edge, Entity, Taxonomy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlineLine {
    pub index: Vec<u32>,
    pub surface: String,
}

impl OutlineLine {
    pub fn new(index: Vec<u32>, surface: impl Into<String>) -> Self {
        Self {
            index,
            surface: surface.into(),
        }
    }

    /// `1.` for the root, bare dotted path below it.
    pub fn label(&self) -> String {
        let dotted = self
            .index
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(".");
        if self.index.len() == 1 {
            format!("{dotted}.")
        } else {
            dotted
        }
    }
}

impl fmt::Display for OutlineLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.label(), self.surface)
    }
}

/// An ordered list of numbered lines with canonical indices: the first line
/// is `[1]` and every other line sits one level below a line that appears
/// earlier.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Outline {
    lines: Vec<OutlineLine>,
}

impl Outline {
    pub fn new(lines: Vec<OutlineLine>) -> Result<Self, OutlineError> {
        let Some(first) = lines.first() else {
            return Err(OutlineError::EmptyInput);
        };
        if first.index != [1] {
            return Err(OutlineError::NoRootLine);
        }
        let mut seen = std::collections::HashSet::new();
        for line in &lines {
            if line.surface.trim().is_empty() {
                return Err(OutlineError::Invalid(format!(
                    "line {} has no entity",
                    line.label()
                )));
            }
            if line.index.first() != Some(&1) || line.index.contains(&0) {
                return Err(OutlineError::Invalid(format!(
                    "index {} is outside the single root family",
                    line.label()
                )));
            }
            if line.index.len() > 1 && !seen.contains(&line.index[..line.index.len() - 1]) {
                return Err(OutlineError::Invalid(format!(
                    "line {} appears before its parent",
                    line.label()
                )));
            }
            if !seen.insert(line.index.as_slice()) {
                return Err(OutlineError::Invalid(format!(
                    "index {} is repeated",
                    line.label()
                )));
            }
        }
        Ok(Self { lines })
    }

    pub fn lines(&self) -> &[OutlineLine] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Canonical outline of `t`: depth-first, siblings in insertion order.
    pub fn from_taxonomy(t: &Taxonomy) -> Self {
        let mut lines = Vec::with_capacity(t.len());
        let mut stack = vec![(t.root(), vec![1u32])];
        while let Some((entity, index)) = stack.pop() {
            let children = t.children(entity);
            for (i, child) in children.iter().enumerate().rev() {
                let mut child_index = index.clone();
                child_index.push(i as u32 + 1);
                stack.push((child, child_index));
            }
            lines.push(OutlineLine::new(index, entity.surface()));
        }
        Self { lines }
    }
}

impl fmt::Display for Outline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, line) in self.lines.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticKind {
    /// A line skipped one or more levels and was attached to the deepest
    /// earlier prefix.
    LevelSkip,
    /// A repeated index; the first occurrence wins.
    DuplicateIndex,
    /// The canonical index differs from the one written.
    Renumbered,
    /// A numbered line outside the `1` family or without any known parent.
    StrayLine,
    /// The same entity appears more than once; the first placement wins.
    DuplicateEntity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// 1-based source line, when the defect is tied to one.
    pub line: Option<usize>,
    pub kind: DiagnosticKind,
    pub detail: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {:?}: {}", self.kind, self.detail),
            None => write!(f, "{:?}: {}", self.kind, self.detail),
        }
    }
}

fn line_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| {
        Regex::new(r"^\s*(\d+(?:\.\d+)*)\.?\s+(\S.*?)\s*$").expect("valid outline pattern")
    })
}

fn dotted(index: &[u32]) -> String {
    index
        .iter()
        .map(u32::to_string)
        .collect::<Vec<_>>()
        .join(".")
}

/// Extracts the numbered lines of `text`, ignoring prose around them.
pub fn parse_outline(text: &str) -> Result<(Outline, Vec<Diagnostic>), OutlineError> {
    if text.trim().is_empty() {
        return Err(OutlineError::EmptyInput);
    }
    let mut diagnostics = Vec::new();

    struct Pending {
        raw: Vec<u32>,
        surface: String,
        parent: Option<usize>,
        line_no: usize,
        skipped_level: bool,
    }
    let mut pending: Vec<Pending> = Vec::new();
    let mut by_raw: HashMap<Vec<u32>, usize> = HashMap::new();

    for (line_no, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let Some(caps) = line_pattern().captures(line) else {
            continue;
        };
        let Ok(raw) = caps[1]
            .split('.')
            .map(str::parse::<u32>)
            .collect::<Result<Vec<u32>, _>>()
        else {
            continue;
        };
        let surface = caps[2].to_string();
        if raw.first() != Some(&1) || raw.contains(&0) {
            diagnostics.push(Diagnostic {
                line: Some(line_no),
                kind: DiagnosticKind::StrayLine,
                detail: format!("index {} is outside the root family", dotted(&raw)),
            });
            continue;
        }
        if by_raw.contains_key(&raw) {
            diagnostics.push(Diagnostic {
                line: Some(line_no),
                kind: DiagnosticKind::DuplicateIndex,
                detail: format!("index {} repeated; keeping the first '{}'", dotted(&raw), pending[by_raw[&raw]].surface),
            });
            continue;
        }
        let (parent, skipped_level) = if raw.len() == 1 {
            (None, false)
        } else {
            let found = (1..raw.len())
                .rev()
                .find_map(|len| by_raw.get(&raw[..len]).map(|&id| (id, len)));
            match found {
                Some((id, len)) => (Some(id), len != raw.len() - 1),
                None => {
                    diagnostics.push(Diagnostic {
                        line: Some(line_no),
                        kind: DiagnosticKind::StrayLine,
                        detail: format!("index {} has no root line above it", dotted(&raw)),
                    });
                    continue;
                }
            }
        };
        if skipped_level {
            let parent_raw = &pending[parent.expect("non-root")].raw;
            diagnostics.push(Diagnostic {
                line: Some(line_no),
                kind: DiagnosticKind::LevelSkip,
                detail: format!(
                    "index {} skips a level; attached under {}",
                    dotted(&raw),
                    dotted(parent_raw)
                ),
            });
        }
        by_raw.insert(raw.clone(), pending.len());
        pending.push(Pending {
            raw,
            surface,
            parent,
            line_no,
            skipped_level,
        });
    }

    if !by_raw.contains_key([1u32].as_slice()) {
        return Err(OutlineError::NoRootLine);
    }

    let mut assigned: Vec<Vec<u32>> = Vec::with_capacity(pending.len());
    let mut child_counts: Vec<u32> = vec![0; pending.len()];
    let mut lines = Vec::with_capacity(pending.len());
    for (id, p) in pending.iter().enumerate() {
        let index = match p.parent {
            None => vec![1],
            Some(parent) => {
                child_counts[parent] += 1;
                let mut index = assigned[parent].clone();
                index.push(child_counts[parent]);
                index
            }
        };
        if index != p.raw && !p.skipped_level {
            diagnostics.push(Diagnostic {
                line: Some(p.line_no),
                kind: DiagnosticKind::Renumbered,
                detail: format!("index {} renumbered to {}", dotted(&p.raw), dotted(&index)),
            });
        }
        debug_assert_eq!(assigned.len(), id);
        assigned.push(index.clone());
        lines.push(OutlineLine::new(index, p.surface.clone()));
    }

    Ok((Outline { lines }, diagnostics))
}

fn outline_edges(o: &Outline) -> Result<(Entity, Vec<(Vec<u32>, Entity)>), OutlineError> {
    let Some(first) = o.lines.first() else {
        return Err(OutlineError::EmptyInput);
    };
    let root = Entity::new(&first.surface)?;
    let mut rest = Vec::with_capacity(o.lines.len());
    for line in &o.lines[1..] {
        rest.push((line.index.clone(), Entity::new(&line.surface)?));
    }
    Ok((root, rest))
}

/// Converts an outline to a taxonomy, rejecting repeated entities.
pub fn outline_to_taxonomy(o: &Outline) -> Result<Taxonomy, OutlineError> {
    let (root, rest) = outline_edges(o)?;
    let mut by_index: HashMap<&[u32], &Entity> = HashMap::new();
    by_index.insert(&[1], &root);
    let mut edges = Vec::with_capacity(rest.len());
    for (index, entity) in &rest {
        let parent = by_index
            .get(&index[..index.len() - 1])
            .ok_or_else(|| OutlineError::Invalid(format!("index {} has no parent", dotted(index))))?;
        edges.push(Edge::new((*parent).clone(), entity.clone()));
        by_index.insert(index, entity);
    }
    Ok(Taxonomy::build(root, &edges)?)
}

/// Converts an outline to a taxonomy, keeping the first placement of any
/// repeated entity. Children listed under a later repeat are merged into
/// the first placement.
pub fn outline_to_taxonomy_lenient(o: &Outline) -> Result<(Taxonomy, Vec<Diagnostic>), OutlineError> {
    let (root, rest) = outline_edges(o)?;
    let mut diagnostics = Vec::new();
    let mut tree = Taxonomy::singleton(root.clone());
    let mut by_index: HashMap<&[u32], Entity> = HashMap::new();
    by_index.insert(&[1], root);
    for (index, entity) in &rest {
        let parent = by_index
            .get(&index[..index.len() - 1])
            .cloned()
            .ok_or_else(|| OutlineError::Invalid(format!("index {} has no parent", dotted(index))))?;
        if let Some(existing) = tree.get(entity.key()) {
            diagnostics.push(Diagnostic {
                line: None,
                kind: DiagnosticKind::DuplicateEntity,
                detail: format!(
                    "'{}' at {} already placed; keeping the first placement",
                    entity.surface(),
                    dotted(index)
                ),
            });
            by_index.insert(index, existing.clone());
            continue;
        }
        tree.attach(parent.key(), entity.clone());
        by_index.insert(index, entity.clone());
    }
    Ok((tree, diagnostics))
}

/// Renders `t` in the hierarchical numbering format.
pub fn render_outline(t: &Taxonomy) -> String {
    Outline::from_taxonomy(t).to_string()
}

/// Parses `text` and converts it leniently, merging all diagnostics.
pub fn parse_taxonomy(text: &str) -> Result<(Taxonomy, Vec<Diagnostic>), OutlineError> {
    let (outline, mut diagnostics) = parse_outline(text)?;
    let (tree, more) = outline_to_taxonomy_lenient(&outline)?;
    diagnostics.extend(more);
    Ok((tree, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::TaxonomyError;
    use crate::fixtures;

    #[test]
    fn parses_assistant_message() {
        let text = "The current taxonomy is:\n1. maneuver\n1.1 straight-arm\n1.2 flight maneuver\n1.2.1 loop";
        let (outline, diags) = parse_outline(text).unwrap();
        assert_eq!(outline.len(), 4);
        assert!(diags.is_empty(), "{diags:?}");
        assert_eq!(outline.lines()[3], OutlineLine::new(vec![1, 2, 1], "loop"));
    }

    #[test]
    fn empty_and_rootless_input() {
        assert_eq!(parse_outline(""), Err(OutlineError::EmptyInput));
        assert_eq!(parse_outline("  \n "), Err(OutlineError::EmptyInput));
        assert_eq!(
            parse_outline("Given the vast number of entities, a complete taxonomy is beyond the scope of this interaction."),
            Err(OutlineError::NoRootLine)
        );
        assert_eq!(parse_outline("1.1 orphan"), Err(OutlineError::NoRootLine));
    }

    #[test]
    fn level_skip_attaches_to_deepest_prefix() {
        let (outline, diags) = parse_outline("1. a\n1.1.1 b").unwrap();
        assert_eq!(outline.len(), 2);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::LevelSkip);
        assert_eq!(outline.lines()[1].index, vec![1, 1]);
        let t = outline_to_taxonomy(&outline).unwrap();
        assert!(t.contains_edge(&Edge::from_names("a", "b").unwrap()));
        // A reparse of the repaired outline is clean.
        let (again, diags) = parse_outline(&outline.to_string()).unwrap();
        assert!(diags.is_empty());
        assert_eq!(again, outline);
    }

    #[test]
    fn duplicate_index_keeps_first() {
        let (outline, diags) = parse_outline("1. a\n1.1 b\n1.1 c").unwrap();
        assert_eq!(outline.len(), 2);
        assert_eq!(outline.lines()[1].surface, "b");
        assert_eq!(diags[0].kind, DiagnosticKind::DuplicateIndex);
    }

    #[test]
    fn renumbering_is_reported() {
        // The transcript swaps roll and bank between rounds; indices are
        // positional, entities are what matter.
        let (outline, diags) = parse_outline("1. a\n1.2 b\n1.1 c").unwrap();
        assert_eq!(outline.lines()[1].index, vec![1, 1]);
        assert_eq!(outline.lines()[2].index, vec![1, 2]);
        assert_eq!(diags.len(), 2);
        assert!(diags.iter().all(|d| d.kind == DiagnosticKind::Renumbered));
    }

    #[test]
    fn accepts_trailing_dot_variants() {
        let (outline, diags) = parse_outline("1. a\n1.1. b\n1.1.1 c").unwrap();
        assert!(diags.is_empty());
        assert_eq!(outline.len(), 3);
        let (outline, _) = parse_outline("1 a\n1.1 b").unwrap();
        assert_eq!(outline.len(), 2);
    }

    #[test]
    fn foreign_top_level_lines_are_stray() {
        let (outline, diags) = parse_outline("1. a\n1.1 b\n2. c\n2.1 d").unwrap();
        assert_eq!(outline.len(), 2);
        assert_eq!(diags.len(), 2);
        assert!(diags.iter().all(|d| d.kind == DiagnosticKind::StrayLine));
    }

    #[test]
    fn neuropteron_outline_converts() {
        let t = fixtures::neuropteron();
        assert_eq!(t.len(), 12);
        assert!(t.contains_edge(&Edge::from_names("lacewing", "brown lacewing").unwrap()));
        assert_eq!(t.depth(&Entity::new("goldeneye").unwrap()), Some(3));
    }

    #[test]
    fn single_line_is_singleton() {
        let (outline, _) = parse_outline("1. x").unwrap();
        let t = outline_to_taxonomy(&outline).unwrap();
        assert_eq!(t, Taxonomy::singleton(Entity::new("x").unwrap()));
    }

    #[test]
    fn render_root_and_fixture() {
        assert_eq!(render_outline(&Taxonomy::singleton(Entity::new("science").unwrap())), "1. science");
        assert_eq!(render_outline(&fixtures::maneuver()), fixtures::MANEUVER_OUTLINE);
    }

    #[test]
    fn strict_conversion_rejects_repeats_lenient_merges() {
        let (outline, _) = parse_outline("1. a\n1.1 b\n1.1.1 c\n1.2 c\n1.2.1 d").unwrap();
        assert!(matches!(
            outline_to_taxonomy(&outline),
            Err(OutlineError::Taxonomy(TaxonomyError::DuplicateParent { .. }))
        ));
        let (t, diags) = outline_to_taxonomy_lenient(&outline).unwrap();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::DuplicateEntity);
        let c = Entity::new("c").unwrap();
        assert_eq!(t.parent(&c).unwrap().key(), "b");
        assert_eq!(t.parent(&Entity::new("d").unwrap()), Some(&c));
    }

    #[test]
    fn outline_new_validates() {
        assert!(Outline::new(vec![OutlineLine::new(vec![1], "a"), OutlineLine::new(vec![1, 1, 1], "b")]).is_err());
        assert!(Outline::new(vec![OutlineLine::new(vec![1, 1], "a")]).is_err());
        assert!(Outline::new(vec![OutlineLine::new(vec![1], "a"), OutlineLine::new(vec![1, 1], "b")]).is_ok());
    }
}
