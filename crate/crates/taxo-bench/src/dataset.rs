//! Dataset records on disk.
//!
//! A record is a JSON object
//! `{"name", "root", "entities": [...], "edges": [[parent, child], ...], "split"}`.
//! A file holds a single object, an array of objects, or one object per line.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use taxo_core::{Edge, Entity, Taxonomy};

use crate::error::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub name: String,
    pub root: Entity,
    /// Entities in the order they are shown to the model.
    pub entities: Vec<Entity>,
    pub gold: Taxonomy,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RawRecord {
    name: String,
    root: String,
    entities: Vec<String>,
    edges: Vec<(String, String)>,
    #[serde(default = "default_split")]
    split: Split,
}

fn default_split() -> Split {
    Split::Test
}

impl DatasetRecord {
    /// Checks the record's own invariants: the gold tree is valid, rooted at
    /// `root`, and its nodes are exactly the entity list.
    pub fn new(name: &str, root: Entity, entities: Vec<Entity>, edges: &[Edge], split: Split) -> Result<Self, DatasetError> {
        let violation = |detail: String| DatasetError::InvariantViolation {
            record: name.to_string(),
            detail,
        };
        let gold = Taxonomy::build(root.clone(), edges).map_err(|e| violation(e.to_string()))?;
        let listed: HashSet<&Entity> = entities.iter().collect();
        if listed.len() != entities.len() {
            return Err(violation("entity list has duplicates".into()));
        }
        if let Some(missing) = gold.nodes().find(|n| !listed.contains(n)) {
            return Err(violation(format!("gold node '{missing}' is not in the entity list")));
        }
        if let Some(extra) = entities.iter().find(|e| !gold.contains(e)) {
            return Err(violation(format!("entity '{extra}' is not in the gold taxonomy")));
        }
        Ok(Self {
            name: name.to_string(),
            root,
            entities,
            gold,
            split,
        })
    }

    /// A record whose entity list is the gold node set in gold order.
    pub fn from_taxonomy(name: &str, gold: Taxonomy, split: Split) -> Self {
        Self {
            name: name.to_string(),
            root: gold.root().clone(),
            entities: gold.nodes().cloned().collect(),
            gold,
            split,
        }
    }

    fn from_raw(raw: RawRecord) -> Result<Self, DatasetError> {
        let entity = |s: &str| {
            Entity::new(s).map_err(|e| DatasetError::InvariantViolation {
                record: raw.name.clone(),
                detail: e.to_string(),
            })
        };
        let root = entity(&raw.root)?;
        let entities = raw.entities.iter().map(|s| entity(s)).collect::<Result<Vec<_>, _>>()?;
        // Edges refer to the listed surface forms when names match.
        let canonical = |s: &str| -> Result<Entity, DatasetError> {
            let e = entity(s)?;
            Ok(entities.iter().find(|x| **x == e).cloned().unwrap_or(e))
        };
        let edges = raw
            .edges
            .iter()
            .map(|(p, c)| Ok(Edge::new(canonical(p)?, canonical(c)?)))
            .collect::<Result<Vec<_>, DatasetError>>()?;
        let root = entities.iter().find(|x| **x == root).cloned().unwrap_or(root);
        Self::new(&raw.name, root, entities, &edges, raw.split)
    }

    fn to_raw(&self) -> RawRecord {
        RawRecord {
            name: self.name.clone(),
            root: self.root.surface().to_string(),
            entities: self.entities.iter().map(|e| e.surface().to_string()).collect(),
            edges: self
                .gold
                .edges()
                .into_iter()
                .map(|e| (e.parent.surface().to_string(), e.child.surface().to_string()))
                .collect(),
            split: self.split,
        }
    }
}

impl Serialize for DatasetRecord {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_raw().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DatasetRecord {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawRecord::deserialize(deserializer)?;
        DatasetRecord::from_raw(raw).map_err(serde::de::Error::custom)
    }
}

/// Parses dataset text. Errors carry the 1-based line where the offending
/// record starts.
pub fn parse_dataset(text: &str) -> Result<Vec<DatasetRecord>, DatasetError> {
    let trimmed = text.trim_start();
    let offset = text.len() - trimmed.len();
    let first_line = 1 + text[..offset].matches('\n').count();
    if trimmed.starts_with('[') {
        let values: Vec<serde_json::Value> = serde_json::from_str(trimmed).map_err(|e| DatasetError::Parse {
            line: first_line + e.line().saturating_sub(1),
            detail: e.to_string(),
        })?;
        // Locate each element for diagnostics by re-scanning with a stream.
        let starts = element_lines(trimmed, first_line);
        return values
            .into_iter()
            .enumerate()
            .map(|(i, v)| record_from_value(v, starts.get(i).copied().unwrap_or(first_line)))
            .collect();
    }
    // One object or a sequence of objects (one per line, or otherwise
    // whitespace-separated).
    let mut out = Vec::new();
    let mut stream = serde_json::Deserializer::from_str(text).into_iter::<serde_json::Value>();
    loop {
        let before = stream.byte_offset();
        let skipped = text[before..].len() - text[before..].trim_start().len();
        let start_line = 1 + text[..before + skipped].matches('\n').count();
        match stream.next() {
            None => break,
            Some(Ok(value)) => out.push(record_from_value(value, start_line)?),
            Some(Err(e)) => {
                return Err(DatasetError::Parse {
                    line: e.line(),
                    detail: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

fn element_lines(array_text: &str, first_line: usize) -> Vec<usize> {
    // Top-level objects begin where brace depth goes from 0 to 1 inside the
    // outer array; strings are skipped.
    let mut lines = Vec::new();
    let mut depth = 0i32;
    let mut in_string = false;
    let mut escaped = false;
    let mut line = first_line;
    for ch in array_text.chars() {
        if ch == '\n' {
            line += 1;
        }
        if in_string {
            match (escaped, ch) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_string = false,
                _ => {}
            }
            continue;
        }
        match ch {
            '"' => in_string = true,
            '[' | '{' => {
                depth += 1;
                if ch == '{' && depth == 2 {
                    lines.push(line);
                }
            }
            ']' | '}' => depth -= 1,
            _ => {}
        }
    }
    lines
}

fn record_from_value(value: serde_json::Value, line: usize) -> Result<DatasetRecord, DatasetError> {
    let raw: RawRecord = serde_json::from_value(value).map_err(|e| DatasetError::Parse {
        line,
        detail: e.to_string(),
    })?;
    DatasetRecord::from_raw(raw).map_err(|e| match e {
        DatasetError::InvariantViolation { record, detail } => DatasetError::InvariantViolation {
            record,
            detail: format!("{detail} (record starting at line {line})"),
        },
        other => other,
    })
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_dataset(&text)
}

/// Writes records as a pretty-printed JSON array.
pub fn save_dataset(records: &[DatasetRecord], path: &Path) -> Result<(), DatasetError> {
    let text = serde_json::to_string_pretty(records).expect("records serialize");
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DatasetError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
    }
    fs::write(path, text + "\n").map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Converts `parent<TAB>child` lines into a record. The root is the one
/// parent that is never a child; entities are listed in first-seen order.
pub fn record_from_tsv(name: &str, text: &str, split: Split) -> Result<DatasetRecord, DatasetError> {
    let mut edges = Vec::new();
    let mut seen: Vec<Entity> = Vec::new();
    let mut note = |e: &Entity| {
        if !seen.contains(e) {
            seen.push(e.clone());
        }
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(p), Some(c), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(DatasetError::Parse {
                line: i + 1,
                detail: "expected exactly two tab-separated fields".into(),
            });
        };
        let parse = |s: &str| {
            Entity::new(s).map_err(|e| DatasetError::Parse {
                line: i + 1,
                detail: e.to_string(),
            })
        };
        let (p, c) = (parse(p)?, parse(c)?);
        note(&p);
        note(&c);
        edges.push(Edge::new(p, c));
    }
    let children: HashSet<&Entity> = edges.iter().map(|e| &e.child).collect();
    let roots: Vec<&Entity> = seen.iter().filter(|e| !children.contains(e)).collect();
    let root = match roots.as_slice() {
        [r] => (*r).clone(),
        [] => {
            return Err(DatasetError::InvariantViolation {
                record: name.into(),
                detail: "no root: every entity has a parent".into(),
            })
        }
        many => {
            return Err(DatasetError::InvariantViolation {
                record: name.into(),
                detail: format!(
                    "several roots: {}",
                    many.iter().map(|e| e.surface()).collect::<Vec<_>>().join(", ")
                ),
            })
        }
    };
    DatasetRecord::new(name, root, seen, &edges, split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use taxo_core::fixtures;

    const MANEUVER_JSON: &str = include_str!("../fixtures/datasets/maneuver.json");
    const NEUROPTERON_JSON: &str = include_str!("../fixtures/datasets/neuropteron.json");
    const BUNDLED: &str = include_str!("../fixtures/datasets/bundled.ndjson");
    const MANEUVER_TSV: &str = include_str!("../fixtures/datasets/maneuver.tsv");

    #[test]
    fn bundled_maneuver() {
        let records = parse_dataset(MANEUVER_JSON).unwrap();
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.entities.len(), 14);
        assert_eq!(r.gold.level_count(), 4);
        assert_eq!(r.gold, fixtures::maneuver());
        assert_eq!(r.entities, fixtures::maneuver_entities());
        assert_eq!(r.split, Split::Test);
    }

    #[test]
    fn bundled_neuropteron() {
        let r = &parse_dataset(NEUROPTERON_JSON).unwrap()[0];
        assert_eq!(r.entities.len(), 12);
        assert_eq!(r.gold.level_count(), 4);
        assert_eq!(r.split, Split::Train);
    }

    #[test]
    fn ndjson_and_round_trip() {
        let records = parse_dataset(BUNDLED).unwrap();
        assert_eq!(records.len(), 3);
        let text = serde_json::to_string(&records).unwrap();
        assert_eq!(parse_dataset(&text).unwrap(), records);
    }

    #[test]
    fn missing_entity_is_an_invariant_violation() {
        let text = r#"{"name":"x","root":"a","entities":["a","b"],"edges":[["a","b"],["a","c"]],"split":"test"}"#;
        assert!(matches!(parse_dataset(text), Err(DatasetError::InvariantViolation { .. })));
        let text = r#"{"name":"x","root":"a","entities":["a","b","z"],"edges":[["a","b"]],"split":"test"}"#;
        assert!(matches!(parse_dataset(text), Err(DatasetError::InvariantViolation { .. })));
    }

    #[test]
    fn errors_point_at_the_line() {
        let good = r#"{"name":"x","root":"a","entities":["a","b"],"edges":[["a","b"]]}"#;
        let text = format!("{good}\n\n{{\"name\": 3}}\n");
        match parse_dataset(&text) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = format!("[\n  {good},\n  {{\"name\": \"y\"}}\n]");
        match parse_dataset(&text) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match parse_dataset("{\"name\": \"x\",\nbroken") {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tsv_conversion() {
        let r = record_from_tsv("maneuver", MANEUVER_TSV, Split::Test).unwrap();
        assert_eq!(r.gold, fixtures::maneuver());
        assert_eq!(r.root, Entity::new("maneuver").unwrap());
        assert!(matches!(
            record_from_tsv("bad", "a\tb\nc\td\n", Split::Test),
            Err(DatasetError::InvariantViolation { .. })
        ));
        assert!(matches!(
            record_from_tsv("bad", "a b\n", Split::Test),
            Err(DatasetError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn save_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out/records.json");
        let records = parse_dataset(BUNDLED).unwrap();
        save_dataset(&records, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), records);
    }
}
