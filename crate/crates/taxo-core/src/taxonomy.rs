//! Single-rooted is-a hierarchies over normalized entities.
//!
//! A [`Taxonomy`] is an immutable tree: every node except the root has
//! exactly one parent. Editing operations return new values.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::hash::{Hash, Hasher};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::TaxonomyError;

/// Lowercase, trimmed, whitespace-collapsed form of an entity name.
pub fn normalize_key(surface: &str) -> String {
    surface
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// A concept name. Identity is the normalized key; the surface form of the
/// first occurrence is kept for rendering.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Entity {
    surface: String,
    key: String,
}

impl Entity {
    pub fn new(surface: &str) -> Result<Self, TaxonomyError> {
        let key = normalize_key(surface);
        if key.is_empty() {
            return Err(TaxonomyError::EmptyEntity);
        }
        Ok(Self {
            surface: surface.trim().to_string(),
            key,
        })
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn key(&self) -> &str {
        &self.key
    }
}

impl PartialEq for Entity {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for Entity {}

impl Hash for Entity {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key.hash(state);
    }
}

impl PartialOrd for Entity {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entity {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

impl TryFrom<String> for Entity {
    type Error = TaxonomyError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Entity::new(&value)
    }
}

impl TryFrom<&str> for Entity {
    type Error = TaxonomyError;

    fn try_from(value: &str) -> Result<Self, Self::Error> {
        Entity::new(value)
    }
}

impl From<Entity> for String {
    fn from(e: Entity) -> Self {
        e.surface
    }
}

/// A directed parent → child (hypernym → hyponym) relation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub parent: Entity,
    pub child: Entity,
}

impl Edge {
    pub fn new(parent: Entity, child: Entity) -> Self {
        Self { parent, child }
    }

    /// Convenience constructor from raw names.
    pub fn from_names(parent: &str, child: &str) -> Result<Self, TaxonomyError> {
        Ok(Self::new(Entity::new(parent)?, Entity::new(child)?))
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.parent, self.child)
    }
}

#[derive(Debug, Clone)]
struct Node {
    entity: Entity,
    parent: Option<String>,
    children: Vec<String>,
}

/// A validated single-rooted tree of entities.
///
/// Equality compares the root and the edge set; sibling order is kept for
/// rendering only.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    // Insertion order, root first. Every parent precedes its children.
    nodes: IndexMap<String, Node>,
}

impl Taxonomy {
    pub fn singleton(root: Entity) -> Self {
        let mut nodes = IndexMap::new();
        nodes.insert(
            root.key().to_string(),
            Node {
                entity: root,
                parent: None,
                children: Vec::new(),
            },
        );
        Self { nodes }
    }

    /// Validates `edges` into a tree rooted at `root`. Sibling order follows
    /// edge order.
    pub fn build(root: Entity, edges: &[Edge]) -> Result<Self, TaxonomyError> {
        Self::build_with_nodes(root, &[], edges)
    }

    /// Like [`Taxonomy::build`], but also requires every entity in `nodes`
    /// to be part of the tree, so isolated entities are reported as
    /// [`TaxonomyError::DisconnectedNode`].
    pub fn build_with_nodes(
        root: Entity,
        nodes: &[Entity],
        edges: &[Edge],
    ) -> Result<Self, TaxonomyError> {
        let mut seen_edges = HashSet::new();
        let mut parent_of: HashMap<&Entity, &Entity> = HashMap::new();
        let mut children_of: HashMap<&Entity, Vec<&Entity>> = HashMap::new();
        // All mentioned entities in first-mention order.
        let mut all: IndexMap<&str, &Entity> = IndexMap::new();
        all.insert(root.key(), &root);

        for edge in edges {
            if edge.parent == edge.child {
                return Err(TaxonomyError::SelfEdge(edge.parent.clone()));
            }
            if !seen_edges.insert(edge) {
                return Err(TaxonomyError::DuplicateEdge(edge.clone()));
            }
            if let Some(existing) = parent_of.get(&edge.child) {
                return Err(TaxonomyError::DuplicateParent {
                    child: edge.child.clone(),
                    parents: vec![(*existing).clone(), edge.parent.clone()],
                });
            }
            parent_of.insert(&edge.child, &edge.parent);
            children_of.entry(&edge.parent).or_default().push(&edge.child);
            all.entry(edge.parent.key()).or_insert(&edge.parent);
            all.entry(edge.child.key()).or_insert(&edge.child);
        }

        if let Some(parent) = parent_of.get(&root) {
            // The declared root sits below something: either a cycle through
            // the root or a competing top node.
            let mut cursor: &Entity = parent;
            let mut visited = HashSet::new();
            while let Some(next) = parent_of.get(cursor) {
                if *next == &root || !visited.insert(cursor.key()) {
                    return Err(TaxonomyError::CycleDetected(cycle_through(
                        &parent_of, &root,
                    )));
                }
                cursor = next;
            }
            return Err(TaxonomyError::MultipleRoots(vec![
                root.clone(),
                cursor.clone(),
            ]));
        }

        let mut roots: Vec<Entity> = all
            .values()
            .filter(|e| !parent_of.contains_key(**e))
            .map(|e| (*e).clone())
            .collect();
        if roots.len() > 1 {
            roots.sort();
            return Err(TaxonomyError::MultipleRoots(roots));
        }

        for extra in nodes {
            if !all.contains_key(extra.key()) {
                return Err(TaxonomyError::DisconnectedNode(extra.clone()));
            }
        }

        // Breadth-first from the root; anything left over hangs off a cycle.
        let mut tree = Taxonomy::singleton(root.clone());
        let mut queue = VecDeque::from([&root]);
        while let Some(parent) = queue.pop_front() {
            if let Some(kids) = children_of.get(parent) {
                for child in kids {
                    tree.attach(parent.key(), (*child).clone());
                    queue.push_back(child);
                }
            }
        }
        if tree.len() < all.len() {
            let stray = all
                .values()
                .find(|e| !tree.contains(e))
                .expect("unreached node exists");
            return Err(TaxonomyError::CycleDetected(cycle_through(
                &parent_of, stray,
            )));
        }
        Ok(tree)
    }

    pub(crate) fn attach(&mut self, parent_key: &str, child: Entity) {
        let key = child.key().to_string();
        self.nodes
            .get_mut(parent_key)
            .expect("parent present")
            .children
            .push(key.clone());
        self.nodes.insert(
            key,
            Node {
                entity: child,
                parent: Some(parent_key.to_string()),
                children: Vec::new(),
            },
        );
    }

    pub fn root(&self) -> &Entity {
        &self.nodes[0].entity
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Always false: a taxonomy holds at least its root.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, entity: &Entity) -> bool {
        self.nodes.contains_key(entity.key())
    }

    /// Looks up the stored entity (with its first-seen surface form).
    pub fn get(&self, key: &str) -> Option<&Entity> {
        self.nodes.get(key).map(|n| &n.entity)
    }

    /// Nodes with every parent listed before its children.
    pub fn nodes(&self) -> impl Iterator<Item = &Entity> {
        self.nodes.values().map(|n| &n.entity)
    }

    pub fn node_set(&self) -> HashSet<Entity> {
        self.nodes().cloned().collect()
    }

    /// Edges in depth-first pre-order.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(self.len().saturating_sub(1));
        for entity in self.preorder() {
            if let Some(parent) = self.parent(entity) {
                out.push(Edge::new(parent.clone(), entity.clone()));
            }
        }
        out
    }

    pub fn edge_set(&self) -> HashSet<Edge> {
        self.edges().into_iter().collect()
    }

    pub fn contains_edge(&self, edge: &Edge) -> bool {
        self.nodes
            .get(edge.child.key())
            .and_then(|n| n.parent.as_deref())
            == Some(edge.parent.key())
    }

    pub fn parent(&self, entity: &Entity) -> Option<&Entity> {
        let node = self.nodes.get(entity.key())?;
        node.parent.as_ref().map(|p| &self.nodes[p.as_str()].entity)
    }

    pub fn children(&self, entity: &Entity) -> Vec<&Entity> {
        self.nodes
            .get(entity.key())
            .map(|n| {
                n.children
                    .iter()
                    .map(|k| &self.nodes[k.as_str()].entity)
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn is_leaf(&self, entity: &Entity) -> bool {
        self.nodes
            .get(entity.key())
            .is_some_and(|n| n.children.is_empty())
    }

    /// Number of edges between the root and `entity` (root = 0).
    pub fn depth(&self, entity: &Entity) -> Option<usize> {
        let mut node = self.nodes.get(entity.key())?;
        let mut depth = 0;
        while let Some(p) = &node.parent {
            node = &self.nodes[p.as_str()];
            depth += 1;
        }
        Some(depth)
    }

    /// Number of levels; a singleton has one level.
    pub fn level_count(&self) -> usize {
        self.nodes()
            .filter_map(|e| self.depth(e))
            .max()
            .unwrap_or(0)
            + 1
    }

    /// Proper ancestors of `entity`, nearest first.
    pub fn ancestors(&self, entity: &Entity) -> Vec<&Entity> {
        let mut out = Vec::new();
        let mut current = self.parent(entity);
        while let Some(p) = current {
            out.push(p);
            current = self.parent(p);
        }
        out
    }

    /// Depth-first pre-order walk honouring sibling order.
    pub fn preorder(&self) -> Vec<&Entity> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![self.root().key()];
        while let Some(key) = stack.pop() {
            let node = &self.nodes[key];
            out.push(&node.entity);
            stack.extend(node.children.iter().rev().map(String::as_str));
        }
        out
    }

    /// `entity` and all of its descendants, pre-order.
    pub fn subtree_entities(&self, entity: &Entity) -> Vec<&Entity> {
        let mut out = Vec::new();
        let Some(start) = self.nodes.get_key_value(entity.key()) else {
            return out;
        };
        let mut stack = vec![start.0.as_str()];
        while let Some(key) = stack.pop() {
            let node = &self.nodes[key];
            out.push(&node.entity);
            stack.extend(node.children.iter().rev().map(String::as_str));
        }
        out
    }

    /// Returns a copy with `child` appended as the last child of `parent`.
    pub fn with_leaf(&self, parent: &Entity, child: Entity) -> Result<Self, TaxonomyError> {
        if !self.contains(parent) {
            return Err(TaxonomyError::UnknownEntity(parent.clone()));
        }
        if parent == &child {
            return Err(TaxonomyError::SelfEdge(child));
        }
        if let Some(existing) = self.parent(&child) {
            return Err(TaxonomyError::DuplicateParent {
                child: child.clone(),
                parents: vec![existing.clone(), parent.clone()],
            });
        }
        if self.contains(&child) {
            // The root has no parent but cannot become a child either.
            return Err(TaxonomyError::CycleDetected(vec![child]));
        }
        let mut next = self.clone();
        next.attach(parent.key(), child);
        Ok(next)
    }

    /// Removes a leaf edge and hands back the detached child so it can be
    /// queued for re-selection.
    pub fn remove_edge_and_detach(&self, edge: &Edge) -> Result<(Self, Entity), TaxonomyError> {
        if !self.contains_edge(edge) {
            return Err(TaxonomyError::MissingEdge(edge.clone()));
        }
        if !self.is_leaf(&edge.child) {
            return Err(TaxonomyError::NotALeaf(edge.child.clone()));
        }
        let (next, mut removed) = self.remove_subtree(&edge.child)?;
        Ok((next, removed.remove(0)))
    }

    /// Removes `entity` and everything below it. Returns the removed
    /// entities, `entity` first.
    pub fn remove_subtree(&self, entity: &Entity) -> Result<(Self, Vec<Entity>), TaxonomyError> {
        if !self.contains(entity) {
            return Err(TaxonomyError::UnknownEntity(entity.clone()));
        }
        if entity == self.root() {
            return Err(TaxonomyError::CannotRemoveRoot(entity.clone()));
        }
        let removed: Vec<Entity> = self.subtree_entities(entity).into_iter().cloned().collect();
        let doomed: HashSet<&str> = removed.iter().map(Entity::key).collect();
        let mut next = self.clone();
        next.nodes.retain(|k, _| !doomed.contains(k.as_str()));
        let parent_key = self.nodes[entity.key()].parent.clone().expect("non-root");
        next.nodes[parent_key.as_str()]
            .children
            .retain(|k| k != entity.key());
        Ok((next, removed))
    }

    /// Copy keeping only nodes with depth < `levels`.
    pub fn truncate(&self, levels: usize) -> Self {
        let levels = levels.max(1);
        let mut out = Taxonomy::singleton(self.root().clone());
        for entity in self.nodes() {
            if entity == self.root() {
                continue;
            }
            if self.depth(entity).unwrap_or(usize::MAX) < levels {
                let parent = self.parent(entity).expect("non-root");
                out.attach(parent.key(), entity.clone());
            }
        }
        out
    }

    /// Entities whose depth is exactly `depth`.
    pub fn level(&self, depth: usize) -> Vec<&Entity> {
        self.preorder()
            .into_iter()
            .filter(|e| self.depth(e) == Some(depth))
            .collect()
    }
}

fn cycle_through(parent_of: &HashMap<&Entity, &Entity>, start: &Entity) -> Vec<Entity> {
    // Walk parents until a repeat; the repeated suffix is the cycle.
    let mut order: Vec<&Entity> = Vec::new();
    let mut cursor = start;
    loop {
        if let Some(pos) = order.iter().position(|e| *e == cursor) {
            let mut cycle: Vec<Entity> = order[pos..].iter().map(|e| (*e).clone()).collect();
            cycle.sort();
            return cycle;
        }
        order.push(cursor);
        match parent_of.get(cursor) {
            Some(next) => cursor = next,
            None => return order.into_iter().cloned().collect(),
        }
    }
}

impl PartialEq for Taxonomy {
    fn eq(&self, other: &Self) -> bool {
        self.root() == other.root()
            && self.len() == other.len()
            && self.nodes.iter().all(|(k, n)| {
                other
                    .nodes
                    .get(k)
                    .is_some_and(|o| o.parent == n.parent)
            })
    }
}

impl Eq for Taxonomy {}

#[derive(Serialize, Deserialize)]
struct TaxonomyRepr {
    root: Entity,
    edges: Vec<(Entity, Entity)>,
}

impl Serialize for Taxonomy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        TaxonomyRepr {
            root: self.root().clone(),
            edges: self.edges().into_iter().map(|e| (e.parent, e.child)).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Taxonomy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = TaxonomyRepr::deserialize(deserializer)?;
        let edges: Vec<Edge> = repr.edges.into_iter().map(|(p, c)| Edge::new(p, c)).collect();
        Taxonomy::build(repr.root, &edges).map_err(serde::de::Error::custom)
    }
}

/// Edges of `current` not present in `previous`.
///
/// Fails with [`TaxonomyError::NonMonotoneUpdate`] when `previous` holds an
/// edge that `current` lost, or when the roots differ.
pub fn diff_edges(current: &Taxonomy, previous: &Taxonomy) -> Result<Vec<Edge>, TaxonomyError> {
    if current.root() != previous.root() {
        return Err(TaxonomyError::NonMonotoneUpdate {
            missing: Vec::new(),
        });
    }
    let missing: Vec<Edge> = previous
        .edges()
        .into_iter()
        .filter(|e| !current.contains_edge(e))
        .collect();
    if !missing.is_empty() {
        return Err(TaxonomyError::NonMonotoneUpdate { missing });
    }
    Ok(current
        .edges()
        .into_iter()
        .filter(|e| !previous.contains_edge(e))
        .collect())
}

/// All (ancestor, descendant) pairs, ancestor proper.
pub fn ancestor_closure(t: &Taxonomy) -> HashSet<Edge> {
    let mut out = HashSet::new();
    for entity in t.nodes() {
        for ancestor in t.ancestors(entity) {
            out.insert(Edge::new(ancestor.clone(), entity.clone()));
        }
    }
    out
}

/// Free-function form of [`Taxonomy::build`].
pub fn build_taxonomy(root: Entity, edges: &[Edge]) -> Result<Taxonomy, TaxonomyError> {
    Taxonomy::build(root, edges)
}

/// Free-function form of [`Taxonomy::remove_edge_and_detach`].
pub fn remove_edge_and_detach(t: &Taxonomy, edge: &Edge) -> Result<(Taxonomy, Entity), TaxonomyError> {
    t.remove_edge_and_detach(edge)
}
