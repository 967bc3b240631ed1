//! Bookkeeping of which entities are placed, waiting, or dropped during
//! one induction session.

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::taxonomy::{Entity, Taxonomy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityPool {
    all: IndexSet<Entity>,
    remaining: IndexSet<Entity>,
    selected: Vec<Entity>,
    dropped: IndexSet<Entity>,
}

impl EntityPool {
    /// Everything except `root` starts out remaining. Duplicates in
    /// `entities` collapse onto their first occurrence.
    pub fn new(entities: &[Entity], root: &Entity) -> Self {
        let mut all: IndexSet<Entity> = entities.iter().cloned().collect();
        all.insert(root.clone());
        let remaining = all.iter().filter(|e| *e != root).cloned().collect();
        Self {
            all,
            remaining,
            selected: Vec::new(),
            dropped: IndexSet::new(),
        }
    }

    pub fn all(&self) -> &IndexSet<Entity> {
        &self.all
    }

    pub fn remaining(&self) -> &IndexSet<Entity> {
        &self.remaining
    }

    /// Entities selected during the current iteration.
    pub fn selected(&self) -> &[Entity] {
        &self.selected
    }

    /// In-set entities removed for good (they cannot be selected again).
    pub fn dropped(&self) -> &IndexSet<Entity> {
        &self.dropped
    }

    pub fn contains(&self, entity: &Entity) -> bool {
        self.all.contains(entity)
    }

    pub fn is_remaining(&self, entity: &Entity) -> bool {
        self.remaining.contains(entity)
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining.is_empty()
    }

    /// Starts a new iteration: clears the selection list.
    pub fn begin_iteration(&mut self) {
        self.selected.clear();
    }

    /// Moves `entity` from remaining to selected. Returns false if it was not
    /// waiting.
    pub fn select(&mut self, entity: &Entity) -> bool {
        if self.remaining.shift_remove(entity) {
            self.selected.push(entity.clone());
            true
        } else {
            false
        }
    }

    /// Puts a selected entity back for a later iteration.
    pub fn requeue(&mut self, entity: &Entity) {
        if self.all.contains(entity) && !self.dropped.contains(entity) {
            self.selected.retain(|e| e != entity);
            self.remaining.insert(entity.clone());
        }
    }

    /// Removes an in-set entity from play permanently.
    pub fn drop_entity(&mut self, entity: &Entity) {
        if self.all.contains(entity) {
            self.remaining.shift_remove(entity);
            self.selected.retain(|e| e != entity);
            self.dropped.insert(entity.clone());
        }
    }

    /// True when the in-set nodes of `placed`, the remaining entities, and
    /// the dropped entities partition the full entity set.
    pub fn is_conserved(&self, placed: &Taxonomy) -> bool {
        let placed_in_set = placed.nodes().filter(|e| self.all.contains(*e)).count();
        let disjoint = placed
            .nodes()
            .all(|e| !self.remaining.contains(e) && !self.dropped.contains(e))
            && self.remaining.iter().all(|e| !self.dropped.contains(e));
        disjoint && placed_in_set + self.remaining.len() + self.dropped.len() == self.all.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> Entity {
        Entity::new(s).unwrap()
    }

    #[test]
    fn select_requeue_drop() {
        let root = e("r");
        let mut pool = EntityPool::new(&[e("a"), e("r"), e("b"), e("A")], &root);
        assert_eq!(pool.all().len(), 3);
        assert_eq!(pool.remaining().len(), 2);
        let mut t = Taxonomy::singleton(root.clone());
        assert!(pool.is_conserved(&t));

        pool.begin_iteration();
        assert!(pool.select(&e("a")));
        assert!(!pool.select(&e("a")));
        assert!(!pool.is_conserved(&t));
        t = t.with_leaf(&root, e("a")).unwrap();
        assert!(pool.is_conserved(&t));

        let (t2, child) = t.remove_edge_and_detach(&crate::Edge::new(root.clone(), e("a"))).unwrap();
        pool.requeue(&child);
        assert!(pool.selected().is_empty());
        assert!(pool.is_conserved(&t2));

        pool.drop_entity(&e("b"));
        assert!(!pool.is_remaining(&e("b")));
        pool.requeue(&e("b"));
        assert!(!pool.is_remaining(&e("b")));
        assert!(pool.is_conserved(&t2));
    }
}
