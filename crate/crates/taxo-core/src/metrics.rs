//! Ancestor, edge, and node precision/recall/F1 between a predicted and a
//! gold taxonomy. Entities are matched by normalized key.

use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::taxonomy::{ancestor_closure, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(c: &SetCounts) -> Self {
        // Two empty sets agree perfectly; an empty side against a non-empty
        // one scores zero.
        if c.pred == 0 && c.gold == 0 {
            return Self {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
            };
        }
        let precision = ratio(c.overlap, c.pred);
        let recall = ratio(c.overlap, c.gold);
        Self {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean, zero when both inputs are zero.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Sizes of the predicted set, the gold set, and their intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SetCounts {
    pub pred: usize,
    pub gold: usize,
    pub overlap: usize,
}

impl SetCounts {
    pub fn of<T: Eq + Hash>(pred: &HashSet<T>, gold: &HashSet<T>) -> Self {
        Self {
            pred: pred.len(),
            gold: gold.len(),
            overlap: pred.intersection(gold).count(),
        }
    }

    fn add(&mut self, other: &SetCounts) {
        self.pred += other.pred;
        self.gold += other.gold;
        self.overlap += other.overlap;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetricsCounts {
    pub ancestor: SetCounts,
    pub edge: SetCounts,
    pub node: SetCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ancestor: Prf,
    pub edge: Prf,
    pub node: Prf,
    pub counts: MetricsCounts,
}

impl MetricsReport {
    pub fn from_counts(counts: MetricsCounts) -> Self {
        Self {
            ancestor: Prf::from_counts(&counts.ancestor),
            edge: Prf::from_counts(&counts.edge),
            node: Prf::from_counts(&counts.node),
            counts,
        }
    }

    /// The nine scores in ancestor, edge, node order.
    pub fn values(&self) -> [f64; 9] {
        [
            self.ancestor.precision,
            self.ancestor.recall,
            self.ancestor.f1,
            self.edge.precision,
            self.edge.recall,
            self.edge.f1,
            self.node.precision,
            self.node.recall,
            self.node.f1,
        ]
    }
}

pub fn evaluate(pred: &Taxonomy, gold: &Taxonomy) -> MetricsReport {
    let counts = MetricsCounts {
        ancestor: SetCounts::of(&ancestor_closure(pred), &ancestor_closure(gold)),
        edge: SetCounts::of(&pred.edge_set(), &gold.edge_set()),
        node: SetCounts::of(&pred.node_set(), &gold.node_set()),
    };
    MetricsReport::from_counts(counts)
}

/// Macro average: the arithmetic mean of each score; counts are summed.
pub fn aggregate(reports: &[MetricsReport]) -> Result<MetricsReport, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::EmptyReportList);
    }
    let n = reports.len() as f64;
    let mean = |get: fn(&MetricsReport) -> Prf| {
        let (p, r, f) = reports.iter().map(get).fold((0.0, 0.0, 0.0), |acc, x| {
            (acc.0 + x.precision, acc.1 + x.recall, acc.2 + x.f1)
        });
        Prf {
            precision: p / n,
            recall: r / n,
            f1: f / n,
        }
    };
    Ok(MetricsReport {
        ancestor: mean(|r| r.ancestor),
        edge: mean(|r| r.edge),
        node: mean(|r| r.node),
        counts: summed_counts(reports),
    })
}

/// Micro average: scores recomputed from the summed counts.
pub fn aggregate_micro(reports: &[MetricsReport]) -> Result<MetricsReport, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::EmptyReportList);
    }
    Ok(MetricsReport::from_counts(summed_counts(reports)))
}

fn summed_counts(reports: &[MetricsReport]) -> MetricsCounts {
    let mut total = MetricsCounts::default();
    for r in reports {
        total.ancestor.add(&r.counts.ancestor);
        total.edge.add(&r.counts.edge);
        total.node.add(&r.counts.node);
    }
    total
}
