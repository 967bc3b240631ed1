//! Result tables: one row per dataset and configuration, with edge and
//! ancestor precision, recall and F1 in percent.

use serde::{Deserialize, Serialize};
use taxo_core::{MetricsReport, Prf};

pub const COLUMNS: [&str; 9] = ["Dataset", "CoL", "Filter", "Pe", "Re", "F1e", "Pa", "Ra", "F1a"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub dataset: String,
    pub col: bool,
    pub filter: bool,
    pub records: usize,
    pub failures: usize,
    /// Absent when every record of the row failed.
    pub metrics: Option<MetricsReport>,
}

impl AblationRow {
    /// The nine table cells in [`COLUMNS`] order.
    pub fn cells(&self) -> [String; 9] {
        let mark = |b: bool| if b { "yes" } else { "no" }.to_string();
        let pct = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{:.2}", 100.0 * v));
        let edge = self.metrics.map(|m| m.edge);
        let anc = self.metrics.map(|m| m.ancestor);
        let get = |p: Option<Prf>, f: fn(&Prf) -> f64| pct(p.as_ref().map(f));
        [
            self.dataset.clone(),
            mark(self.col),
            mark(self.filter),
            get(edge, |p| p.precision),
            get(edge, |p| p.recall),
            get(edge, |p| p.f1),
            get(anc, |p| p.precision),
            get(anc, |p| p.recall),
            get(anc, |p| p.f1),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub columns: Vec<String>,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    /// Rows are grouped by dataset (first appearance order), then ordered
    /// HF before CoL and unfiltered before filtered.
    pub fn new(mut rows: Vec<AblationRow>) -> Self {
        let mut order: Vec<String> = Vec::new();
        for r in &rows {
            if !order.contains(&r.dataset) {
                order.push(r.dataset.clone());
            }
        }
        rows.sort_by_key(|r| (order.iter().position(|d| *d == r.dataset), r.col, r.filter));
        Self {
            columns: COLUMNS.iter().map(|c| c.to_string()).collect(),
            rows,
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = self.columns.join("\t");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.cells().join("\t"));
            out.push('\n');
        }
        out
    }

    /// Space-aligned text; text columns left-aligned, numbers right-aligned.
    pub fn to_text(&self) -> String {
        let body: Vec<[String; 9]> = self.rows.iter().map(AblationRow::cells).collect();
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i < 3 {
                        format!("{c:<w$}", w = widths[i])
                    } else {
                        format!("{c:>w$}", w = widths[i])
                    }
                })
                .collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.columns);
        let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for row in &body {
            out.push_str(&line(row));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use taxo_core::{evaluate, fixtures};

    fn row(dataset: &str, col: bool, filter: bool) -> AblationRow {
        AblationRow {
            dataset: dataset.into(),
            col,
            filter,
            records: 1,
            failures: 0,
            metrics: Some(evaluate(&fixtures::maneuver(), &fixtures::maneuver())),
        }
    }

    #[test]
    fn ordering_and_formats() {
        let t = AblationTable::new(vec![row("b", true, true), row("a", false, false), row("b", false, true), row("a", true, true)]);
        let order: Vec<(&str, bool, bool)> = t.rows.iter().map(|r| (r.dataset.as_str(), r.col, r.filter)).collect();
        assert_eq!(order, vec![("b", false, true), ("b", true, true), ("a", false, false), ("a", true, true)]);
        let tsv = t.to_tsv();
        assert_eq!(tsv.lines().next().unwrap(), "Dataset\tCoL\tFilter\tPe\tRe\tF1e\tPa\tRa\tF1a");
        assert_eq!(tsv.lines().nth(1).unwrap(), "b\tno\tyes\t100.00\t100.00\t100.00\t100.00\t100.00\t100.00");
        let text = t.to_text();
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().nth(2).unwrap().ends_with("100.00"));
    }

    #[test]
    fn failed_rows_show_dashes() {
        let mut r = row("a", true, false);
        r.metrics = None;
        assert_eq!(r.cells()[3], "-");
    }
}
