//! Side-by-side dumps of a gold taxonomy and a prediction.
//!
//! Each predicted line is prefixed with a marker: blank when its edge is in
//! the gold taxonomy, `~` when the entity exists in gold under another
//! parent, and `+` when the entity is not in gold at all. Gold lines whose
//! edge the prediction lacks are marked `-`.

use taxo_core::{render_outline, MetricsReport, Taxonomy};

fn marked_lines(t: &Taxonomy, other: &Taxonomy, is_pred: bool) -> Vec<String> {
    render_outline(t)
        .lines()
        .zip(t.preorder())
        .map(|(line, node)| {
            let marker = match t.parent(node) {
                None => ' ',
                Some(p) if other.parent(node) == Some(p) => ' ',
                Some(_) if !is_pred => '-',
                Some(_) if other.contains(node) => '~',
                Some(_) => '+',
            };
            format!("{marker} {line}")
        })
        .collect()
}

/// Renders `gold` and `pred` in two columns followed by the metric summary.
/// A missing prediction (the session failed) renders as an empty column.
pub fn side_by_side(gold: &Taxonomy, pred: Option<&Taxonomy>, metrics: Option<&MetricsReport>, error: Option<&str>) -> String {
    let left = match pred {
        Some(p) => marked_lines(gold, p, false),
        None => marked_lines(gold, gold, false),
    };
    let right = pred.map(|p| marked_lines(p, gold, true)).unwrap_or_default();
    let width = left.iter().map(|l| l.chars().count()).max().unwrap_or(0).max("gold".len());
    let mut out = format!("{:<width$}  | predicted\n", "gold");
    out.push_str(&format!("{}--+-{}\n", "-".repeat(width), "-".repeat(width)));
    for i in 0..left.len().max(right.len()) {
        let l = left.get(i).map(String::as_str).unwrap_or("");
        let r = right.get(i).map(String::as_str).unwrap_or("");
        out.push_str(format!("{l:<width$}  | {r}").trim_end());
        out.push('\n');
    }
    if let Some(m) = metrics {
        out.push('\n');
        for (label, prf) in [("edge", m.edge), ("ancestor", m.ancestor), ("node", m.node)] {
            out.push_str(&format!(
                "{label:<8}  P {:.4}  R {:.4}  F1 {:.4}\n",
                prf.precision, prf.recall, prf.f1
            ));
        }
    }
    if let Some(e) = error {
        out.push_str(&format!("\nerror: {e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use taxo_core::{evaluate, fixtures, Edge};

    #[test]
    fn identical_taxonomies_have_no_markers() {
        let g = fixtures::maneuver();
        let dump = side_by_side(&g, Some(&g), Some(&evaluate(&g, &g)), None);
        assert!(!dump.contains("| -") && !dump.contains("| +") && !dump.contains("| ~"));
        assert!(dump.contains("edge      P 1.0000  R 1.0000  F1 1.0000"));
        assert_eq!(dump.lines().filter(|l| l.contains('|')).count(), 15);
    }

    #[test]
    fn markers_flag_differences() {
        let e = |p: &str, c: &str| Edge::from_names(p, c).unwrap();
        let gold = Taxonomy::build(
            taxo_core::Entity::new("a").unwrap(),
            &[e("a", "b"), e("a", "c"), e("b", "d")],
        )
        .unwrap();
        let pred = Taxonomy::build(
            taxo_core::Entity::new("a").unwrap(),
            &[e("a", "b"), e("a", "d"), e("a", "x")],
        )
        .unwrap();
        let dump = side_by_side(&gold, Some(&pred), None, Some("boom"));
        assert!(dump.contains("~ 1.2 d"));
        assert!(dump.contains("+ 1.3 x"));
        assert!(dump.contains("- 1.2 c"));
        assert!(dump.contains("- 1.1.1 d"));
        assert!(dump.ends_with("error: boom\n"));
    }
}
