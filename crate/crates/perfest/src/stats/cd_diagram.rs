//! Critical-difference diagrams as standalone SVG documents.
//!
//! Workflows sit on a horizontal average-rank axis (rank 1 on the left);
//! each has a spur to a label column, alternating sides. A ruler at the
//! top left shows the critical difference. For the Nemenyi test, maximal
//! groups of workflows whose rank spread stays within the CD are joined
//! by horizontal bars; for Bonferroni-Dunn a bracket marks the interval
//! baseline +/- CD. Rendering is deterministic: the same input yields a
//! byte-identical document.

use std::fmt::Write as _;

use super::{BonferroniDunnResult, NemenyiResult, RankSummary};

/// Diagram flavour.
#[derive(Debug, Clone, PartialEq)]
pub enum CdKind {
    /// Bars join maximal mutually-compatible groups.
    Nemenyi,
    /// A bracket spans baseline +/- CD.
    BonferroniDunn { baseline: String },
}

/// Input to the renderer.
#[derive(Debug, Clone)]
pub struct CdDiagram {
    pub title: String,
    pub workflows: Vec<String>,
    pub avg_ranks: Vec<f64>,
    pub crit_dif: f64,
    pub kind: CdKind,
}

impl CdDiagram {
    pub fn from_nemenyi(rks: &RankSummary, test: &NemenyiResult, title: impl Into<String>) -> Self {
        CdDiagram {
            title: title.into(),
            workflows: rks.workflows.clone(),
            avg_ranks: rks.avg_ranks.clone(),
            crit_dif: test.crit_dif,
            kind: CdKind::Nemenyi,
        }
    }

    pub fn from_bonferroni_dunn(
        rks: &RankSummary,
        test: &BonferroniDunnResult,
        title: impl Into<String>,
    ) -> Self {
        CdDiagram {
            title: title.into(),
            workflows: rks.workflows.clone(),
            avg_ranks: rks.avg_ranks.clone(),
            crit_dif: test.crit_dif,
            kind: CdKind::BonferroniDunn {
                baseline: test.baseline.clone(),
            },
        }
    }
}

/// Maximal intervals (over rank-sorted workflows) whose rank spread is at
/// most the critical difference; singletons are dropped.
fn maximal_cliques(sorted_ranks: &[f64], crit_dif: f64) -> Vec<(usize, usize)> {
    let k = sorted_ranks.len();
    let mut cliques: Vec<(usize, usize)> = Vec::new();
    let mut furthest = 0usize;
    for i in 0..k {
        let mut j = i;
        while j + 1 < k && sorted_ranks[j + 1] - sorted_ranks[i] <= crit_dif {
            j += 1;
        }
        if j > i && j + 1 > furthest {
            cliques.push((i, j));
            furthest = j + 1;
        }
    }
    cliques
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders the diagram to SVG text.
pub fn render_cd_diagram(diagram: &CdDiagram) -> String {
    let k = diagram.workflows.len();
    assert!(k >= 2, "a CD diagram needs at least two workflows");

    // Workflows sorted by average rank (best first); ties by name for a
    // stable layout.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        diagram.avg_ranks[a]
            .partial_cmp(&diagram.avg_ranks[b])
            .unwrap()
            .then(diagram.workflows[a].cmp(&diagram.workflows[b]))
    });
    let sorted_ranks: Vec<f64> = order.iter().map(|&i| diagram.avg_ranks[i]).collect();
    let sorted_names: Vec<&str> = order
        .iter()
        .map(|&i| diagram.workflows[i].as_str())
        .collect();

    let width = 840.0;
    let axis_left = 110.0;
    let axis_right = width - 110.0;
    let axis_y = 110.0;
    let rank_span = (k - 1).max(1) as f64;
    let x_of = |rank: f64| axis_left + (rank - 1.0) / rank_span * (axis_right - axis_left);

    let left_count = k.div_ceil(2);
    let label_step = 22.0;
    let bars_depth = match &diagram.kind {
        CdKind::Nemenyi => maximal_cliques(&sorted_ranks, diagram.crit_dif).len(),
        CdKind::BonferroniDunn { .. } => 1,
    };
    let bars_bottom = axis_y + 14.0 + bars_depth as f64 * 9.0;
    let height = bars_bottom + left_count as f64 * label_step + 30.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width:.0} {height:.0}\" \
         font-family=\"Helvetica, Arial, sans-serif\" font-size=\"13\">"
    );
    let _ = writeln!(
        svg,
        "  <title>{}</title>",
        escape(&diagram.title)
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{axis_left:.1}\" y=\"24\" font-size=\"15\">{}</text>",
        escape(&diagram.title)
    );

    // CD ruler at the top left.
    let ruler_y = 48.0;
    let ruler_len = diagram.crit_dif / rank_span * (axis_right - axis_left);
    let ruler_end = axis_left + ruler_len.min(axis_right - axis_left);
    let _ = writeln!(
        svg,
        "  <line x1=\"{axis_left:.1}\" y1=\"{ruler_y:.1}\" x2=\"{ruler_end:.1}\" y2=\"{ruler_y:.1}\" stroke=\"black\" stroke-width=\"2\"/>"
    );
    for x in [axis_left, ruler_end] {
        let _ = writeln!(
            svg,
            "  <line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\" stroke-width=\"2\"/>",
            ruler_y - 4.0,
            ruler_y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "  <text x=\"{:.1}\" y=\"{:.1}\">CD = {:.4}</text>",
        ruler_end + 8.0,
        ruler_y + 4.0,
        diagram.crit_dif
    );

    // Rank axis with integer ticks.
    let _ = writeln!(
        svg,
        "  <line x1=\"{axis_left:.1}\" y1=\"{axis_y:.1}\" x2=\"{axis_right:.1}\" y2=\"{axis_y:.1}\" stroke=\"black\" stroke-width=\"1.5\"/>"
    );
    for tick in 1..=k {
        let x = x_of(tick as f64);
        let _ = writeln!(
            svg,
            "  <line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{axis_y:.1}\" stroke=\"black\"/>",
            axis_y - 5.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{tick}</text>",
            axis_y - 10.0
        );
    }

    // Significance bars.
    match &diagram.kind {
        CdKind::Nemenyi => {
            for (depth, (i, j)) in maximal_cliques(&sorted_ranks, diagram.crit_dif)
                .into_iter()
                .enumerate()
            {
                let y = axis_y + 12.0 + depth as f64 * 9.0;
                let _ = writeln!(
                    svg,
                    "  <line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"black\" stroke-width=\"4\"/>",
                    x_of(sorted_ranks[i]) - 3.0,
                    x_of(sorted_ranks[j]) + 3.0
                );
            }
        }
        CdKind::BonferroniDunn { baseline } => {
            if let Some(pos) = sorted_names.iter().position(|n| n == baseline) {
                let center = sorted_ranks[pos];
                let lo = x_of((center - diagram.crit_dif).max(1.0));
                let hi = x_of((center + diagram.crit_dif).min(k as f64));
                let y = axis_y + 12.0;
                let _ = writeln!(
                    svg,
                    "  <line x1=\"{lo:.1}\" y1=\"{y:.1}\" x2=\"{hi:.1}\" y2=\"{y:.1}\" stroke=\"black\" stroke-width=\"4\" stroke-dasharray=\"6,3\"/>"
                );
                let _ = writeln!(
                    svg,
                    "  <text x=\"{hi:.1}\" y=\"{:.1}\" font-size=\"11\">baseline &#177; CD</text>",
                    y + 14.0
                );
            }
        }
    }

    // Spurs and labels: best half on the left, rest on the right.
    for (pos, (&name, &rank)) in sorted_names.iter().zip(&sorted_ranks).enumerate() {
        let on_left = pos < left_count;
        let row = if on_left { pos } else { pos - left_count };
        let label_y = bars_bottom + 16.0 + row as f64 * label_step;
        let x = x_of(rank);
        let (label_x, anchor) = if on_left {
            (axis_left - 16.0, "end")
        } else {
            (axis_right + 16.0, "start")
        };
        let _ = writeln!(
            svg,
            "  <polyline points=\"{x:.1},{axis_y:.1} {x:.1},{label_y:.1} {label_x:.1},{label_y:.1}\" fill=\"none\" stroke=\"black\"/>"
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"{anchor}\">{} ({:.2})</text>",
            if on_left { label_x - 4.0 } else { label_x + 4.0 },
            label_y + 4.0,
            escape(name),
            rank
        );
    }

    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diagram(ranks: &[f64], crit_dif: f64) -> CdDiagram {
        CdDiagram {
            title: "test".to_string(),
            workflows: (0..ranks.len()).map(|i| format!("w{}", i + 1)).collect(),
            avg_ranks: ranks.to_vec(),
            crit_dif,
            kind: CdKind::Nemenyi,
        }
    }

    #[test]
    fn maximal_cliques_are_maximal_and_plural() {
        // Ranks 1, 1.5, 3, 5 with CD 2: [0..2] and [2..3].
        let cliques = maximal_cliques(&[1.0, 1.5, 3.0, 5.0], 2.0);
        assert_eq!(cliques, vec![(0, 2), (2, 3)]);
        // A contained interval never appears.
        let cliques = maximal_cliques(&[1.0, 1.1, 1.2], 0.5);
        assert_eq!(cliques, vec![(0, 2)]);
        // No neighbours within CD: no bars.
        let cliques = maximal_cliques(&[1.0, 5.0, 9.0], 1.0);
        assert!(cliques.is_empty());
    }

    #[test]
    fn all_connected_when_spread_below_cd() {
        let ranks: Vec<f64> = (0..15).map(|i| 1.0 + i as f64 * 10.5 / 14.0).collect();
        let cliques = maximal_cliques(&ranks, 12.38302);
        assert_eq!(cliques, vec![(0, 14)], "one bar spanning everything");
    }

    #[test]
    fn rendering_is_deterministic() {
        let d = diagram(&[1.2, 2.8, 2.8, 4.0], 1.5);
        let a = render_cd_diagram(&d);
        let b = render_cd_diagram(&d);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("CD = 1.5"));
        assert!(a.contains("w1"));
    }

    #[test]
    fn disconnected_pair_has_no_bar() {
        let d = diagram(&[1.0, 4.0], 2.0);
        let svg = render_cd_diagram(&d);
        assert!(!svg.contains("stroke-width=\"4\""), "no clique bar expected");
    }

    #[test]
    fn bonferroni_dunn_bracket_present() {
        let d = CdDiagram {
            kind: CdKind::BonferroniDunn {
                baseline: "w1".to_string(),
            },
            ..diagram(&[1.0, 2.0, 3.0], 1.2)
        };
        let svg = render_cd_diagram(&d);
        assert!(svg.contains("baseline"));
        assert!(svg.contains("stroke-dasharray"));
    }
}
