//! Box-plot rendering of per-iteration score distributions as SVG.
//!
//! One panel per (task, metric), one box per workflow: median line, IQR
//! box, whiskers at the most extreme points within 1.5 IQR of the
//! quartiles, outlier dots beyond, and a dot per iteration score.
//! Rendering is deterministic.

use std::fmt::Write as _;

use thiserror::Error;

use crate::analysis::quantile;
use crate::engine::ComparisonResults;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("nothing to plot: every selected cell is invalid or empty")]
    NothingToPlot,
}

struct BoxStats {
    q1: f64,
    median: f64,
    q3: f64,
    whisker_lo: f64,
    whisker_hi: f64,
    outliers: Vec<f64>,
    points: Vec<f64>,
}

fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q1 = quantile(&sorted, 0.25)?;
    let median = quantile(&sorted, 0.5)?;
    let q3 = quantile(&sorted, 0.75)?;
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let whisker_lo = sorted
        .iter()
        .copied()
        .find(|v| *v >= lo_fence)
        .unwrap_or(sorted[0]);
    let whisker_hi = sorted
        .iter()
        .rev()
        .copied()
        .find(|v| *v <= hi_fence)
        .unwrap_or(sorted[sorted.len() - 1]);
    let outliers = sorted
        .iter()
        .copied()
        .filter(|v| *v < lo_fence || *v > hi_fence)
        .collect();
    Some(BoxStats {
        q1,
        median,
        q3,
        whisker_lo,
        whisker_hi,
        outliers,
        points: sorted,
    })
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders every (task, metric) panel of a results object.
pub fn render_boxplot(results: &ComparisonResults) -> Result<String, PlotError> {
    let panel_width = 120.0 * results.workflows.len().max(2) as f64 + 120.0;
    let panel_height = 260.0;
    let mut panels: Vec<(String, Vec<(String, BoxStats)>)> = Vec::new();
    for (ti, task) in results.tasks.iter().enumerate() {
        for metric in &results.metric_names {
            let mut boxes = Vec::new();
            for (wi, workflow) in results.workflows.iter().enumerate() {
                if let Some(stats) = box_stats(&results.cell_scores(ti, wi, metric)) {
                    boxes.push((workflow.id.clone(), stats));
                }
            }
            if !boxes.is_empty() {
                panels.push((format!("{} \u{2014} {}", task.id, metric), boxes));
            }
        }
    }
    if panels.is_empty() {
        return Err(PlotError::NothingToPlot);
    }

    let width = panel_width;
    let height = panel_height * panels.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width:.0} {height:.0}\" \
         font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\">"
    );

    for (panel_index, (title, boxes)) in panels.iter().enumerate() {
        let top = panel_index as f64 * panel_height;
        let plot_top = top + 40.0;
        let plot_bottom = top + panel_height - 40.0;
        let lo = boxes
            .iter()
            .map(|(_, s)| s.points[0])
            .fold(f64::INFINITY, f64::min);
        let hi = boxes
            .iter()
            .map(|(_, s)| *s.points.last().unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let pad = ((hi - lo) * 0.05).max(1e-9);
        let (lo, hi) = (lo - pad, hi + pad);
        let y_of = |v: f64| plot_bottom - (v - lo) / (hi - lo) * (plot_bottom - plot_top);

        let _ = writeln!(
            svg,
            "  <text x=\"60\" y=\"{:.1}\" font-size=\"14\">{}</text>",
            top + 22.0,
            escape(title)
        );
        // Value axis with min/max labels.
        let _ = writeln!(
            svg,
            "  <line x1=\"70\" y1=\"{:.1}\" x2=\"70\" y2=\"{:.1}\" stroke=\"black\"/>",
            plot_top, plot_bottom
        );
        for (v, y) in [(hi, plot_top), (lo, plot_bottom)] {
            let _ = writeln!(
                svg,
                "  <text x=\"64\" y=\"{:.1}\" text-anchor=\"end\">{:.4}</text>",
                y + 4.0,
                v
            );
        }

        for (bi, (name, stats)) in boxes.iter().enumerate() {
            let center = 140.0 + bi as f64 * 120.0;
            let half = 28.0;
            // Whiskers.
            let _ = writeln!(
                svg,
                "  <line x1=\"{center:.1}\" y1=\"{:.1}\" x2=\"{center:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
                y_of(stats.whisker_hi),
                y_of(stats.q3)
            );
            let _ = writeln!(
                svg,
                "  <line x1=\"{center:.1}\" y1=\"{:.1}\" x2=\"{center:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
                y_of(stats.q1),
                y_of(stats.whisker_lo)
            );
            for v in [stats.whisker_lo, stats.whisker_hi] {
                let _ = writeln!(
                    svg,
                    "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
                    center - half / 2.0,
                    y_of(v),
                    center + half / 2.0,
                    y_of(v)
                );
            }
            // IQR box and median.
            let _ = writeln!(
                svg,
                "  <rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"black\"/>",
                center - half,
                y_of(stats.q3),
                2.0 * half,
                (y_of(stats.q1) - y_of(stats.q3)).max(0.5)
            );
            let _ = writeln!(
                svg,
                "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\" stroke-width=\"2\"/>",
                center - half,
                y_of(stats.median),
                center + half,
                y_of(stats.median)
            );
            // Per-iteration dots, offset in a deterministic comb.
            for (pi, v) in stats.points.iter().enumerate() {
                let dx = ((pi % 5) as f64 - 2.0) * 4.0;
                let _ = writeln!(
                    svg,
                    "  <circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2\" fill=\"crimson\" fill-opacity=\"0.6\"/>",
                    center + dx,
                    y_of(*v)
                );
            }
            // Outliers as open circles.
            for v in &stats.outliers {
                let _ = writeln!(
                    svg,
                    "  <circle cx=\"{center:.1}\" cy=\"{:.1}\" r=\"3.5\" fill=\"none\" stroke=\"black\"/>",
                    y_of(*v)
                );
            }
            let _ = writeln!(
                svg,
                "  <text x=\"{center:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
                plot_bottom + 18.0,
                escape(name)
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
