//! Deterministic SVG rendering of sweep tables.
//!
//! One polyline per policy over the capacity axis (agent 1's share), the
//! random baseline dashed, offline benchmark references as dotted horizontal
//! lines. Policies with a single point render as markers. Output depends
//! only on the input values, so identical tables produce identical bytes.

use std::fmt::Write as _;

use capbandit_core::policy::PolicyKind;

use crate::io::SweepRows;
use crate::{CliError, Result};

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 560.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 230.0;
const MARGIN_T: f64 = 48.0;
const MARGIN_B: f64 = 60.0;

fn color_of(policy: PolicyKind) -> &'static str {
    match policy {
        PolicyKind::LogisticGreedy => "#1f77b4",
        PolicyKind::LogisticTs => "#17becf",
        PolicyKind::TreeGreedy => "#2ca02c",
        PolicyKind::TreeTs => "#98df8a",
        PolicyKind::RandomNonContextual => "#7f7f7f",
        PolicyKind::LearnedNonContextual => "#9467bd",
        PolicyKind::OracleUnconstrained => "#d62728",
        PolicyKind::OracleConstrained => "#ff7f0e",
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

/// Renders the sweep as a standalone SVG document.
pub fn render_svg(
    sweep: &SweepRows,
    offline: &[(String, f64)],
    title: Option<&str>,
) -> Result<String> {
    if sweep.rows.is_empty() {
        return Err(CliError::EmptyTable);
    }

    // Group rows per policy in first-appearance order, keyed on agent 1's
    // capacity share.
    let mut policies: Vec<PolicyKind> = Vec::new();
    for row in &sweep.rows {
        if !policies.contains(&row.policy) {
            policies.push(row.policy);
        }
    }
    let series: Vec<(PolicyKind, Vec<(f64, f64)>)> = policies
        .iter()
        .map(|&p| {
            let mut points: Vec<(f64, f64)> = sweep
                .rows
                .iter()
                .filter(|r| r.policy == p)
                .map(|r| (r.alphas.first().copied().unwrap_or(0.0), r.mean_error))
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            (p, points)
        })
        .collect();

    let xs: Vec<f64> = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.0))
        .collect();
    let mut ys: Vec<f64> = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.1))
        .collect();
    ys.extend(offline.iter().map(|(_, e)| *e));
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = bounds(&ys);
    let pad = ((y_max - y_min) * 0.08).max(0.01);
    let (y_lo, y_hi) = (0.0_f64.max(y_min - pad), y_max + pad);

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min).max(1e-12) * plot_w;
    let sy = |y: f64| MARGIN_T + (1.0 - (y - y_lo) / (y_hi - y_lo).max(1e-12)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"Helvetica, Arial, sans-serif\">"
    );
    let _ = writeln!(
        svg,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
    if let Some(title) = title {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"26\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
            MARGIN_L + plot_w / 2.0,
            escape(title)
        );
    }

    // Axes.
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        fmt(MARGIN_L),
        fmt(MARGIN_T + plot_h),
        fmt(MARGIN_L + plot_w),
        fmt(MARGIN_T + plot_h)
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        fmt(MARGIN_L),
        fmt(MARGIN_T),
        fmt(MARGIN_L),
        fmt(MARGIN_T + plot_h)
    );
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let xv = x_min + frac * (x_max - x_min);
        let yv = y_lo + frac * (y_hi - y_lo);
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            fmt(sx(xv)),
            fmt(MARGIN_T + plot_h + 18.0),
            fmt(xv)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>",
            fmt(MARGIN_L - 6.0),
            fmt(sy(yv) + 4.0),
            fmt(yv)
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>",
            fmt(MARGIN_L),
            fmt(sy(yv)),
            fmt(MARGIN_L + plot_w),
            fmt(sy(yv))
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">capacity share of agent 1</text>",
        fmt(MARGIN_L + plot_w / 2.0),
        fmt(HEIGHT - 16.0)
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {})\">error rate</text>",
        fmt(MARGIN_T + plot_h / 2.0),
        fmt(MARGIN_T + plot_h / 2.0)
    );

    // Offline references: dotted horizontal lines.
    for (family, error) in offline {
        let y = fmt(sy(*error));
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#444444\" \
             stroke-dasharray=\"2,4\"/>",
            fmt(MARGIN_L),
            fmt(MARGIN_L + plot_w)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"#444444\">offline {}</text>",
            fmt(MARGIN_L + 4.0),
            fmt(sy(*error) - 4.0),
            escape(family)
        );
    }

    // Policy lines and markers.
    let mut legend_y = MARGIN_T + 10.0;
    for (policy, points) in &series {
        let color = color_of(*policy);
        let dash = if *policy == PolicyKind::RandomNonContextual {
            " stroke-dasharray=\"7,5\""
        } else {
            ""
        };
        if points.len() > 1 {
            let path: Vec<String> = points
                .iter()
                .map(|(x, y)| format!("{},{}", fmt(sx(*x)), fmt(sy(*y))))
                .collect();
            let _ = writeln!(
                svg,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"{dash} \
                 points=\"{}\"/>",
                path.join(" ")
            );
        }
        for (x, y) in points {
            let _ = writeln!(
                svg,
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>",
                fmt(sx(*x)),
                fmt(sy(*y))
            );
        }
        let lx = MARGIN_L + plot_w + 14.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" \
             stroke-width=\"1.8\"{dash}/>",
            fmt(lx),
            fmt(legend_y),
            fmt(lx + 26.0),
            fmt(legend_y)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>",
            fmt(lx + 32.0),
            fmt(legend_y + 4.0),
            policy
        );
        legend_y += 20.0;
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if min == max {
        (min - 0.5, max + 0.5)
    } else {
        (min, max)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
