//! Static SVG chart of an experiment: criteria (black) and their targets (gray)
//! against model order, with a dot at each criterion's minimizer.

use std::fmt::Write as _;

use crate::criteria::CriterionKind;
use crate::simulation::{ExperimentResult, ExperimentRow};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const GRAY: &str = "#9a9a9a";

/// Dash pattern per line role: solid, long dash, dotted, short dash, dot-dash.
fn dash(role: usize) -> &'static str {
    ["", "12,6", "2,4", "5,4", "10,4,2,4"][role]
}

struct Curve {
    label: &'static str,
    role: usize,
    color: &'static str,
    points: Vec<(f64, f64)>,
}

fn curve(rows: &[ExperimentRow], label: &'static str, role: usize, color: &'static str, f: impl Fn(&ExperimentRow) -> Option<f64>) -> Curve {
    Curve {
        label,
        role,
        color,
        points: rows.iter().filter_map(|r| f(r).map(|v| (r.order as f64, v))).collect(),
    }
}

/// Render the chart. The vertical range is `[0, 4·min ρ²]` capped at the
/// largest plotted value; curves are clipped to the plot area.
pub fn render_experiment(result: &ExperimentResult) -> String {
    let rows = &result.rows;
    let curves = vec![
        curve(rows, "GCV", 0, "black", |r| Some(r.gcv)),
        curve(rows, "AIC", 1, "black", |r| Some(r.aic)),
        curve(rows, "FPE", 2, "black", |r| Some(r.fpe)),
        curve(rows, "AICc", 3, "black", |r| r.aicc),
        curve(rows, "BIC", 4, "black", |r| Some(r.bic)),
        curve(rows, "rho2", 0, GRAY, |r| Some(r.rho2)),
        curve(rows, "gray AIC", 1, GRAY, |r| Some(r.gray_aic)),
        curve(rows, "gray FPE", 2, GRAY, |r| Some(r.gray_fpe)),
        curve(rows, "gray AICc", 3, GRAY, |r| r.gray_aicc),
        curve(rows, "gray BIC", 4, GRAY, |r| Some(r.gray_bic)),
    ];

    let x_max = rows.iter().map(|r| r.order).max().unwrap_or(1).max(1) as f64;
    let all_max = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.1))
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let y_max = (4.0 * result.min_rho2()).min(all_max).max(f64::MIN_POSITIVE);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + x / x_max * pw;
    let sy = |y: f64| TOP + ph - y / y_max * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<defs><clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath></defs>"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);

    for i in 0..=5 {
        let xv = x_max * i as f64 / 5.0;
        let yv = y_max * i as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.0}</text>"#, sx(xv), TOP + ph + 18.0, xv);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#, LEFT - 6.0, sy(yv) + 4.0, yv);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">model order |m|</text>"#, LEFT + pw / 2.0, HEIGHT - 15.0);

    let _ = writeln!(s, r#"<g clip-path="url(#plot)" fill="none" stroke-width="1.3">"#);
    // Gray curves first so the black ones stay on top.
    for c in curves.iter().rev() {
        if c.points.is_empty() {
            continue;
        }
        let pts: Vec<String> = c.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let dash_attr = if c.role == 0 { String::new() } else { format!(r#" stroke-dasharray="{}""#, dash(c.role)) };
        let _ = writeln!(
            s,
            r#"<polyline data-label="{}" stroke="{}"{} points="{}"/>"#,
            c.label,
            c.color,
            dash_attr,
            pts.join(" ")
        );
    }
    let _ = writeln!(s, "</g>");

    for kind in [CriterionKind::Gcv, CriterionKind::Aic, CriterionKind::Fpe, CriterionKind::Aicc, CriterionKind::Bic] {
        let Some(&i) = result.argmins.get(kind.name()) else { continue };
        let Some(v) = rows[i].criterion(kind) else { continue };
        if v > y_max {
            continue;
        }
        let (x, y) = (sx(rows[i].order as f64), sy(v));
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="black"/>"#);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 5.0, y - 5.0, kind.name().to_uppercase());
    }

    let _ = writeln!(s, "</svg>");
    s
}
