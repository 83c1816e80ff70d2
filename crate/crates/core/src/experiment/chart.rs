//! Grouped bar chart of F2 scores as a static SVG.

use std::fmt::Write;

use crate::{Error, Result};

const PLOT_HEIGHT: f64 = 300.0;
const BAR_WIDTH: f64 = 18.0;
const BAR_GAP: f64 = 4.0;
const GROUP_GAP: f64 = 36.0;
const LEFT: f64 = 64.0;
const TOP: f64 = 48.0;
const LEGEND_WIDTH: f64 = 210.0;

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1", "#76b7b2", "#edc948", "#9c755f",
];

/// One cluster of bars (a data proportion).
#[derive(Debug, Clone, PartialEq)]
pub struct ChartGroup {
    pub label: String,
    /// `(model name, value in [0, 1])`
    pub bars: Vec<(String, f64)>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Render the chart. Bar height is `value * 300` px on a 0–100% axis; each
/// bar carries its exact value in `data-value`.
pub fn emit_f2_chart(groups: &[ChartGroup], header: &[String]) -> Result<String> {
    if groups.is_empty() || groups.iter().all(|g| g.bars.is_empty()) {
        return Err(Error::InsufficientData(
            "F2 chart needs at least one bar".into(),
        ));
    }
    let mut models: Vec<&str> = Vec::new();
    for g in groups {
        for (m, _) in &g.bars {
            if !models.contains(&m.as_str()) {
                models.push(m);
            }
        }
    }
    let group_width = |g: &ChartGroup| g.bars.len() as f64 * (BAR_WIDTH + BAR_GAP) - BAR_GAP;
    let plot_width: f64 = groups
        .iter()
        .map(|g| group_width(g) + GROUP_GAP)
        .sum::<f64>()
        + GROUP_GAP;
    let width = LEFT + plot_width + LEGEND_WIDTH;
    let height = TOP + PLOT_HEIGHT + 60.0;
    let base = TOP + PLOT_HEIGHT;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    for line in header {
        let _ = writeln!(s, "<!-- {} -->", line.replace("--", "- -"));
    }
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" font-size="15" text-anchor="middle">F2 score of class F1: single ANN-BP vs ensemble learning</text>"#,
        LEFT + plot_width / 2.0
    );
    for tick in (0..=100).step_by(20) {
        let y = base - PLOT_HEIGHT * tick as f64 / 100.0;
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{tick}%</text>"##,
            LEFT + plot_width,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{base}" stroke="black"/><line x1="{LEFT}" y1="{base}" x2="{:.1}" y2="{base}" stroke="black"/>"##,
        LEFT + plot_width
    );

    let mut x = LEFT + GROUP_GAP;
    for g in groups {
        let gw = group_width(g);
        let _ = writeln!(s, r#"<g class="group" data-group="{}">"#, escape(&g.label));
        for (model, value) in &g.bars {
            let v = value.clamp(0.0, 1.0);
            let h = v * PLOT_HEIGHT;
            let color =
                PALETTE[models.iter().position(|m| m == model).unwrap_or(0) % PALETTE.len()];
            let _ = writeln!(
                s,
                r#"<rect class="bar" data-group="{}" data-model="{}" data-value="{}" x="{x:.1}" y="{:.4}" width="{BAR_WIDTH}" height="{h:.4}" fill="{color}"><title>{}: {:.2}%</title></rect>"#,
                escape(&g.label),
                escape(model),
                value,
                base - h,
                escape(model),
                value * 100.0
            );
            x += BAR_WIDTH + BAR_GAP;
        }
        x -= BAR_GAP;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text></g>"#,
            x - gw / 2.0,
            base + 18.0,
            escape(&g.label)
        );
        x += GROUP_GAP;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Data proportion</text>"#,
        LEFT + plot_width / 2.0,
        base + 40.0
    );

    let lx = LEFT + plot_width + 16.0;
    for (i, m) in models.iter().enumerate() {
        let ly = TOP + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect class="legend" x="{lx:.1}" y="{ly:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            PALETTE[i % PALETTE.len()],
            lx + 18.0,
            ly + 10.0,
            escape(m)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
