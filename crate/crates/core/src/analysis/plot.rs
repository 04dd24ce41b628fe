//! Figure data as JSON plus a dependency-free SVG rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    Line,
    Bar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    /// Category labels, parallel to `y`.
    pub x: Vec<String>,
    /// Missing values leave a gap in line plots.
    pub y: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub label: String,
    /// The category label the marker sits on.
    pub x: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub kind: PlotKind,
    pub series: Vec<Series>,
    #[serde(default)]
    pub markers: Vec<Marker>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 450.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl PlotData {
    /// Union of category labels across series, in first-seen order.
    pub fn categories(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.series {
            for x in &s.x {
                if !out.contains(x) {
                    out.push(x.clone());
                }
            }
        }
        out
    }

    pub fn render_svg(&self) -> String {
        let cats = self.categories();
        let values = self.series.iter().flat_map(|s| s.y.iter().flatten().copied());
        let y_max = values.fold(0.0f64, f64::max);
        let y_max = if y_max > 0.0 { y_max * 1.1 } else { 1.0 };
        let plot_w = WIDTH - 2.0 * MARGIN;
        let plot_h = HEIGHT - 2.0 * MARGIN;
        let n = cats.len().max(1) as f64;
        let slot = plot_w / n;
        let x_of = |label: &str| cats.iter().position(|c| c == label).map(|i| MARGIN + slot * (i as f64 + 0.5));
        let y_of = |v: f64| HEIGHT - MARGIN - plot_h * v / y_max;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
        let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
        let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
        for k in 0..=4 {
            let v = y_max * k as f64 / 4.0;
            let y = y_of(v);
            let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.3}</text>"#, x0 - 6.0, y + 4.0);
        }
        let stride = (cats.len() / 12).max(1);
        for (i, c) in cats.iter().enumerate().step_by(stride) {
            let x = MARGIN + slot * (i as f64 + 0.5);
            let _ = writeln!(
                svg,
                r#"<text x="{x:.1}" y="{}" text-anchor="end" transform="rotate(-45 {x:.1} {})">{}</text>"#,
                y0 + 14.0,
                y0 + 14.0,
                escape(c)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 6.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );

        let n_series = self.series.len().max(1) as f64;
        for (si, s) in self.series.iter().enumerate() {
            let color = PALETTE[si % PALETTE.len()];
            match self.kind {
                PlotKind::Line => {
                    let mut path = String::new();
                    let mut pen_down = false;
                    for (x, y) in s.x.iter().zip(&s.y) {
                        match (x_of(x), y) {
                            (Some(px), Some(v)) => {
                                let _ = write!(path, "{}{px:.1},{:.1} ", if pen_down { "L" } else { "M" }, y_of(*v));
                                pen_down = true;
                            }
                            _ => pen_down = false,
                        }
                    }
                    let _ = writeln!(svg, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, path.trim_end());
                }
                PlotKind::Bar => {
                    let bar_w = slot * 0.8 / n_series;
                    for (x, y) in s.x.iter().zip(&s.y) {
                        if let (Some(cx), Some(v)) = (x_of(x), y) {
                            let left = cx - slot * 0.4 + bar_w * si as f64;
                            let top = y_of(*v);
                            let _ = writeln!(
                                svg,
                                r#"<rect x="{left:.1}" y="{top:.1}" width="{bar_w:.1}" height="{:.1}" fill="{color}"/>"#,
                                y0 - top
                            );
                        }
                    }
                }
            }
            let ly = MARGIN + 16.0 * si as f64;
            let _ = writeln!(svg, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#, x1 - 140.0, ly - 9.0);
            let _ = writeln!(svg, r#"<text x="{}" y="{ly}">{}</text>"#, x1 - 125.0, escape(&s.name));
        }
        for m in &self.markers {
            if let Some(x) = x_of(&m.x) {
                let _ = writeln!(
                    svg,
                    r#"<line x1="{x:.1}" y1="{y0}" x2="{x:.1}" y2="{y1}" stroke="gray" stroke-dasharray="4 3"/>"#
                );
                let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" fill="gray">{}</text>"#, x + 3.0, y1 + 12.0, escape(&m.label));
            }
        }
        svg.push_str("</svg>\n");
        svg
    }
}
