//! Minimal static SVG scatter plots.

use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    /// Colour coordinate in `[0, 1]`; `None` draws the point gray.
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Scatter {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Drawn first, in gray, under `points`.
    pub background: Vec<(f64, f64)>,
    pub points: Vec<Point>,
    /// Connect consecutive points with a line.
    pub lines: bool,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

/// Blue to red through purple.
fn colour(c: f64) -> String {
    let c = c.clamp(0.0, 1.0);
    let r = (40.0 + 200.0 * c).round() as u8;
    let b = (240.0 - 200.0 * c).round() as u8;
    format!("rgb({r},40,{b})")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.03 * (hi - lo);
    (lo - pad, hi + pad)
}

impl Scatter {
    pub fn render(&self) -> String {
        let all = || self.background.iter().copied().chain(self.points.iter().map(|p| (p.x, p.y)));
        let (x0, x1) = range(all().map(|p| p.0));
        let (y0, y1) = range(all().map(|p| p.1));
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            WIDTH - 2.0 * MARGIN,
            HEIGHT - 2.0 * MARGIN
        );
        let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 15.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for (v, anchor_x, anchor_y, is_x) in [(x0, MARGIN, HEIGHT - MARGIN + 15.0, true), (x1, WIDTH - MARGIN, HEIGHT - MARGIN + 15.0, true), (y0, MARGIN - 5.0, HEIGHT - MARGIN, false), (y1, MARGIN - 5.0, MARGIN + 4.0, false)] {
            let anchor = if is_x { "middle" } else { "end" };
            let _ = writeln!(s, r#"<text x="{anchor_x:.1}" y="{anchor_y:.1}" text-anchor="{anchor}">{v:.3}</text>"#);
        }
        let _ = writeln!(s, r#"<g fill="rgb(190,190,190)">"#);
        for &(x, y) in &self.background {
            if x.is_finite() && y.is_finite() {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.2"/>"#, sx(x), sy(y));
            }
        }
        let _ = writeln!(s, "</g>");
        if self.lines && self.points.len() > 1 {
            let path: Vec<String> = self.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="rgb(120,120,120)"/>"#, path.join(" "));
        }
        for p in &self.points {
            if p.x.is_finite() && p.y.is_finite() {
                let fill = p.c.map_or_else(|| "rgb(120,120,120)".to_string(), colour);
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="{fill}"/>"#, sx(p.x), sy(p.y));
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
