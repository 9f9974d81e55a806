//! Minimal SVG line plots with a shaded mean +- sd band per series.

use std::fmt::Write as _;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    /// `(x, mean, sd)`; points with a non-finite mean are skipped.
    pub points: Vec<(f64, f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

pub fn band_plot_svg(title: &str, x_label: &str, reference: Option<f64>, series: &[Series<'_>]) -> String {
    let finite = |p: &&(f64, f64, f64)| p.1.is_finite() && p.2.is_finite();
    let pts: Vec<&(f64, f64, f64)> = series.iter().flat_map(|s| s.points.iter()).filter(finite).collect();

    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, m, sd) in &pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(m - sd);
        y1 = y1.max(m + sd);
    }
    if let Some(r) = reference {
        y0 = y0.min(r);
        y1 = y1.max(r);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {t} L{m} {b} L{r} {b}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    for (v, anchor_y) in [(y0, HEIGHT - MARGIN), (y1, MARGIN)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{anchor_y}" text-anchor="end">{v:.3}</text>"#,
            MARGIN - 4.0
        );
    }
    for (v, anchor_x) in [(x0, MARGIN), (x1, WIDTH - MARGIN)] {
        let _ = writeln!(
            svg,
            r#"<text x="{anchor_x}" y="{}" text-anchor="middle">{v}</text>"#,
            HEIGHT - MARGIN + 16.0
        );
    }
    if let Some(r) = reference {
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="gray" stroke-dasharray="4 3"/>"#,
            MARGIN,
            WIDTH - MARGIN,
            y = sy(r)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<&(f64, f64, f64)> = s.points.iter().filter(finite).collect();
        if pts.is_empty() {
            continue;
        }
        let upper = pts.iter().map(|(x, m, sd)| format!("{:.2},{:.2}", sx(*x), sy(m + sd)));
        let lower = pts
            .iter()
            .rev()
            .map(|(x, m, sd)| format!("{:.2},{:.2}", sx(*x), sy(m - sd)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" "),
            s.color
        );
        let line: Vec<String> = pts
            .iter()
            .map(|(x, m, _)| format!("{:.2},{:.2}", sx(*x), sy(*m)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            line.join(" "),
            s.color
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{}">{}</text>"#,
            WIDTH - MARGIN - 60.0,
            MARGIN + 16.0 * i as f64,
            s.color,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}
