//! Deterministic, self-contained SVG charts.

use std::fmt::Write;

use crate::analysis::ForceData;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;

/// Anchor colors of the viridis map, evenly spaced.
const VIRIDIS: [[u8; 3]; 9] = [
    [0x44, 0x01, 0x54],
    [0x47, 0x2c, 0x7a],
    [0x3b, 0x51, 0x8b],
    [0x2c, 0x71, 0x8e],
    [0x21, 0x90, 0x8d],
    [0x27, 0xad, 0x81],
    [0x5c, 0xc8, 0x63],
    [0xaa, 0xdc, 0x32],
    [0xfd, 0xe7, 0x25],
];

/// Color `k` of a 256-step ramp interpolated through the viridis anchors.
pub fn ramp(k: u8) -> String {
    let t = k as f64 / 255.0 * (VIRIDIS.len() - 1) as f64;
    let lo = (t.floor() as usize).min(VIRIDIS.len() - 2);
    let f = t - lo as f64;
    let c: Vec<u8> = (0..3)
        .map(|i| {
            let a = VIRIDIS[lo][i] as f64;
            let b = VIRIDIS[lo + 1][i] as f64;
            (a + (b - a) * f).round() as u8
        })
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Maps each value onto the ramp using the min/max of `values`.
pub fn ramp_colors(values: &[f64]) -> Vec<String> {
    let (lo, hi) = extent(values.iter().copied());
    values
        .iter()
        .map(|&v| {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            ramp((t.clamp(0.0, 1.0) * 255.0).round() as u8)
        })
        .collect()
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()).max(1.0) {
        let d = (lo.abs() * 0.1).max(0.5);
        return (lo - d, hi + d);
    }
    let d = (hi - lo) * 0.05;
    (lo - d, hi + d)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn tick(v: f64) -> String {
    let s = if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    };
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn sx(&self, v: f64) -> f64 {
        MARGIN + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn sy(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open(svg: &mut String, title: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(svg: &mut String, f: &Frame, x_label: &str, y_label: &str, y_ticks: bool) {
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{l} {t} V{b} H{r}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for k in 0..=4 {
        let v = f.x.0 + (f.x.1 - f.x.0) * k as f64 / 4.0;
        let x = num(f.sx(v));
        let _ = writeln!(
            svg,
            r#"<line x1="{x}" y1="{b}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
            b + 5.0,
            b + 18.0,
            tick(v)
        );
        if y_ticks {
            let v = f.y.0 + (f.y.1 - f.y.0) * k as f64 / 4.0;
            let y = num(f.sy(v));
            let _ = writeln!(
                svg,
                r#"<line x1="{}" y1="{y}" x2="{l}" y2="{y}" stroke="black"/><text x="{}" y="{y}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
                l - 5.0,
                l - 7.0,
                tick(v)
            );
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    if !y_label.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
            escape(y_label),
            y = HEIGHT / 2.0
        );
    }
}

/// Scatter of `(x, y)` points colored by `color` on the ramp.
pub fn scatter_svg(points: &[(f64, f64)], color: &[f64], title: &str, x_label: &str, y_label: &str) -> String {
    let (x0, x1) = extent(points.iter().map(|p| p.0));
    let (y0, y1) = extent(points.iter().map(|p| p.1));
    let f = Frame {
        x: padded(x0, x1),
        y: padded(y0, y1),
    };
    let colors = ramp_colors(color);
    let mut svg = String::new();
    open(&mut svg, title);
    axes(&mut svg, &f, x_label, y_label, true);
    for (k, &(x, y)) in points.iter().enumerate() {
        if !(x.is_finite() && y.is_finite()) {
            continue;
        }
        let fill = colors.get(k).map(String::as_str).unwrap_or("#444444");
        let _ = writeln!(
            svg,
            r#"<circle cx="{}" cy="{}" r="3" fill="{fill}" fill-opacity="0.85"/>"#,
            num(f.sx(x)),
            num(f.sy(y))
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Stacked horizontal bar from the base to the residual, one segment per
/// training instance in `ForceData` order.
pub fn force_svg(force: &ForceData) -> String {
    let mut lo = force.base.min(force.final_value);
    let mut hi = force.base.max(force.final_value);
    for s in &force.segments {
        lo = lo.min(s.cumulative).min(s.cumulative - s.value);
        hi = hi.max(s.cumulative).max(s.cumulative - s.value);
    }
    let f = Frame {
        x: padded(lo, hi),
        y: (0.0, 1.0),
    };
    let colors = ramp_colors(&force.segments.iter().map(|s| s.color_key).collect::<Vec<_>>());
    let mut svg = String::new();
    open(&mut svg, &format!("residual of {}", force.test_id));
    axes(&mut svg, &f, "residual", "", false);
    let (top, h) = (f.sy(0.65), f.sy(0.35) - f.sy(0.65));
    for (s, fill) in force.segments.iter().zip(&colors) {
        let a = f.sx(s.cumulative - s.value);
        let b = f.sx(s.cumulative);
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}" stroke="white" stroke-width="0.5"><title>{}: {}</title></rect>"#,
            num(a.min(b)),
            num(top),
            num((b - a).abs()),
            num(h),
            escape(&s.train_id),
            s.value
        );
    }
    for (v, label) in [(force.base, "base"), (force.final_value, "residual")] {
        let x = num(f.sx(v));
        let _ = writeln!(
            svg,
            r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black" stroke-dasharray="4 2"/><text x="{x}" y="{}" text-anchor="middle">{label} {}</text>"#,
            num(top - 12.0),
            num(top + h + 12.0),
            num(top - 16.0),
            tick(v)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// One polyline per named series.
pub fn line_svg(series: &[(String, Vec<(f64, f64)>)], title: &str, x_label: &str, y_label: &str) -> String {
    let (x0, x1) = extent(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let (y0, y1) = extent(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let f = Frame {
        x: padded(x0, x1),
        y: padded(y0, y1),
    };
    let keys: Vec<f64> = (0..series.len()).map(|k| k as f64).collect();
    let colors = ramp_colors(&keys);
    let mut svg = String::new();
    open(&mut svg, title);
    axes(&mut svg, &f, x_label, y_label, true);
    for (k, ((name, pts), stroke)) in series.iter().zip(&colors).enumerate() {
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{},{}", num(f.sx(x)), num(f.sy(y)))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="2"/>"#,
            path.join(" ")
        );
        let ly = MARGIN + 16.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{stroke}" stroke-width="2"/><text x="{}" y="{ly}" dominant-baseline="middle">{}</text>"#,
            WIDTH - MARGIN - 120.0,
            WIDTH - MARGIN - 100.0,
            WIDTH - MARGIN - 95.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
