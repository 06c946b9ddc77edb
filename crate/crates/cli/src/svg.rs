//! Minimal static SVG charts for probe and sweep results.

use std::fmt::Write as _;

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 220.0;
const LEFT: f64 = 48.0;
const RIGHT: f64 = 12.0;
const TOP: f64 = 28.0;
const BOTTOM: f64 = 36.0;

fn header(out: &mut String, w: f64, h: f64, hash: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(out, "<!-- config_hash: {hash} -->").unwrap();
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
}

/// Data range padded by 10% on each side.
fn y_range(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let span = (hi - lo).max(1e-9);
    (lo - 0.1 * span, hi + 0.1 * span)
}

/// Axes, ticks and title of one panel whose plot area starts at `(x0, y0)`.
fn axes(out: &mut String, x0: f64, y0: f64, title: &str, lo: f64, hi: f64) {
    let (w, h) = (PANEL_W - LEFT - RIGHT, PANEL_H - TOP - BOTTOM);
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{title}</text>"#,
        x0 + w / 2.0,
        y0 - 10.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{}" stroke="black"/>"#,
        y0 + h
    )
    .unwrap();
    writeln!(
        out,
        r#"<line x1="{x0}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        y0 + h,
        x0 + w,
        y0 + h
    )
    .unwrap();
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let y = y0 + h - h * t as f64 / 4.0;
        writeln!(
            out,
            r#"<line x1="{}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/>"#,
            x0 - 4.0
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{v:.3}</text>"#,
            x0 - 6.0,
            y + 4.0
        )
        .unwrap();
    }
}

/// One bar per label.
pub fn bar_chart(title: &str, labels: &[&str], values: &[f64], hash: &str) -> String {
    let mut out = String::new();
    header(&mut out, PANEL_W, PANEL_H, hash);
    let (lo, hi) = y_range(values);
    let lo = lo.min(0.0);
    axes(&mut out, LEFT, TOP, title, lo, hi);
    let (w, h) = (PANEL_W - LEFT - RIGHT, PANEL_H - TOP - BOTTOM);
    let slot = w / labels.len().max(1) as f64;
    for (i, (label, v)) in labels.iter().zip(values).enumerate() {
        let top = TOP + h - h * (v - lo) / (hi - lo);
        let x = LEFT + slot * i as f64 + slot * 0.15;
        writeln!(
            out,
            r##"<rect x="{x}" y="{top}" width="{}" height="{}" fill="#4878a8"/>"##,
            slot * 0.7,
            TOP + h - top
        )
        .unwrap();
        let cx = LEFT + slot * (i as f64 + 0.5);
        writeln!(
            out,
            r#"<text x="{cx}" y="{}" text-anchor="middle">{label}</text>"#,
            TOP + h + 16.0
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{cx}" y="{}" text-anchor="middle">{v:.3}</text>"#,
            top - 3.0
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Panels side by side, each plotting one series against categorical x
/// positions labeled by `x`.
pub fn line_panels(x: &[f64], x_name: &str, panels: &[(&str, Vec<f64>)], hash: &str) -> String {
    let mut out = String::new();
    header(&mut out, PANEL_W * panels.len() as f64, PANEL_H, hash);
    let (w, h) = (PANEL_W - LEFT - RIGHT, PANEL_H - TOP - BOTTOM);
    let step = if x.len() > 1 {
        w / (x.len() - 1) as f64
    } else {
        0.0
    };
    for (p, (title, ys)) in panels.iter().enumerate() {
        let x0 = PANEL_W * p as f64 + LEFT;
        let (lo, hi) = y_range(ys);
        axes(&mut out, x0, TOP, title, lo, hi);
        let pts: Vec<(f64, f64)> = ys
            .iter()
            .enumerate()
            .map(|(i, v)| (x0 + step * i as f64, TOP + h - h * (v - lo) / (hi - lo)))
            .collect();
        let path: Vec<String> = pts.iter().map(|(a, b)| format!("{a:.1},{b:.1}")).collect();
        writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#4878a8" stroke-width="2"/>"##,
            path.join(" ")
        )
        .unwrap();
        for ((px, py), xv) in pts.iter().zip(x) {
            writeln!(
                out,
                r##"<circle cx="{px:.1}" cy="{py:.1}" r="3" fill="#4878a8"/>"##
            )
            .unwrap();
            writeln!(
                out,
                r#"<text x="{px:.1}" y="{}" text-anchor="middle">{xv}</text>"#,
                TOP + h + 14.0
            )
            .unwrap();
        }
        writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{x_name}</text>"#,
            x0 + w / 2.0,
            PANEL_H - 6.0
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}
