//! SVG line chart for power curves.

use std::fmt::Write as _;

const COLORS: [&str; 3] = ["#c0392b", "#2e6da4", "#27ae60"];
const DASHES: [&str; 3] = ["none", "6 4", "2 3"];

/// Power against sample size, one polyline per series, y axis fixed to `[0, 1]`.
pub fn power_chart_svg(ns: &[u64], series: &[(&str, &[f64])]) -> String {
    let (w, h) = (560.0, 360.0);
    let (left, right, top, bottom) = (56.0, 16.0, 16.0, 44.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let n_lo = ns.first().copied().unwrap_or(0) as f64;
    let n_hi = ns.last().copied().unwrap_or(1) as f64;
    let span = if n_hi > n_lo { n_hi - n_lo } else { 1.0 };
    let sx = |n: u64| left + (n as f64 - n_lo) / span * pw;
    let sy = |p: f64| top + (1.0 - p.clamp(0.0, 1.0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{w:.0}" height="{h:.0}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{left:.0}" y="{top:.0}" width="{pw:.0}" height="{ph:.0}" fill="none" stroke="black"/>"#
    );
    for tick in 0..=4 {
        let p = tick as f64 / 4.0;
        let y = sy(p);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.0}" y1="{y:.1}" x2="{left:.0}" y2="{y:.1}" stroke="black"/><text x="{:.0}" y="{:.1}" text-anchor="end">{p:.2}</text>"#,
            left - 4.0,
            left - 6.0,
            y + 4.0
        );
    }
    for (i, n) in [n_lo, n_lo + span / 2.0, n_hi].into_iter().enumerate() {
        let x = left + pw * i as f64 / 2.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.1}" y1="{:.0}" x2="{x:.1}" y2="{:.0}" stroke="black"/><text x="{x:.1}" y="{:.0}" text-anchor="middle">{n:.0}</text>"#,
            top + ph,
            top + ph + 4.0,
            top + ph + 18.0
        );
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.0}" text-anchor="middle">sample size</text>"#, left + pw / 2.0, h - 6.0);
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">power</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (k, (name, values)) in series.iter().enumerate() {
        let points: Vec<String> = ns.iter().zip(values.iter()).map(|(&n, &p)| format!("{:.2},{:.2}", sx(n), sy(p))).collect();
        let (color, dash) = (COLORS[k % COLORS.len()], DASHES[k % DASHES.len()]);
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5" stroke-dasharray="{dash}"/>"#,
            points.join(" ")
        );
        let ly = top + ph - 16.0 - 16.0 * (series.len() - 1 - k) as f64;
        let lx = left + pw - 110.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.0}" y1="{ly:.0}" x2="{:.0}" y2="{ly:.0}" stroke="{color}" stroke-width="1.5" stroke-dasharray="{dash}"/><text x="{:.0}" y="{:.0}">{name}</text>"#,
            lx + 28.0,
            lx + 34.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
