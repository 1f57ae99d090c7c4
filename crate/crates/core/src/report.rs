//! CSV tables and SVG plots of solver results.
//!
//! Numbers are written with 9 significant digits in `%g` style, independent
//! of locale, so identical inputs give byte-identical files.

use std::fmt::Write as _;

use crate::channel::ErrorBounds;
use crate::power::PowerPoint;
use crate::region::RegionResult;

/// Formats `x` with 9 significant digits, switching to exponent notation
/// outside `[1e-5, 1e9)`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let s = format!("{:.*}", (8 - exp) as usize, x);
        trim_zeros(&s).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mant))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Header comment echoing the six error bounds.
pub fn eps_comment(eps: &ErrorBounds) -> String {
    format!(
        "# eps11={} eps12={} eps21={} eps22={} eps1={} eps2={}\n",
        fmt_num(eps.eps11),
        fmt_num(eps.eps12),
        fmt_num(eps.eps21),
        fmt_num(eps.eps22),
        fmt_num(eps.eps1),
        fmt_num(eps.eps2)
    )
}

/// One row per grid cell: `k,l,r1,r2,rE,sum,status`.
pub fn region_csv(r: &RegionResult) -> String {
    let mut out = String::from("k,l,r1,r2,rE,sum,status\n");
    for c in &r.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.k,
            c.l,
            fmt_num(c.r1_target),
            fmt_num(c.r2_target),
            fmt_num(c.re),
            fmt_num(c.sum),
            c.status.label()
        );
    }
    out
}

/// Robust variant: the perfect-CSI columns (targets and leakage level)
/// followed by the certified bounds, after a comment line with the bounds.
pub fn robust_region_csv(r: &RegionResult, eps: &ErrorBounds) -> String {
    let mut out = eps_comment(eps);
    out.push_str("k,l,r1,r2,rE,sum,status,r1_lower,r2_lower,rE_upper\n");
    for c in &r.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c.k,
            c.l,
            fmt_num(c.r1_target),
            fmt_num(c.r2_target),
            fmt_num(c.re),
            fmt_num(c.sum),
            c.status.label(),
            fmt_num(c.r1),
            fmt_num(c.r2),
            fmt_num(c.re)
        );
    }
    out
}

/// Staircase vertices, one `r1,r2` row each.
pub fn polygon_csv(poly: &[(f64, f64)]) -> String {
    let mut out = String::from("r1,r2\n");
    for (x, y) in poly {
        let _ = writeln!(out, "{},{}", fmt_num(*x), fmt_num(*y));
    }
    out
}

/// Parses a file written by [`polygon_csv`].
pub fn parse_polygon_csv(text: &str) -> Option<Vec<(f64, f64)>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (a, b) = l.split_once(',')?;
            Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
        })
        .collect()
}

pub fn power_csv(points: &[PowerPoint]) -> String {
    let mut out = String::from("gammaS1,gammaS2,gammaE,totalPower,status\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_num(p.spec.gamma_s1),
            fmt_num(p.spec.gamma_s2),
            fmt_num(p.spec.gamma_e),
            fmt_num(p.total_power),
            p.status.label()
        );
    }
    out
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Static SVG 1.1 plot overlaying one staircase polyline per labelled
/// series. Vertices are written in data units, formatted exactly as in
/// [`polygon_csv`]; a group transform maps them onto the canvas.
pub fn region_svg(series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, margin) = (640.0, 480.0, 60.0);
    let extent = |f: fn(&(f64, f64)) -> f64| {
        series
            .iter()
            .flat_map(|(_, p)| p.iter().map(f))
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max)
    };
    let xmax = nice_max(extent(|p| p.0));
    let ymax = nice_max(extent(|p| p.1));
    let (pw, ph) = (w - 2.0 * margin, h - 2.0 * margin);
    let (sx, sy) = (pw / xmax, ph / ymax);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    // Axes and ticks.
    let (x0, y0) = (margin, h - margin);
    let _ = writeln!(
        s,
        r#"<path d="M{x0},{} V{y0} H{}" fill="none" stroke="black" stroke-width="1"/>"#,
        margin,
        w - margin
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (tx, ty) = (x0 + f * pw, y0 - f * ph);
        let _ = writeln!(
            s,
            r#"<text x="{tx}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
            y0 + 16.0,
            fmt_num(f * xmax)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            ty + 4.0,
            fmt_num(f * ymax)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">R1 (bits/channel use)</text>"#,
        x0 + pw / 2.0,
        h - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">R2 (bits/channel use)</text>"#,
        margin + ph / 2.0,
        margin + ph / 2.0
    );
    let _ = writeln!(
        s,
        r#"<g transform="translate({x0},{y0}) scale({sx},{})">"#,
        -sy
    );
    for (i, (label, poly)) in series.iter().enumerate() {
        let pts: Vec<String> = poly
            .iter()
            .map(|(x, y)| format!("{},{}", fmt_num(*x), fmt_num(*y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline data-label="{}" points="{}" fill="none" stroke="{}" stroke-width="1.5" vector-effect="non-scaling-stroke"/>"#,
            escape(label),
            pts.join(" "),
            PALETTE[i % PALETTE.len()]
        );
    }
    let _ = writeln!(s, "</g>");
    for (i, (label, _)) in series.iter().enumerate() {
        let ly = margin + 16.0 * i as f64;
        let lx = w - margin - 110.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/>"#,
            lx + 20.0,
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Smallest value of the form {1, 2, 2.5, 5}·10^n at or above `v`.
fn nice_max(v: f64) -> f64 {
    if !(v > 0.0) {
        return 1.0;
    }
    let p = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * p)
        .find(|c| *c >= v)
        .unwrap_or(10.0 * p)
}

/// Polyline vertex lists of an SVG written by [`region_svg`], as the raw
/// coordinate strings.
pub fn svg_polylines(svg: &str) -> Vec<Vec<(String, String)>> {
    svg.lines()
        .filter(|l| l.trim_start().starts_with("<polyline"))
        .filter_map(|l| {
            let start = l.find("points=\"")? + 8;
            let end = start + l[start..].find('"')?;
            Some(
                l[start..end]
                    .split_whitespace()
                    .filter_map(|p| {
                        let (a, b) = p.split_once(',')?;
                        Some((a.to_string(), b.to_string()))
                    })
                    .collect(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(1.539831843153863), "1.53983184");
        assert_eq!(fmt_num(0.04484850066662323), "0.0448485007");
        assert_eq!(fmt_num(2.0), "2");
        assert_eq!(fmt_num(-0.5), "-0.5");
        assert_eq!(fmt_num(1e-7), "1e-7");
        assert_eq!(fmt_num(1.23456789012e10), "1.23456789e10");
        assert_eq!(fmt_num(9.9999999999), "10");
        assert_eq!(fmt_num(f64::NAN), "nan");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        for x in [0.1234567891234, 3.3e-12, 123456.7891] {
            let back: f64 = fmt_num(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-8);
        }
    }

    #[test]
    fn svg_vertices_match_csv() {
        let poly = vec![(0.0, 0.8), (0.3333333333, 0.8), (1.2, 0.1), (1.2, 0.0)];
        let svg = region_svg(&[("eps = 0".into(), poly.clone())]);
        let lines = svg_polylines(&svg);
        assert_eq!(lines.len(), 1);
        let csv = polygon_csv(&poly);
        let rows: Vec<(String, String)> = csv
            .lines()
            .skip(1)
            .map(|l| {
                let (a, b) = l.split_once(',').unwrap();
                (a.to_string(), b.to_string())
            })
            .collect();
        assert_eq!(lines[0], rows);
        assert_eq!(parse_polygon_csv(&csv).unwrap()[1].0, 0.333333333);
    }

    #[test]
    fn nice_axis_bounds() {
        assert_eq!(nice_max(1.54), 2.0);
        assert_eq!(nice_max(0.83), 1.0);
        assert_eq!(nice_max(0.21), 0.25);
        assert_eq!(nice_max(0.0), 1.0);
    }
}
