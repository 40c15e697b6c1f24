//! CSV and SVG writers.

use std::fmt::Write;

use crate::model::{DeltaSystem, Window};
use crate::polygon::{rational_to_f64, NewtonPolygon};
use crate::solver::{PlanarCurveSet, Resonance, SolveOutput};
use crate::theory::{curve_samples, PredictedPoint, ResonanceString};

pub const THEORY_SAMPLES: usize = 512;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn predictions_csv(strings: &[ResonanceString], points: &[PredictedPoint]) -> String {
    let mut out = String::from("string_id,kind,gamma,m,re,im\n");
    for p in points {
        let s = &strings[p.string_id];
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.string_id,
            s.kind,
            s.gamma_exact,
            p.m,
            format_float(p.z.re),
            format_float(p.z.im)
        )
        .unwrap();
    }
    out
}

pub fn curves_csv(strings: &[ResonanceString], system: &DeltaSystem, window: &Window, samples: usize) -> crate::Result<String> {
    let mut out = String::from("string_id,re,im\n");
    for s in strings {
        for (re, im) in curve_samples(s, system, window, samples)? {
            writeln!(out, "{},{},{}", s.id, format_float(re), format_float(im)).unwrap();
        }
    }
    Ok(out)
}

pub fn resonances_csv(roots: &[Resonance]) -> String {
    let mut out = String::from("re,im,residual,string_id,deviation,m_estimate\n");
    for r in roots {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            format_float(r.z.re),
            format_float(r.z.im),
            format_float(r.residual),
            opt(r.matched_string),
            opt(r.deviation.map(format_float)),
            opt(r.m_estimate)
        )
        .unwrap();
    }
    out
}

const W: f64 = 800.0;
const H: f64 = 500.0;
const MARGIN: f64 = 60.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * W
    }

    fn py(&self, y: f64) -> f64 {
        MARGIN + (self.y1 - y) / (self.y1 - self.y0) * H
    }

    fn points(&self, pts: &[(f64, f64)]) -> String {
        let mut s = String::with_capacity(pts.len() * 16);
        for (i, p) in pts.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            write!(s, "{:.2},{:.2}", self.px(p.0), self.py(p.1)).unwrap();
        }
        s
    }
}

fn header(out: &mut String, title: &str) {
    writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">
<title>{title}</title>
<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#,
        w = W + 2.0 * MARGIN,
        h = H + 2.0 * MARGIN,
    )
    .unwrap();
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    writeln!(
        out,
        r#"<g id="axes" stroke="black" fill="none">
<rect x="{MARGIN}" y="{MARGIN}" width="{W}" height="{H}"/>
</g>
<g id="ticks" fill="black">"#
    )
    .unwrap();
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let x = f.x0 + t * (f.x1 - f.x0);
        let y = f.y0 + t * (f.y1 - f.y0);
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.4}</text>"#,
            f.px(x),
            MARGIN + H + 18.0,
            x
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.4}</text>"#,
            MARGIN - 6.0,
            f.py(y) + 4.0,
            y
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>
<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{ylabel}</text>
</g>"#,
        MARGIN + W / 2.0,
        MARGIN + H + 40.0,
        MARGIN + H / 2.0,
        MARGIN + H / 2.0
    )
    .unwrap();
}

fn contour_group(out: &mut String, f: &Frame, curves: &PlanarCurveSet, class: &str, color: &str) {
    writeln!(out, r#"<g class="{class}" stroke="{color}" stroke-width="1" fill="none">"#).unwrap();
    for line in &curves.polylines {
        writeln!(out, r#"<polyline points="{}"/>"#, f.points(line)).unwrap();
    }
    writeln!(out, "</g>").unwrap();
}

/// Zero contours of both parts, polished roots and theory curves over the
/// search window.
pub fn plot_svg(
    system: &DeltaSystem,
    strings: &[ResonanceString],
    window: &Window,
    solved: Option<&SolveOutput>,
) -> crate::Result<String> {
    let f = Frame {
        x0: window.re_min,
        x1: window.re_max,
        y0: window.im_min,
        y1: window.im_max,
    };
    let mut out = String::new();
    header(&mut out, &format!("resonances, h = {}", system.h));
    writeln!(
        out,
        r#"<defs><clipPath id="plot-area"><rect x="{MARGIN}" y="{MARGIN}" width="{W}" height="{H}"/></clipPath></defs>"#
    )
    .unwrap();
    axes(&mut out, &f, "Re z", "Im z");

    writeln!(out, r#"<g id="contours" clip-path="url(#plot-area)">"#).unwrap();
    if let Some(s) = solved {
        contour_group(&mut out, &f, &s.real_contours, "real-part", "#d62728");
        contour_group(&mut out, &f, &s.imag_contours, "imag-part", "#ff9896");
    }
    writeln!(out, "</g>").unwrap();

    writeln!(out, r##"<g id="theory" clip-path="url(#plot-area)" stroke="#1f77b4" stroke-width="1.5" fill="none">"##).unwrap();
    for s in strings {
        let pts = curve_samples(s, system, window, THEORY_SAMPLES)?;
        writeln!(
            out,
            r#"<polyline data-string="{}" data-label="{}" points="{}"/>"#,
            s.id,
            s.label(),
            f.points(&pts)
        )
        .unwrap();
    }
    writeln!(out, "</g>").unwrap();

    writeln!(out, r##"<g id="roots" fill="#2ca02c" stroke="black" stroke-width="0.5">"##).unwrap();
    if let Some(s) = solved {
        for r in &s.resonances {
            writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#,
                f.px(r.z.re),
                f.py(r.z.im)
            )
            .unwrap();
        }
    }
    writeln!(out, "</g>\n</svg>").unwrap();
    Ok(out)
}

/// Pair points, lower hull and slope labels in the `(λ, ν)` plane.
pub fn polygon_svg(polygon: &NewtonPolygon) -> String {
    let xs: Vec<f64> = polygon.points.iter().map(|p| rational_to_f64(&p.lambda)).collect();
    let ys: Vec<f64> = polygon.points.iter().map(|p| rational_to_f64(&p.nu)).collect();
    let xmax = xs.iter().copied().fold(0.0, f64::max);
    let ymax = ys.iter().copied().fold(0.0, f64::max);
    let f = Frame {
        x0: 0.0,
        x1: if xmax > 0.0 { xmax * 1.05 } else { 1.0 },
        y0: 0.0,
        y1: if ymax > 0.0 { ymax * 1.1 } else { 1.0 },
    };
    let mut out = String::new();
    header(&mut out, "Newton polygon");
    axes(&mut out, &f, "2(x_k - x_j)", "β_j + β_k");
    let hull: Vec<(f64, f64)> = polygon
        .hull
        .iter()
        .map(|p| (rational_to_f64(&p.lambda), rational_to_f64(&p.nu)))
        .collect();
    writeln!(
        out,
        r#"<g id="hull" stroke="black" stroke-width="1.5" fill="none"><polyline points="{}"/></g>"#,
        f.points(&hull)
    )
    .unwrap();
    writeln!(out, r#"<g id="points" fill="black">"#).unwrap();
    for (p, (x, y)) in polygon.points.iter().zip(xs.iter().zip(&ys)) {
        writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#, f.px(*x), f.py(*y)).unwrap();
        if let Some(pair) = p.pair {
            writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                f.px(*x) + 5.0,
                f.py(*y) - 5.0,
                pair
            )
            .unwrap();
        }
    }
    writeln!(out, "</g>").unwrap();
    writeln!(out, r##"<g id="slopes" fill="#1f77b4">"##).unwrap();
    for s in &polygon.slopes {
        let (a, b) = (&hull[s.segment.0], &hull[s.segment.1]);
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            f.px(0.5 * (a.0 + b.0)) + 6.0,
            f.py(0.5 * (a.1 + b.1)) + 14.0,
            s.gamma
        )
        .unwrap();
    }
    writeln!(out, "</g>\n</svg>").unwrap();
    out
}
