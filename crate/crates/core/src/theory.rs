//! Predicted resonance strings: discrete points `z_m` and the continuous
//! curves `Im z(Re z)` they follow.

use std::f64::consts::PI;

use num::complex::Complex64;
use serde::Serialize;

use crate::error::{ResonanceError, Result};
use crate::model::{ComplexPoint, DeltaSystem, Window};
use crate::polygon::{build_polygon, NewtonPolygon, Pair, StringKind};

/// Shape parameters of a string's curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CurveParams {
    Dominant {
        length: f64,
        beta_sum: f64,
        coupling_product: f64,
    },
    /// `beta_diff = β_outer - β_inner`.
    Flat {
        length: f64,
        beta_diff: f64,
        c_inner: f64,
        c_outer: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceString {
    pub id: usize,
    pub gamma: f64,
    /// Exact slope as a reduced fraction.
    pub gamma_exact: String,
    pub kind: StringKind,
    pub pair: Pair,
    pub inner: usize,
    pub outer: usize,
    /// `π h / |x_outer - x_inner|`.
    pub spacing: f64,
    pub params: CurveParams,
}

impl ResonanceString {
    pub fn length(&self) -> f64 {
        match self.params {
            CurveParams::Dominant { length, .. } | CurveParams::Flat { length, .. } => length,
        }
    }

    pub fn label(&self) -> String {
        let symbol = match self.kind {
            StringKind::Dominant => "γ",
            StringKind::Flat => "γ̃",
        };
        format!("{symbol}_{}{}", self.pair.j, self.pair.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictedPoint {
    pub string_id: usize,
    pub m: i64,
    pub z: ComplexPoint,
}

fn check_h(system: &DeltaSystem) -> Result<()> {
    if !(system.h > 0.0 && system.h < 1.0) {
        return Err(ResonanceError::Config(format!(
            "string asymptotics need 0 < h < 1, got h = {}",
            system.h
        )));
    }
    Ok(())
}

/// One string per polygon slope, without requiring genericity.
pub fn strings_from_polygon(system: &DeltaSystem, polygon: &NewtonPolygon) -> Result<Vec<ResonanceString>> {
    check_h(system)?;
    let h = system.h;
    let mut out = Vec::with_capacity(polygon.slopes.len());
    for (id, slope) in polygon.slopes.iter().enumerate() {
        let a = &system.deltas[slope.inner - 1];
        let b = &system.deltas[slope.outer - 1];
        let length = (b.x - a.x).abs();
        let params = match slope.kind {
            StringKind::Dominant => CurveParams::Dominant {
                length,
                beta_sum: a.beta + b.beta,
                coupling_product: a.c * b.c,
            },
            StringKind::Flat => CurveParams::Flat {
                length,
                beta_diff: b.beta - a.beta,
                c_inner: a.c,
                c_outer: b.c,
            },
        };
        out.push(ResonanceString {
            id,
            gamma: slope.gamma_f64(),
            gamma_exact: slope.gamma.to_string(),
            kind: slope.kind,
            pair: slope.pair,
            inner: slope.inner,
            outer: slope.outer,
            spacing: PI * h / length,
            params,
        });
    }
    Ok(out)
}

/// One string per slope of Γ; the dominant string comes first.
pub fn strings_for(system: &DeltaSystem) -> Result<Vec<ResonanceString>> {
    let polygon = build_polygon(system)?;
    if !polygon.genericity.generic {
        return Err(ResonanceError::NonGeneric(polygon.genericity.summary()));
    }
    strings_from_polygon(system, &polygon)
}

fn log_inv_h(h: f64) -> f64 {
    -h.ln()
}

/// Predicted `z_m` for a given integer `m` (principal logarithm, `o(h)`
/// dropped).
pub fn predicted_z(string: &ResonanceString, system: &DeltaSystem, m: i64) -> ComplexPoint {
    let h = system.h;
    let l = string.length();
    let re0 = PI * h * m as f64 / l;
    let i = Complex64::i();
    let log_arg = match string.params {
        CurveParams::Dominant {
            coupling_product, ..
        } => Complex64::new(-coupling_product / (4.0 * re0 * re0), 0.0),
        CurveParams::Flat { c_inner, c_outer, .. } => Complex64::new(-c_outer / c_inner, 0.0),
    };
    Complex64::new(re0, -string.gamma * h * log_inv_h(h)) + i * (h / (2.0 * l)) * log_arg.ln()
}

/// All predicted points of a string whose real part lies in the window.
pub fn predict_points(string: &ResonanceString, system: &DeltaSystem, window: &Window) -> Result<Vec<PredictedPoint>> {
    check_h(system)?;
    window.check()?;
    let scale = string.length() / (PI * system.h);
    // the log term shifts Re z by at most h/(2l)·π, i.e. half a spacing
    let lo = (window.re_min * scale).floor() as i64 - 1;
    let hi = (window.re_max * scale).ceil() as i64 + 1;
    Ok((lo.max(1)..=hi)
        .map(|m| PredictedPoint {
            string_id: string.id,
            m,
            z: predicted_z(string, system, m),
        })
        .filter(|p| p.z.re >= window.re_min && p.z.re <= window.re_max)
        .collect())
}

/// `Im z` of the string at a given `Re z`.
pub fn theory_curve(string: &ResonanceString, system: &DeltaSystem, re: f64) -> Result<f64> {
    if !(re > 0.0) {
        return Err(ResonanceError::Config(format!("theory curve needs Re z > 0, got {re}")));
    }
    check_h(system)?;
    let h = system.h;
    let base = -string.gamma * h * log_inv_h(h);
    Ok(match string.params {
        CurveParams::Dominant {
            length,
            coupling_product,
            ..
        } => base - (h / length) * (2.0 * re / coupling_product.abs().sqrt()).ln(),
        CurveParams::Flat {
            length,
            c_inner,
            c_outer,
            ..
        } => base + (h / (2.0 * length)) * (c_outer / c_inner).abs().ln(),
    })
}

/// `n` evenly spaced samples of the curve across the window's real range.
pub fn curve_samples(string: &ResonanceString, system: &DeltaSystem, window: &Window, n: usize) -> Result<Vec<(f64, f64)>> {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let re = window.re_min + (window.re_max - window.re_min) * i as f64 / (n - 1) as f64;
            Ok((re, theory_curve(string, system, re)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::determinant::Evaluator;
    use approx::assert_relative_eq;

    fn ex_2_11(h: f64) -> DeltaSystem {
        DeltaSystem::from_parts(h, &[0.0, 4.0, 6.0], &[0.5, 0.5, 2.0], &[1.0, 1.0, 1.0]).unwrap()
    }

    fn n2() -> DeltaSystem {
        DeltaSystem::from_parts(0.1, &[0.0, 6.0], &[2.0, 2.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn example_2_11_strings() {
        let s = ex_2_11(0.1);
        let strings = strings_for(&s).unwrap();
        assert_eq!(strings.len(), 2);
        assert_eq!(strings[0].kind, StringKind::Dominant);
        assert_eq!(strings[0].pair, Pair::new(1, 2));
        assert_eq!(strings[0].gamma, 0.125);
        assert_eq!(strings[1].kind, StringKind::Flat);
        assert_eq!(strings[1].pair, Pair::new(2, 3));
        assert_eq!(strings[1].gamma_exact, "3/8");
        assert_relative_eq!(strings[0].spacing, PI * 0.1 / 4.0);
        assert_relative_eq!(strings[1].spacing, PI * 0.1 / 2.0);
    }

    #[test]
    fn example_2_11_curve_values() {
        let s = ex_2_11(0.1);
        let strings = strings_for(&s).unwrap();
        let dom = theory_curve(&strings[0], &s, 1.0).unwrap();
        let expected = 0.125 * 0.1 * 0.1f64.ln() + 0.1 / 8.0 * 0.25f64.ln();
        assert_relative_eq!(dom, expected, max_relative = 1e-14);
        assert!((dom + 0.0461).abs() < 5e-5);
        let flat = theory_curve(&strings[1], &s, 1.0).unwrap();
        assert!((flat + 0.0863).abs() < 5e-5);
    }

    #[test]
    fn example_2_12a_single_dominant() {
        let s = DeltaSystem::from_parts(0.1, &[0.0, 2.0, 5.0, 6.0], &[2.0; 4], &[1.0; 4]).unwrap();
        let strings = strings_for(&s).unwrap();
        assert_eq!(strings.len(), 1);
        assert_eq!(strings[0].pair, Pair::new(1, 4));
    }

    #[test]
    fn n2_equal_barriers() {
        let s = n2();
        let strings = strings_for(&s).unwrap();
        assert_eq!(strings.len(), 1);
        assert_relative_eq!(strings[0].spacing, 0.05235987755982988, max_relative = 1e-14);
        assert_relative_eq!(strings[0].gamma, 1.0 / 3.0);
        // the plotting code's yTheory with b1 = b2 = 2, l = 6
        for re in [0.2f64, 0.7, 1.9] {
            let y = (4.0 / 12.0) * 0.1 * 0.1f64.ln() + 0.1 / 12.0 * (1.0 / (4.0 * re * re)).ln();
            assert_relative_eq!(theory_curve(&strings[0], &s, re).unwrap(), y, max_relative = 1e-13);
        }
    }

    #[test]
    fn dominant_curve_crosses_zero_where_log_vanishes() {
        let s = n2();
        let string = &strings_for(&s).unwrap()[0];
        let re = 0.5 * s.h.powf(2.0);
        assert!(theory_curve(string, &s, re).unwrap().abs() < 1e-15);
    }

    #[test]
    fn flat_curve_is_constant_and_offset_by_couplings() {
        let s = DeltaSystem::from_parts(0.1, &[0.0, 4.0, 6.0], &[0.5, 0.5, 2.0], &[1.0, 2.0, -6.0]).unwrap();
        let strings = strings_for(&s).unwrap();
        let flat = &strings[1];
        let a = theory_curve(flat, &s, 0.5).unwrap();
        let b = theory_curve(flat, &s, 2.0).unwrap();
        assert_eq!(a, b);
        let expected = -0.375 * 0.1 * 10f64.ln() + 0.1 / 4.0 * 3f64.ln();
        assert_relative_eq!(a, expected, max_relative = 1e-14);
    }

    #[test]
    fn dominant_curve_decreases() {
        let s = ex_2_11(0.05);
        let string = &strings_for(&s).unwrap()[0];
        let mut prev = f64::INFINITY;
        for i in 1..50 {
            let y = theory_curve(string, &s, i as f64 * 0.05).unwrap();
            assert!(y < prev);
            prev = y;
        }
    }

    #[test]
    fn rejects_nonpositive_re_and_large_h() {
        let s = n2();
        let string = &strings_for(&s).unwrap()[0];
        assert!(theory_curve(string, &s, 0.0).is_err());
        let big = DeltaSystem::from_parts(1.5, &[0.0, 6.0], &[2.0, 2.0], &[1.0, 1.0]).unwrap();
        assert!(strings_for(&big).is_err());
    }

    #[test]
    fn non_generic_is_propagated() {
        let s = DeltaSystem::from_parts(0.1, &[1.0, 2.0, 5.0, 6.0], &[2.0, 0.5, 0.5, 2.0], &[1.0; 4]).unwrap();
        assert!(matches!(strings_for(&s), Err(ResonanceError::NonGeneric(_))));
    }

    #[test]
    fn predicted_points_fill_window_and_track_curve() {
        let s = ex_2_11(0.1);
        let window = Window::new(0.1, 2.0, -0.3, 0.0).unwrap();
        for string in strings_for(&s).unwrap() {
            let pts = predict_points(&string, &s, &window).unwrap();
            let expected = ((2.0 - 0.1) / string.spacing).floor() as usize;
            assert!(pts.len().abs_diff(expected) <= 1, "{} vs {expected}", pts.len());
            for w in pts.windows(2) {
                assert_eq!(w[1].m, w[0].m + 1);
                assert_relative_eq!(w[1].z.re - w[0].z.re, string.spacing, max_relative = 0.2);
            }
            for p in &pts {
                assert!(window.re_min <= p.z.re && p.z.re <= window.re_max);
                let dev = (p.z.im - theory_curve(&string, &s, p.z.re).unwrap()).abs();
                assert!(dev <= 5.0 * string.spacing * s.h, "{dev}");
            }
        }
    }

    #[test]
    fn empty_prediction_is_not_an_error() {
        let s = n2();
        let string = &strings_for(&s).unwrap()[0];
        let window = Window::new(0.100, 0.101, -0.3, 0.0).unwrap();
        assert!(predict_points(string, &s, &window).unwrap().is_empty());
    }

    #[test]
    fn n2_prediction_is_close_to_a_root() {
        // dropping Im z inside log(-C_1C_2/4z^2) costs about 2|Im z|/Re z in
        // the residual, so only the right part of the window is checked
        let s = n2();
        let ev = Evaluator::new(&s);
        let string = &strings_for(&s).unwrap()[0];
        let window = Window::new(1.0, 1.9, -0.3, 0.0).unwrap();
        for p in predict_points(string, &s, &window).unwrap() {
            let r = ev.evaluate(p.z).unwrap().relative_residual();
            assert!(r < 2.5 * p.z.im.abs() / p.z.re, "m = {} residual {r}", p.m);
        }
    }

    #[test]
    fn predicted_residual_shrinks_with_h() {
        let window = Window::new(0.5, 1.5, -1.0, 0.0).unwrap();
        let mut prev = vec![f64::INFINITY; 2];
        for k in 0..5 {
            let h = 0.1 / 2f64.powi(k);
            let s = ex_2_11(h);
            let ev = Evaluator::new(&s);
            for (i, string) in strings_for(&s).unwrap().iter().enumerate() {
                let pts = predict_points(string, &s, &window).unwrap();
                let worst = pts
                    .iter()
                    .map(|p| ev.evaluate(p.z).unwrap().relative_residual())
                    .fold(0.0, f64::max);
                assert!(worst < prev[i], "string {i} at h = {h}: {worst} vs {}", prev[i]);
                prev[i] = worst;
            }
        }
    }
}
