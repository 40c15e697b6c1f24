//! Physical configuration of the delta barriers and the shared numeric
//! conventions built on it: `ω = e^{iz/h}` and the reflection/transmission
//! factors `R_j`, `T_j`.

use std::fmt;

use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ResonanceError, Result};

/// Points of the complex plane. Resonances and `ω` both live here.
pub type ComplexPoint = Complex64;

/// Largest natural-log magnitude accepted by [`omega_pow`] before it reports
/// overflow instead of producing an infinity.
pub const EXP_GUARD: f64 = 700.0;

/// `|2iz - C_j h^{β_j}|` below this is treated as a pole of `R_j` and `T_j`.
pub const POLE_TOLERANCE: f64 = 1e-300;

/// A single barrier `C h^{1+β} δ(x - position)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaBarrier {
    pub x: f64,
    pub beta: f64,
    pub c: f64,
}

impl DeltaBarrier {
    pub fn new(x: f64, beta: f64, c: f64) -> Self {
        Self { x, beta, c }
    }
}

/// Semiclassical parameter plus an ordered list of barriers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSystem {
    pub h: f64,
    pub deltas: Vec<DeltaBarrier>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Empty,
    HNonpositive,
    NonFinite,
    PositionsNotIncreasing,
    BetaNonpositive,
    CouplingZero,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::Empty => "empty",
            ViolationKind::HNonpositive => "h-nonpositive",
            ViolationKind::NonFinite => "non-finite",
            ViolationKind::PositionsNotIncreasing => "positions-not-increasing",
            ViolationKind::BetaNonpositive => "beta-nonpositive",
            ViolationKind::CouplingZero => "coupling-zero",
        };
        f.write_str(s)
    }
}

/// One broken invariant. `index` is the 1-based barrier index when the
/// violation concerns a particular barrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub index: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{} (delta {}): {}", self.kind, i, self.message),
            None => write!(f, "{}: {}", self.kind, self.message),
        }
    }
}

impl DeltaSystem {
    /// Builds a system and rejects it if [`DeltaSystem::validate`] finds anything.
    pub fn new(h: f64, deltas: Vec<DeltaBarrier>) -> Result<Self> {
        let system = Self { h, deltas };
        let violations = system.validate();
        if violations.is_empty() {
            Ok(system)
        } else {
            let msg = violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            Err(ResonanceError::Config(msg))
        }
    }

    /// Convenience constructor from parallel slices.
    pub fn from_parts(h: f64, x: &[f64], beta: &[f64], c: &[f64]) -> Result<Self> {
        if x.len() != beta.len() || x.len() != c.len() {
            return Err(ResonanceError::Config(format!(
                "length mismatch: {} positions, {} betas, {} couplings",
                x.len(),
                beta.len(),
                c.len()
            )));
        }
        let deltas = x
            .iter()
            .zip(beta)
            .zip(c)
            .map(|((&x, &beta), &c)| DeltaBarrier { x, beta, c })
            .collect();
        Self::new(h, deltas)
    }

    /// Every violated invariant; an empty list means the system is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.h.is_finite() {
            out.push(Violation {
                kind: ViolationKind::NonFinite,
                index: None,
                message: format!("h = {}", self.h),
            });
        } else if self.h <= 0.0 {
            out.push(Violation {
                kind: ViolationKind::HNonpositive,
                index: None,
                message: format!("h = {} must be positive", self.h),
            });
        }
        if self.deltas.is_empty() {
            out.push(Violation {
                kind: ViolationKind::Empty,
                index: None,
                message: "at least one delta barrier is required".into(),
            });
        }
        for (i, d) in self.deltas.iter().enumerate() {
            let idx = Some(i + 1);
            if !(d.x.is_finite() && d.beta.is_finite() && d.c.is_finite()) {
                out.push(Violation {
                    kind: ViolationKind::NonFinite,
                    index: idx,
                    message: format!("x = {}, beta = {}, c = {}", d.x, d.beta, d.c),
                });
                continue;
            }
            if d.beta <= 0.0 {
                out.push(Violation {
                    kind: ViolationKind::BetaNonpositive,
                    index: idx,
                    message: format!("beta = {} must be positive", d.beta),
                });
            }
            if d.c == 0.0 {
                out.push(Violation {
                    kind: ViolationKind::CouplingZero,
                    index: idx,
                    message: "c must be nonzero".into(),
                });
            }
        }
        for (i, w) in self.deltas.windows(2).enumerate() {
            // NaN comparisons are false, so non-finite positions fall through
            // here as well; they were already reported above.
            if w[0].x.is_finite() && w[1].x.is_finite() && w[1].x <= w[0].x {
                out.push(Violation {
                    kind: ViolationKind::PositionsNotIncreasing,
                    index: Some(i + 2),
                    message: format!("x_{} = {} <= x_{} = {}", i + 2, w[1].x, i + 1, w[0].x),
                });
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// `C_j h^{β_j}` for the 0-based barrier `j`.
    pub fn strength(&self, j: usize) -> f64 {
        let d = &self.deltas[j];
        d.c * self.h.powf(d.beta)
    }

    /// The same system shifted rigidly by `dx`.
    pub fn translated(&self, dx: f64) -> Self {
        let mut out = self.clone();
        for d in &mut out.deltas {
            d.x += dx;
        }
        out
    }

    /// `ω^λ = e^{izλ/h}`.
    pub fn omega_pow(&self, z: ComplexPoint, lambda: f64) -> Result<ComplexPoint> {
        omega_pow(self.h, z, lambda)
    }

    /// `R_j = C_j h^{β_j} / (2iz - C_j h^{β_j})` for the 0-based barrier `j`.
    pub fn reflection(&self, j: usize, z: ComplexPoint) -> Result<ComplexPoint> {
        let s = self.strength(j);
        let denom = pole_checked(j, z, s)?;
        Ok(ComplexPoint::new(s, 0.0) / denom)
    }

    /// `T_j = 2iz / (2iz - C_j h^{β_j})` for the 0-based barrier `j`.
    pub fn transmission(&self, j: usize, z: ComplexPoint) -> Result<ComplexPoint> {
        let s = self.strength(j);
        let denom = pole_checked(j, z, s)?;
        Ok(two_i_z(z) / denom)
    }
}

fn two_i_z(z: ComplexPoint) -> ComplexPoint {
    ComplexPoint::new(-2.0 * z.im, 2.0 * z.re)
}

fn pole_checked(j: usize, z: ComplexPoint, strength: f64) -> Result<ComplexPoint> {
    let denom = two_i_z(z) - strength;
    let distance = denom.norm();
    if distance < POLE_TOLERANCE || !distance.is_finite() {
        return Err(ResonanceError::Pole {
            index: j + 1,
            distance,
        });
    }
    Ok(denom)
}

/// `e^{izλ/h}`, or [`ResonanceError::Overflow`] when `|ω^λ|` would exceed
/// `e^{700}`.
pub fn omega_pow(h: f64, z: ComplexPoint, lambda: f64) -> Result<ComplexPoint> {
    // izλ/h = (-Im z + i Re z) λ / h
    let log_mag = -z.im * lambda / h;
    if log_mag > EXP_GUARD || !log_mag.is_finite() {
        return Err(ResonanceError::Overflow {
            exponent: log_mag,
            limit: EXP_GUARD,
        });
    }
    let phase = z.re * lambda / h;
    Ok(ComplexPoint::from_polar(log_mag.exp(), phase))
}

/// Rectangular region of the complex plane, `Re z > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Window {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let w = Self {
            re_min,
            re_max,
            im_min,
            im_max,
        };
        w.check()?;
        Ok(w)
    }

    pub fn check(&self) -> Result<()> {
        self.check_shape()?;
        if self.re_min <= 0.0 {
            return Err(ResonanceError::Config(format!(
                "window must satisfy re_min > 0, got {}",
                self.re_min
            )));
        }
        Ok(())
    }

    /// Finite and nonempty, with no constraint on the sign of `Re z`.
    pub fn check_shape(&self) -> Result<()> {
        let all_finite = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(ResonanceError::Config("window bounds must be finite".into()));
        }
        if self.re_min >= self.re_max || self.im_min >= self.im_max {
            return Err(ResonanceError::Config(format!(
                "empty window [{}, {}] x [{}, {}]",
                self.re_min, self.re_max, self.im_min, self.im_max
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn contains(&self, z: ComplexPoint) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    /// Grows every side by `fraction` of the corresponding extent.
    pub fn dilated(&self, fraction: f64) -> Self {
        let dx = fraction * self.width();
        let dy = fraction * self.height();
        Self {
            re_min: self.re_min - dx,
            re_max: self.re_max + dx,
            im_min: self.im_min - dy,
            im_max: self.im_max + dy,
        }
    }

    /// Distance from `z` to the nearest edge (negative outside).
    pub fn edge_distance(&self, z: ComplexPoint) -> f64 {
        (z.re - self.re_min)
            .min(self.re_max - z.re)
            .min(z.im - self.im_min)
            .min(self.im_max - z.im)
    }

    /// Mirror image across the imaginary axis (`z -> -conj(z)`). The result
    /// has `Re < 0` and is only meaningful for the symmetry checks.
    pub fn reflected(&self) -> Self {
        Self {
            re_min: -self.re_max,
            re_max: -self.re_min,
            im_min: self.im_min,
            im_max: self.im_max,
        }
    }
}
