//! The resonance condition `D_N(z) = 0`.
//!
//! Three evaluators are provided:
//!
//! * [`direct_determinant`] assembles the `2N x 2N` continuity/jump matrix and
//!   takes its determinant by LU factorization. It is the oracle.
//! * [`closed_form`] / [`Evaluator`] expand the normalized determinant
//!   `D̃_N = D_N / c` as `1 + Σ_n (-1)^n Σ R_{j_1}^{k_1} ... R_{j_n}^{k_n}` over
//!   interleaved index sets. This is what the solver samples.
//! * [`recurrence_form`] evaluates `D̃_N` through the order-`N` recurrence
//!   `D̃_N = D̃_{N-1} - Σ_m R_{N-m}^N D̃_{N-m-1}`; it exists to cross-check the
//!   enumeration.
//!
//! [`truncated_form`] keeps only the leading coefficient of each single-pair
//! term and is used for diagnostics and seeding, never as a root target.

use std::f64::consts::PI;

use num::complex::Complex64;
use num::Zero;
use serde::Serialize;

use crate::error::{ResonanceError, Result};
use crate::model::{ComplexPoint, DeltaSystem, EXP_GUARD};

/// Above this many barriers the index-set enumeration is refused and the
/// normalized determinant falls back to `direct / c`.
pub const MAX_ENUMERATION_N: usize = 12;

/// `value · exp(scale_log + i·scale_arg)`.
///
/// For [`closed_form`] the value is `D̃_N` and the scale is `c`, so the product
/// is `D_N`. For [`direct_determinant`] the scale is nonzero only when `|D_N|`
/// would leave the double range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeterminantValue {
    pub value: ComplexPoint,
    pub scale_log: f64,
    pub scale_arg: f64,
}

impl DeterminantValue {
    fn unscaled(value: ComplexPoint) -> Self {
        Self {
            value,
            scale_log: 0.0,
            scale_arg: 0.0,
        }
    }

    /// The represented number, which may overflow or underflow.
    pub fn full(&self) -> ComplexPoint {
        self.value * Complex64::from_polar(self.scale_log.exp(), self.scale_arg)
    }

    /// `self / other`, formed in log space for the scale factors.
    pub fn ratio(&self, other: &DeterminantValue) -> ComplexPoint {
        let factor = Complex64::from_polar(
            (self.scale_log - other.scale_log).exp(),
            self.scale_arg - other.scale_arg,
        );
        self.value / other.value * factor
    }
}

/// One element of the index set: pairs `(j_1,k_1), …, (j_n,k_n)` with
/// `1 <= j_1 < k_1 < j_2 < … < k_n <= N` (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PairIndexTuple {
    pub pairs: Vec<(usize, usize)>,
}

impl PairIndexTuple {
    pub fn order(&self) -> usize {
        self.pairs.len()
    }
}

/// Every interleaved tuple for `n = 1..=⌊N/2⌋`, grouped by `n` and
/// lexicographic within a group. Empty for `N < 2`.
pub fn enumerate_index_sets(n_deltas: usize) -> Vec<PairIndexTuple> {
    let mut out = Vec::new();
    for order in 1..=n_deltas / 2 {
        let mut current = Vec::with_capacity(order);
        push_tuples(1, n_deltas, order, &mut current, &mut out);
    }
    out
}

fn push_tuples(
    first: usize,
    n_deltas: usize,
    remaining: usize,
    current: &mut Vec<(usize, usize)>,
    out: &mut Vec<PairIndexTuple>,
) {
    if remaining == 0 {
        out.push(PairIndexTuple {
            pairs: current.clone(),
        });
        return;
    }
    // each remaining pair needs two indices
    let last_j = n_deltas + 1 - 2 * remaining;
    for j in first..=last_j {
        for k in j + 1..=n_deltas + 2 - 2 * remaining {
            current.push((j, k));
            push_tuples(k + 1, n_deltas, remaining - 1, current, out);
            current.pop();
        }
    }
}

/// `R_j^k` for every 0-based `j < k`, stored row-major in an `N x N` table.
struct SpanTable {
    n: usize,
    spans: Vec<ComplexPoint>,
}

impl SpanTable {
    fn new(system: &DeltaSystem, z: ComplexPoint) -> Result<Self> {
        let n = system.len();
        let mut r = Vec::with_capacity(n);
        let mut through = Vec::with_capacity(n);
        for j in 0..n {
            let rj = system.reflection(j, z)?;
            let tj = system.transmission(j, z)?;
            r.push(rj);
            through.push(tj + rj);
        }
        let mut spans = vec![Complex64::zero(); n * n];
        for j in 0..n {
            let mut inner = Complex64::new(1.0, 0.0);
            for k in j + 1..n {
                let lambda = 2.0 * (system.deltas[k].x - system.deltas[j].x);
                let w = system.omega_pow(z, lambda)?;
                spans[j * n + k] = r[j] * inner * r[k] * w;
                inner *= through[k];
            }
        }
        Ok(Self { n, spans })
    }

    /// `R_j^k` with 1-based indices.
    fn get(&self, j: usize, k: usize) -> ComplexPoint {
        self.spans[(j - 1) * self.n + (k - 1)]
    }
}

/// `R_j^k` with 1-based indices: `R_j (T_{j+1}+R_{j+1}) … (T_{k-1}+R_{k-1}) R_k ω^{2(x_k-x_j)}`.
pub fn reflection_span(
    system: &DeltaSystem,
    z: ComplexPoint,
    j: usize,
    k: usize,
) -> Result<ComplexPoint> {
    if j == 0 || k <= j || k > system.len() {
        return Err(ResonanceError::Config(format!(
            "span indices must satisfy 1 <= j < k <= N, got ({j}, {k})"
        )));
    }
    let (j0, k0) = (j - 1, k - 1);
    let mut acc = system.reflection(j0, z)? * system.reflection(k0, z)?;
    for m in j0 + 1..k0 {
        acc *= system.transmission(m, z)? + system.reflection(m, z)?;
    }
    let w = system.omega_pow(z, 2.0 * (system.deltas[k0].x - system.deltas[j0].x))?;
    Ok(acc * w)
}

/// Normalized determinant at one point together with the magnitude of its
/// largest summand (at least 1, the constant term).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: ComplexPoint,
    pub max_term: f64,
}

impl Evaluation {
    /// `|D̃_N| / max summand`.
    pub fn relative_residual(&self) -> f64 {
        self.value.norm() / self.max_term
    }
}

/// Reusable evaluator of `D̃_N` with the index sets enumerated once.
#[derive(Debug, Clone)]
pub struct Evaluator {
    system: DeltaSystem,
    index_sets: Option<Vec<PairIndexTuple>>,
}

impl Evaluator {
    pub fn new(system: &DeltaSystem) -> Self {
        let index_sets = (system.len() <= MAX_ENUMERATION_N)
            .then(|| enumerate_index_sets(system.len()));
        Self {
            system: system.clone(),
            index_sets,
        }
    }

    pub fn system(&self) -> &DeltaSystem {
        &self.system
    }

    /// `D̃_N(z)`. Uses the index-set expansion for `N <= 12` and `direct / c`
    /// beyond that.
    pub fn evaluate(&self, z: ComplexPoint) -> Result<Evaluation> {
        match &self.index_sets {
            Some(sets) => expand(&self.system, sets, z),
            None => {
                let direct = direct_determinant(&self.system, z)?;
                let c = normalization(&self.system, z)?;
                let value = direct.ratio(&c);
                Ok(Evaluation {
                    value,
                    max_term: value.norm().max(1.0),
                })
            }
        }
    }
}

fn expand(system: &DeltaSystem, sets: &[PairIndexTuple], z: ComplexPoint) -> Result<Evaluation> {
    let mut value = Complex64::new(1.0, 0.0);
    let mut max_term = 1.0f64;
    if sets.is_empty() {
        return Ok(Evaluation { value, max_term });
    }
    let table = SpanTable::new(system, z)?;
    for set in sets {
        let mut term = Complex64::new(1.0, 0.0);
        for &(j, k) in &set.pairs {
            term *= table.get(j, k);
        }
        if set.order() % 2 == 1 {
            term = -term;
        }
        max_term = max_term.max(term.norm());
        value += term;
    }
    Ok(Evaluation { value, max_term })
}

/// `log c` for `c = -∏_j ω^{-2x_j} (2iz - C_j h^{β_j})`, the factor relating
/// the matrix determinant to the normalized one.
pub fn normalization(system: &DeltaSystem, z: ComplexPoint) -> Result<DeterminantValue> {
    let h = system.h;
    let two_i_z = Complex64::new(-2.0 * z.im, 2.0 * z.re);
    let mut scale_log = 0.0;
    let mut scale_arg = PI;
    for (j, d) in system.deltas.iter().enumerate() {
        let denom = two_i_z - system.strength(j);
        let dist = denom.norm();
        if dist < crate::model::POLE_TOLERANCE {
            return Err(ResonanceError::Pole {
                index: j + 1,
                distance: dist,
            });
        }
        // ω^{-2x} = e^{-2izx/h}
        scale_log += 2.0 * z.im * d.x / h + dist.ln();
        scale_arg += -2.0 * z.re * d.x / h + denom.arg();
    }
    Ok(DeterminantValue {
        value: Complex64::new(1.0, 0.0),
        scale_log,
        scale_arg: scale_arg.rem_euclid(2.0 * PI),
    })
}

/// `D̃_N(z)` from the index-set expansion, with `c` carried in the scale.
pub fn closed_form(system: &DeltaSystem, z: ComplexPoint) -> Result<DeterminantValue> {
    let n = system.len();
    if n > MAX_ENUMERATION_N {
        return Err(ResonanceError::TooManyDeltas {
            n,
            limit: MAX_ENUMERATION_N,
        });
    }
    let eval = expand(system, &enumerate_index_sets(n), z)?;
    let c = normalization(system, z)?;
    Ok(DeterminantValue {
        value: eval.value,
        scale_log: c.scale_log,
        scale_arg: c.scale_arg,
    })
}

/// `D̃_N(z)` through the recurrence `D̃_n = D̃_{n-1} - Σ_{m=1}^{n-1} R_{n-m}^n D̃_{n-m-1}`,
/// `D̃_0 = D̃_1 = 1`.
pub fn recurrence_form(system: &DeltaSystem, z: ComplexPoint) -> Result<ComplexPoint> {
    let n = system.len();
    let table = SpanTable::new(system, z)?;
    let mut d = vec![Complex64::new(1.0, 0.0); n + 1];
    for top in 2..=n {
        let mut acc = d[top - 1];
        for m in 1..top {
            acc -= table.get(top - m, top) * d[top - m - 1];
        }
        d[top] = acc;
    }
    Ok(d[n])
}

/// `1 + Σ_{j<k} C_j C_k / (4z²) · h^{β_j+β_k} · ω^{2(x_k-x_j)}`.
pub fn truncated_form(system: &DeltaSystem, z: ComplexPoint) -> Result<ComplexPoint> {
    if z.norm() < 1e-150 {
        return Err(ResonanceError::Pole {
            index: 0,
            distance: z.norm(),
        });
    }
    let inv_four_z2 = (4.0 * z * z).inv();
    let mut acc = Complex64::new(1.0, 0.0);
    for j in 0..system.len() {
        for k in j + 1..system.len() {
            let coeff = system.strength(j) * system.strength(k);
            let w = system.omega_pow(z, 2.0 * (system.deltas[k].x - system.deltas[j].x))?;
            acc += inv_four_z2 * coeff * w;
        }
    }
    Ok(acc)
}

/// Row-major `2N x 2N` coefficient matrix of the continuity and jump
/// conditions, unknowns ordered `v_0^-, v_1^-, v_1^+, …, v_{N-1}^+, v_N^+`.
pub fn coefficient_matrix(system: &DeltaSystem, z: ComplexPoint) -> Result<Vec<ComplexPoint>> {
    let n = system.len();
    if n == 0 {
        return Err(ResonanceError::Config("matrix needs at least one delta".into()));
    }
    let dim = 2 * n;
    let mut m = vec![Complex64::zero(); dim * dim];
    let iz = Complex64::new(-z.im, z.re);
    for j in 1..=n {
        let d = &system.deltas[j - 1];
        let s = system.strength(j - 1);
        let w = system.omega_pow(z, -2.0 * d.x)?;
        let cont = 2 * (j - 1);
        let jump = cont + 1;
        // v_{j-1}^-
        let col = if j == 1 { 0 } else { 2 * (j - 1) - 1 };
        m[cont * dim + col] = w;
        m[jump * dim + col] = -iz * w;
        // v_{j-1}^+ (v_0^+ = 0)
        if j > 1 {
            let col = 2 * (j - 1);
            m[cont * dim + col] = Complex64::new(1.0, 0.0);
            m[jump * dim + col] = iz;
        }
        // v_j^- (v_N^- = 0)
        if j < n {
            let col = 2 * j - 1;
            m[cont * dim + col] = -w;
            m[jump * dim + col] = (iz + s) * w;
        }
        // v_j^+
        let col = if j == n { dim - 1 } else { 2 * j };
        m[cont * dim + col] = Complex64::new(-1.0, 0.0);
        m[jump * dim + col] = -iz + s;
    }
    Ok(m)
}

/// `D_N(z)` by LU factorization with partial pivoting of
/// [`coefficient_matrix`]. A singular matrix yields a zero value.
pub fn direct_determinant(system: &DeltaSystem, z: ComplexPoint) -> Result<DeterminantValue> {
    let dim = 2 * system.len();
    let mut a = coefficient_matrix(system, z)?;
    let mut log_mag = 0.0f64;
    let mut phase = Complex64::new(1.0, 0.0);
    // columns mix ω^{-2x_j} of neighbouring deltas; equilibrate so that
    // elimination does not swamp the exponentially small couplings
    for col in 0..dim {
        let big = (0..dim)
            .map(|r| a[r * dim + col])
            .max_by(|p, q| p.norm().total_cmp(&q.norm()))
            .expect("nonempty column");
        let mag = big.norm();
        if mag == 0.0 {
            return Ok(DeterminantValue::unscaled(Complex64::zero()));
        }
        log_mag += mag.ln();
        phase *= big / mag;
        for r in 0..dim {
            a[r * dim + col] /= big;
        }
    }
    for col in 0..dim {
        let (pivot_row, pivot_mag) = (col..dim)
            .map(|r| (r, a[r * dim + col].norm()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_mag == 0.0 {
            return Ok(DeterminantValue::unscaled(Complex64::zero()));
        }
        if pivot_row != col {
            for c in 0..dim {
                a.swap(col * dim + c, pivot_row * dim + c);
            }
            phase = -phase;
        }
        let pivot = a[col * dim + col];
        log_mag += pivot_mag.ln();
        phase *= pivot / pivot_mag;
        for r in col + 1..dim {
            let factor = a[r * dim + col] / pivot;
            if factor.is_zero() {
                continue;
            }
            for c in col + 1..dim {
                let upper = a[col * dim + c];
                a[r * dim + c] -= factor * upper;
            }
        }
    }
    if log_mag.abs() < EXP_GUARD {
        Ok(DeterminantValue::unscaled(phase * log_mag.exp()))
    } else {
        Ok(DeterminantValue {
            value: phase,
            scale_log: log_mag,
            scale_arg: 0.0,
        })
    }
}
