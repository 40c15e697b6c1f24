//! Newton polygon of the barrier configuration.
//!
//! The polygon is the lower convex hull of `{(2(x_k - x_j), β_j + β_k) : j < k}`
//! together with the origin. Its finite slopes are the decay rates of the
//! resonance strings. All hull work is done in exact rational arithmetic:
//! every `f64` input is read back through its shortest round-trip decimal
//! representation, so `0.1` becomes exactly `1/10` and coincidences between
//! decimal parameters are detected exactly.

use std::collections::BTreeSet;
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{ResonanceError, Result};
use crate::model::DeltaSystem;

pub type Rational = BigRational;

/// Ordered pair of 1-based barrier indices, `j < k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Pair {
    pub j: usize,
    pub k: usize,
}

impl Pair {
    pub fn new(a: usize, b: usize) -> Self {
        Self {
            j: a.min(b),
            k: a.max(b),
        }
    }

    fn shared_with(&self, other: &Pair) -> Vec<usize> {
        [self.j, self.k]
            .into_iter()
            .filter(|i| *i == other.j || *i == other.k)
            .collect()
    }

    fn other_than(&self, i: usize) -> usize {
        if self.j == i {
            self.k
        } else {
            self.j
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.j, self.k)
    }
}

pub fn serialize_rational<S: Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

/// Exact value of the shortest decimal that round-trips to `v`.
pub fn exact_decimal(v: f64) -> Result<Rational> {
    if !v.is_finite() {
        return Err(ResonanceError::Config(format!("cannot convert {v} to a rational")));
    }
    let text = format!("{v:e}");
    let (mantissa, exponent) = text
        .split_once('e')
        .expect("`{:e}` output always has an exponent");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: BigInt = format!("{int_part}{frac_part}")
        .parse()
        .expect("decimal digits");
    let shift = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut q = if shift >= 0 {
        Rational::from_integer(digits * num::pow(ten, shift as usize))
    } else {
        Rational::new(digits, num::pow(ten, (-shift) as usize))
    };
    if negative {
        q = -q;
    }
    Ok(q)
}

pub fn rational_to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// `(2(x_k - x_j), β_j + β_k)` for a pair, or the origin (`pair = None`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairPoint {
    #[serde(serialize_with = "serialize_rational")]
    pub lambda: Rational,
    #[serde(serialize_with = "serialize_rational")]
    pub nu: Rational,
    pub pair: Option<Pair>,
}

impl PairPoint {
    pub fn origin() -> Self {
        Self {
            lambda: Rational::zero(),
            nu: Rational::zero(),
            pair: None,
        }
    }

    pub fn is_origin(&self) -> bool {
        self.pair.is_none()
    }

    fn same_location(&self, other: &PairPoint) -> bool {
        self.lambda == other.lambda && self.nu == other.nu
    }
}

impl fmt::Display for PairPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pair {
            Some(p) => write!(f, "V{p}=({}, {})", self.lambda, self.nu),
            None => write!(f, "(0, 0)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StringKind {
    Dominant,
    Flat,
}

impl fmt::Display for StringKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StringKind::Dominant => "dominant",
            StringKind::Flat => "flat",
        })
    }
}

/// One finite slope of the polygon with its barrier attribution.
///
/// `inner` is the barrier contributed by the left hull vertex and `outer` the
/// one contributed by the right vertex; for a flat slope
/// `gamma = (β_outer - β_inner) / (2|x_outer - x_inner|)`. For the dominant
/// slope `inner`/`outer` are simply `J`/`K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Slope {
    #[serde(serialize_with = "serialize_rational")]
    pub gamma: Rational,
    pub kind: StringKind,
    pub pair: Pair,
    pub inner: usize,
    pub outer: usize,
    /// Indices into [`NewtonPolygon::hull`].
    pub segment: (usize, usize),
}

impl Slope {
    pub fn gamma_f64(&self) -> f64 {
        rational_to_f64(&self.gamma)
    }
}

/// Three or more pair points lying on one hull segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CollinearViolation {
    #[serde(serialize_with = "serialize_rational")]
    pub gamma: Rational,
    pub points: Vec<PairPoint>,
    /// Distinct barrier pairs that this one slope could be attributed to.
    pub coincident_pairs: Vec<Pair>,
}

impl fmt::Display for CollinearViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let from_origin = self.points.iter().any(PairPoint::is_origin);
        let symbol = if from_origin { "γ" } else { "γ̃" };
        let names: Vec<String> = self
            .coincident_pairs
            .iter()
            .map(|p| format!("{symbol}_{}{}", p.j, p.k))
            .collect();
        if names.len() > 1 {
            write!(f, "{} = {}", names.join(" = "), self.gamma)
        } else {
            let pts: Vec<String> = self.points.iter().map(ToString::to_string).collect();
            write!(f, "collinear hull points {} with slope {}", pts.join(", "), self.gamma)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenericityReport {
    pub generic: bool,
    pub violations: Vec<CollinearViolation>,
}

impl GenericityReport {
    fn from_violations(violations: Vec<CollinearViolation>) -> Self {
        Self {
            generic: violations.is_empty(),
            violations,
        }
    }

    pub fn summary(&self) -> String {
        self.violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NewtonPolygon {
    pub points: Vec<PairPoint>,
    /// Lower-hull vertices from the origin to `V(1,N)`; collinear points are
    /// kept out of this list and show up in `genericity` instead.
    pub hull: Vec<PairPoint>,
    pub slopes: Vec<Slope>,
    pub genericity: GenericityReport,
}

fn cross(o: &PairPoint, a: &PairPoint, b: &PairPoint) -> Rational {
    (&a.lambda - &o.lambda) * (&b.nu - &o.nu) - (&a.nu - &o.nu) * (&b.lambda - &o.lambda)
}

fn slope_between(a: &PairPoint, b: &PairPoint) -> Rational {
    (&b.nu - &a.nu) / (&b.lambda - &a.lambda)
}

struct ExactSystem {
    x: Vec<Rational>,
    beta: Vec<Rational>,
}

impl ExactSystem {
    fn new(system: &DeltaSystem) -> Result<Self> {
        let violations = system.validate();
        if !violations.is_empty() {
            return Err(ResonanceError::Config(
                violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
            ));
        }
        let x = system.deltas.iter().map(|d| exact_decimal(d.x)).collect::<Result<_>>()?;
        let beta = system.deltas.iter().map(|d| exact_decimal(d.beta)).collect::<Result<_>>()?;
        Ok(Self { x, beta })
    }

    fn n(&self) -> usize {
        self.x.len()
    }

    fn points(&self) -> Vec<PairPoint> {
        let mut pts = vec![PairPoint::origin()];
        let two = Rational::from_integer(BigInt::from(2));
        for j in 0..self.n() {
            for k in j + 1..self.n() {
                pts.push(PairPoint {
                    lambda: &two * (&self.x[k] - &self.x[j]),
                    nu: &self.beta[j] + &self.beta[k],
                    pair: Some(Pair::new(j + 1, k + 1)),
                });
            }
        }
        pts
    }

    /// `γ_jk = (β_j + β_k) / (2(x_k - x_j))`, 1-based.
    fn gamma(&self, p: Pair) -> Rational {
        let two = Rational::from_integer(BigInt::from(2));
        (&self.beta[p.j - 1] + &self.beta[p.k - 1]) / (two * (&self.x[p.k - 1] - &self.x[p.j - 1]))
    }

    /// `γ̃ = |β_k - β_j| / (2|x_k - x_j|)`, 1-based.
    fn gamma_tilde(&self, a: usize, b: usize) -> Rational {
        let two = Rational::from_integer(BigInt::from(2));
        (&self.beta[b - 1] - &self.beta[a - 1]).abs() / (two * (&self.x[b - 1] - &self.x[a - 1]).abs())
    }
}

fn lower_hull(points: &[PairPoint]) -> Vec<PairPoint> {
    let mut sorted: Vec<&PairPoint> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.lambda
            .cmp(&b.lambda)
            .then_with(|| a.nu.cmp(&b.nu))
            .then_with(|| a.pair.cmp(&b.pair))
    });
    let mut hull: Vec<PairPoint> = Vec::new();
    for p in sorted {
        if let Some(last) = hull.last() {
            // only the lowest point of each abscissa can be on the lower hull
            if last.lambda == p.lambda {
                continue;
            }
        }
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= Rational::zero() {
            hull.pop();
        }
        hull.push(p.clone());
    }
    hull
}

/// Attribution of the slope between two pair points, if they share exactly
/// one barrier (or one of them is the origin).
fn attribution(a: &PairPoint, b: &PairPoint) -> Option<(Pair, usize, usize)> {
    match (a.pair, b.pair) {
        (None, Some(q)) => Some((q, q.j, q.k)),
        (Some(p), None) => Some((p, p.j, p.k)),
        (Some(p), Some(q)) => {
            let shared = p.shared_with(&q);
            if shared.len() == 1 {
                let inner = p.other_than(shared[0]);
                let outer = q.other_than(shared[0]);
                Some((Pair::new(inner, outer), inner, outer))
            } else {
                None
            }
        }
        (None, None) => None,
    }
}

fn collinear_violations(points: &[PairPoint], hull: &[PairPoint]) -> Vec<CollinearViolation> {
    let mut out = Vec::new();
    for seg in hull.windows(2) {
        let (a, b) = (&seg[0], &seg[1]);
        let mut on: Vec<PairPoint> = points
            .iter()
            .filter(|p| p.lambda >= a.lambda && p.lambda <= b.lambda && cross(a, b, p).is_zero())
            .cloned()
            .collect();
        if on.len() <= 2 {
            continue;
        }
        on.sort_by(|p, q| p.lambda.cmp(&q.lambda).then_with(|| p.pair.cmp(&q.pair)));
        let mut pairs = BTreeSet::new();
        for (i, p) in on.iter().enumerate() {
            for q in &on[i + 1..] {
                if p.lambda == q.lambda {
                    continue;
                }
                if let Some((pair, _, _)) = attribution(p, q) {
                    pairs.insert(pair);
                }
            }
        }
        out.push(CollinearViolation {
            gamma: slope_between(a, b),
            points: on,
            coincident_pairs: pairs.into_iter().collect(),
        });
    }
    out
}

/// Builds the polygon, its slope set with pair attribution, and the
/// genericity report. Requires a valid system with `N >= 2`.
pub fn build_polygon(system: &DeltaSystem) -> Result<NewtonPolygon> {
    let exact = ExactSystem::new(system)?;
    if exact.n() < 2 {
        return Err(ResonanceError::Config(format!(
            "the Newton polygon needs at least two deltas, got {}",
            exact.n()
        )));
    }
    let points = exact.points();
    let hull = lower_hull(&points);
    debug_assert!(hull[0].is_origin());
    let genericity = GenericityReport::from_violations(collinear_violations(&points, &hull));

    let mut slopes = Vec::with_capacity(hull.len() - 1);
    for i in 0..hull.len() - 1 {
        let (a, b) = (&hull[i], &hull[i + 1]);
        let gamma = slope_between(a, b);
        if let Some(prev) = slopes.last().map(|s: &Slope| &s.gamma) {
            assert!(&gamma > prev, "hull slopes must increase");
        }
        // attribution comes from `a` and the next pair point along the
        // segment, which is `b` unless collinear points sit in between;
        // coincident points at a location are all candidates
        let next_lambda = points
            .iter()
            .filter(|p| p.lambda > a.lambda && p.lambda <= b.lambda && cross(a, b, p).is_zero())
            .map(|p| &p.lambda)
            .min()
            .expect("b lies on its own segment");
        let at_a: Vec<&PairPoint> = points.iter().filter(|p| p.same_location(a)).collect();
        let at_b: Vec<&PairPoint> = points
            .iter()
            .filter(|p| &p.lambda == next_lambda && cross(a, b, p).is_zero())
            .collect();
        let found = at_a
            .iter()
            .flat_map(|p| at_b.iter().map(move |q| (p, q)))
            .find_map(|(p, q)| attribution(p, q));
        let (pair, inner, outer) = found.ok_or_else(|| ResonanceError::InternalConsistency {
            left: a.pair.unwrap_or(Pair { j: 0, k: 0 }),
            right: b.pair.unwrap_or(Pair { j: 0, k: 0 }),
            reason: "adjacent hull vertices share zero or two barriers".into(),
        })?;
        let kind = if a.is_origin() {
            StringKind::Dominant
        } else {
            StringKind::Flat
        };
        let expected = match kind {
            StringKind::Dominant => exact.gamma(pair),
            StringKind::Flat => exact.gamma_tilde(inner, outer),
        };
        debug_assert_eq!(expected, gamma);
        slopes.push(Slope {
            gamma,
            kind,
            pair,
            inner,
            outer,
            segment: (i, i + 1),
        });
    }
    Ok(NewtonPolygon {
        points,
        hull,
        slopes,
        genericity,
    })
}

/// The ordered slope set Γ.
pub fn slope_set(polygon: &NewtonPolygon) -> &[Slope] {
    &polygon.slopes
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DominantPair {
    /// All pairs attaining the minimum; more than one means a tie.
    pub pairs: Vec<Pair>,
    #[serde(serialize_with = "serialize_rational")]
    pub gamma: Rational,
}

impl DominantPair {
    pub fn unique(&self) -> Option<Pair> {
        (self.pairs.len() == 1).then(|| self.pairs[0])
    }

    pub fn first(&self) -> Pair {
        self.pairs[0]
    }
}

/// Minimizer(s) of `γ_jk` over all pairs, found by direct comparison.
pub fn dominant_pair(system: &DeltaSystem) -> Result<DominantPair> {
    let exact = ExactSystem::new(system)?;
    if exact.n() < 2 {
        return Err(ResonanceError::Config("dominant pair needs N >= 2".into()));
    }
    let mut best: Option<(Rational, Vec<Pair>)> = None;
    for j in 1..=exact.n() {
        for k in j + 1..=exact.n() {
            let p = Pair::new(j, k);
            let g = exact.gamma(p);
            match &mut best {
                Some((bg, pairs)) if g == *bg => pairs.push(p),
                Some((bg, _)) if g > *bg => {}
                _ => best = Some((g, vec![p])),
            }
        }
    }
    let (gamma, pairs) = best.expect("at least one pair");
    Ok(DominantPair { pairs, gamma })
}

/// Partition `1 = j_1 < … < j_n = N` read off the hull.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntervalPartition {
    pub indices: Vec<usize>,
    /// 1-based position `I` with `j_I = J`, `j_{I+1} = K`.
    pub dominant_position: usize,
    /// For each slope (in Γ order), the position `i` with pair `(j_i, j_{i+1})`.
    pub slope_positions: Vec<usize>,
}

/// Checks nesting of hull-vertex intervals and returns the partition. Only
/// generic polygons are certified.
pub fn interval_partition(polygon: &NewtonPolygon) -> Result<IntervalPartition> {
    if !polygon.genericity.generic {
        return Err(ResonanceError::NonGeneric(polygon.genericity.summary()));
    }
    let vertices: Vec<Pair> = polygon.hull.iter().filter_map(|p| p.pair).collect();
    for w in vertices.windows(2) {
        let (p, q) = (w[0], w[1]);
        let shared = p.shared_with(&q);
        let nested = q.j <= p.j && p.k <= q.k;
        if shared.len() != 1 || !nested {
            return Err(ResonanceError::InternalConsistency {
                left: p,
                right: q,
                reason: format!(
                    "expected nested intervals with one common endpoint, shared = {shared:?}"
                ),
            });
        }
    }
    let indices: Vec<usize> = vertices
        .iter()
        .flat_map(|p| [p.j, p.k])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut slope_positions = Vec::with_capacity(polygon.slopes.len());
    let mut used = vec![false; indices.len().saturating_sub(1)];
    for s in &polygon.slopes {
        let pos = indices
            .windows(2)
            .position(|w| w[0] == s.pair.j && w[1] == s.pair.k)
            .ok_or_else(|| ResonanceError::InternalConsistency {
                left: s.pair,
                right: s.pair,
                reason: format!("slope pair {} is not a gap of the partition {indices:?}", s.pair),
            })?;
        if used[pos] {
            return Err(ResonanceError::InternalConsistency {
                left: s.pair,
                right: s.pair,
                reason: "two slopes attributed to the same interval".into(),
            });
        }
        used[pos] = true;
        slope_positions.push(pos + 1);
    }
    if used.iter().any(|u| !u) {
        return Err(ResonanceError::InternalConsistency {
            left: vertices[0],
            right: *vertices.last().expect("nonempty"),
            reason: "partition interval without a slope".into(),
        });
    }
    Ok(IntervalPartition {
        indices,
        dominant_position: slope_positions[0],
        slope_positions,
    })
}

/// Every collinear triple (or larger set) on the hull boundary.
pub fn check_genericity(system: &DeltaSystem) -> Result<GenericityReport> {
    if system.len() < 2 {
        ExactSystem::new(system)?;
        return Ok(GenericityReport::from_violations(Vec::new()));
    }
    Ok(build_polygon(system)?.genericity)
}

/// Persistence window of each slope: the distance in `γ` from the slope to
/// the nearest other crossing of two lines `γ ↦ ν_p - λ_p γ` drawn for the
/// pair points. Inside the window the ordering of the term exponents
/// `h^{ν - λγ}` does not change. `None` when no other crossing exists.
pub fn epsilon_window(polygon: &NewtonPolygon) -> Vec<Option<Rational>> {
    let mut crossings = BTreeSet::new();
    for (i, p) in polygon.points.iter().enumerate() {
        for q in &polygon.points[i + 1..] {
            if p.lambda != q.lambda {
                let g = (&q.nu - &p.nu) / (&q.lambda - &p.lambda);
                if g.is_positive() {
                    crossings.insert(g);
                }
            }
        }
    }
    polygon
        .slopes
        .iter()
        .map(|s| {
            crossings
                .iter()
                .filter(|g| **g != s.gamma)
                .map(|g| (g - &s.gamma).abs())
                .min()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StringBounds {
    pub n_minus_one: usize,
    /// `N - K + J` for the (first) dominant pair.
    pub n_minus_k_plus_j: usize,
    pub slope_count: usize,
}

impl StringBounds {
    pub fn satisfied(&self) -> bool {
        self.slope_count <= self.n_minus_one && self.slope_count <= self.n_minus_k_plus_j
    }
}

pub fn string_count_bound(system: &DeltaSystem) -> Result<StringBounds> {
    let polygon = build_polygon(system)?;
    let dom = dominant_pair(system)?.first();
    let n = system.len();
    Ok(StringBounds {
        n_minus_one: n - 1,
        n_minus_k_plus_j: n - dom.k + dom.j,
        slope_count: polygon.slopes.len(),
    })
}

/// `n/d` as a rational, for tests and fixtures.
pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Integer value, for tests and fixtures.
pub fn integer(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n)) * Rational::one()
}
