//! Numerical resonance search: sample `D̃_N` on a grid, trace the zero sets
//! of its real and imaginary parts, intersect them and polish the crossings
//! with Newton's method.

use std::collections::HashMap;
use std::f64::consts::PI;

use num::complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::determinant::Evaluator;
use crate::error::{ResonanceError, Result};
use crate::model::{ComplexPoint, DeltaSystem, Window};
use crate::theory::{theory_curve, ResonanceString};

pub const MIN_GRID: usize = 16;
pub const DEFAULT_GRID: usize = 2500;
/// Strip width, in units of `h`, next to the window edge where contour
/// vertices and roots are discarded.
pub const BOUNDARY_FACTOR: f64 = 0.03;
pub const NEWTON_MAX_ITER: usize = 25;
pub const NEWTON_STOP: f64 = 1e-10;
pub const ACCEPT_RESIDUAL: f64 = 1e-8;
/// Default string-matching tolerance in units of `h`.
pub const MATCH_TOL_FACTOR: f64 = 5.0;

/// Uniform samples of a complex function; node `(ix, iy)` sits at
/// `re_min + ix·dx + i(im_min + iy·dy)` and is stored at `iy·nx + ix`.
#[derive(Debug, Clone)]
pub struct GridField {
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    /// `false` where evaluation failed (overflow guard or pole).
    pub valid: Vec<bool>,
}

impl GridField {
    /// Samples `f` in parallel; `None` marks a node as invalid.
    pub fn from_fn<F>(window: &Window, nx: usize, ny: usize, f: F) -> Result<Self>
    where
        F: Fn(ComplexPoint) -> Option<ComplexPoint> + Sync,
    {
        window.check_shape()?;
        if nx < MIN_GRID || ny < MIN_GRID {
            return Err(ResonanceError::Config(format!(
                "grid must be at least {MIN_GRID}x{MIN_GRID}, got {nx}x{ny}"
            )));
        }
        let probe = GridField {
            window: *window,
            nx,
            ny,
            re: Vec::new(),
            im: Vec::new(),
            valid: Vec::new(),
        };
        let rows: Vec<Vec<Option<ComplexPoint>>> = (0..ny)
            .into_par_iter()
            .map(|iy| (0..nx).map(|ix| f(probe.node(ix, iy)).filter(|v| v.is_finite())).collect())
            .collect();
        let mut re = Vec::with_capacity(nx * ny);
        let mut im = Vec::with_capacity(nx * ny);
        let mut valid = Vec::with_capacity(nx * ny);
        for v in rows.into_iter().flatten() {
            let v = v.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
            re.push(v.re);
            im.push(v.im);
            valid.push(!v.re.is_nan());
        }
        Ok(GridField {
            window: *window,
            nx,
            ny,
            re,
            im,
            valid,
        })
    }

    pub fn dx(&self) -> f64 {
        self.window.width() / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.window.height() / (self.ny - 1) as f64
    }

    pub fn node(&self, ix: usize, iy: usize) -> ComplexPoint {
        // the last node is pinned to the edge to avoid rounding past it
        let re = if ix + 1 == self.nx {
            self.window.re_max
        } else {
            self.window.re_min + ix as f64 * self.dx()
        };
        let im = if iy + 1 == self.ny {
            self.window.im_max
        } else {
            self.window.im_min + iy as f64 * self.dy()
        };
        ComplexPoint::new(re, im)
    }

    fn part(&self, part: Part) -> &[f64] {
        match part {
            Part::Real => &self.re,
            Part::Imag => &self.im,
        }
    }

    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }
}

/// `D̃_N` divided by its largest term, on the grid. The positive rescaling
/// leaves both zero sets unchanged and keeps the samples of order one.
pub fn sample_grid(system: &DeltaSystem, window: &Window, nx: usize, ny: usize) -> Result<GridField> {
    window.check_shape()?;
    if window.re_min <= 0.0 && window.re_max >= 0.0 {
        return Err(ResonanceError::Config("window must not contain Re z = 0".into()));
    }
    let ev = Evaluator::new(system);
    GridField::from_fn(window, nx, ny, |z| {
        ev.evaluate(z).ok().map(|e| e.value / e.max_term)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Part {
    Real,
    Imag,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarCurveSet {
    pub part: Part,
    pub polylines: Vec<Vec<(f64, f64)>>,
    /// Grid cell size `(dx, dy)` of the source field.
    pub cell: (f64, f64),
}

impl PlanarCurveSet {
    pub fn segment_count(&self) -> usize {
        self.polylines.iter().map(|p| p.len().saturating_sub(1)).sum()
    }

    pub fn vertex_count(&self) -> usize {
        self.polylines.iter().map(Vec::len).sum()
    }
}

/// Horizontal edge from node `(ix, iy)` to `(ix+1, iy)` has id
/// `2(iy·nx + ix)`; the vertical edge to `(ix, iy+1)` has that id plus one.
fn edge_point(field: &GridField, values: &[f64], edge: usize) -> (f64, f64) {
    let node = edge / 2;
    let (ix, iy) = (node % field.nx, node / field.nx);
    let (jx, jy) = if edge % 2 == 0 { (ix + 1, iy) } else { (ix, iy + 1) };
    let va = values[iy * field.nx + ix];
    let vb = values[jy * field.nx + jx];
    let t = va / (va - vb);
    let a = field.node(ix, iy);
    let b = field.node(jx, jy);
    (a.re + t * (b.re - a.re), a.im + t * (b.im - a.im))
}

fn cell_segments(field: &GridField, values: &[f64], ix: usize, iy: usize, out: &mut Vec<(usize, usize)>) {
    let nx = field.nx;
    let idx = [iy * nx + ix, iy * nx + ix + 1, (iy + 1) * nx + ix + 1, (iy + 1) * nx + ix];
    if idx.iter().any(|&i| !field.valid[i]) {
        return;
    }
    let v = idx.map(|i| values[i]);
    let pos = v.map(|x| x >= 0.0);
    let bottom = 2 * idx[0];
    let right = 2 * idx[1] + 1;
    let top = 2 * idx[3];
    let left = 2 * idx[0] + 1;
    // corners: 0 = (ix,iy), 1 = (ix+1,iy), 2 = (ix+1,iy+1), 3 = (ix,iy+1)
    let mut crossing = Vec::with_capacity(4);
    if pos[0] != pos[1] {
        crossing.push(bottom);
    }
    if pos[1] != pos[2] {
        crossing.push(right);
    }
    if pos[2] != pos[3] {
        crossing.push(top);
    }
    if pos[3] != pos[0] {
        crossing.push(left);
    }
    match crossing.len() {
        2 => out.push((crossing[0], crossing[1])),
        4 => {
            let center = 0.25 * (v[0] + v[1] + v[2] + v[3]);
            if (center >= 0.0) == pos[0] {
                // corner 0 joins corner 2 through the middle; cut off 1 and 3
                out.push((bottom, right));
                out.push((top, left));
            } else {
                out.push((left, bottom));
                out.push((right, top));
            }
        }
        _ => {}
    }
}

/// Marching squares on the sign of one part of the field, with segments
/// stitched into polylines through shared cell edges.
pub fn extract_contours(field: &GridField, part: Part) -> PlanarCurveSet {
    let values = field.part(part);
    let segments: Vec<(usize, usize)> = (0..field.ny - 1)
        .into_par_iter()
        .map(|iy| {
            let mut row = Vec::new();
            for ix in 0..field.nx - 1 {
                cell_segments(field, values, ix, iy, &mut row);
            }
            row
        })
        .flatten_iter()
        .collect();

    let mut by_edge: HashMap<usize, Vec<usize>> = HashMap::with_capacity(2 * segments.len());
    for (i, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(i);
        by_edge.entry(b).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();

    let trace = |start: usize, from_edge: usize, used: &mut Vec<bool>| -> Vec<(f64, f64)> {
        let mut edges = vec![from_edge];
        let mut seg = start;
        let mut at = from_edge;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next_edge = if a == at { b } else { a };
            edges.push(next_edge);
            at = next_edge;
            match by_edge[&at].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        edges.into_iter().map(|e| edge_point(field, values, e)).collect()
    };

    // open curves start at an edge used by a single segment
    for i in 0..segments.len() {
        if used[i] {
            continue;
        }
        let (a, b) = segments[i];
        let start_edge = if by_edge[&a].len() == 1 {
            a
        } else if by_edge[&b].len() == 1 {
            b
        } else {
            continue;
        };
        polylines.push(trace(i, start_edge, &mut used));
    }
    // what is left are closed loops
    for i in 0..segments.len() {
        if !used[i] {
            polylines.push(trace(i, segments[i].0, &mut used));
        }
    }
    PlanarCurveSet {
        part,
        polylines,
        cell: (field.dx(), field.dy()),
    }
}

/// Drops vertices within `0.03·h` of the window edge, splitting polylines
/// where vertices were removed.
pub fn filter_boundary(curves: &PlanarCurveSet, window: &Window, h: f64) -> PlanarCurveSet {
    let eps = BOUNDARY_FACTOR * h;
    let mut polylines = Vec::new();
    for line in &curves.polylines {
        let mut run: Vec<(f64, f64)> = Vec::new();
        for &p in line {
            if window.edge_distance(ComplexPoint::new(p.0, p.1)) >= eps {
                run.push(p);
            } else if !run.is_empty() {
                if run.len() >= 2 {
                    polylines.push(std::mem::take(&mut run));
                }
                run.clear();
            }
        }
        if run.len() >= 2 {
            polylines.push(run);
        }
    }
    PlanarCurveSet {
        part: curves.part,
        polylines,
        cell: curves.cell,
    }
}

type Segment = ((f64, f64), (f64, f64));

fn segment_intersection(p: Segment, q: Segment) -> Option<(f64, f64)> {
    let r = (p.1 .0 - p.0 .0, p.1 .1 - p.0 .1);
    let s = (q.1 .0 - q.0 .0, q.1 .1 - q.0 .1);
    let denom = r.0 * s.1 - r.1 * s.0;
    let scale = (r.0.hypot(r.1)) * (s.0.hypot(s.1));
    if denom.abs() <= 1e-14 * scale || scale == 0.0 {
        return None;
    }
    let w = (q.0 .0 - p.0 .0, q.0 .1 - p.0 .1);
    let t = (w.0 * s.1 - w.1 * s.0) / denom;
    let u = (w.0 * r.1 - w.1 * r.0) / denom;
    let tol = 1e-12;
    if (-tol..=1.0 + tol).contains(&t) && (-tol..=1.0 + tol).contains(&u) {
        Some((p.0 .0 + t * r.0, p.0 .1 + t * r.1))
    } else {
        None
    }
}

fn segments_of(curves: &PlanarCurveSet) -> Vec<Segment> {
    curves
        .polylines
        .iter()
        .flat_map(|l| l.windows(2).map(|w| (w[0], w[1])))
        .collect()
}

/// All transversal crossings between the two curve families, merged within
/// a quarter of the smaller grid cell dimension and sorted by `(re, im)`.
pub fn intersect_curves(a: &PlanarCurveSet, b: &PlanarCurveSet) -> Vec<ComplexPoint> {
    let sa = segments_of(a);
    let sb = segments_of(b);
    if sa.is_empty() || sb.is_empty() {
        return Vec::new();
    }
    let bin = a.cell.0.max(a.cell.1).max(b.cell.0).max(b.cell.1);
    let dedup = 0.25 * a.cell.0.min(a.cell.1).min(b.cell.0).min(b.cell.1);
    let origin = sb
        .iter()
        .flat_map(|s| [s.0, s.1])
        .fold((f64::INFINITY, f64::INFINITY), |acc, p| (acc.0.min(p.0), acc.1.min(p.1)));
    let key = |p: (f64, f64)| -> (i64, i64) {
        (((p.0 - origin.0) / bin).floor() as i64, ((p.1 - origin.1) / bin).floor() as i64)
    };
    let mut bins: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, s) in sb.iter().enumerate() {
        let (k0, k1) = (key(s.0), key(s.1));
        for bx in k0.0.min(k1.0)..=k0.0.max(k1.0) {
            for by in k0.1.min(k1.1)..=k0.1.max(k1.1) {
                bins.entry((bx, by)).or_default().push(i);
            }
        }
    }
    let mut points: Vec<(f64, f64)> = sa
        .par_iter()
        .flat_map_iter(|s| {
            let (k0, k1) = (key(s.0), key(s.1));
            let mut cand: Vec<usize> = Vec::new();
            for bx in k0.0.min(k1.0)..=k0.0.max(k1.0) {
                for by in k0.1.min(k1.1)..=k0.1.max(k1.1) {
                    if let Some(v) = bins.get(&(bx, by)) {
                        cand.extend_from_slice(v);
                    }
                }
            }
            cand.sort_unstable();
            cand.dedup();
            cand.into_iter()
                .filter_map(|j| segment_intersection(*s, sb[j]))
                .collect::<Vec<_>>()
        })
        .collect();
    points.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let merged = merge_close(&points, dedup);
    merged.into_iter().map(|p| ComplexPoint::new(p.0, p.1)).collect()
}

/// Greedy merge of points sorted by `re`: a point within `radius` of an
/// already kept point is dropped.
fn merge_close(sorted: &[(f64, f64)], radius: f64) -> Vec<(f64, f64)> {
    let mut kept: Vec<(f64, f64)> = Vec::new();
    for &p in sorted {
        let dup = kept
            .iter()
            .rev()
            .take_while(|q| p.0 - q.0 <= radius)
            .any(|q| (p.0 - q.0).hypot(p.1 - q.1) <= radius);
        if !dup {
            kept.push(p);
        }
    }
    kept.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    kept
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resonance {
    pub z: ComplexPoint,
    /// `|D̃_N(z)|` over the largest term.
    pub residual: f64,
    pub iterations: usize,
    pub matched_string: Option<usize>,
    pub deviation: Option<f64>,
    pub m_estimate: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Rejection {
    LeftWindow { z: ComplexPoint },
    NotConverged { z: ComplexPoint, residual: f64 },
    PositiveImaginary { z: ComplexPoint },
    Evaluation { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedRoot {
    pub start: ComplexPoint,
    #[serde(flatten)]
    pub rejection: Rejection,
}

/// Newton iteration on `D̃_N` from `z0` with a central-difference
/// derivative.
pub fn refine_root(evaluator: &Evaluator, z0: ComplexPoint, window: &Window) -> std::result::Result<Resonance, RejectedRoot> {
    let reject = |rejection| RejectedRoot { start: z0, rejection };
    let eval_err = |e: ResonanceError| RejectedRoot {
        start: z0,
        rejection: Rejection::Evaluation { message: e.to_string() },
    };
    let step = 1e-7 * z0.norm().max(1.0);
    let bounds = window.dilated(0.1);
    let mut z = z0;
    let mut current = evaluator.evaluate(z).map_err(eval_err)?;
    let mut iterations = 0;
    while current.relative_residual() >= NEWTON_STOP && iterations < NEWTON_MAX_ITER {
        let fp = evaluator.evaluate(z + step).map_err(eval_err)?.value;
        let fm = evaluator.evaluate(z - step).map_err(eval_err)?.value;
        let derivative = (fp - fm) / (2.0 * step);
        let next = z - current.value / derivative;
        iterations += 1;
        if !next.is_finite() || !bounds.contains(next) {
            return Err(reject(Rejection::LeftWindow { z: next }));
        }
        z = next;
        current = evaluator.evaluate(z).map_err(eval_err)?;
    }
    let residual = current.relative_residual();
    if !(residual < ACCEPT_RESIDUAL) {
        return Err(reject(Rejection::NotConverged { z, residual }));
    }
    if z.im > 0.0 {
        return Err(reject(Rejection::PositiveImaginary { z }));
    }
    Ok(Resonance {
        z,
        residual,
        iterations,
        matched_string: None,
        deviation: None,
        m_estimate: None,
    })
}

/// Assigns each root to the string whose curve is nearest in `Im z`;
/// roots farther than `match_tol` from every curve stay unassigned but keep
/// the distance to the nearest one.
pub fn match_to_strings(roots: &mut [Resonance], strings: &[ResonanceString], system: &DeltaSystem, match_tol: f64) {
    for root in roots.iter_mut() {
        root.matched_string = None;
        root.deviation = None;
        root.m_estimate = None;
        let mut best: Option<(f64, &ResonanceString)> = None;
        for s in strings {
            let Ok(curve) = theory_curve(s, system, root.z.re.abs()) else {
                continue;
            };
            let dev = (root.z.im - curve).abs();
            if best.map_or(true, |(d, _)| dev < d) {
                best = Some((dev, s));
            }
        }
        if let Some((dev, s)) = best {
            root.deviation = Some(dev);
            if dev <= match_tol {
                root.matched_string = Some(s.id);
                root.m_estimate = Some((root.z.re * s.length() / (PI * system.h)).round() as i64);
            }
        }
    }
}

/// Window used when none is configured: `Re z ∈ [0.1, 2]`,
/// `Im z ∈ [-3h·max(1, γ_max log(1/h) / 3), 0]`.
pub fn default_window(system: &DeltaSystem, strings: &[ResonanceString]) -> Window {
    let h = system.h;
    let gamma_max = strings.iter().map(|s| s.gamma).fold(0.0, f64::max);
    let depth = 3.0 * h * (gamma_max * (1.0 / h).ln() / 3.0).max(1.0);
    Window {
        re_min: 0.1,
        re_max: 2.0,
        im_min: -depth,
        im_max: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub nx: usize,
    pub ny: usize,
    /// Defaults to `5h` when `None`.
    pub match_tol: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            nx: DEFAULT_GRID,
            ny: DEFAULT_GRID,
            match_tol: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub window: Window,
    pub real_contours: PlanarCurveSet,
    pub imag_contours: PlanarCurveSet,
    pub intersections: Vec<ComplexPoint>,
    pub resonances: Vec<Resonance>,
    pub rejected: Vec<RejectedRoot>,
    pub invalid_nodes: usize,
}

/// Grid → contours → boundary filter → intersections → Newton → dedup →
/// boundary filter → string matching. Roots come out sorted by `(re, im)`.
pub fn solve(
    system: &DeltaSystem,
    strings: &[ResonanceString],
    window: &Window,
    options: &SolverOptions,
) -> Result<SolveOutput> {
    let field = sample_grid(system, window, options.nx, options.ny)?;
    let real_contours = filter_boundary(&extract_contours(&field, Part::Real), window, system.h);
    let imag_contours = filter_boundary(&extract_contours(&field, Part::Imag), window, system.h);
    let intersections = intersect_curves(&real_contours, &imag_contours);

    let ev = Evaluator::new(system);
    let refined: Vec<_> = intersections
        .par_iter()
        .map(|&z0| refine_root(&ev, z0, window))
        .collect();
    let mut roots = Vec::new();
    let mut rejected = Vec::new();
    for r in refined {
        match r {
            Ok(root) => roots.push(root),
            Err(e) => rejected.push(e),
        }
    }
    let eps = BOUNDARY_FACTOR * system.h;
    roots.retain(|r| window.edge_distance(r.z) >= eps);
    roots.sort_by(|a, b| a.z.re.total_cmp(&b.z.re).then(a.z.im.total_cmp(&b.z.im)));
    let mut resonances: Vec<Resonance> = Vec::with_capacity(roots.len());
    for root in roots {
        let radius = 1e-8 * root.z.norm().max(1.0);
        let dup = resonances
            .iter_mut()
            .rev()
            .take_while(|k| root.z.re - k.z.re <= radius)
            .find(|k| (k.z - root.z).norm() <= radius);
        match dup {
            Some(k) => {
                if root.residual < k.residual {
                    *k = root;
                }
            }
            None => resonances.push(root),
        }
    }
    let match_tol = options.match_tol.unwrap_or(MATCH_TOL_FACTOR * system.h);
    match_to_strings(&mut resonances, strings, system, match_tol);
    Ok(SolveOutput {
        window: *window,
        real_contours,
        imag_contours,
        intersections,
        resonances,
        rejected,
        invalid_nodes: field.invalid_count(),
    })
}
