//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line to
//! stderr (written directly so it survives output capture); the test fails
//! if any criterion fails.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use delta_resonance::determinant::{closed_form, direct_determinant, normalization, recurrence_form, Evaluator};
use delta_resonance::polygon::{build_polygon, check_genericity, dominant_pair, interval_partition, Pair};
use delta_resonance::report::{builtin_fixtures, fixture};
use delta_resonance::solver::{default_window, solve, Resonance, SolverOptions, BOUNDARY_FACTOR};
use delta_resonance::theory::{predict_points, strings_for, theory_curve};
use delta_resonance::{ComplexPoint, DeltaSystem, Window};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORACLE_TOL: f64 = 1e-9;
const ORACLE_TIME: Duration = Duration::from_secs(10);
const RECURRENCE_TOL: f64 = 1e-12;
const PREDICTION_RESIDUAL_MAX: f64 = 0.3;
const RESIDUAL_MAX: f64 = 1e-8;
const SPACING_TOL: f64 = 0.10;
const N2_TIME: Duration = Duration::from_secs(60);
const MULTI_TIME: Duration = Duration::from_secs(120);
const MIN_PER_STRING: usize = 5;
const REFINEMENT_MOVE: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_system(rng: &mut ChaCha8Rng, n: usize) -> DeltaSystem {
    let h = [0.05, 0.1, 0.2][rng.gen_range(0..3)];
    let mut x = rng.gen_range(-1.0..1.0);
    let mut xs = Vec::with_capacity(n);
    for _ in 0..n {
        xs.push(x);
        x += rng.gen_range(0.3..1.5);
    }
    let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
    let c: Vec<f64> = (0..n)
        .map(|_| rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    DeltaSystem::from_parts(h, &xs, &beta, &c).unwrap()
}

fn random_z(rng: &mut ChaCha8Rng) -> ComplexPoint {
    ComplexPoint::new(rng.gen_range(0.2..2.0), rng.gen_range(-0.5..0.0))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..=6);
        let s = random_system(&mut rng, n);
        for _ in 0..10 {
            let z = random_z(&mut rng);
            let closed = closed_form(&s, z).unwrap().value;
            let direct = direct_determinant(&s, z).unwrap().ratio(&normalization(&s, z).unwrap());
            worst = worst.max((direct - closed).norm() / closed.norm().max(1.0));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= ORACLE_TOL && elapsed < ORACLE_TIME,
        format!("1000 points, worst scaled error {worst:.2e} (tol {ORACLE_TOL:e}), {elapsed:.2?}"),
    )
}

fn recurrence_matches_enumeration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..=10);
        let s = random_system(&mut rng, n);
        for _ in 0..10 {
            let z = random_z(&mut rng);
            let closed = closed_form(&s, z).unwrap().value;
            let rec = recurrence_form(&s, z).unwrap();
            worst = worst.max((rec - closed).norm() / closed.norm().max(1.0));
        }
    }
    outcome(
        worst <= RECURRENCE_TOL,
        format!("N in 2..=10, worst relative difference {worst:.2e} (tol {RECURRENCE_TOL:e})"),
    )
}

fn fixtures_exact() -> Outcome {
    let mut failures = Vec::new();
    let fixtures = builtin_fixtures();
    for f in &fixtures {
        let p = build_polygon(&f.system).unwrap();
        let slopes: Vec<String> = p.slopes.iter().map(|s| s.gamma.to_string()).collect();
        let dom = dominant_pair(&f.system).unwrap().first();
        if slopes != f.expected.slopes
            || dom != f.expected.dominant
            || p.slopes.len() != f.expected.string_count
            || p.genericity.generic != f.expected.generic
        {
            failures.push(format!("{}: got {slopes:?} dominant {dom}", f.name));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} fixtures match", fixtures.len())
        } else {
            failures.join("; ")
        },
    )
}

fn count_bounds_and_nesting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD4);
    let mut checked = 0;
    let mut skipped = 0;
    let mut failures = Vec::new();
    while checked < 1000 {
        let n = rng.gen_range(2..=8);
        let s = random_system(&mut rng, n);
        let p = build_polygon(&s).unwrap();
        if !p.genericity.generic {
            skipped += 1;
            continue;
        }
        checked += 1;
        let dom = dominant_pair(&s).unwrap().first();
        let count = p.slopes.len();
        if count > n - 1 || count > n - dom.k + dom.j {
            failures.push(format!("bound violated: {s:?}"));
        }
        // interval_partition verifies one shared index and nesting for
        // every pair of consecutive hull vertices
        if let Err(e) = interval_partition(&p) {
            failures.push(format!("{e}"));
        }
    }
    outcome(
        failures.is_empty(),
        format!("{checked} generic systems ({skipped} non-generic skipped), {} failures", failures.len()),
    )
}

fn ex_2_11(h: f64) -> DeltaSystem {
    DeltaSystem::from_parts(h, &[0.0, 4.0, 6.0], &[0.5, 0.5, 2.0], &[1.0, 1.0, 1.0]).unwrap()
}

/// Largest relative residual of the predicted points with `Re z` in
/// `[0.5, 1.5]`, over both strings.
fn prediction_residuals() -> Outcome {
    let window = Window::new(0.5, 1.5, -1.0, 0.0).unwrap();
    let mut values = Vec::new();
    for h in [0.1, 0.05, 0.025, 0.0125] {
        let s = ex_2_11(h);
        let ev = Evaluator::new(&s);
        let mut worst = 0.0f64;
        for string in strings_for(&s).unwrap() {
            for p in predict_points(&string, &s, &window).unwrap() {
                worst = worst.max(ev.evaluate(p.z).unwrap().relative_residual());
            }
        }
        values.push(worst);
    }
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    let last = *values.last().unwrap();
    outcome(
        decreasing && last < PREDICTION_RESIDUAL_MAX,
        format!(
            "max residual per h [{}] (final tol {PREDICTION_RESIDUAL_MAX})",
            values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn n2_system() -> (DeltaSystem, Window) {
    let f = fixture("n2").unwrap();
    (f.system, f.window.unwrap())
}

fn n2_solve(grid: usize) -> (Vec<Resonance>, Duration) {
    let (s, w) = n2_system();
    let strings = strings_for(&s).unwrap();
    let start = Instant::now();
    let out = solve(
        &s,
        &strings,
        &w,
        &SolverOptions {
            nx: grid,
            ny: grid,
            match_tol: None,
        },
    )
    .unwrap();
    (out.resonances, start.elapsed())
}

fn n2_end_to_end() -> Outcome {
    let (s, _) = n2_system();
    let strings = strings_for(&s).unwrap();
    let (roots, elapsed) = n2_solve(1024);
    let worst_residual = roots.iter().map(|r| r.residual).fold(0.0, f64::max);
    let inner: Vec<&Resonance> = roots.iter().filter(|r| (0.3..=1.7).contains(&r.z.re)).collect();
    let worst_dev = inner
        .iter()
        .map(|r| (r.z.im - theory_curve(&strings[0], &s, r.z.re).unwrap()).abs())
        .fold(0.0, f64::max);
    let spacing = PI * s.h / 6.0;
    let worst_gap = roots
        .windows(2)
        .map(|w| ((w[1].z.re - w[0].z.re) / spacing - 1.0).abs())
        .fold(0.0, f64::max);
    let pass = !roots.is_empty()
        && worst_residual < RESIDUAL_MAX
        && worst_dev < s.h
        && worst_gap <= SPACING_TOL
        && elapsed < N2_TIME;
    outcome(
        pass,
        format!(
            "{} roots, max residual {worst_residual:.1e}, max |Im - curve| {worst_dev:.4} (< h), \
             max spacing error {:.1}%, {elapsed:.2?} at 1024^2",
            roots.len(),
            worst_gap * 100.0
        ),
    )
}

fn multi_string() -> Outcome {
    let f = fixture("ex2.12c").unwrap();
    let s = f.system;
    let strings = strings_for(&s).unwrap();
    let window = default_window(&s, &strings);
    let start = Instant::now();
    let options = SolverOptions {
        nx: 1024,
        ny: 1024,
        match_tol: None,
    };
    let out = solve(&s, &strings, &window, &options).unwrap();
    let elapsed = start.elapsed();
    let mut pass = elapsed < MULTI_TIME;
    let mut parts = Vec::new();
    for st in &strings {
        let devs: Vec<f64> = out
            .resonances
            .iter()
            .filter(|r| r.matched_string == Some(st.id))
            .map(|r| r.deviation.unwrap())
            .collect();
        let mean = devs.iter().sum::<f64>() / devs.len().max(1) as f64;
        pass &= devs.len() >= MIN_PER_STRING && mean < s.h;
        parts.push(format!("{} n={} mean dev {mean:.4}", st.label(), devs.len()));
    }
    let eps = BOUNDARY_FACTOR * s.h;
    let near_edge = out.resonances.iter().filter(|r| window.edge_distance(r.z) < eps).count();
    pass &= near_edge == 0;
    outcome(
        pass,
        format!("{}; {near_edge} roots near edge; {elapsed:.2?} at 1024^2", parts.join(", ")),
    )
}

fn grid_refinement() -> Outcome {
    let (coarse, _) = n2_solve(1024);
    let (fine, _) = n2_solve(2048);
    let same_count = coarse.len() == fine.len();
    let worst = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a.z - b.z).norm())
        .fold(0.0, f64::max);
    outcome(
        same_count && worst <= REFINEMENT_MOVE,
        format!(
            "{} vs {} roots, max move {worst:.1e} (tol {REFINEMENT_MOVE:e})",
            coarse.len(),
            fine.len()
        ),
    )
}

fn non_generic_detection() -> Outcome {
    let s = fixture("ex9.2").unwrap().system;
    let report = check_genericity(&s).unwrap();
    let flagged = report.violations.iter().any(|v| {
        v.coincident_pairs.contains(&Pair::new(1, 2)) && v.coincident_pairs.contains(&Pair::new(3, 4))
    });
    outcome(!report.generic && flagged, report.summary())
}

fn mean_matched_deviation(name: &str) -> (f64, usize) {
    let f = fixture(name).unwrap();
    let strings = strings_for(&f.system).unwrap();
    let window = f.window.unwrap_or_else(|| default_window(&f.system, &strings));
    let out = solve(&f.system, &strings, &window, &SolverOptions::default()).unwrap();
    let devs: Vec<f64> = out
        .resonances
        .iter()
        .filter(|r| r.matched_string.is_some())
        .map(|r| r.deviation.unwrap())
        .collect();
    (devs.iter().sum::<f64>() / devs.len().max(1) as f64, devs.len())
}

fn h_refinement() -> Outcome {
    let (coarse, nc) = mean_matched_deviation("ex9.4-h0.1");
    let (fine, nf) = mean_matched_deviation("ex9.4-h0.01");
    outcome(
        nc > 0 && nf > 0 && fine < coarse,
        format!("mean deviation {coarse:.3e} ({nc} roots) at h=0.1, {fine:.3e} ({nf} roots) at h=0.01"),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("recurrence vs enumeration", recurrence_matches_enumeration),
        ("polygon fixtures", fixtures_exact),
        ("string count bounds and nesting", count_bounds_and_nesting),
        ("predicted point residuals", prediction_residuals),
        ("two-barrier end to end", n2_end_to_end),
        ("three-string search", multi_string),
        ("grid refinement stability", grid_refinement),
        ("non-genericity detection", non_generic_detection),
        ("h refinement accuracy", h_refinement),
    ];
    let mut failed = Vec::new();
    let mut stderr = std::io::stderr();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        writeln!(
            stderr,
            "acceptance {:>2} {status} {name}: {} [{:.2?}]",
            i + 1,
            o.detail,
            start.elapsed()
        )
        .unwrap();
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
