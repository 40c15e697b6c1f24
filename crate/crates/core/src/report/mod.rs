//! Configuration, the end-to-end pipeline and its serializable report.

mod emit;
mod fixtures;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{ResonanceError, Result};
use crate::model::{DeltaBarrier, DeltaSystem, Window};
use crate::polygon::{
    build_polygon, dominant_pair, epsilon_window, interval_partition, CollinearViolation,
    IntervalPartition, NewtonPolygon, Pair, PairPoint, Slope, StringBounds,
};
use crate::solver::{default_window, solve, Rejection, Resonance, SolveOutput, SolverOptions, DEFAULT_GRID};
use crate::theory::{predict_points, strings_for, strings_from_polygon, PredictedPoint, ResonanceString};

pub use emit::{
    curves_csv, format_float, plot_svg, polygon_svg, predictions_csv, resonances_csv, THEORY_SAMPLES,
};
pub use fixtures::{builtin_fixtures, fixture, Expected, Fixture};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
}

/// JSON run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub h: f64,
    pub deltas: Vec<DeltaBarrier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_tol: Option<f64>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ResonanceError::Config(e.to_string()))
    }

    pub fn from_system(system: &DeltaSystem) -> Self {
        Self {
            h: system.h,
            deltas: system.deltas.clone(),
            window: None,
            grid: None,
            match_tol: None,
        }
    }

    pub fn from_fixture(f: &Fixture) -> Self {
        Self {
            window: f.window,
            ..Self::from_system(&f.system)
        }
    }

    /// Validated system with barriers sorted by position. Any reordering is
    /// reported in the returned notices.
    pub fn system(&self) -> Result<(DeltaSystem, Vec<String>)> {
        let mut notices = Vec::new();
        let mut deltas = self.deltas.clone();
        if deltas.windows(2).any(|w| w[0].x > w[1].x) {
            deltas.sort_by(|a, b| a.x.total_cmp(&b.x));
            notices.push("deltas were not ordered by position and have been sorted".to_string());
        }
        let system = DeltaSystem::new(self.h, deltas)?;
        if let Some(w) = &self.window {
            w.check()?;
        }
        if let Some(g) = &self.grid {
            if g.nx < crate::solver::MIN_GRID || g.ny < crate::solver::MIN_GRID {
                return Err(ResonanceError::Config(format!(
                    "grid must be at least {0}x{0}",
                    crate::solver::MIN_GRID
                )));
            }
        }
        if let Some(t) = self.match_tol {
            if !(t > 0.0) {
                return Err(ResonanceError::Config("match_tol must be positive".into()));
            }
        }
        Ok((system, notices))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeSummary {
    pub gamma: String,
    pub gamma_float: f64,
    pub kind: crate::polygon::StringKind,
    pub pair: Pair,
    pub inner: usize,
    pub outer: usize,
    /// Distance to the nearest other line crossing, as a fraction.
    pub epsilon_window: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominantSummary {
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub gamma: String,
    pub gamma_float: f64,
    /// Every pair attaining the minimum; more than one is a tie.
    pub ties: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationSummary {
    pub message: String,
    pub gamma: String,
    pub coincident_pairs: Vec<Pair>,
    pub points: Vec<PairPoint>,
}

impl From<&CollinearViolation> for ViolationSummary {
    fn from(v: &CollinearViolation) -> Self {
        Self {
            message: v.to_string(),
            gamma: v.gamma.to_string(),
            coincident_pairs: v.coincident_pairs.clone(),
            points: v.points.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolygonSummary {
    pub points: Vec<PairPoint>,
    pub hull: Vec<PairPoint>,
    pub slopes: Vec<SlopeSummary>,
    pub dominant: DominantSummary,
    pub partition: Option<IntervalPartition>,
    pub generic: bool,
    pub violations: Vec<ViolationSummary>,
    pub bounds: StringBounds,
}

fn slope_summary(s: &Slope, eps: &Option<crate::polygon::Rational>) -> SlopeSummary {
    SlopeSummary {
        gamma: s.gamma.to_string(),
        gamma_float: s.gamma_f64(),
        kind: s.kind,
        pair: s.pair,
        inner: s.inner,
        outer: s.outer,
        epsilon_window: eps.as_ref().map(ToString::to_string),
    }
}

pub fn polygon_summary(system: &DeltaSystem, polygon: &NewtonPolygon) -> Result<PolygonSummary> {
    let dom = dominant_pair(system)?;
    let first = dom.first();
    let eps = epsilon_window(polygon);
    let n = system.len();
    Ok(PolygonSummary {
        points: polygon.points.clone(),
        hull: polygon.hull.clone(),
        slopes: polygon.slopes.iter().zip(&eps).map(|(s, e)| slope_summary(s, e)).collect(),
        dominant: DominantSummary {
            j: first.j,
            k: first.k,
            gamma: dom.gamma.to_string(),
            gamma_float: crate::polygon::rational_to_f64(&dom.gamma),
            ties: dom.pairs.clone(),
        },
        partition: interval_partition(polygon).ok(),
        generic: polygon.genericity.generic,
        violations: polygon.genericity.violations.iter().map(Into::into).collect(),
        bounds: StringBounds {
            n_minus_one: n - 1,
            n_minus_k_plus_j: n - first.k + first.j,
            slope_count: polygon.slopes.len(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StringStats {
    pub string_id: usize,
    pub label: String,
    pub kind: crate::polygon::StringKind,
    pub gamma: String,
    pub count: usize,
    pub mean_deviation: Option<f64>,
    pub max_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSummary {
    pub strings: Vec<StringStats>,
    pub unmatched: usize,
}

pub fn string_statistics(strings: &[ResonanceString], roots: &[Resonance]) -> CompareSummary {
    let stats = strings
        .iter()
        .map(|s| {
            let devs: Vec<f64> = roots
                .iter()
                .filter(|r| r.matched_string == Some(s.id))
                .filter_map(|r| r.deviation)
                .collect();
            let count = devs.len();
            StringStats {
                string_id: s.id,
                label: s.label(),
                kind: s.kind,
                gamma: s.gamma_exact.clone(),
                count,
                mean_deviation: (count > 0).then(|| devs.iter().sum::<f64>() / count as f64),
                max_deviation: devs.iter().copied().reduce(f64::max),
            }
        })
        .collect();
    CompareSummary {
        strings: stats,
        unmatched: roots.iter().filter(|r| r.matched_string.is_none()).count(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSummary {
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
    pub intersections: usize,
    pub accepted: usize,
    pub rejected_left_window: usize,
    pub rejected_not_converged: usize,
    pub rejected_positive_imaginary: usize,
    pub rejected_evaluation: usize,
    pub invalid_nodes: usize,
}

fn solver_summary(out: &SolveOutput, options: &SolverOptions) -> SolverSummary {
    let count = |f: fn(&Rejection) -> bool| out.rejected.iter().filter(|r| f(&r.rejection)).count();
    SolverSummary {
        window: out.window,
        nx: options.nx,
        ny: options.ny,
        intersections: out.intersections.len(),
        accepted: out.resonances.len(),
        rejected_left_window: count(|r| matches!(r, Rejection::LeftWindow { .. })),
        rejected_not_converged: count(|r| matches!(r, Rejection::NotConverged { .. })),
        rejected_positive_imaginary: count(|r| matches!(r, Rejection::PositiveImaginary { .. })),
        rejected_evaluation: count(|r| matches!(r, Rejection::Evaluation { .. })),
        invalid_nodes: out.invalid_nodes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub polygon_ms: f64,
    pub solve_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: Config,
    pub notices: Vec<String>,
    pub polygon: PolygonSummary,
    pub strings: Vec<ResonanceString>,
    pub predictions: Vec<PredictedPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSummary>,
    pub resonances: Vec<Resonance>,
    pub statistics: CompareSummary,
    /// Wall-clock timings; left out unless requested so that reports stay
    /// byte-identical between runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineOptions {
    pub allow_nongeneric: bool,
    /// Skip the numerical search and report only theory.
    pub solve: bool,
    pub timing: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            allow_nongeneric: false,
            solve: true,
            timing: false,
        }
    }
}

/// Everything the pipeline produces, including the raw solver output used
/// for plotting.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub system: DeltaSystem,
    pub polygon: NewtonPolygon,
    pub strings: Vec<ResonanceString>,
    pub window: Window,
    pub solve: Option<SolveOutput>,
    pub report: RunReport,
}

pub fn effective_window(config: &Config, system: &DeltaSystem, strings: &[ResonanceString]) -> Window {
    config.window.unwrap_or_else(|| default_window(system, strings))
}

pub fn solver_options(config: &Config) -> SolverOptions {
    let grid = config.grid.unwrap_or(GridConfig {
        nx: DEFAULT_GRID,
        ny: DEFAULT_GRID,
    });
    SolverOptions {
        nx: grid.nx,
        ny: grid.ny,
        match_tol: config.match_tol,
    }
}

/// Polygon, strings and predictions for a configuration; non-generic input
/// is an error unless allowed.
pub fn theory_stage(config: &Config, allow_nongeneric: bool) -> Result<(DeltaSystem, Vec<String>, NewtonPolygon, Vec<ResonanceString>)> {
    let (system, notices) = config.system()?;
    let polygon = build_polygon(&system)?;
    let strings = if polygon.genericity.generic {
        strings_for(&system)?
    } else if allow_nongeneric {
        strings_from_polygon(&system, &polygon)?
    } else {
        return Err(ResonanceError::NonGeneric(polygon.genericity.summary()));
    };
    Ok((system, notices, polygon, strings))
}

pub fn run_pipeline_full(config: &Config, options: &PipelineOptions) -> Result<PipelineRun> {
    let t0 = Instant::now();
    let (system, notices, polygon, strings) = theory_stage(config, options.allow_nongeneric)?;
    let window = effective_window(config, &system, &strings);
    window.check()?;
    let mut predictions = Vec::new();
    for s in &strings {
        predictions.extend(predict_points(s, &system, &window)?);
    }
    let summary = polygon_summary(&system, &polygon)?;
    let polygon_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let sopts = solver_options(config);
    let solved = if options.solve {
        Some(solve(&system, &strings, &window, &sopts)?)
    } else {
        None
    };
    let solve_ms = t1.elapsed().as_secs_f64() * 1e3;
    let resonances = solved.as_ref().map(|s| s.resonances.clone()).unwrap_or_default();
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        config: Config {
            window: Some(window),
            ..config.clone()
        },
        notices,
        polygon: summary,
        strings: strings.clone(),
        predictions,
        solver: solved.as_ref().map(|s| solver_summary(s, &sopts)),
        statistics: string_statistics(&strings, &resonances),
        resonances,
        timing: options.timing.then_some(Timing { polygon_ms, solve_ms }),
    };
    Ok(PipelineRun {
        system,
        polygon,
        strings,
        window,
        solve: solved,
        report,
    })
}

pub fn run_pipeline(config: &Config, options: &PipelineOptions) -> Result<RunReport> {
    Ok(run_pipeline_full(config, options)?.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygon::StringKind;

    #[test]
    fn config_parses_and_sorts() {
        let text = r#"{"h": 0.1, "deltas": [{"x": 6, "beta": 2, "c": 1}, {"x": 0, "beta": 2, "c": 1}],
                       "grid": {"nx": 64, "ny": 32}}"#;
        let cfg = Config::from_json(text).unwrap();
        let (system, notices) = cfg.system().unwrap();
        assert_eq!(system.deltas[0].x, 0.0);
        assert_eq!(notices.len(), 1);
        assert_eq!(solver_options(&cfg).nx, 64);
    }

    #[test]
    fn config_errors() {
        assert!(Config::from_json(r#"{"h": 0.1, "deltas": [], "extra": 1}"#).is_err());
        assert!(Config::from_json(r#"{"h": 0.1, "deltas": [{"x": 0, "beta": 1}]}"#).is_err());
        let cfg = Config::from_json(r#"{"h": -0.1, "deltas": [{"x": 0, "beta": 1, "c": 1}]}"#).unwrap();
        assert!(cfg.system().is_err());
        let dup = r#"{"h": 0.1, "deltas": [{"x": 0, "beta": 1, "c": 1}, {"x": 0, "beta": 1, "c": 1}]}"#;
        assert!(Config::from_json(dup).unwrap().system().is_err());
        let bad_window = r#"{"h": 0.1, "deltas": [{"x": 0, "beta": 1, "c": 1}, {"x": 1, "beta": 1, "c": 1}],
                             "window": {"re_min": 0, "re_max": 1, "im_min": -1, "im_max": 0}}"#;
        assert!(Config::from_json(bad_window).unwrap().system().is_err());
    }

    #[test]
    fn fixtures_match_expected_polygon_data() {
        for f in builtin_fixtures() {
            let p = build_polygon(&f.system).unwrap();
            let slopes: Vec<String> = p.slopes.iter().map(|s| s.gamma.to_string()).collect();
            assert_eq!(slopes, f.expected.slopes, "{}", f.name);
            assert_eq!(p.genericity.generic, f.expected.generic, "{}", f.name);
            assert_eq!(p.slopes.len(), f.expected.string_count, "{}", f.name);
            assert_eq!(dominant_pair(&f.system).unwrap().first(), f.expected.dominant, "{}", f.name);
        }
    }

    #[test]
    fn fixture_lookup() {
        assert_eq!(fixture("ex2.11").unwrap().expected.slopes, vec!["1/8", "3/8"]);
        assert_eq!(fixture("ex2.12d").unwrap().expected.string_count, 2);
        assert_eq!(fixture("ex2.12e").unwrap().expected.string_count, 3);
        assert!(fixture("nope").is_none());
    }

    #[test]
    fn nongeneric_pipeline_is_refused_unless_allowed() {
        let cfg = Config::from_fixture(&fixture("ex9.2").unwrap());
        let opts = PipelineOptions {
            solve: false,
            ..Default::default()
        };
        match run_pipeline(&cfg, &opts) {
            Err(ResonanceError::NonGeneric(msg)) => assert!(msg.contains("γ̃_12 = γ̃_34"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let report = run_pipeline(
            &cfg,
            &PipelineOptions {
                allow_nongeneric: true,
                ..opts
            },
        )
        .unwrap();
        assert!(!report.polygon.generic);
        assert_eq!(report.polygon.violations[0].coincident_pairs, vec![Pair::new(1, 2), Pair::new(3, 4)]);
    }

    #[test]
    fn n2_minimal_report() {
        let mut cfg = Config::from_fixture(&fixture("n2").unwrap());
        cfg.grid = Some(GridConfig { nx: 256, ny: 128 });
        let report = run_pipeline(&cfg, &PipelineOptions::default()).unwrap();
        assert_eq!(report.schema_version, SCHEMA_VERSION);
        assert_eq!(report.strings.len(), 1);
        assert_eq!(report.strings[0].kind, StringKind::Dominant);
        assert!(!report.resonances.is_empty());
        assert_eq!(report.statistics.strings[0].count, report.resonances.len());
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        for key in ["schema_version", "config", "polygon", "strings", "predictions", "resonances", "statistics"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert!(json.get("timing").is_none());
        assert_eq!(json["polygon"]["dominant"]["J"], 1);
        assert_eq!(json["polygon"]["slopes"][0]["gamma"], "1/3");
    }

    #[test]
    fn report_is_deterministic() {
        let mut cfg = Config::from_fixture(&fixture("ex2.11").unwrap());
        cfg.grid = Some(GridConfig { nx: 200, ny: 120 });
        let a = run_pipeline(&cfg, &PipelineOptions::default()).unwrap().to_json();
        let b = run_pipeline(&cfg, &PipelineOptions::default()).unwrap().to_json();
        assert_eq!(a, b);
    }
}
