use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use delta_resonance::determinant::{closed_form, direct_determinant, normalization, truncated_form};
use delta_resonance::report::{
    builtin_fixtures, curves_csv, effective_window, fixture, plot_svg, polygon_summary, polygon_svg, predictions_csv,
    resonances_csv, run_pipeline_full, theory_stage, Config, GridConfig, PipelineOptions, THEORY_SAMPLES,
};
use delta_resonance::theory::predict_points;
use delta_resonance::{ComplexPoint, ResonanceError, Window};

/// Resonances of semiclassical delta barriers: Newton polygon, string
/// predictions and numerical zeros of the scattering determinant.
#[derive(Parser, Debug)]
#[command(name = "rescli", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Newton polygon, slope set, dominant pair and genericity.
    Polygon(CommonArgs),
    /// Predicted resonance points and theory curves.
    Predict(CommonArgs),
    /// Numerical resonances in the search window.
    Solve(CommonArgs),
    /// Per-string comparison of numerical roots with theory.
    Compare(CommonArgs),
    /// SVG with zero contours, roots and theory curves.
    Plot(CommonArgs),
    /// List built-in fixtures, or print one as a config.
    Fixtures {
        /// Print this fixture's configuration as JSON.
        name: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Evaluate the normalized determinant at one point.
    Eval {
        #[command(flatten)]
        source: Source,
        /// Point as `re,im`.
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        z: ComplexPoint,
        #[arg(long, value_enum, default_value_t = Method::Closed)]
        method: Method,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct Source {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in fixture name (see `rescli fixtures`).
    #[arg(long)]
    fixture: Option<String>,
}

#[derive(Args, Debug)]
struct CommonArgs {
    #[command(flatten)]
    source: Source,
    /// Write output files here instead of printing to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Also write an SVG (`polygon` and `predict` only; `plot` always does).
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    /// Search window as `re_min,re_max,im_min,im_max`.
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    window: Option<Window>,
    #[arg(long)]
    match_tol: Option<f64>,
    /// Continue on non-generic input instead of exiting with status 2.
    #[arg(long)]
    allow_nongeneric: bool,
    /// Include stage timings in JSON reports.
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Direct,
    Closed,
    Truncated,
}

fn parse_floats(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_complex(s: &str) -> Result<ComplexPoint, String> {
    let v = parse_floats(s, 2)?;
    Ok(ComplexPoint::new(v[0], v[1]))
}

fn parse_window(s: &str) -> Result<Window, String> {
    let v = parse_floats(s, 4)?;
    Window::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn load_config(source: &Source) -> anyhow::Result<Config> {
    if let Some(path) = &source.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Config::from_json(&text)?)
    } else {
        let name = source.fixture.as_deref().expect("clap enforces one source");
        let f = fixture(name).ok_or_else(|| ResonanceError::Config(format!("unknown fixture {name:?}")))?;
        Ok(Config::from_fixture(&f))
    }
}

fn config_with_overrides(args: &CommonArgs) -> anyhow::Result<Config> {
    let mut config = load_config(&args.source)?;
    if args.nx.is_some() || args.ny.is_some() {
        let base = config.grid.unwrap_or(GridConfig {
            nx: delta_resonance::solver::DEFAULT_GRID,
            ny: delta_resonance::solver::DEFAULT_GRID,
        });
        config.grid = Some(GridConfig {
            nx: args.nx.unwrap_or(base.nx),
            ny: args.ny.unwrap_or(base.ny),
        });
    }
    if args.window.is_some() {
        config.window = args.window;
    }
    if args.match_tol.is_some() {
        config.match_tol = args.match_tol;
    }
    Ok(config)
}

/// Destination for one command's files. Without `--out` the main output goes
/// to stdout and extra files to the current directory.
struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    fn new(dir: Option<PathBuf>) -> anyhow::Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Self { dir })
    }

    fn main(&self, name: &str, body: &str) -> anyhow::Result<()> {
        match &self.dir {
            Some(d) => write_file(&d.join(name), body),
            None => {
                std::io::stdout().write_all(body.as_bytes())?;
                Ok(())
            }
        }
    }

    fn extra(&self, name: &str, body: &str) -> anyhow::Result<()> {
        let dir = self.dir.clone().unwrap_or_else(|| PathBuf::from("."));
        write_file(&dir.join(name), body)
    }
}

fn write_file(path: &Path, body: &str) -> anyhow::Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn pipeline_options(args: &CommonArgs, solve: bool) -> PipelineOptions {
    PipelineOptions {
        allow_nongeneric: args.allow_nongeneric,
        solve,
        timing: args.timing,
    }
}

fn cmd_polygon(args: &CommonArgs) -> anyhow::Result<()> {
    let config = config_with_overrides(args)?;
    let (system, notices) = config.system()?;
    notices.iter().for_each(|n| eprintln!("note: {n}"));
    let polygon = delta_resonance::polygon::build_polygon(&system)?;
    let sink = Sink::new(args.out.clone())?;
    sink.main("polygon.json", &json(&polygon_summary(&system, &polygon)?))?;
    if args.svg {
        sink.extra("polygon.svg", &polygon_svg(&polygon))?;
    }
    if !polygon.genericity.generic && !args.allow_nongeneric {
        return Err(ResonanceError::NonGeneric(polygon.genericity.summary()).into());
    }
    Ok(())
}

fn cmd_predict(args: &CommonArgs) -> anyhow::Result<()> {
    let config = config_with_overrides(args)?;
    let (system, notices, polygon, strings) = theory_stage(&config, args.allow_nongeneric)?;
    notices.iter().for_each(|n| eprintln!("note: {n}"));
    let window = effective_window(&config, &system, &strings);
    window.check()?;
    let mut points = Vec::new();
    for s in &strings {
        points.extend(predict_points(s, &system, &window)?);
    }
    let sink = Sink::new(args.out.clone())?;
    match args.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            sink.main("predictions.csv", &predictions_csv(&strings, &points))?;
            if sink.dir.is_some() {
                sink.extra("curves.csv", &curves_csv(&strings, &system, &window, THEORY_SAMPLES)?)?;
            }
        }
        Format::Json => {
            let body = serde_json::json!({ "window": window, "strings": strings, "predictions": points });
            sink.main("predictions.json", &json(&body))?;
        }
    }
    if args.svg {
        sink.extra("polygon.svg", &polygon_svg(&polygon))?;
        sink.extra("theory.svg", &plot_svg(&system, &strings, &window, None)?)?;
    }
    Ok(())
}

fn cmd_solve(args: &CommonArgs) -> anyhow::Result<()> {
    let config = config_with_overrides(args)?;
    let run = run_pipeline_full(&config, &pipeline_options(args, true))?;
    run.report.notices.iter().for_each(|n| eprintln!("note: {n}"));
    if let Some(s) = &run.report.solver {
        let rejected = s.rejected_left_window + s.rejected_not_converged + s.rejected_positive_imaginary + s.rejected_evaluation;
        eprintln!("{} resonances from {} intersections, {rejected} rejected", s.accepted, s.intersections);
    }
    let sink = Sink::new(args.out.clone())?;
    match args.format.unwrap_or(Format::Csv) {
        Format::Csv => sink.main("resonances.csv", &resonances_csv(&run.report.resonances))?,
        Format::Json => sink.main("report.json", &run.report.to_json())?,
    }
    if args.svg {
        sink.extra("plot.svg", &plot_svg(&run.system, &run.strings, &run.window, run.solve.as_ref())?)?;
    }
    Ok(())
}

fn cmd_compare(args: &CommonArgs) -> anyhow::Result<()> {
    let config = config_with_overrides(args)?;
    let run = run_pipeline_full(&config, &pipeline_options(args, true))?;
    let sink = Sink::new(args.out.clone())?;
    sink.main("compare.json", &json(&run.report.statistics))?;
    if sink.dir.is_some() {
        let mut report = run.report.to_json();
        report.push('\n');
        sink.extra("report.json", &report)?;
    }
    if args.svg {
        sink.extra("plot.svg", &plot_svg(&run.system, &run.strings, &run.window, run.solve.as_ref())?)?;
    }
    Ok(())
}

fn cmd_plot(args: &CommonArgs) -> anyhow::Result<()> {
    let config = config_with_overrides(args)?;
    let run = run_pipeline_full(&config, &pipeline_options(args, true))?;
    let sink = Sink::new(args.out.clone())?;
    sink.main("plot.svg", &plot_svg(&run.system, &run.strings, &run.window, run.solve.as_ref())?)
}

fn cmd_fixtures(name: Option<&str>, format: Format) -> anyhow::Result<()> {
    let mut stdout = std::io::stdout();
    if let Some(name) = name {
        let f = fixture(name).ok_or_else(|| ResonanceError::Config(format!("unknown fixture {name:?}")))?;
        stdout.write_all(json(&Config::from_fixture(&f)).as_bytes())?;
        return Ok(());
    }
    let fixtures = builtin_fixtures();
    match format {
        Format::Json => stdout.write_all(json(&fixtures).as_bytes())?,
        Format::Csv => {
            writeln!(stdout, "name,n,h,slopes,dominant,generic,description")?;
            for f in &fixtures {
                writeln!(
                    stdout,
                    "{},{},{},{},{},{},{}",
                    f.name,
                    f.system.deltas.len(),
                    f.system.h,
                    f.expected.slopes.join(" "),
                    f.expected.dominant,
                    f.expected.generic,
                    f.description
                )?;
            }
        }
    }
    Ok(())
}

fn relative(a: ComplexPoint, b: ComplexPoint) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

fn cmd_eval(source: &Source, z: ComplexPoint, method: Method) -> anyhow::Result<()> {
    let config = load_config(source)?;
    let (system, _) = config.system()?;
    let closed = closed_form(&system, z)?.value;
    let direct = direct_determinant(&system, z)?.ratio(&normalization(&system, z)?);
    let truncated = truncated_form(&system, z)?;
    let (value, others) = match method {
        Method::Direct => (direct, [("closed", closed), ("truncated", truncated)]),
        Method::Closed => (closed, [("direct", direct), ("truncated", truncated)]),
        Method::Truncated => (truncated, [("direct", direct), ("closed", closed)]),
    };
    println!("z = {} {:+}i", z.re, z.im);
    println!("value = {:.16e} {:+.16e}i", value.re, value.im);
    println!("abs = {:.16e}", value.norm());
    for (name, other) in others {
        println!("relative difference vs {name} = {:.3e}", relative(value, other));
    }
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("RES_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| ResonanceError::Config(format!("RES_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            bail!(ResonanceError::Config("RES_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow!(e))?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Polygon(a) => cmd_polygon(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Fixtures { name, format } => cmd_fixtures(name.as_deref(), *format),
        Command::Eval { source, z, method } => cmd_eval(source, *z, *method),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // status 2 is reserved for non-generic input
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<ResonanceError>() {
                Some(ResonanceError::NonGeneric(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
