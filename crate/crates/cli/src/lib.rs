//! `metric-dcov` command line.
//!
//! [`run`] parses arguments, executes one subcommand and writes either a JSON
//! [`Report`] or a text summary. Exit codes: 0 success, 1 runtime error,
//! 2 usage error. A non-rejection is not an error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use metric_dcov::centering::double_center;
use metric_dcov::dcov::{
    dcov_definition_oracle, dcov_kernel6_oracle, dcov_result, dcov_tensor_oracle, dcov_trace, KERNEL6_MAX_N,
};
use metric_dcov::inference::calibrate::{rejection_rate, CalibrationConfig, Generator, TestMethod};
use metric_dcov::inference::{
    asymptotic_test, categorical_dcov, pearson_chisq, permutation_test, uncorrelated_distances_demo,
    ContingencyTable, TestResult,
};
use metric_dcov::io::{
    ingest, ingest_single, parse_metric, read_contingency_csv, CategoricalSummary, DatasetSpec, NegTypeEntry, OracleSummary, Report,
    RunConfig, SideSpec,
};
use metric_dcov::metric::{distance_matrix, power_transform, DistanceMatrix, MetricKind, MetricSpec, Point, SampleSet};
use metric_dcov::negtype::{embed_sample, negtype_check, search_negtype_violation, UniformCube, Verdict, DEFAULT_TOL};
use metric_dcov::{Error, Result};

mod text;

/// Samples above this size skip the O(n³) spectral check in `dcov` and `test`.
const AUTO_CHECK_MAX_N: usize = 2000;
/// Largest sample for the tensor oracle in `dcov --oracles`.
const TENSOR_ORACLE_MAX_N: usize = 300;

#[derive(Parser, Debug)]
#[command(name = "metric-dcov", version, about = "Distance covariance and independence tests in metric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Debug)]
struct Global {
    /// Metric on x: euclidean | minkowski:p | chebyshev | discrete | precomputed:path
    #[arg(long, global = true, default_value = "euclidean")]
    metric_x: String,
    /// Metric on y (same forms as --metric-x)
    #[arg(long, global = true, default_value = "euclidean")]
    metric_y: String,
    /// Exponent r in (0, 1] applied to both metrics (d becomes d^r)
    #[arg(long, global = true, default_value_t = 1.0)]
    power: f64,
    /// Worker threads; results do not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Output::Json)]
    output: Output,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Record wall-clock time in the report (makes reports non-reproducible)
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Output {
    Json,
    Text,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// CSV file with a header row; row i holds the pair (x_i, y_i)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated x columns
    #[arg(long, value_delimiter = ',')]
    x_cols: Vec<String>,
    /// Comma-separated y columns
    #[arg(long, value_delimiter = ',')]
    y_cols: Vec<String>,
    /// Comma-separated columns holding category labels
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Permutation,
    Asymptotic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Side {
    X,
    Y,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate dcov, dvar and dcor
    Dcov {
        #[command(flatten)]
        data: DataArgs,
        /// Cross-check the estimate against independent evaluation routes
        #[arg(long)]
        oracles: bool,
    },
    /// Test independence of x and y
    Test {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = MethodArg::Permutation)]
        method: MethodArg,
        #[arg(long, default_value_t = 999)]
        permutations: usize,
        #[arg(long, default_value_t = 999)]
        mc_draws: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Check negative type on one sample and embed it when it passes
    Diagnose {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = Side::X)]
        side: Side,
        /// Relative eigenvalue tolerance
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Instead of reading data, search this many random configurations
        /// in [-1, 1]^dim for a violation under --metric-x
        #[arg(long)]
        search: Option<u64>,
        #[arg(long, default_value_t = 8)]
        search_points: usize,
        #[arg(long, default_value_t = 3)]
        search_dim: usize,
    },
    /// Closed-form dcov of a contingency table next to Pearson's chi-square
    Categorical {
        /// Table CSV: header `,y1,y2,…`, rows `x,count,count,…`
        #[arg(long, conflicts_with = "data")]
        table: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Rejection rate of a test over synthetic data
    Calibrate {
        #[arg(long, default_value = "independent-uniform")]
        generator: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Permutation)]
        method: MethodArg,
        #[arg(long, default_value_t = 199)]
        permutations: usize,
        #[arg(long, default_value_t = 199)]
        mc_draws: usize,
    },
    /// Dependent data whose distance differences are uncorrelated
    DemoCovdist {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 499)]
        permutations: usize,
    },
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    let result = match cli.global.threads {
        Some(0) => Err(Error::InvalidArgument("--threads must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))
            .and_then(|pool| pool.install(|| execute(&cli))),
        None => execute(&cli),
    };
    match result {
        Ok(report) => {
            let body = match cli.global.output {
                Output::Json => report.to_json() + "\n",
                Output::Text => text::render(&report),
            };
            for w in &report.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            match out.write_all(body.as_bytes()) {
                Ok(()) => 0,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    1
                }
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn execute(cli: &Cli) -> Result<Report> {
    let start = Instant::now();
    let g = &cli.global;
    let mut report = match &cli.command {
        Command::Dcov { data, oracles } => cmd_dcov(g, data, *oracles)?,
        Command::Test { data, method, permutations, mc_draws, alpha } => {
            cmd_test(g, data, *method, *permutations, *mc_draws, *alpha)?
        }
        Command::Diagnose { data, side, tol, search, search_points, search_dim } => {
            cmd_diagnose(g, data, *side, *tol, *search, *search_points, *search_dim)?
        }
        Command::Categorical { table, data } => cmd_categorical(g, table.as_ref(), data)?,
        Command::Calibrate { generator, n, trials, alpha, method, permutations, mc_draws } => {
            cmd_calibrate(g, generator, *n, *trials, *alpha, *method, *permutations, *mc_draws)?
        }
        Command::DemoCovdist { n, permutations } => cmd_demo(g, *n, *permutations)?,
    };
    report.seed = Some(g.seed);
    if g.timing {
        report.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(report)
}

fn metric(s: &str, power: f64) -> Result<MetricSpec> {
    let m = parse_metric(s)?;
    if power == 1.0 {
        Ok(m)
    } else {
        power_transform(&m, power)
    }
}

fn base_config(g: &Global, data: Option<&DataArgs>) -> Result<RunConfig> {
    if !(g.power > 0.0 && g.power <= 1.0) {
        return Err(Error::InvalidPower(g.power));
    }
    let mut c = RunConfig { power: g.power, ..Default::default() };
    if let Some(d) = data {
        c.data = d.data.as_ref().map(|p| p.display().to_string());
        c.x_columns = d.x_cols.clone();
        c.y_columns = d.y_cols.clone();
        c.categorical = d.categorical.clone();
    }
    Ok(c)
}

struct Loaded {
    x: SampleSet,
    y: SampleSet,
    mx: MetricSpec,
    my: MetricSpec,
    dx: DistanceMatrix,
    dy: DistanceMatrix,
}

fn load(g: &Global, d: &DataArgs, config: &mut RunConfig) -> Result<Loaded> {
    let (mx, my) = (metric(&g.metric_x, g.power)?, metric(&g.metric_y, g.power)?);
    config.metric_x = Some(mx.to_string());
    config.metric_y = Some(my.to_string());
    let spec = DatasetSpec {
        path: d.data.clone(),
        x: SideSpec { columns: d.x_cols.clone(), metric: mx.clone() },
        y: SideSpec { columns: d.y_cols.clone(), metric: my.clone() },
        categorical: d.categorical.clone(),
    };
    let (x, y) = ingest(&spec)?;
    let dx = distance_matrix(&mx, &x)?;
    let dy = distance_matrix(&my, &y)?;
    Ok(Loaded { x, y, mx, my, dx, dy })
}

/// Whether the metric is known to be of negative type on every sample.
fn known_negative_type(m: &MetricSpec) -> bool {
    match m.kind() {
        MetricKind::Euclidean | MetricKind::Discrete => true,
        MetricKind::Minkowski(p) => *p <= 2.0,
        _ => false,
    }
}

/// Spectral check for metrics not known to be of negative type, plus a note
/// for ℓ¹, which is of negative type but not of strong negative type.
fn negtype_warnings(name: &str, m: &MetricSpec, s: &SampleSet, d: &DistanceMatrix, report: &mut Report) -> Result<bool> {
    if let MetricKind::Minkowski(p) = m.kind() {
        if *p == 1.0 && m.power() == 1.0 && s.dim().is_some_and(|k| k >= 2) {
            report.warnings.push(format!(
                "{name}: minkowski:1 is of negative type but not of strong negative type; dcov = 0 does not imply independence (use --power < 1)"
            ));
        }
    }
    if known_negative_type(m) || d.n() < 2 {
        return Ok(false);
    }
    if d.n() > AUTO_CHECK_MAX_N {
        report.warnings.push(format!(
            "{name}: negative type of `{m}` not checked for n = {} > {AUTO_CHECK_MAX_N}; run `diagnose`",
            d.n()
        ));
        return Ok(false);
    }
    let r = negtype_check(d, DEFAULT_TOL)?;
    let violated = r.verdict == Verdict::Violation;
    if violated {
        report.warnings.push(format!(
            "{name}: `{m}` is not of negative type on this sample (largest centered eigenvalue {:.3e}); dcov may be negative and the right-tail test is not justified, so the two-sided p-value is reported as well",
            r.max_eigenvalue
        ));
    }
    report.negtype.push(entry(name, m, r, None));
    Ok(violated)
}

fn entry(side: &str, m: &MetricSpec, report: metric_dcov::NegTypeReport, emb: Option<(usize, f64)>) -> NegTypeEntry {
    NegTypeEntry {
        side: side.into(),
        metric: m.to_string(),
        report,
        embedding_dim: emb.map(|e| e.0),
        embedding_max_error: emb.map(|e| e.1),
        search_iteration: None,
        points: None,
    }
}

fn cmd_dcov(g: &Global, d: &DataArgs, oracles: bool) -> Result<Report> {
    let mut config = base_config(g, Some(d))?;
    config.oracles = Some(oracles);
    let l = load(g, d, &mut config)?;
    let mut report = Report::new("dcov", config);
    let (kc, lc) = (double_center(&l.dx), double_center(&l.dy));
    report.dcov = Some(dcov_result(&kc, &lc)?);
    negtype_warnings("x", &l.mx, &l.x, &l.dx, &mut report)?;
    negtype_warnings("y", &l.my, &l.y, &l.dy, &mut report)?;
    if oracles {
        let n = l.x.len();
        let kernel6 = if n <= KERNEL6_MAX_N { Some(dcov_kernel6_oracle(&l.x, &l.y, &l.mx, &l.my)?) } else { None };
        let tensor = if n <= TENSOR_ORACLE_MAX_N {
            match (embed_sample(&l.dx, DEFAULT_TOL), embed_sample(&l.dy, DEFAULT_TOL)) {
                (Ok(ex), Ok(ey)) => Some(dcov_tensor_oracle(&ex, &ey, None)?),
                _ => None,
            }
        } else {
            None
        };
        report.oracles = Some(OracleSummary {
            trace: dcov_trace(&kc, &lc)?,
            definition: dcov_definition_oracle(&l.dx, &l.dy, None)?,
            kernel6,
            tensor,
        });
    }
    Ok(report)
}

fn cmd_test(g: &Global, d: &DataArgs, method: MethodArg, b: usize, mc: usize, alpha: f64) -> Result<Report> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("--alpha must lie in (0, 1), got {alpha}")));
    }
    let mut config = base_config(g, Some(d))?;
    config.alpha = Some(alpha);
    match method {
        MethodArg::Permutation => {
            config.method = Some("permutation".into());
            config.permutations = Some(b);
        }
        MethodArg::Asymptotic => {
            config.method = Some("asymptotic".into());
            config.mc_draws = Some(mc);
        }
    }
    let l = load(g, d, &mut config)?;
    if l.x.len() < 2 {
        return Err(Error::InvalidArgument("a test needs at least two rows".into()));
    }
    let mut report = Report::new("test", config);
    let (kc, lc) = (double_center(&l.dx), double_center(&l.dy));
    report.dcov = Some(dcov_result(&kc, &lc)?);
    negtype_warnings("x", &l.mx, &l.x, &l.dx, &mut report)?;
    negtype_warnings("y", &l.my, &l.y, &l.dy, &mut report)?;
    let mut result: TestResult = match method {
        MethodArg::Permutation => permutation_test(&kc, &lc, b, g.seed)?,
        MethodArg::Asymptotic => asymptotic_test(&kc, &lc, mc, g.seed)?,
    };
    if let Some(e) = result.eigenvalues.as_mut() {
        // the full list has n² entries; keep the leading ones
        e.truncate(50);
    }
    report.tests.push(result);
    Ok(report)
}

fn cmd_diagnose(
    g: &Global,
    d: &DataArgs,
    side: Side,
    tol: f64,
    search: Option<u64>,
    points: usize,
    dim: usize,
) -> Result<Report> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("--tol must be non-negative, got {tol}")));
    }
    let mut config = base_config(g, Some(d))?;
    config.tol = Some(tol);
    if let Some(iterations) = search {
        let m = metric(&g.metric_x, g.power)?;
        config.metric_x = Some(m.to_string());
        config.side = Some("x".into());
        config.trials = Some(iterations as usize);
        config.n = Some(points);
        let mut report = Report::new("diagnose", config);
        let cube = UniformCube { dim, half_width: 1.0 };
        match search_negtype_violation(&m, &cube, points, iterations, g.seed, tol)? {
            Some(found) => {
                let mut e = entry("x", &m, found.report, None);
                e.search_iteration = Some(found.iteration);
                e.points = Some(
                    found
                        .sample
                        .points()
                        .iter()
                        .map(|p| match p {
                            Point::Vector(v) => v.clone(),
                            _ => Vec::new(),
                        })
                        .collect(),
                );
                report.negtype.push(e);
            }
            None => report.warnings.push(format!("no violation of negative type in {iterations} configurations")),
        }
        return Ok(report);
    }
    let (name, metric_str) = match side {
        Side::X => ("x", &g.metric_x),
        Side::Y => ("y", &g.metric_y),
    };
    let m = metric(metric_str, g.power)?;
    let cols = match side {
        Side::X => &d.x_cols,
        Side::Y => &d.y_cols,
    };
    config.side = Some(name.into());
    config.metric_x = (side == Side::X).then(|| m.to_string());
    config.metric_y = (side == Side::Y).then(|| m.to_string());
    let side_spec = SideSpec { columns: cols.clone(), metric: m.clone() };
    let sample = ingest_single(d.data.as_deref(), &side_spec, &d.categorical)?;
    let dist = distance_matrix(&m, &sample)?;
    let mut report = Report::new("diagnose", config);
    let r = negtype_check(&dist, tol)?;
    let emb = if r.verdict == Verdict::NegativeTypeOnSample {
        let e = embed_sample(&dist, tol)?;
        Some((e.dim(), e.max_roundtrip_error(&dist)))
    } else {
        None
    };
    report.negtype.push(entry(name, &m, r, emb));
    Ok(report)
}

fn cmd_categorical(g: &Global, table: Option<&PathBuf>, d: &DataArgs) -> Result<Report> {
    let mut config = base_config(g, Some(d))?;
    let t = match table {
        Some(p) => {
            config.table = Some(p.display().to_string());
            read_contingency_csv(p)?
        }
        None => {
            let path = d.data.as_ref().ok_or_else(|| Error::InvalidArgument("give --table or --data".into()))?;
            let label_sets = |cols: &[String], name: &str| -> Result<Vec<String>> {
                if cols.is_empty() {
                    return Err(Error::InvalidArgument(format!("no {name} columns given")));
                }
                Ok(cols.to_vec())
            };
            let (xc, yc) = (label_sets(&d.x_cols, "x")?, label_sets(&d.y_cols, "y")?);
            let mut categorical = d.categorical.clone();
            categorical.extend(xc.iter().chain(&yc).cloned());
            let (x, y) = ingest(&DatasetSpec {
                path: Some(path.clone()),
                x: SideSpec { columns: xc, metric: MetricSpec::discrete() },
                y: SideSpec { columns: yc, metric: MetricSpec::discrete() },
                categorical,
            })?;
            let labels = |s: &SampleSet| -> Vec<String> {
                s.points()
                    .iter()
                    .map(|p| match p {
                        Point::Label(l) => l.clone(),
                        other => format!("{other:?}"),
                    })
                    .collect()
            };
            ContingencyTable::from_labels(&labels(&x), &labels(&y))?
        }
    };
    config.metric_x = Some("discrete".into());
    config.metric_y = Some("discrete".into());
    let mut report = Report::new("categorical", config);
    let c = categorical_dcov(&t)?;
    let pearson = match pearson_chisq(&t) {
        Ok(v) => Some(v),
        Err(e) => {
            report.warnings.push(format!("Pearson chi-square undefined: {e}"));
            None
        }
    };
    report.categorical = Some(CategoricalSummary {
        n: t.n(),
        x_labels: t.x_labels().to_vec(),
        y_labels: t.y_labels().to_vec(),
        counts: t.counts().to_vec(),
        dcov: c,
        pearson_chisq: pearson,
    });
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn cmd_calibrate(
    g: &Global,
    generator: &str,
    n: usize,
    trials: usize,
    alpha: f64,
    method: MethodArg,
    b: usize,
    mc: usize,
) -> Result<Report> {
    let generator: Generator = generator.parse()?;
    let mut config = base_config(g, None)?;
    config.generator = Some(generator.to_string());
    config.n = Some(n);
    config.trials = Some(trials);
    config.alpha = Some(alpha);
    let method = match method {
        MethodArg::Permutation => {
            config.method = Some("permutation".into());
            config.permutations = Some(b);
            TestMethod::Permutation { permutations: b }
        }
        MethodArg::Asymptotic => {
            config.method = Some("asymptotic".into());
            config.mc_draws = Some(mc);
            TestMethod::Asymptotic { mc_draws: mc }
        }
    };
    let mut report = Report::new("calibrate", config);
    report.calibration.push(rejection_rate(&CalibrationConfig { generator, n, trials, alpha, method, seed: g.seed })?);
    Ok(report)
}

fn cmd_demo(g: &Global, n: usize, b: usize) -> Result<Report> {
    let mut config = base_config(g, None)?;
    config.n = Some(n);
    config.permutations = Some(b);
    let mut report = Report::new("demo-covdist", config);
    report.covdist = Some(uncorrelated_distances_demo(n, b, g.seed)?);
    Ok(report)
}
