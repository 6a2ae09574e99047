//! Batch front end. Every command reads the workspace from `--config` (or
//! the canonical objects when absent) and writes to `--out` or stdout.
//! Failures print one JSON line on stderr and map to an exit code.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::{Overrides, Workspace};
use crate::error::Error;
use crate::flow::{exp_flow, flow_jacobian};
use crate::foliation::leaf_sample;
use crate::geometry::Aabb;
use crate::kernel::convolve;
use crate::op::{apply_op, Grid, GridFunction, OpConfig, OpFunction};
use crate::svg;
use crate::verify::{run_all, run_suite, Report};

pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ESCAPE: i32 = 3;
pub const EXIT_NUMERICS: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "leafwise", version, about = "Fibred kernels and their operators on singular foliations")]
pub struct Cli {
    /// Workspace config (JSON). Without it only the canonical objects exist.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub ode_tol: Option<f64>,
    #[arg(long, global = true)]
    pub ode_max_steps: Option<usize>,
    #[arg(long, global = true)]
    pub quad_order: Option<usize>,
    /// Fail on flow escapes instead of masking the affected points.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the objects of the workspace as JSON.
    Info,
    /// Sample the leaf through a point; CSV of points.
    Leaf(LeafArgs),
    /// Flow a point along a combination of generators.
    Flow(FlowArgs),
    /// Apply a kernel to a function on a grid; CSV grid.
    Apply(ApplyArgs),
    /// Apply the convolution of two kernels; optionally compare with the
    /// composition of the two operators.
    ConvolveApply(ConvolveArgs),
    /// Run verification suites and print a JSON report.
    Verify(VerifyArgs),
    /// Render a grid CSV (or a leaf CSV) as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct LeafArgs {
    #[arg(long)]
    pub foliation: String,
    /// Comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
    /// Maximum number of flows.
    #[arg(long, default_value_t = 2000)]
    pub budget: usize,
    /// Also write an SVG dot plot here.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    #[arg(long)]
    pub foliation: String,
    #[arg(long, allow_hyphen_values = true)]
    pub xi: String,
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
    /// Include the Jacobian in x.
    #[arg(long)]
    pub jacobian: bool,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// `lo:hi` per axis, comma-separated.
    #[arg(long = "box", allow_hyphen_values = true)]
    pub bx: String,
    /// Points per axis; one value for all axes or one per axis.
    #[arg(long, default_value = "41")]
    pub res: String,
    /// Also write an SVG plot here.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub kernel: String,
    #[arg(long)]
    pub function: String,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct ConvolveArgs {
    #[arg(long)]
    pub left: String,
    #[arg(long)]
    pub right: String,
    #[arg(long)]
    pub function: String,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Report the sup distance to Op(left)Op(right)f on stderr.
    #[arg(long)]
    pub compare: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suite name, or `all`.
    #[arg(default_value = "all")]
    pub suite: String,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// CSV written by `apply`, `convolve-apply` or `leaf`.
    #[arg(long)]
    pub input: PathBuf,
    /// Draw leaf points inside this foliation's chart.
    #[arg(long)]
    pub foliation: Option<String>,
    #[arg(long)]
    pub title: Option<String>,
}

/// Errors surfaced by the CLI: library errors plus I/O.
#[derive(Debug)]
enum Failure {
    Lib(Error),
    Io(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Parse { .. } => "parse",
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::Eval(_) => "eval",
        Error::DomainEscape { .. } => "domain_escape",
        Error::StepLimit(_) => "step_limit",
        Error::BaseMismatch(_) => "base_mismatch",
        Error::NotABisection(_) => "not_a_bisection",
        Error::EmptyTranslate => "empty_translate",
        Error::SupportViolation(_) => "support_violation",
        Error::QuadratureFailure(_) => "quadrature_failure",
        Error::SideMismatch(_) => "side_mismatch",
        Error::HostMismatch(_) => "host_mismatch",
        Error::NotTransverse(_) => "not_transverse",
        Error::BracketNotZero { .. } => "bracket_not_zero",
        Error::InsufficientLeafSampling { .. } => "insufficient_leaf_sampling",
        Error::NestingLimit(_) => "nesting_limit",
        Error::Invalid(_) => "invalid",
        Error::Config(_) => "config",
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DomainEscape { .. } | Error::StepLimit(_) => EXIT_ESCAPE,
        Error::QuadratureFailure(_)
        | Error::Eval(_)
        | Error::NestingLimit(_)
        | Error::InsufficientLeafSampling { .. } => EXIT_NUMERICS,
        _ => EXIT_CONFIG,
    }
}

fn report_failure(f: &Failure) -> i32 {
    let (k, msg, code) = match f {
        Failure::Lib(e) => (kind(e), e.to_string(), exit_code(e)),
        Failure::Io(m) => ("io", m.clone(), EXIT_CONFIG),
        Failure::Usage(m) => ("usage", m.clone(), EXIT_CONFIG),
    };
    eprintln!("{}", json!({ "error": k, "message": msg }));
    code
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            return report_failure(&Failure::Usage(first));
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(f) => report_failure(&f),
    }
}

fn overrides(cli: &Cli) -> Overrides {
    Overrides {
        ode_tol: cli.ode_tol,
        ode_max_steps: cli.ode_max_steps,
        quad_order: cli.quad_order,
        seed: cli.seed,
        strict: cli.strict,
    }
}

fn workspace(cli: &Cli) -> CliResult<Workspace> {
    let o = overrides(cli);
    Ok(match &cli.config {
        Some(p) => Workspace::load(p, &o)?,
        None => Workspace::canonical(&o)?,
    })
}

fn execute(cli: &Cli) -> CliResult<i32> {
    let ws = workspace(cli)?;
    let op_cfg = OpConfig { quad: *ws.quad(), strict: ws.settings.strict };
    match &cli.command {
        Command::Info => emit(cli, &pretty(&info(&ws))).map(|_| 0),
        Command::Leaf(a) => {
            let f = ws.foliation(&a.foliation)?;
            let x0 = parse_vec(&a.point, "point")?;
            let leaf = leaf_sample(f, &x0, a.budget, &ws.settings.leaf)?;
            if let Some(p) = &a.svg {
                write_file(p, &svg::leaf_plot(&leaf.points, f.chart(), &format!("leaf of {} through {}", a.foliation, a.point))?)?;
            }
            emit(cli, &points_csv(&leaf.points))?;
            summary(json!({ "points": leaf.len(), "flows": leaf.flows, "escapes": leaf.escapes }));
            Ok(0)
        }
        Command::Flow(a) => {
            let f = ws.foliation(&a.foliation)?;
            let xi = parse_vec(&a.xi, "xi")?;
            let x = parse_vec(&a.point, "point")?;
            let y = exp_flow(f, &xi, &x, f.flow_config())?;
            let mut out = json!({ "foliation": a.foliation, "xi": xi, "point": x, "endpoint": y });
            if a.jacobian {
                let j = flow_jacobian(f, &xi, &x, f.flow_config())?;
                let rows: Vec<Vec<f64>> = (0..j.nrows()).map(|i| j.row(i).iter().copied().collect()).collect();
                out["jacobian"] = json!(rows);
            }
            emit(cli, &pretty(&out)).map(|_| 0)
        }
        Command::Apply(a) => {
            let k = ws.kernel(&a.kernel)?;
            let f = ws.function(&a.function)?;
            let grid = parse_grid(&a.grid)?;
            let applied = apply_op(k, f, &grid, &op_cfg)?;
            write_grid(cli, &a.grid, &applied.values, &format!("Op({}) {}", a.kernel, a.function))?;
            summary(json!({ "points": grid.len(), "masked": applied.masked }));
            Ok(0)
        }
        Command::ConvolveApply(a) => {
            let left = ws.kernel(&a.left)?;
            let right = ws.kernel(&a.right)?;
            let f = ws.function(&a.function)?;
            let grid = parse_grid(&a.grid)?;
            let ab = convolve(left, right)?;
            let applied = apply_op(&ab, f, &grid, &op_cfg)?;
            write_grid(cli, &a.grid, &applied.values, &format!("Op({}*{}) {}", a.left, a.right, a.function))?;
            let mut s = json!({ "points": grid.len(), "masked": applied.masked });
            if a.compare {
                let inner = OpFunction::new(right, f, op_cfg.quad);
                let composed = apply_op(left, &inner, &grid, &op_cfg)?;
                s["max_abs_diff"] = json!(max_diff_ignoring_masks(&applied.values, &composed.values));
                s["masked_composed"] = json!(composed.masked);
            }
            summary(s);
            Ok(0)
        }
        Command::Verify(a) => {
            let checks = if a.suite == "all" { run_all(&ws)? } else { run_suite(&a.suite, &ws)? };
            let report = Report::new(checks);
            let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Io(e.to_string()))?;
            emit(cli, &(text + "\n"))?;
            Ok(if report.passed { 0 } else { EXIT_VERIFY_FAILED })
        }
        Command::Plot(a) => {
            let text = std::fs::read_to_string(&a.input)
                .map_err(|e| Failure::Io(format!("cannot read {}: {e}", a.input.display())))?;
            let title = a.title.clone().unwrap_or_else(|| a.input.display().to_string());
            let out = if text.trim_start().starts_with("# box=") {
                svg::grid_plot(&GridFunction::from_csv_masked(&text)?, &title)?
            } else {
                let pts = parse_points_csv(&text)?;
                let chart = match &a.foliation {
                    Some(n) => ws.foliation(n)?.chart().clone(),
                    None => Aabb::bounding(&pts).ok_or_else(|| Error::Config("no points to plot".into()))?,
                };
                svg::leaf_plot(&pts, &chart, &title)?
            };
            emit(cli, &out).map(|_| 0)
        }
    }
}

fn info(ws: &Workspace) -> Value {
    let foliations: serde_json::Map<String, Value> = ws
        .foliations()
        .map(|(n, f)| {
            let gens: Vec<String> = f.generators().iter().map(|g| g.to_string()).collect();
            let chart: Vec<[f64; 2]> = (0..f.dim()).map(|k| [f.chart().lo[k], f.chart().hi[k]]).collect();
            (n.clone(), json!({ "dim": f.dim(), "box": chart, "generators": gens, "xi_radius": f.xi_radius() }))
        })
        .collect();
    let bisubmersions: serde_json::Map<String, Value> = ws
        .bisubmersions()
        .map(|(n, u)| (n.clone(), json!({ "dim": u.dim(), "fibre_dim": u.fibre_dim(), "foliation": u.foliation().name() })))
        .collect();
    let kernels: serde_json::Map<String, Value> = ws
        .kernels()
        .map(|(n, k)| {
            let diracs = k.atoms().iter().filter(|a| a.is_dirac()).count();
            (
                n.clone(),
                json!({
                    "side": k.side(),
                    "foliation": k.base().name(),
                    "atoms": k.atoms().len(),
                    "dirac_atoms": diracs,
                    "depth": k.depth(),
                }),
            )
        })
        .collect();
    json!({
        "settings": ws.settings,
        "foliations": foliations,
        "bisubmersions": bisubmersions,
        "bisections": ws.bisections().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "kernels": kernels,
        "functions": ws.functions().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "checks": ws.checks().len(),
    })
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

fn summary(v: Value) {
    eprintln!("{v}");
}

fn emit(cli: &Cli, text: &str) -> CliResult<()> {
    match &cli.out {
        Some(p) => write_file(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Failure::Io(e.to_string()))
        }
    }
}

fn write_file(p: &Path, text: &str) -> CliResult<()> {
    std::fs::write(p, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", p.display())))
}

fn write_grid(cli: &Cli, args: &GridArgs, g: &GridFunction, title: &str) -> CliResult<()> {
    if let Some(p) = &args.svg {
        write_file(p, &svg::grid_plot(g, title)?)?;
    }
    emit(cli, &g.to_csv())
}

fn max_diff_ignoring_masks(a: &GridFunction, b: &GridFunction) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .filter(|(x, y)| !x.is_nan() && !y.is_nan())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn parse_vec(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("bad {what} component '{t}'"))))
        .collect()
}

fn parse_grid(a: &GridArgs) -> CliResult<Grid> {
    let mut iv = Vec::new();
    for part in a.bx.split(',') {
        let (l, h) = part.split_once(':').ok_or_else(|| Failure::Usage(format!("bad box interval '{part}'")))?;
        let lo = l.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("bad box bound '{l}'")))?;
        let hi = h.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("bad box bound '{h}'")))?;
        iv.push([lo, hi]);
    }
    let bx = Aabb::from_intervals(&iv)?;
    let res: Vec<usize> = a
        .res
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| Failure::Usage(format!("bad resolution '{t}'"))))
        .collect::<CliResult<_>>()?;
    let res = match res.len() {
        1 => vec![res[0]; bx.dim()],
        _ => res,
    };
    Ok(Grid::new(bx, res)?)
}

fn points_csv(points: &[Vec<f64>]) -> String {
    let dim = points.first().map_or(0, Vec::len);
    let mut s = (1..=dim).map(|k| format!("x{k}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for p in points {
        s.push_str(&p.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

fn parse_points_csv(text: &str) -> CliResult<Vec<Vec<f64>>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| parse_vec(l, "point"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_classes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::DomainEscape { t: 0.0, point: vec![] }), EXIT_ESCAPE);
        assert_eq!(exit_code(&Error::StepLimit(3)), EXIT_ESCAPE);
        assert_eq!(exit_code(&Error::QuadratureFailure("q".into())), EXIT_NUMERICS);
    }

    #[test]
    fn grid_arguments_parse() {
        let g = parse_grid(&GridArgs { bx: "-1:1,0:2".into(), res: "5".into(), svg: None }).unwrap();
        assert_eq!(g.res, vec![5, 5]);
        let g = parse_grid(&GridArgs { bx: "-1:1,0:2".into(), res: "3,4".into(), svg: None }).unwrap();
        assert_eq!(g.len(), 12);
        assert!(parse_grid(&GridArgs { bx: "-1,1".into(), res: "5".into(), svg: None }).is_err());
    }

    #[test]
    fn points_round_trip_through_csv() {
        let pts = vec![vec![1.0, -0.5], vec![0.25, 3.0]];
        assert_eq!(parse_points_csv(&points_csv(&pts)).unwrap(), pts);
    }
}
