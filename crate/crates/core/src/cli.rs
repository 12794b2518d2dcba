//! Command-line front end. Payloads go to stdout as JSON or CSV,
//! diagnostics to stderr.
//!
//! Exit codes: 0 ran, 1 solver failure, 2 invalid input, 3 the decider
//! returned `NotSeparated`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{doubling_constant, BoxBounds, Cone, DoublingMode, IntegerFiber, PointSet, Polytope};
use crate::linalg::{sample_projection, Distribution, ProjectionSpec, Scaling, Vector};
use crate::membership::{decide_pipeline, decide_with_k, Outcome, SetInstance};
use crate::montecarlo::{calibrate_c, estimate_failure, reproduce_ifp_float, CalibrationConfig, ExperimentConfig};
use crate::tail_bounds::{
    k_for_cone, k_for_doubling, k_for_doubling_exact, k_for_finite_threshold, k_for_integer_fiber, k_for_polytope,
    ConstantConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_SEPARATED: i32 = 3;

/// Environment variable consulted when no `--seed` flag is given.
pub const SEED_ENV: &str = "RPMEM_SEED";

#[derive(Parser, Debug)]
#[command(name = "rpmem", version, about = "Set membership by random projection")]
struct Cli {
    /// Master seed; falls back to $RPMEM_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Projection dimension from a selection rule.
    Bounds(BoundsArgs),
    /// Project the points of a CSV file.
    Project(ProjectArgs),
    /// Decide projected membership for a JSON instance.
    Decide(DecideArgs),
    /// Doubling constant of the points of a CSV file.
    Doubling(DoublingArgs),
    /// Run a Monte Carlo experiment.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Rule {
    Finite,
    Integer,
    Polytope,
    Cone,
    Doubling,
    DoublingExact,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(value_enum)]
    rule: Rule,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    /// Number of points of a finite set.
    #[arg(long)]
    size: Option<u64>,
    /// Number of vertices, generators or columns.
    #[arg(long)]
    n: Option<u64>,
    #[arg(long = "B")]
    b_bound: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "D")]
    big_d: Option<f64>,
    #[arg(long = "mu-a")]
    mu_a: Option<f64>,
    /// Success probability to reach; defaults to 1 - delta.
    #[arg(long)]
    target: Option<f64>,
    /// JSON file with the constants.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DistArg {
    Gaussian,
    Rademacher,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long = "dist", value_enum, default_value = "gaussian")]
    dist: DistArg,
    /// Scale entries by 1/sqrt(k).
    #[arg(long)]
    scale: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DecideClass {
    Finite,
    Polytope,
    Cone,
    Integer,
}

#[derive(Args, Debug)]
struct DecideArgs {
    #[arg(value_enum)]
    class: DecideClass,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Threshold of the finite test.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Fixed projection dimension instead of the selector's.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DoublingArgs {
    #[arg(long)]
    input: PathBuf,
    /// Exact set cover; fails above the size cap.
    #[arg(long, conflicts_with = "greedy")]
    exact: bool,
    /// Greedy upper bound.
    #[arg(long)]
    greedy: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExperimentKind {
    Failure,
    IfpFloat,
    Calibrate,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: ExperimentKind,
    #[arg(long)]
    config: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PointsInstance {
    #[serde(alias = "vertices", alias = "generators")]
    points: Vec<Vec<f64>>,
    query: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxJson {
    #[serde(rename = "L")]
    lower: Vec<i64>,
    #[serde(rename = "U")]
    upper: Vec<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IntegerInstance {
    #[serde(rename = "A")]
    a: Vec<Vec<i64>>,
    b: Vec<i64>,
    positive_row: usize,
    #[serde(rename = "box", default)]
    bounds: Option<BoxJson>,
}

#[derive(Serialize)]
struct DoublingOut {
    lambda: u64,
    mode: DoublingMode,
}

/// Runs the CLI with the seed environment variable read from the process.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    run_with_env(args, std::env::var(SEED_ENV).ok(), stdout, stderr)
}

/// Runs the CLI with an explicit value for the seed environment variable.
pub fn run_with_env<I, S>(args: I, env_seed: Option<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = stdout.write_all(text.as_bytes());
                EXIT_OK
            } else {
                let _ = stderr.write_all(text.as_bytes());
                EXIT_INVALID
            };
        }
    };
    let seed = match resolve_seed(cli.seed, env_seed.as_deref()) {
        Ok(s) => s,
        Err(e) => return report(e, stderr),
    };
    let explicit_seed = cli.seed;
    let result = match cli.command {
        Command::Bounds(a) => bounds(a).and_then(|v| emit_json(&v, stdout)).map(|()| EXIT_OK),
        Command::Project(a) => project(a, seed, stdout).map(|()| EXIT_OK),
        Command::Decide(a) => decide(a, seed, stdout),
        Command::Doubling(a) => doubling(a, stdout).map(|()| EXIT_OK),
        Command::Experiment(a) => experiment(a, explicit_seed, stdout).map(|()| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => report(e, stderr),
    }
}

fn report(e: Error, stderr: &mut dyn Write) -> i32 {
    let _ = writeln!(stderr, "error: {e}");
    match e {
        Error::NonConvergence { .. } => EXIT_FAILURE,
        _ => EXIT_INVALID,
    }
}

fn resolve_seed(flag: Option<u64>, env: Option<&str>) -> Result<u64> {
    match (flag, env) {
        (Some(s), _) => Ok(s),
        (None, Some(v)) => {
            v.trim().parse().map_err(|_| Error::Parse(format!("{SEED_ENV} = {v:?} is not an unsigned integer")))
        }
        (None, None) => Ok(0),
    }
}

fn emit_json<T: Serialize>(value: &T, out: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| Error::Parse(format!("writing output: {e}")))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn constants(path: Option<&Path>) -> Result<ConstantConfig> {
    let cfg = match path {
        Some(p) => read_json(p)?,
        None => ConstantConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidSpec(format!("missing --{flag}")))
}

fn bounds(a: BoundsArgs) -> Result<crate::tail_bounds::KSelection> {
    let cfg = constants(a.config.as_deref())?;
    let target = || match (a.target, a.delta) {
        (Some(t), _) => Ok(t),
        (None, Some(d)) => Ok(1.0 - d),
        (None, None) => Err(Error::InvalidSpec("missing --target or --delta".into())),
    };
    match a.rule {
        Rule::Finite => k_for_finite_threshold(
            need(a.size, "size")?,
            need(a.delta, "delta")?,
            need(a.tau, "tau")?,
            need(a.d, "d")?,
            &cfg,
        ),
        Rule::Integer => k_for_integer_fiber(need(a.n, "n")?, need(a.b_bound, "B")?, need(a.delta, "delta")?, &cfg),
        Rule::Polytope => k_for_polytope(need(a.n, "n")?, need(a.d, "d")?, need(a.big_d, "D")?, target()?, &cfg),
        Rule::Cone => k_for_cone(need(a.n, "n")?, need(a.d, "d")?, need(a.mu_a, "mu-a")?, target()?, &cfg),
        Rule::Doubling => k_for_doubling(
            need(a.lambda, "lambda")?,
            need(a.delta, "delta")?,
            need(a.tau, "tau")?,
            need(a.d, "d")?,
            &cfg,
        ),
        Rule::DoublingExact => k_for_doubling_exact(need(a.lambda, "lambda")?, &cfg),
    }
}

/// Parses one point per row. Blank lines and `#` comments are skipped; a
/// `# dim=m` line fixes the expected width.
pub fn parse_points_csv(text: &str) -> Result<PointSet> {
    let mut declared: Option<usize> = None;
    for line in text.lines() {
        if let Some(rest) = line.trim().strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("dim=") {
                declared = Some(v.trim().parse().map_err(|_| Error::Parse(format!("bad header {line:?}")))?);
            }
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(format!("csv: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse(format!("line {line}, field {}: {f:?} is not a finite number", j + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        let expected = declared.or(rows.first().map(Vec::len)).unwrap_or(row.len());
        if row.len() != expected {
            return Err(Error::Parse(format!("line {line}: {} fields, expected {expected}", row.len())));
        }
        rows.push(row);
    }
    PointSet::from_rows(rows)
}

fn project(a: ProjectArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let set = parse_points_csv(&read_text(&a.input)?)?;
    let dist = match a.dist {
        DistArg::Gaussian => Distribution::Gaussian,
        DistArg::Rademacher => Distribution::Rademacher,
    };
    let scaling = if a.scale { Scaling::InvSqrtK } else { Scaling::None };
    let t = sample_projection(ProjectionSpec::new(set.dim(), a.k, dist, seed).with_scaling(scaling))?;
    let mut text = format!("# dim={}\n", a.k);
    for p in set.iter() {
        let row: Vec<String> = t.apply(p)?.as_slice().iter().map(|v| v.to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    out.write_all(text.as_bytes()).map_err(|e| Error::Parse(format!("writing output: {e}")))
}

fn load_points_instance(path: &Path) -> Result<(PointSet, Vector)> {
    let inst: PointsInstance = read_json(path)?;
    Ok((PointSet::from_rows(inst.points)?, Vector::new(inst.query)?))
}

fn decide(a: DecideArgs, seed: u64, out: &mut dyn Write) -> Result<i32> {
    let cfg = constants(a.config.as_deref())?;
    let (instance, query) = match a.class {
        DecideClass::Finite => {
            let (s, q) = load_points_instance(&a.input)?;
            (SetInstance::Finite(s), Some(q))
        }
        DecideClass::Polytope => {
            let (s, q) = load_points_instance(&a.input)?;
            (SetInstance::Polytope(Polytope::new(s)), Some(q))
        }
        DecideClass::Cone => {
            let (s, q) = load_points_instance(&a.input)?;
            (SetInstance::Cone(Cone::new(s)), Some(q))
        }
        DecideClass::Integer => {
            let inst: IntegerInstance = read_json(&a.input)?;
            let bounds = inst
                .bounds
                .map(|bx| {
                    BoxBounds::new(
                        bx.lower.into_iter().map(Into::into).collect(),
                        bx.upper.into_iter().map(Into::into).collect(),
                    )
                })
                .transpose()?;
            (SetInstance::Integer(IntegerFiber::from_i64(&inst.a, &inst.b, inst.positive_row, bounds)?), None)
        }
    };
    let decision = match a.k {
        Some(k) => decide_with_k(&instance, query.as_ref(), k, a.tau, seed)?,
        None => decide_pipeline(&instance, query.as_ref(), a.delta, a.tau, &cfg, seed)?,
    };
    emit_json(&decision, out)?;
    Ok(if decision.outcome == Outcome::NotSeparated { EXIT_NOT_SEPARATED } else { EXIT_OK })
}

fn doubling(a: DoublingArgs, out: &mut dyn Write) -> Result<()> {
    let set = parse_points_csv(&read_text(&a.input)?)?;
    let mode = match (a.exact, a.greedy) {
        (true, _) => Some(DoublingMode::Exact),
        (_, true) => Some(DoublingMode::Greedy),
        _ => None,
    };
    let (lambda, mode) = doubling_constant(&set, mode)?;
    emit_json(&DoublingOut { lambda, mode }, out)
}

/// The config's `master_seed` is used unless `--seed` is given.
fn experiment(a: ExperimentArgs, seed_flag: Option<u64>, out: &mut dyn Write) -> Result<()> {
    match a.kind {
        ExperimentKind::Failure | ExperimentKind::IfpFloat => {
            let mut cfg: ExperimentConfig = read_json(&a.config)?;
            if let Some(s) = seed_flag {
                cfg.master_seed = s;
            }
            match a.kind {
                ExperimentKind::Failure => emit_json(&estimate_failure(&cfg)?, out),
                _ => emit_json(&reproduce_ifp_float(&cfg)?, out),
            }
        }
        ExperimentKind::Calibrate => {
            let mut cfg: CalibrationConfig = read_json(&a.config)?;
            if let Some(s) = seed_flag {
                cfg.master_seed = s;
            }
            emit_json(&calibrate_c(&cfg)?, out)
        }
    }
}
