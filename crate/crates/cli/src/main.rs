#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! `subflow` command-line front end.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use subflow::analysis;
use subflow::bernstein::{self, BernsteinSpec};
use subflow::calculus::{self, Direction, GridFunction};
use subflow::ctrw::{self, CtrwConfig, Functional, Target};
use subflow::laplace::{DensityField, DensityKind};
use subflow::semigroup;

use config::{
    load_semigroup, load_spec, load_valid_spec, parse_grid, parse_list, parse_range, read_columns,
};
use output::{write_csv, write_manifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Lib(#[from] subflow::Error),
    #[error("{0} check(s) failed")]
    CheckFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Lib(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "subflow",
    version,
    about = "Subordinators, hitting times and generalised fractional dynamics"
)]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true, env = "SUBFLOW_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate a density, distribution function or renewal function.
    Density(DensityArgs),
    /// Apply a convolution-type derivative to sampled data.
    Derivative(DerivativeArgs),
    /// Monte Carlo estimates from the thinned random-walk approximation.
    Simulate(SimulateArgs),
    /// Solve the generalised Cauchy problem with a time-changed semigroup.
    Solve(SolveArgs),
    /// Mixed moments of the hitting-time process.
    Moments(MomentsArgs),
    /// Run a diagnostic suite; exits 1 on failure.
    Check(CheckArgs),
    /// Print the spec's violations as JSON.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum DensityChoice {
    /// μ_t(x)
    Mu,
    /// l_t(s)
    L,
    /// Pr{σ(t) ≤ x}
    Cdf,
    /// Pr{L(t) > s}
    LTail,
    /// U(x)
    Renewal,
    /// U'(x)
    RenewalDensity,
}

#[derive(Debug, Args, Serialize)]
struct DensityArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, value_enum)]
    kind: DensityChoice,
    /// Time (ignored for renewal kinds).
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// lo:hi:n, giving n + 1 points.
    #[arg(long)]
    grid: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum DerivativeChoice {
    Caputo,
    Rl,
    #[value(name = "weyl+")]
    WeylPlus,
    #[value(name = "weyl-")]
    WeylMinus,
}

#[derive(Debug, Args, Serialize)]
struct DerivativeArgs {
    #[arg(long)]
    spec: PathBuf,
    /// CSV with columns t,value on a uniform grid.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: DerivativeChoice,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TargetChoice {
    Subordinator,
    Hitting,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FunctionalChoice {
    Mean,
    Laplace,
    Cdf,
    Survival,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Jump-size truncation level.
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated times (levels for hitting times).
    #[arg(long, default_value = "1.0")]
    t: String,
    #[arg(long, value_enum, default_value = "hitting")]
    target: TargetChoice,
    #[arg(long, value_enum, default_value = "cdf")]
    functional: FunctionalChoice,
    /// λ for the Laplace functional.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// CDF abscissae as lo:hi:n.
    #[arg(long, default_value = "0:4:80")]
    grid: String,
    /// Operational-time horizon for hitting times.
    #[arg(long, default_value_t = 1e3)]
    horizon: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SolveArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    semigroup: PathBuf,
    /// CSV whose last column holds the initial state.
    #[arg(long)]
    u0: PathBuf,
    /// 0:T:n, giving n + 1 time nodes.
    #[arg(long)]
    tgrid: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    residuals: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct MomentsArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    times: String,
    #[arg(long)]
    orders: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Suite {
    Longrange,
    Bounds,
}

#[derive(Debug, Args, Serialize)]
struct CheckArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ValidateArgs {
    #[arg(long)]
    spec: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Density(a) => density(a),
        Command::Derivative(a) => derivative(a),
        Command::Simulate(a) => simulate(a),
        Command::Solve(a) => solve(a),
        Command::Moments(a) => moments(a),
        Command::Check(a) => check(a),
        Command::Validate(a) => validate(a),
    }
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn finish<C: Serialize>(
    name: &str,
    seed: Option<u64>,
    args: &C,
    spec: &BernsteinSpec,
    outs: &[&Path],
) -> Result<(), CliError> {
    let config = json!({ "args": args, "spec": spec });
    write_manifest(name, seed, &config, outs)?;
    Ok(())
}

fn density(a: DensityArgs) -> Result<(), CliError> {
    let spec = load_valid_spec(&a.spec)?;
    let xs = parse_grid(&a.grid)?;
    let (kind, var) = match a.kind {
        DensityChoice::Mu => (DensityKind::SubordinatorDensity, "x"),
        DensityChoice::L => (DensityKind::InverseDensity, "s"),
        DensityChoice::Cdf => (DensityKind::SubordinatorCdf, "x"),
        DensityChoice::LTail => (DensityKind::InverseTailCdf, "s"),
        DensityChoice::Renewal => (DensityKind::RenewalFunction, "x"),
        DensityChoice::RenewalDensity => (DensityKind::RenewalDensity, "x"),
    };
    let values = DensityField::new(spec.clone(), kind).eval_many(a.t, &xs)?;
    let rows: Vec<Vec<f64>> = xs.iter().zip(values).map(|(x, v)| vec![*x, v]).collect();
    write_csv(&a.out, &header(&[var, "value"]), &rows)?;
    finish("density", None, &a, &spec, &[&a.out])
}

fn derivative(a: DerivativeArgs) -> Result<(), CliError> {
    let spec = load_valid_spec(&a.spec)?;
    let cols = read_columns(&a.input, 2)?;
    let (t, v) = (&cols[0], &cols[1]);
    if t.len() < 3 {
        return Err(CliError::Parse(format!(
            "{}: need at least 3 samples",
            a.input.display()
        )));
    }
    let h = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if t.windows(2)
        .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0))
    {
        return Err(CliError::Parse(format!(
            "{}: t column is not uniformly spaced",
            a.input.display()
        )));
    }
    let u = GridFunction::new(t[0], h, v.clone())?;
    let d = match a.kind {
        DerivativeChoice::Caputo => calculus::caputo_derivative(&spec, &u)?,
        DerivativeChoice::Rl => calculus::rl_derivative(&spec, &u)?,
        DerivativeChoice::WeylPlus => calculus::weyl_derivative(&spec, &u, Direction::Plus)?,
        DerivativeChoice::WeylMinus => calculus::weyl_derivative(&spec, &u, Direction::Minus)?,
    };
    let rows: Vec<Vec<f64>> = d.nodes().zip(&d.values).map(|(x, y)| vec![x, *y]).collect();
    write_csv(&a.out, &header(&["t", "value"]), &rows)?;
    finish("derivative", None, &a, &spec, &[&a.out])
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let spec = load_valid_spec(&a.spec)?;
    let times: Vec<f64> = parse_list(&a.t, "--t")?;
    let target = match a.target {
        TargetChoice::Subordinator => Target::Subordinator,
        TargetChoice::Hitting => Target::HittingTime,
    };
    let functional = match a.functional {
        FunctionalChoice::Mean => Functional::Mean,
        FunctionalChoice::Laplace => Functional::Laplace { lambda: a.lambda },
        FunctionalChoice::Cdf => Functional::Cdf {
            grid: parse_grid(&a.grid)?,
        },
        FunctionalChoice::Survival => Functional::Survival,
    };
    let horizon = match target {
        Target::Subordinator => times.iter().cloned().fold(0.0, f64::max),
        Target::HittingTime => a.horizon,
    };
    let cfg = CtrwConfig::new(spec.clone(), a.gamma, horizon, a.paths, a.seed);
    let stats = ctrw::ensemble_stats(&cfg, target, &times, &functional)?;
    let rows: Vec<Vec<f64>> = stats
        .iter()
        .map(|r| vec![r.t, r.x, r.estimate, r.std_error])
        .collect();
    write_csv(&a.out, &header(&["t", "x", "estimate", "std_error"]), &rows)?;
    finish("simulate", Some(a.seed), &a, &spec, &[&a.out])
}

fn solve(a: SolveArgs) -> Result<(), CliError> {
    let spec = load_valid_spec(&a.spec)?;
    let sg = load_semigroup(&a.semigroup)?;
    let u0 = read_columns(&a.u0, 1)?.remove(0);
    let (lo, hi, n) = parse_range(&a.tgrid)?;
    if lo != 0.0 {
        return Err(CliError::Parse(format!(
            "time grid `{}` must start at 0",
            a.tgrid
        )));
    }
    let report = semigroup::solve_cauchy(&sg, &spec, &u0, hi, n)?;
    let mut cols = vec!["t".to_string()];
    cols.extend((0..u0.len()).map(|j| format!("q{j}")));
    let rows: Vec<Vec<f64>> = report
        .times
        .iter()
        .zip(&report.trajectory)
        .map(|(t, q)| std::iter::once(*t).chain(q.iter().copied()).collect())
        .collect();
    write_csv(&a.out, &cols, &rows)?;
    let mut outs: Vec<&Path> = vec![&a.out];
    if let Some(path) = &a.residuals {
        let rows: Vec<Vec<f64>> = report
            .times
            .iter()
            .zip(&report.residuals)
            .map(|(t, r)| vec![*t, *r])
            .collect();
        write_csv(path, &header(&["t", "residual"]), &rows)?;
        outs.push(path);
    }
    println!(
        "residual {:.6e} over t >= {:.3e}",
        report.residual,
        semigroup::RESIDUAL_WINDOW * hi
    );
    let config =
        json!({ "args": &a, "spec": &spec, "semigroup": &sg, "residual": report.residual });
    write_manifest("solve", None, &config, &outs)?;
    Ok(())
}

fn moments(a: MomentsArgs) -> Result<(), CliError> {
    let spec = load_valid_spec(&a.spec)?;
    let times: Vec<f64> = parse_list(&a.times, "--times")?;
    let orders: Vec<u32> = parse_list(&a.orders, "--orders")?;
    let value = analysis::mixed_moment(&spec, &times, &orders)?;
    let mut cols: Vec<String> = (1..=times.len()).map(|i| format!("t{i}")).collect();
    cols.extend((1..=orders.len()).map(|i| format!("m{i}")));
    cols.push("moment".into());
    let mut row = times.clone();
    row.extend(orders.iter().map(|&m| m as f64));
    row.push(value);
    write_csv(&a.out, &cols, &[row])?;
    finish("moments", None, &a, &spec, &[&a.out])
}

fn report_line(pass: bool, name: &str, detail: String) -> bool {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn check(a: CheckArgs) -> Result<(), CliError> {
    let spec = load_valid_spec(&a.spec)?;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let cols;
    match a.suite {
        Suite::Longrange => {
            let r = analysis::long_range_diagnostic(&spec, 1.0, 1.0, &[10.0, 100.0, 1000.0])?;
            results.push(report_line(
                r.pass,
                "long-range growth",
                format!(
                    "I(S) = {:?}, last slope {:.6e} vs reference {:.6e}",
                    r.integrals, r.last_slope, r.reference_slope
                ),
            ));
            results.push(report_line(
                r.min_integrand > 0.0,
                "integrand positive",
                format!("min {:.6e}", r.min_integrand),
            ));
            cols = header(&["s", "integral"]);
            rows = r
                .s_list
                .iter()
                .zip(&r.integrals)
                .map(|(s, i)| vec![*s, *i])
                .collect();
        }
        Suite::Bounds => {
            let xs: Vec<f64> = (0..=8).map(|k| 10f64.powf(-2.0 + 0.5 * k as f64)).collect();
            let r = analysis::renewal_bound_check(&spec, &xs)?;
            results.push(report_line(
                r.pass,
                "renewal bound",
                format!("ratio in [{:.6e}, {:.6e}]", r.min_ratio, r.max_ratio),
            ));
            let pairs: Vec<(f64, f64)> = xs
                .iter()
                .flat_map(|&x| xs.iter().map(move |&y| (x, y)))
                .collect();
            let bad = analysis::subadditivity_check(&spec, &pairs)?;
            results.push(report_line(
                bad.is_empty(),
                "subadditivity",
                format!("{} of {} pairs violate", bad.len(), pairs.len()),
            ));
            cols = header(&["min_ratio", "max_ratio"]);
            rows.push(vec![r.min_ratio, r.max_ratio]);
        }
    }
    if let Some(out) = &a.out {
        write_csv(out, &cols, &rows)?;
        finish("check", None, &a, &spec, &[out])?;
    }
    let failed = results.iter().filter(|p| !**p).count();
    if failed > 0 {
        return Err(CliError::CheckFailed(failed));
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<(), CliError> {
    let spec = load_spec(&a.spec)?;
    let violations = bernstein::validate(&spec);
    println!(
        "{}",
        serde_json::to_string(&violations).map_err(|e| CliError::Io(e.to_string()))?
    );
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(violations.len()))
    }
}
