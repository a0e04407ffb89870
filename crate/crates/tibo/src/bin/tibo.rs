//! Command-line front end for the spectral boundary value solver.
//!
//! Subcommands: `bench` (25-scenario benchmark cells with CSV reports),
//! `solve` (one problem from a `key = value` config file), `gradcheck`
//! (finite-difference audit of the analytic gradient), and `interp-order`
//! (empirical interpolation-order table).
//!
//! Exit codes: 0 success, 1 a check failed, 2 invalid input, 3 a scenario
//! or solve crashed (as opposed to merely diverging).

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tibo::harness::{
    emit_report, manufactured_problem, parse_theta, run_batch, scenario_initial_state,
    summary_text, BaseCurve, BatchConfig, BcType, Coupling, ExampleFamily,
};
use tibo::optimizer::{Constraint, ConstraintSet, OptimizerOptions};
use tibo::solver::{
    residual_max, solve, BoundaryConditions, OdeProblem, SolverState, TiboSolution,
};
use tibo::verify::{interpolation_order_study, order_table, run_gradient_check};
use tibo::{make_grid, GridSpec};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_CRASH: u8 = 3;

#[derive(Parser)]
#[command(
    name = "tibo",
    version,
    about = "Spectral two-point boundary value solver with an RK4 shooting benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one 25-scenario benchmark cell and write a CSV report.
    Bench(BenchArgs),
    /// Solve one problem described by a `key = value` config file.
    Solve(SolveArgs),
    /// Audit the analytic gradient against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Print the empirical interpolation-order table.
    InterpOrder,
}

#[derive(Args)]
struct BenchArgs {
    /// Boundary family: neumann | dirichlet | mix.
    #[arg(long)]
    case: String,
    /// Frequency of the benchmark curve: pi2 | 3pi2 | a decimal.
    #[arg(long)]
    theta: String,
    /// Grid resolution exponent (the extension carries 2^(q+1) nodes).
    #[arg(long, default_value_t = 7)]
    q: u32,
    /// Resolution exponent of the evaluation grid used for metrics and curves.
    #[arg(long = "eval-q", default_value_t = 10)]
    eval_q: u32,
    /// Constraint: none | dwindow:CENTER,RADIUS | lbound:LEVEL.
    #[arg(long, default_value = "none")]
    constraint: String,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Optional directory for per-scenario (x, y_opt, y_b) curve files.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Path to a flat `key = value` config file (see `--help` for keys).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Number of trigonometric modes (a power of two, e.g. 8 or 16).
    #[arg(long)]
    m: usize,
    /// Number of random states to audit.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// RNG seed for the sampled states.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Bench(args) => run_bench(&args),
        Command::Solve(args) => run_solve(&args),
        Command::Gradcheck(args) => run_gradcheck(&args),
        Command::InterpOrder => run_interp_order(),
    }
}

fn invalid(message: &str) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_INVALID)
}

fn crashed(message: &str) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_CRASH)
}

/// Parses `none`, `dwindow:CENTER,RADIUS`, or `lbound:LEVEL`.
fn parse_constraint(text: &str) -> Result<Option<ConstraintSet>, String> {
    if text == "none" {
        return Ok(None);
    }
    let parse_num = |s: &str| -> Result<f64, String> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("expected a finite number, got `{s}`"))
    };
    if let Some(rest) = text.strip_prefix("dwindow:") {
        let (center, radius) = rest
            .split_once(',')
            .ok_or_else(|| format!("dwindow needs CENTER,RADIUS, got `{rest}`"))?;
        let radius = parse_num(radius)?;
        if radius <= 0.0 {
            return Err(format!("dwindow radius must be positive, got {radius}"));
        }
        return Ok(Some(ConstraintSet::new(vec![
            Constraint::DerivativeWindow {
                center: parse_num(center)?,
                radius,
            },
        ])));
    }
    if let Some(level) = text.strip_prefix("lbound:") {
        return Ok(Some(ConstraintSet::new(vec![Constraint::LowerBound {
            level: parse_num(level)?,
        }])));
    }
    Err(format!(
        "unknown constraint `{text}` (expected none, dwindow:CENTER,RADIUS, or lbound:LEVEL)"
    ))
}

fn run_bench(args: &BenchArgs) -> ExitCode {
    let Some(bc) = BcType::parse(&args.case) else {
        return invalid(&format!(
            "unknown case `{}` (expected neumann, dirichlet, or mix)",
            args.case
        ));
    };
    let Some(theta) = parse_theta(&args.theta) else {
        return invalid(&format!(
            "unknown theta `{}` (expected pi2, 3pi2, or a decimal)",
            args.theta
        ));
    };
    let constraints = match parse_constraint(&args.constraint) {
        Ok(c) => c,
        Err(msg) => return invalid(&msg),
    };
    // Reject bad grid geometry up front instead of letting all 25 scenarios
    // fail one by one with the same message.
    let family = ExampleFamily::new(theta);
    for (flag, q) in [("--q", args.q), ("--eval-q", args.eval_q)] {
        if let Err(err) = family.grid(q) {
            return invalid(&format!("{flag}: {err}"));
        }
    }
    let config = BatchConfig {
        q: args.q,
        eval_q: args.eval_q,
        constraints,
        ..BatchConfig::default()
    };

    let batch = run_batch(bc, theta, &config, None);

    if let Err(err) = emit_report(
        &batch.reports,
        &args.out,
        args.curves.as_deref(),
        args.eval_q,
    ) {
        return invalid(&format!("writing report: {err}"));
    }
    print!("{}", summary_text(&batch.reports));
    println!("report: {}", args.out.display());
    if let Some(dir) = &args.curves {
        println!("curves: {}", dir.display());
    }

    if batch.any_failure() {
        for r in &batch.reports {
            if let Some(reason) = &r.failure {
                eprintln!("scenario {} crashed: {reason}", r.id);
            }
        }
        return ExitCode::from(EXIT_CRASH);
    }
    ExitCode::SUCCESS
}

fn run_gradcheck(args: &GradcheckArgs) -> ExitCode {
    if args.m < 4 || !args.m.is_power_of_two() {
        return invalid(&format!("m must be a power of two >= 4, got {}", args.m));
    }
    if args.trials == 0 {
        return invalid("trials must be positive");
    }
    let q = args.m.trailing_zeros();
    match run_gradient_check(q, args.trials, args.seed) {
        Ok(report) => {
            println!("{}", report.line());
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILED)
            }
        }
        Err(err) => crashed(&format!("gradient check crashed: {err}")),
    }
}

fn run_interp_order() -> ExitCode {
    match interpolation_order_study(&[32, 64, 128]) {
        Ok(studies) => {
            print!("{}", order_table(&studies));
            ExitCode::SUCCESS
        }
        Err(err) => crashed(&format!("order study crashed: {err}")),
    }
}

/// One parsed `key = value` config file.
struct SolveConfig {
    s: f64,
    e: f64,
    delta: Option<f64>,
    q: u32,
    eval_q: u32,
    rows: [[f64; 4]; 2],
    alpha: f64,
    beta: f64,
    rhs: String,
    init_vs: Option<f64>,
    init_us: Option<f64>,
    constraint: Option<ConstraintSet>,
    max_iters: Option<usize>,
}

fn parse_config(text: &str) -> Result<SolveConfig, String> {
    use std::collections::HashMap;
    let mut map: HashMap<String, String> = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected `key = value`", lineno + 1));
        };
        let key = key.trim().to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key `{key}`", lineno + 1));
        }
    }

    let mut num = |key: &str| -> Result<Option<f64>, String> {
        match map.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| format!("key `{key}`: expected a finite number, got `{v}`")),
        }
    };
    let required = |key: &str, num: &mut dyn FnMut(&str) -> Result<Option<f64>, String>| {
        num(key)?.ok_or_else(|| format!("missing required key `{key}`"))
    };

    let s = required("s", &mut num)?;
    let e = required("e", &mut num)?;
    let delta = num("delta")?;
    let q = num("q")?.unwrap_or(7.0);
    let eval_q = num("eval_q")?.unwrap_or(10.0);
    if q < 1.0 || q.fract() != 0.0 || q > 24.0 {
        return Err(format!("key `q`: expected an integer in 1..=24, got {q}"));
    }
    if eval_q < 1.0 || eval_q.fract() != 0.0 || eval_q > 24.0 {
        return Err(format!(
            "key `eval_q`: expected an integer in 1..=24, got {eval_q}"
        ));
    }
    let mut rows = [[0.0; 4]; 2];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = required(&format!("d{}{}", i + 1, j + 1), &mut num)?;
        }
    }
    let alpha = required("alpha", &mut num)?;
    let beta = required("beta", &mut num)?;
    let init_vs = num("init_vs")?;
    let init_us = num("init_us")?;
    let max_iters = match num("max_iters")? {
        None => None,
        Some(v) if v >= 1.0 && v.fract() == 0.0 => Some(v as usize),
        Some(v) => {
            return Err(format!(
                "key `max_iters`: expected a positive integer, got {v}"
            ))
        }
    };
    let rhs = map
        .remove("rhs")
        .ok_or_else(|| "missing required key `rhs`".to_string())?;
    let constraint = match map.remove("constraint") {
        None => None,
        Some(text) => parse_constraint(&text)?,
    };

    if let Some(key) = map.keys().next() {
        return Err(format!("unknown key `{key}`"));
    }
    Ok(SolveConfig {
        s,
        e,
        delta,
        q: q as u32,
        eval_q: eval_q as u32,
        rows,
        alpha,
        beta,
        rhs,
        init_vs,
        init_us,
        constraint,
        max_iters,
    })
}

/// Resolves the `rhs` selector to a problem (and the exact curve it was
/// manufactured from, when one exists).
fn build_problem(rhs: &str, domain: (f64, f64)) -> Result<(OdeProblem, Option<BaseCurve>), String> {
    if let Some(theta_text) = rhs
        .strip_prefix("xcos:")
        .or_else(|| rhs.strip_prefix("example:"))
    {
        let theta = parse_theta(theta_text)
            .ok_or_else(|| format!("rhs `{rhs}`: bad frequency `{theta_text}`"))?;
        let base = BaseCurve::XCos { theta };
        return Ok((
            manufactured_problem(base, Coupling::STANDARD, domain),
            Some(base),
        ));
    }
    match rhs {
        "sine" => Ok((
            manufactured_problem(BaseCurve::Sine, Coupling::STANDARD, domain),
            Some(BaseCurve::Sine),
        )),
        "zero" => Ok((
            manufactured_problem(BaseCurve::Zero, Coupling::default(), domain),
            Some(BaseCurve::Zero),
        )),
        other => Err(format!(
            "unknown rhs `{other}` (expected xcos:THETA, example:THETA, sine, or zero)"
        )),
    }
}

fn print_solution(
    sol: &TiboSolution,
    problem: &OdeProblem,
    bc: &BoundaryConditions,
    grid: &GridSpec,
    base: Option<BaseCurve>,
    eval_q: u32,
) -> Result<(), String> {
    let resid = residual_max(sol, problem, eval_q).map_err(|e| e.to_string())?;
    println!(
        "status: {:?}  iterations: {}  objective: {:.3e}  grad_inf: {:.3e}",
        sol.status, sol.iterations, sol.objective, sol.grad_inf
    );
    if let Some(v) = sol.max_violation {
        println!("max constraint violation: {v:.3e}");
    }
    println!("max residual |v'' - f| on [s, e]: {resid:.3e}");

    let data = [
        sol.value(grid.s),
        sol.derivative(grid.s),
        sol.value(grid.e),
        sol.derivative(grid.e),
    ];
    for (row, target, name) in [(&bc.d[0], bc.alpha, "alpha"), (&bc.d[1], bc.beta, "beta")] {
        let got: f64 = row.iter().zip(&data).map(|(a, b)| a * b).sum();
        println!(
            "boundary {name}: wanted {target:.6}, got {got:.6} (|diff| {:.3e})",
            (got - target).abs()
        );
    }

    let mut table = String::new();
    let samples = 11;
    writeln!(
        table,
        "{:>12} {:>16}{}",
        "x",
        "v(x)",
        if base.is_some() {
            "        exact        |diff|"
        } else {
            ""
        }
    )
    .map_err(|e| e.to_string())?;
    for i in 0..samples {
        let x = grid.s + (grid.e - grid.s) * i as f64 / (samples - 1) as f64;
        let v = sol.value(x);
        match base {
            Some(b) => {
                let exact = b.value(x);
                writeln!(
                    table,
                    "{x:>12.6} {v:>16.9} {exact:>12.9} {:>12.3e}",
                    (v - exact).abs()
                )
                .map_err(|e| e.to_string())?;
            }
            None => writeln!(table, "{x:>12.6} {v:>16.9}").map_err(|e| e.to_string())?,
        }
    }
    print!("{table}");
    Ok(())
}

fn run_solve(args: &SolveArgs) -> ExitCode {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(err) => return invalid(&format!("{}: {err}", args.config.display())),
    };
    let config = match parse_config(&text) {
        Ok(c) => c,
        Err(msg) => return invalid(&format!("{}: {msg}", args.config.display())),
    };
    if config.e <= config.s {
        return invalid("config requires e > s");
    }
    let delta = config.delta.unwrap_or((config.e - config.s) / 2.0);

    let (problem, base) = match build_problem(&config.rhs, (config.s, config.e)) {
        Ok(p) => p,
        Err(msg) => return invalid(&msg),
    };
    let bc = match BoundaryConditions::new(config.rows, config.alpha, config.beta) {
        Ok(bc) => bc,
        Err(err) => return invalid(&format!("boundary rows: {err}")),
    };
    let grid = match make_grid(config.s, config.e, delta, config.q) {
        Ok(g) => g,
        Err(err) => return invalid(&format!("grid: {err}")),
    };

    let init = match (config.init_vs, config.init_us) {
        (None, None) => SolverState::zeros(grid.modes),
        (vs, us) => scenario_initial_state(&problem, &grid, vs.unwrap_or(0.0), us.unwrap_or(0.0)),
    };
    let mut opts = OptimizerOptions::default();
    if let Some(iters) = config.max_iters {
        opts.max_iters = iters;
    }

    match solve(
        &problem,
        &bc,
        &grid,
        &init,
        config.constraint.as_ref(),
        &opts,
    ) {
        Ok(sol) => match print_solution(&sol, &problem, &bc, &grid, base, config.eval_q) {
            Ok(()) => ExitCode::SUCCESS,
            Err(msg) => crashed(&msg),
        },
        Err(err) => crashed(&format!("solve crashed: {err}")),
    }
}
