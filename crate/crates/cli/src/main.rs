//! `perspqp`: generate instances, run the conic solvers and B&B, and collect
//! benchmark tables as CSV.
//!
//! Exit codes: 0 solved, 1 runtime error, 2 usage, 3 infeasible, 4 limit
//! reached.

mod record;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use perspqp::{
    generate, load_instance, save_instance, solve_bisection, solve_bnb, solve_cd, BisectOptions,
    BnbOptions, BnbStatus, CdOptions, ConicInstance, Error, Family, GenSpec, InitialT, SolveStatus,
};

use record::{aggregate, append_rows, write_rows, BenchRecord};

#[derive(Parser)]
#[command(
    name = "perspqp",
    version,
    about = "Conic quadratic solvers and benchmark harness"
)]
struct Cli {
    /// Log progress at info level (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write seeded instance files.
    Gen(GenArgs),
    /// Solve the continuous problem.
    Solve(SolveArgs),
    /// Solve the discrete problem by branch-and-bound.
    Bnb(BnbArgs),
    /// Run methods over a directory of instances and write cell means.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Cardinality,
    Gridpath,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Variable count (cardinality).
    #[arg(long)]
    n: Option<usize>,
    /// Grid shape as PxQ (gridpath).
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    omega: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    reps: u64,
    #[arg(long)]
    out: PathBuf,
    /// Mark all variables integral.
    #[arg(long)]
    discrete: bool,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Alg {
    Cd,
    Bisect,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum, default_value = "cd")]
    alg: Alg,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long)]
    instance: PathBuf,
    /// Starting t for cd: a positive value or `lp`.
    #[arg(long, value_parser = parse_t0)]
    t0: Option<InitialT>,
    /// Append the result row to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Known optimal value; reports optgap against it.
    #[arg(long, allow_negative_numbers = true)]
    reference: Option<f64>,
}

#[derive(Args)]
struct BnbArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 1e-4)]
    gap: f64,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
    /// Tolerance of the node relaxations.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long)]
    no_warm_start: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Cd,
    Bisect,
    #[value(name = "bnb-cd")]
    BnbCd,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "cd,bisect")]
    methods: Vec<Method>,
    /// Cell means.
    #[arg(long)]
    csv: PathBuf,
    /// Per-instance rows.
    #[arg(long)]
    raw: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    gap: f64,
    /// Seconds per B&B run.
    #[arg(long)]
    time_limit: Option<f64>,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (p, q) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected PxQ, got `{s}`"))?;
    let p = p.parse().map_err(|_| format!("bad grid rows `{p}`"))?;
    let q = q.parse().map_err(|_| format!("bad grid columns `{q}`"))?;
    Ok((p, q))
}

fn parse_t0(s: &str) -> Result<InitialT, String> {
    if s.eq_ignore_ascii_case("lp") {
        return Ok(InitialT::Lp);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(InitialT::Value(v)),
        _ => Err(format!("expected a positive number or `lp`, got `{s}`")),
    }
}

fn usage(kind: ErrorKind, msg: impl std::fmt::Display) -> ! {
    Cli::command().error(kind, msg).exit()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Exit {
    Solved,
    Infeasible,
    Limit,
}

impl From<Exit> for ExitCode {
    fn from(e: Exit) -> Self {
        ExitCode::from(match e {
            Exit::Solved => 0,
            Exit::Infeasible => 3,
            Exit::Limit => 4,
        })
    }
}

fn seconds(s: f64) -> Duration {
    if !(s >= 0.0 && s.is_finite()) {
        usage(ErrorKind::InvalidValue, format!("invalid time limit {s}"));
    }
    Duration::from_secs_f64(s)
}

fn cmd_gen(a: &GenArgs) -> Result<Exit> {
    let family = match (a.family, a.n, a.grid) {
        (FamilyArg::Cardinality, Some(_), None) => Family::Cardinality,
        (FamilyArg::Gridpath, None, Some((rows, cols))) => Family::GridPath { rows, cols },
        (FamilyArg::Cardinality, _, _) => usage(
            ErrorKind::ArgumentConflict,
            "--family cardinality takes --n and not --grid",
        ),
        (FamilyArg::Gridpath, _, _) => usage(
            ErrorKind::ArgumentConflict,
            "--family gridpath takes --grid and not --n",
        ),
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for seed in a.seed..a.seed + a.reps {
        let spec = GenSpec {
            family,
            n: a.n.unwrap_or(0),
            r: a.r,
            alpha: a.alpha,
            omega: a.omega,
            seed,
            discrete: a.discrete,
        };
        let inst = match generate(&spec) {
            Ok(i) => i,
            Err(Error::InvalidArgument(msg)) => usage(ErrorKind::InvalidValue, msg),
            Err(e) => return Err(e.into()),
        };
        let name = format!(
            "{}_n{}_r{}_a{}_w{}_s{seed}.json",
            family.name(),
            inst.n(),
            a.r,
            a.alpha,
            a.omega
        );
        let path = a.out.join(name);
        save_instance(&inst, &path).with_context(|| format!("writing {}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(Exit::Solved)
}

fn load(path: &Path) -> Result<ConicInstance> {
    load_instance(path).with_context(|| format!("loading {}", path.display()))
}

fn base_record(path: &Path, inst: &ConicInstance, method: &str) -> BenchRecord {
    let meta = &inst.meta;
    BenchRecord {
        instance: path
            .file_stem()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
        family: meta.family.name().to_string(),
        n: inst.n(),
        r: meta.rank,
        alpha: meta.alpha,
        omega: inst.omega,
        method: method.to_string(),
        time_s: 0.0,
        qp_count: 0,
        pivot_count: 0,
        nodes: None,
        objective: None,
        kkt_residual: None,
        egap: None,
        solved: false,
    }
}

fn run_convex(
    path: &Path,
    inst: &ConicInstance,
    alg: Alg,
    tol: f64,
    t0: Option<InitialT>,
) -> Result<(BenchRecord, Exit)> {
    let name = if alg == Alg::Cd { "cd" } else { "bisect" };
    let mut rec = base_record(path, inst, name);
    let start = Instant::now();
    let res = match alg {
        Alg::Cd => {
            let mut opt = CdOptions::default().with_delta(tol);
            if let Some(t0) = t0 {
                opt.t0 = t0;
            }
            solve_cd(inst, &opt, None)
        }
        Alg::Bisect => solve_bisection(inst, &BisectOptions::default().with_delta(tol)),
    };
    rec.time_s = start.elapsed().as_secs_f64();
    let r = match res {
        Ok(r) => r,
        Err(Error::Infeasible(msg)) => {
            warn!("{}: infeasible: {msg}", path.display());
            return Ok((rec, Exit::Infeasible));
        }
        Err(e) => return Err(e.into()),
    };
    rec.qp_count = r.qp_count;
    rec.pivot_count = r.pivot_count;
    rec.objective = Some(r.objective);
    rec.kkt_residual = r.kkt_residual().is_finite().then(|| r.kkt_residual());
    rec.solved = r.status != SolveStatus::IterLimit;
    info!(
        "{} {name}: objective={} t={} status={:?} stop={:?}",
        rec.instance, r.objective, r.t, r.status, r.stop
    );
    let exit = if rec.solved {
        Exit::Solved
    } else {
        Exit::Limit
    };
    Ok((rec, exit))
}

fn run_bnb(path: &Path, inst: &ConicInstance, opts: &BnbOptions) -> Result<(BenchRecord, Exit)> {
    let mut rec = base_record(path, inst, "bnb-cd");
    let start = Instant::now();
    let r = solve_bnb(inst, opts)?;
    rec.time_s = start.elapsed().as_secs_f64();
    rec.qp_count = r.stats.qp_count;
    rec.pivot_count = r.stats.pivot_count;
    rec.nodes = Some(r.nodes_processed);
    rec.objective = r.incumbent_x.as_ref().map(|_| r.incumbent_obj);
    rec.egap = Some(100.0 * r.egap);
    rec.solved = r.solved();
    let exit = match r.status {
        BnbStatus::Optimal | BnbStatus::GapReached => Exit::Solved,
        BnbStatus::TimeLimit | BnbStatus::NodeLimit => Exit::Limit,
        BnbStatus::Infeasible => Exit::Infeasible,
    };
    Ok((rec, exit))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.10}"))
}

fn cmd_solve(a: &SolveArgs) -> Result<Exit> {
    if a.alg == Alg::Bisect && a.t0.is_some() {
        usage(ErrorKind::ArgumentConflict, "--t0 applies to --alg cd only");
    }
    if !(a.tol > 0.0) {
        usage(
            ErrorKind::InvalidValue,
            format!("--tol must be positive, got {}", a.tol),
        );
    }
    let inst = load(&a.instance)?;
    let (rec, exit) = match run_convex(&a.instance, &inst, a.alg, a.tol, a.t0) {
        Err(e) if matches!(e.downcast_ref::<Error>(), Some(Error::InvalidArgument(_))) => {
            usage(ErrorKind::InvalidValue, e)
        }
        other => other?,
    };
    println!("instance     {}", rec.instance);
    println!("method       {}", rec.method);
    if exit == Exit::Infeasible {
        println!("status       infeasible");
    } else {
        println!("objective    {}", fmt_opt(rec.objective));
        println!(
            "kkt_residual {}",
            rec.kkt_residual.map_or("-".into(), |v| format!("{v:.3e}"))
        );
        println!("qp_count     {}", rec.qp_count);
        println!("pivot_count  {}", rec.pivot_count);
        if let (Some(z), Some(zmin)) = (rec.objective, a.reference) {
            println!("optgap       {:.3e}", ((zmin - z) / zmin).abs());
        }
    }
    println!("time_s       {:.6}", rec.time_s);
    if let Some(csv) = &a.csv {
        append_rows(csv, &[rec])?;
    }
    Ok(exit)
}

fn bnb_options(gap: f64, tol: f64, time_limit: Option<f64>) -> BnbOptions {
    BnbOptions {
        gap_tol: gap,
        time_limit: time_limit.map(seconds),
        cd: CdOptions::default().with_delta(tol),
        ..BnbOptions::default()
    }
}

fn cmd_bnb(a: &BnbArgs) -> Result<Exit> {
    let inst = load(&a.instance)?;
    if !inst.is_discrete() {
        usage(
            ErrorKind::InvalidValue,
            format!("{} has no integer variables", a.instance.display()),
        );
    }
    let mut opts = bnb_options(a.gap, a.tol, a.time_limit);
    opts.node_limit = a.node_limit;
    opts.warm_start = !a.no_warm_start;
    let (rec, exit) = run_bnb(&a.instance, &inst, &opts)?;
    println!("instance     {}", rec.instance);
    println!("objective    {}", fmt_opt(rec.objective));
    println!("nodes        {}", rec.nodes.unwrap_or(0));
    println!(
        "egap_pct     {}",
        rec.egap.map_or("-".into(), |g| format!("{g:.6}"))
    );
    println!("solved       {}", rec.solved);
    println!("qp_count     {}", rec.qp_count);
    println!("time_s       {:.6}", rec.time_s);
    if let Some(csv) = &a.csv {
        append_rows(csv, &[rec])?;
    }
    Ok(exit)
}

fn instance_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no instance files (*.json) in {}", dir.display());
    }
    Ok(files)
}

fn cmd_bench(a: &BenchArgs) -> Result<Exit> {
    let files = instance_files(&a.dir)?;
    let mut rows = Vec::new();
    for path in &files {
        let inst = load(path)?;
        for &m in &a.methods {
            let (rec, _) = match m {
                Method::Cd => run_convex(path, &inst, Alg::Cd, a.tol, None)?,
                Method::Bisect => run_convex(path, &inst, Alg::Bisect, a.tol, None)?,
                Method::BnbCd if !inst.is_discrete() => {
                    warn!(
                        "{}: skipping bnb-cd on a continuous instance",
                        path.display()
                    );
                    continue;
                }
                Method::BnbCd => run_bnb(path, &inst, &bnb_options(a.gap, a.tol, a.time_limit))?,
            };
            info!("{} {} {:.4}s", rec.instance, rec.method, rec.time_s);
            rows.push(rec);
        }
    }
    if let Some(raw) = &a.raw {
        write_rows(raw, &rows)?;
    }
    let cells = aggregate(&rows);
    write_rows(&a.csv, &cells)?;
    println!(
        "{} instances, {} runs, {} cells -> {}",
        files.len(),
        rows.len(),
        cells.len(),
        a.csv.display()
    );
    Ok(Exit::Solved)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let res = match &cli.cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Bnb(a) => cmd_bnb(a),
        Cmd::Bench(a) => cmd_bench(a),
    };
    match res {
        Ok(exit) => exit.into(),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
