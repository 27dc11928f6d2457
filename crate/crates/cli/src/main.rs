use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use feederopt::evaluator::{brute_force, evaluate, repair, Solution};
use feederopt::export;
use feederopt::pso::run_hybrid_on;
use feederopt::{build_graph, load_scenario, Error, Execution, Scenario};

/// Transit frequency and SAV feeder fleet optimization.
#[derive(Parser)]
#[command(name = "feederopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the hybrid search and write the best solution and its tables.
    Run(RunArgs),
    /// Evaluate one solution file.
    Evaluate(EvaluateArgs),
    /// Exhaustively evaluate a frequency and fleet grid.
    Oracle(OracleArgs),
    /// Run the search and write only per-particle history and convergence.
    ExportHistory(RunArgs),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Override a parameter, e.g. `solver.pso.epochs=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (default: all cores). Affects wall time only.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Root seed; overrides `solver.pso.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Skip local improvement.
    #[arg(long)]
    pso_only: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    /// Solution JSON (`freq_per_h`, `fleet`).
    #[arg(long)]
    solution: PathBuf,
    /// Write tables here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Repair the solution onto boxes and budget before evaluating.
    #[arg(long)]
    repair: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory for `oracle_grid.csv` and `oracle_best.json`.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated frequency levels tried for every (pattern, period).
    #[arg(long, value_delimiter = ',', required = true)]
    freq_grid: Vec<f64>,
    /// Comma-separated fleet levels tried for every period.
    #[arg(long, value_delimiter = ',', required = true)]
    fleet_grid: Vec<f64>,
}

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {
        let _ = writeln!(std::io::stdout(), $($arg)*);
    };
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            report(&err);
            ExitCode::FAILURE
        }
    }
}

fn report(err: &anyhow::Error) {
    if let Some(Error::Invalid(violations)) = err.downcast_ref::<Error>() {
        eprintln!("error: scenario is invalid");
        for v in violations {
            eprintln!("  {}: {} ({})", v.path(), v, v.code());
        }
        return;
    }
    eprintln!("error: {err:#}");
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run(args) => cmd_run(&args, true),
        Command::ExportHistory(args) => cmd_run(&args, false),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Oracle(args) => cmd_oracle(&args),
    }
}

fn parse_overrides(raw: &[String]) -> anyhow::Result<Vec<(String, String)>> {
    raw.iter()
        .map(|kv| match kv.split_once('=') {
            Some((k, v)) if !k.is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
            _ => bail!("override `{kv}` is not KEY=VALUE"),
        })
        .collect()
}

fn load(common: &Common, extra: &[(String, String)]) -> anyhow::Result<Scenario> {
    let sc = load_scenario(&common.scenario)?;
    let mut overrides = parse_overrides(&common.overrides)?;
    overrides.extend_from_slice(extra);
    Ok(sc.with_overrides(&overrides)?)
}

fn configure_threads(threads: Option<usize>) -> anyhow::Result<Execution> {
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
        if n == 1 {
            return Ok(Execution::Sequential);
        }
    }
    Ok(Execution::Parallel)
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn cmd_run(args: &RunArgs, full: bool) -> anyhow::Result<()> {
    let mut extra = Vec::new();
    if let Some(seed) = args.seed {
        extra.push(("solver.pso.seed".to_string(), seed.to_string()));
    }
    if args.pso_only {
        extra.push(("solver.pso.pso_only".to_string(), "true".to_string()));
    }
    let sc = load(&args.common, &extra)?;
    let exec = configure_threads(args.common.threads)?;
    let g = build_graph(&sc)?;
    let result = run_hybrid_on(&sc, &g, exec);
    create_dir(&args.out)?;
    export::write_history(&args.out.join("history.csv"), &result.history)?;
    if full {
        export::write_json(&args.out.join("solution.json"), &result.best)?;
        export::write_eval_tables(&args.out, &result.best_eval)?;
    } else {
        export::write_convergence(&args.out.join("convergence.csv"), &result.epochs)?;
    }
    say!("objective: {}", result.best_eval.objective);
    say!("cost: {}", result.best_eval.cost);
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> anyhow::Result<()> {
    let sc = load(&args.common, &[])?;
    configure_threads(args.common.threads)?;
    let mut sol: Solution = export::read_solution(&args.solution)?;
    sol.check_dimensions(&sc)?;
    if args.repair {
        sol = repair(&sol, &sc);
    }
    let g = build_graph(&sc)?;
    let res = evaluate(&sol, &sc, &g);
    if let Some(out) = &args.out {
        create_dir(out)?;
        export::write_eval_tables(out, &res)?;
        export::write_json(&out.join("solution.json"), &res.solution)?;
    }
    say!("objective: {}", res.objective);
    say!("cost: {}", res.cost);
    say!("feasible: {}", res.feasible);
    say!("converged: {}", res.converged);
    Ok(())
}

fn cmd_oracle(args: &OracleArgs) -> anyhow::Result<()> {
    let sc = load(&args.common, &[])?;
    let exec = configure_threads(args.common.threads)?;
    let g = build_graph(&sc)?;
    let oracle = brute_force(&sc, &g, &args.freq_grid, &args.fleet_grid, exec)?;
    create_dir(&args.out)?;
    export::write_grid(&args.out.join("oracle_grid.csv"), &oracle)?;
    export::write_json(&args.out.join("oracle_best.json"), &oracle.best)?;
    say!("objective: {}", oracle.best_eval.objective);
    say!("cost: {}", oracle.best_eval.cost);
    say!("grid points: {}", oracle.grid.len());
    Ok(())
}
