use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cesr::experiment::{
    run_plan, run_scenario_file, summarize_file, write_csv, write_plot_files, ExperimentError, ExperimentPlan,
    RunOptions,
};
use cesr::scenario::{generate_seeded, Area, ScenarioError, DEFAULT_MAX_ATTEMPTS};

/// Cooperative dual-radio uplink simulator.
#[derive(Debug, Parser)]
#[command(name = "cesr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a connected random placement and write it as a scenario file.
    Generate(GenerateArgs),
    /// Run one config on one scenario and write per-node, per-run and report CSVs.
    Run(RunArgs),
    /// Run every point of a sweep plan with paired benchmark and cooperative runs.
    Sweep(SweepArgs),
    /// Summarize a sweep table and write plot data.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    width: f64,
    #[arg(long)]
    height: f64,
    #[arg(long)]
    nodes: usize,
    #[arg(long = "class-a")]
    class_a: usize,
    #[arg(long, default_value_t = 20.0)]
    range: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    max_attempts: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Common {
    /// Override the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    common: Common,
    /// Write the routing decisions of every cooperative run.
    #[arg(long)]
    trace: bool,
    /// Write node positions of every run with mobility.
    #[arg(long)]
    mobility_trace: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    plan: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct ReportArgs {
    sweep_csv: PathBuf,
    /// Directory for plot files; defaults to the table's directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Runtime(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn generate(a: GenerateArgs) -> Result<(), Failure> {
    let area = Area::new(a.width, a.height)?;
    let scenario = generate_seeded(area, a.nodes, a.class_a, a.range, a.max_attempts, a.seed)?;
    write_file(&a.out, &scenario.to_text())?;
    println!(
        "wrote {} nodes to {} after {} attempt(s)",
        scenario.len(),
        a.out.display(),
        scenario.attempts
    );
    Ok(())
}

fn options(c: &Common) -> RunOptions {
    RunOptions {
        parallel: c.parallel,
        seed: c.seed,
        ..RunOptions::default()
    }
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let opts = RunOptions {
        routing_trace: a.trace,
        mobility_trace: a.mobility_trace,
        ..options(&a.common)
    };
    let rows = run_scenario_file(&a.config, &a.scenario, &a.common.out, &opts)?;
    for r in rows {
        let gain = r
            .gain_vs_benchmark
            .map(|g| format!("  gain {:.2}%", g * 100.0))
            .unwrap_or_default();
        println!(
            "{:<12} {} runs  {:.4} J/Mb  {:.3} Mb/s{gain}",
            r.mode, r.runs, r.eb_per_mb, r.goodput_mbps
        );
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let plan = ExperimentPlan::load(&a.plan)?;
    let outcome = run_plan(&plan, &options(&a.common))?;
    fs::create_dir_all(&a.common.out)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", a.common.out.display())))?;
    let path = a.common.out.join(format!("{}.csv", plan.name));
    write_csv(&path, &outcome.rows)?;
    println!("wrote {} points to {}", outcome.rows.len(), path.display());
    if !outcome.failed.is_empty() {
        let total = outcome.rows.len() + outcome.failed.len();
        return Err(ExperimentError::PartialFailure {
            failed: outcome.failed,
            total,
        }
        .into());
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<(), Failure> {
    let summary = summarize_file(&a.sweep_csv)?;
    print!("{}", summary.render());
    let dir = a.out.unwrap_or_else(|| {
        a.sweep_csv
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    let files = write_plot_files(&summary, &dir)?;
    println!("wrote {} plot file(s) to {}", files.len(), dir.display());
    Ok(())
}
