use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;

use crate::metrics::{energy_efficiency, gain, EfficiencyReport};
use crate::rng::{derive_seed, stream};
use crate::scenario::{generate_seeded, Scenario};
use crate::sim::trace::CsvTrace;
use crate::sim::{run, run_traced, Mode, RunStats, SimConfig};

use super::output::{aggregate_rows, ledger_rows, node_rows, write_csv, ReportRow, SweepRow};
use super::plan::{ExperimentPlan, RunConfig, SweepPoint};
use super::{io_err, ExperimentError};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 or 1 runs everything on the calling thread.
    pub parallel: usize,
    pub routing_trace: bool,
    pub mobility_trace: bool,
    /// Replaces the configured master seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub label: String,
    /// Runs per mode, in the order the modes were configured.
    pub modes: Vec<(Mode, Vec<RunStats>)>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// `point description: error` for every point that produced no row.
    pub failed: Vec<String>,
}

fn par_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if threads > 1 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            return pool.install(|| items.par_iter().map(&f).collect());
        }
    }
    items.iter().map(f).collect()
}

fn with_mode(sim: &SimConfig, mode: Mode) -> SimConfig {
    SimConfig { mode, ..sim.clone() }
}

/// Runs every configured mode `sim.runs` times on one scenario. With a trace
/// directory, per-run trace files are written there.
pub fn run_config(
    cfg: &RunConfig,
    label: &str,
    scenario: &Scenario,
    opts: &RunOptions,
    trace_dir: Option<&Path>,
) -> Result<RunOutcome, ExperimentError> {
    cfg.validate()?;
    let jobs: Vec<(Mode, u32)> = cfg
        .modes
        .iter()
        .flat_map(|&m| (0..cfg.sim.runs).map(move |r| (m, r)))
        .collect();
    let results = par_map(&jobs, opts.parallel, |&(mode, r)| {
        let sim = with_mode(&cfg.sim, mode);
        match trace_dir {
            Some(dir) if opts.routing_trace || opts.mobility_trace => {
                traced_run(&sim, scenario, r, dir, opts)
            }
            _ => Ok(run(&sim, scenario, r)?),
        }
    });
    let mut modes: Vec<(Mode, Vec<RunStats>)> = cfg.modes.iter().map(|&m| (m, Vec::new())).collect();
    for ((mode, _), res) in jobs.iter().zip(results) {
        let stats = res?;
        let slot = modes.iter_mut().find(|(m, _)| m == mode).expect("mode configured");
        slot.1.push(stats);
    }
    Ok(RunOutcome {
        label: label.to_string(),
        modes,
    })
}

fn traced_run(
    sim: &SimConfig,
    scenario: &Scenario,
    run_index: u32,
    dir: &Path,
    opts: &RunOptions,
) -> Result<RunStats, ExperimentError> {
    let open = |kind: &str| -> Result<BufWriter<File>, ExperimentError> {
        let path = dir.join(format!("{kind}_trace_{}_run{run_index}.csv", sim.mode.label()));
        File::create(&path).map(BufWriter::new).map_err(io_err(path))
    };
    let routing = if opts.routing_trace && sim.mode == Mode::Cooperative {
        Some(open("routing")?)
    } else {
        None
    };
    let mobility = if opts.mobility_trace && sim.mobility.is_some() {
        Some(open("mobility")?)
    } else {
        None
    };
    let mut trace = CsvTrace::new(routing, mobility);
    let stats = run_traced(sim, scenario, run_index, &mut trace)?;
    trace.finish().map_err(|source| ExperimentError::Csv {
        path: dir.to_path_buf(),
        source,
    })?;
    Ok(stats)
}

/// Report rows: one per mode, with the gain on the cooperative row when a
/// benchmark ran too.
pub fn report_rows(outcome: &RunOutcome) -> Result<Vec<ReportRow>, ExperimentError> {
    let mut reports: Vec<(Mode, EfficiencyReport)> = Vec::new();
    for (mode, runs) in &outcome.modes {
        reports.push((*mode, energy_efficiency(runs)?));
    }
    let bmk = reports
        .iter()
        .find(|(m, _)| *m == Mode::Benchmark)
        .map(|(_, r)| r.clone());
    let mut rows = Vec::new();
    for (mode, report) in reports {
        let g = match (&bmk, mode) {
            (Some(b), Mode::Cooperative) => Some(gain(b.clone(), report.clone())?.gain),
            _ => None,
        };
        rows.push(ReportRow {
            config_label: outcome.label.clone(),
            mode: mode.label().to_string(),
            runs: report.runs,
            eb_per_mb: report.eb_per_mb,
            goodput_mbps: report.goodput_mbps,
            gain_vs_benchmark: g,
        });
    }
    Ok(rows)
}

/// Writes `runs_<mode>.csv`, `aggregate_<mode>.csv`, `ledger_<mode>.csv`
/// and `report.csv`. The report needs traffic in every run; the per-run
/// files are written first either way.
pub fn write_run_outputs(
    outcome: &RunOutcome,
    sim: &SimConfig,
    out_dir: &Path,
) -> Result<Vec<ReportRow>, ExperimentError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for (mode, runs) in &outcome.modes {
        let m = mode.label();
        write_csv(&out_dir.join(format!("runs_{m}.csv")), &node_rows(runs))?;
        write_csv(&out_dir.join(format!("aggregate_{m}.csv")), &aggregate_rows(runs))?;
        write_csv(&out_dir.join(format!("ledger_{m}.csv")), &ledger_rows(runs, &sim.power))?;
    }
    let rows = report_rows(outcome)?;
    write_csv(&out_dir.join("report.csv"), &rows)?;
    Ok(rows)
}

/// Loads a run config and a scenario file, runs, and writes all outputs.
pub fn run_scenario_file(
    config_path: &Path,
    scenario_path: &Path,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<Vec<ReportRow>, ExperimentError> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.sim.master_seed = seed;
    }
    let text = fs::read_to_string(scenario_path).map_err(io_err(scenario_path))?;
    let scenario = Scenario::from_text(&text)?;
    let label = cfg.label.clone().unwrap_or_else(|| {
        config_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    });
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let outcome = run_config(&cfg, &label, &scenario, opts, Some(out_dir))?;
    write_run_outputs(&outcome, &cfg.sim, out_dir)
}

fn scenario_for(plan: &ExperimentPlan, point: &SweepPoint, run_index: u32) -> Result<Scenario, ExperimentError> {
    let seed = derive_seed(point.config.master_seed, &[stream::SCENARIO, u64::from(run_index)]);
    Ok(generate_seeded(
        point.area,
        point.n_nodes,
        point.n_class_a,
        point.config.tx_range,
        plan.max_attempts,
        seed,
    )?)
}

fn paired_runs(
    plan: &ExperimentPlan,
    point: &SweepPoint,
    run_index: u32,
) -> Result<(RunStats, RunStats), ExperimentError> {
    let scenario = scenario_for(plan, point, run_index)?;
    let bmk = run(&with_mode(&point.config, Mode::Benchmark), &scenario, run_index)?;
    let coop = run(&with_mode(&point.config, Mode::Cooperative), &scenario, run_index)?;
    Ok((bmk, coop))
}

fn sweep_row(plan: &ExperimentPlan, point: &SweepPoint, bmk: &[RunStats], coop: &[RunStats]) -> Result<SweepRow, ExperimentError> {
    let g = gain(energy_efficiency(bmk)?, energy_efficiency(coop)?)?;
    Ok(SweepRow {
        plan: plan.name.clone(),
        axis: plan.axis.label().to_string(),
        area: point.area.to_string(),
        n_nodes: point.n_nodes,
        n_class_a: point.n_class_a,
        axis_value: point.axis_value,
        cbr_rate: point.config.cbr_rate,
        mean_speed: point.config.mobility.map_or(0.0, |m| m.mean_speed),
        runs: g.benchmark.runs,
        bmk_eb_per_mb: g.benchmark.eb_per_mb,
        coop_eb_per_mb: g.cooperative.eb_per_mb,
        bmk_goodput_mbps: g.benchmark.goodput_mbps,
        coop_goodput_mbps: g.cooperative.goodput_mbps,
        gain: g.gain,
    })
}

/// Runs every point of a plan with paired benchmark and cooperative runs.
/// Rows come back in canonical point order whatever the thread count.
pub fn run_plan(plan: &ExperimentPlan, opts: &RunOptions) -> Result<SweepOutcome, ExperimentError> {
    let mut plan = plan.clone();
    if let Some(seed) = opts.seed {
        plan.base.master_seed = seed;
    }
    let plan = &plan;
    plan.validate()?;
    let points = plan.points();
    let jobs: Vec<(usize, u32)> = points
        .iter()
        .enumerate()
        .flat_map(|(i, p)| (0..p.config.runs).map(move |r| (i, r)))
        .collect();
    let results = par_map(&jobs, opts.parallel, |&(i, r)| paired_runs(plan, &points[i], r));

    let mut per_point: Vec<Result<(Vec<RunStats>, Vec<RunStats>), ExperimentError>> =
        points.iter().map(|_| Ok((Vec::new(), Vec::new()))).collect();
    for (&(i, _), res) in jobs.iter().zip(results) {
        let slot = &mut per_point[i];
        match (slot.as_mut(), res) {
            (Ok((b, c)), Ok((rb, rc))) => {
                b.push(rb);
                c.push(rc);
            }
            (Ok(_), Err(e)) => *slot = Err(e),
            (Err(_), _) => {}
        }
    }

    let mut outcome = SweepOutcome::default();
    for (point, res) in points.iter().zip(per_point) {
        match res.and_then(|(b, c)| sweep_row(plan, point, &b, &c)) {
            Ok(row) => outcome.rows.push(row),
            Err(e) => outcome.failed.push(format!("{}: {e}", point.describe(plan.axis))),
        }
    }
    Ok(outcome)
}
