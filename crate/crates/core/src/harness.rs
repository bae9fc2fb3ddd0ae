//! Experiment runner: loads a configuration, runs the algorithms over every
//! slot, runs parameter sweeps, and writes CSV traces and JSON summaries.
//!
//! Every CSV starts with `config_hash,seed` columns and contains no
//! timestamps, so identical inputs give byte-identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::aibot::{resolve_theta2, run_aibot, run_baseline, AibotSettings, RunOutcome};
use crate::channel::DistanceLaw;
use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::instance::SlotInstance;
use crate::numeric::{map_indexed, mean};
use crate::objective::SlotContext;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Aibot,
    Baseline,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Aibot => "aibot",
            Algorithm::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgoChoice {
    Aibot,
    Baseline,
    Both,
}

impl AlgoChoice {
    pub fn algorithms(self) -> Vec<Algorithm> {
        match self {
            AlgoChoice::Aibot => vec![Algorithm::Aibot],
            AlgoChoice::Baseline => vec![Algorithm::Baseline],
            AlgoChoice::Both => vec![Algorithm::Aibot, Algorithm::Baseline],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    None,
    RMin(Vec<f64>),
    Theta1(Vec<f64>),
    Seed(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub config_path: PathBuf,
    pub algo: AlgoChoice,
    pub sweep: Sweep,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub literal_eq6: bool,
    pub literal_c5: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let empty = match &self.sweep {
            Sweep::None => false,
            Sweep::RMin(v) | Sweep::Theta1(v) => v.is_empty(),
            Sweep::Seed(v) => v.is_empty(),
        };
        if empty {
            return Err(Error::config("sweep list must not be empty"));
        }
        Ok(())
    }

    /// Loads the configuration file and applies the command-line overrides.
    pub fn load(&self) -> Result<ConfigFile> {
        self.validate()?;
        let mut file = ConfigFile::load(&self.config_path)?;
        if let Some(seed) = self.seed {
            file.rng_seed = seed;
        }
        if self.literal_eq6 {
            file.distance_law = DistanceLaw::Linear;
        }
        if self.literal_c5 {
            file.literal_c5 = true;
        }
        Ok(file)
    }
}

/// A configuration ready to run, with its hash.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub file: ConfigFile,
    pub hash: String,
    pub scenario: Scenario,
}

impl Experiment {
    pub fn new(file: ConfigFile) -> Result<Self> {
        let hash = file.hash();
        let scenario = Scenario::build(file.clone().into_config()?)?;
        Ok(Experiment {
            file,
            hash,
            scenario,
        })
    }

    pub fn seed(&self) -> u64 {
        self.file.rng_seed
    }

    pub fn slots(&self) -> Result<Vec<SlotInstance>> {
        (0..self.scenario.config.slots)
            .map(|n| SlotInstance::draw(&self.scenario, n))
            .collect()
    }
}

/// Outcome of one algorithm over every slot.
#[derive(Debug, Clone)]
pub struct AlgoRun {
    pub algo: Algorithm,
    pub theta2: f64,
    pub slots: Vec<RunOutcome>,
}

/// Runs `algo` on every slot. The mapping factor is resolved once, on slot
/// 0, and shared by all slots.
pub fn run_algorithm(exp: &Experiment, slots: &[SlotInstance], algo: Algorithm) -> Result<AlgoRun> {
    let theta2 = resolve_theta2(&exp.scenario, &slots[0])?;
    let settings = AibotSettings::from_solver(&exp.scenario.config.solver)?;
    let outcomes = slots
        .iter()
        .map(|slot| {
            let ctx = SlotContext::new(&exp.scenario, slot, theta2);
            match algo {
                Algorithm::Aibot => run_aibot(&ctx, &settings),
                Algorithm::Baseline => run_baseline(&ctx),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AlgoRun {
        algo,
        theta2,
        slots: outcomes,
    })
}

/// Final metrics of one run, averaged over slots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub seed: u64,
    pub algo: Algorithm,
    #[serde(rename = "G_TOL")]
    pub g_tol: f64,
    #[serde(rename = "R_sum")]
    pub r_sum: f64,
    pub rho_sum: f64,
    /// Distance CRB of the non-cooperative target; `None` if unobservable.
    pub crb_noncoop: Option<f64>,
    /// Outer iterations, summed over slots.
    pub iterations: usize,
    pub converged: bool,
}

pub fn summarize(exp: &Experiment, run: &AlgoRun) -> Summary {
    let pick = |f: &dyn Fn(&RunOutcome) -> f64| -> f64 {
        mean(&run.slots.iter().map(f).collect::<Vec<_>>())
    };
    let crbs: Option<Vec<f64>> = run
        .slots
        .iter()
        .map(|s| s.report.crb_noncoop.map(|c| c.crb_distance))
        .collect();
    Summary {
        config_hash: exp.hash.clone(),
        seed: exp.seed(),
        algo: run.algo,
        g_tol: pick(&|s| s.report.g_tol),
        r_sum: pick(&|s| s.report.r_sum),
        rho_sum: pick(&|s| s.report.rho_sum),
        crb_noncoop: crbs.map(|v| mean(&v)),
        iterations: run.slots.iter().map(|s| s.trace.records.len()).sum(),
        converged: run.slots.iter().all(|s| s.converged),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Header of the outer-iteration trace for `m` stations and `k` cooperative
/// UAVs.
pub fn trace_header(m: usize, k: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "config_hash",
        "seed",
        "algo",
        "slot",
        "iteration",
        "G_TOL",
        "best_G_TOL",
        "R_sum",
        "rho_sum",
        "crb_noncoop_distance",
        "crb_noncoop_angle",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((1..=m).map(|i| format!("U_{i}")));
    h.extend((1..=k + 1).map(|j| format!("crb_distance_{j}")));
    h.extend(
        [
            "ok_masses",
            "ok_labels",
            "ok_power_box",
            "ok_budgets",
            "ok_qos_floor",
            "ok_rate_floor",
            "floors_clean",
            "dual_iterations",
            "dual_converged",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

pub fn write_trace<W: Write>(writer: W, exp: &Experiment, run: &AlgoRun) -> Result<()> {
    let cfg = &exp.scenario.config;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(trace_header(cfg.stations, cfg.cooperative_uavs))?;
    for (slot, outcome) in run.slots.iter().enumerate() {
        for r in &outcome.trace.records {
            let mut row = vec![
                exp.hash.clone(),
                exp.seed().to_string(),
                run.algo.name().to_string(),
                slot.to_string(),
                r.iteration.to_string(),
                r.g_tol.to_string(),
                r.best_g_tol.to_string(),
                r.r_sum.to_string(),
                r.rho_sum.to_string(),
                opt(r.crb_noncoop.map(|c| c.crb_distance)),
                opt(r.crb_noncoop.map(|c| c.crb_angle)),
            ];
            row.extend(r.masses.iter().map(|u| u.to_string()));
            row.extend(r.crbs.iter().map(|c| opt(c.map(|c| c.crb_distance))));
            let c = &r.constraints;
            row.extend(
                [
                    c.masses,
                    c.labels,
                    c.power_box,
                    c.budgets,
                    c.qos_floor,
                    c.rate_floor,
                ]
                .iter()
                .map(|x| x.satisfied.to_string()),
            );
            row.push(r.floors.is_clean().to_string());
            row.push(r.dual_iterations.to_string());
            row.push(r.dual_converged.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(io_err(Path::new("trace csv")))?;
    Ok(())
}

pub const SOLVER_TRACE_HEADER: [&str; 9] = [
    "config_hash",
    "seed",
    "slot",
    "outer_iteration",
    "iteration",
    "F",
    "grad_norm",
    "step",
    "G_TOL",
];

/// Dual-ascent rows of every outer iteration.
pub fn write_solver_trace<W: Write>(writer: W, exp: &Experiment, run: &AlgoRun) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SOLVER_TRACE_HEADER)?;
    for (slot, outcome) in run.slots.iter().enumerate() {
        for (outer, rows) in outcome.trace.dual_traces.iter().enumerate() {
            for r in rows {
                w.write_record([
                    exp.hash.clone(),
                    exp.seed().to_string(),
                    slot.to_string(),
                    (outer + 1).to_string(),
                    r.iteration.to_string(),
                    r.dual_value.to_string(),
                    r.grad_norm.to_string(),
                    r.step.to_string(),
                    r.g_tol.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(io_err(Path::new("solver trace csv")))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

#[derive(Debug, Serialize)]
struct TimingRow {
    algo: Algorithm,
    slot: usize,
    iteration: usize,
    seconds: f64,
}

/// Files written by [`cmd_run`].
#[derive(Debug, Clone)]
pub struct RunReport {
    pub summaries: Vec<Summary>,
    pub files: Vec<PathBuf>,
    pub runs: Vec<AlgoRun>,
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Runs the selected algorithms and writes, per algorithm, `trace_<algo>.csv`,
/// `partition_<algo>_slot<n>.csv` and (for AIBOT) `solver_trace_aibot.csv`,
/// plus `summary.json`, `config.json` and `timing.json`.
pub fn cmd_run(spec: &ExperimentSpec) -> Result<RunReport> {
    let exp = Experiment::new(spec.load()?)?;
    prepare_out(&spec.out_dir)?;
    run_and_write(&exp, spec.algo, &spec.out_dir)
}

pub fn run_and_write(exp: &Experiment, algo: AlgoChoice, out: &Path) -> Result<RunReport> {
    let slots = exp.slots()?;
    let mut files = Vec::new();
    let mut summaries = Vec::new();
    let mut runs = Vec::new();
    let mut timing = Vec::new();
    for a in algo.algorithms() {
        let run = run_algorithm(exp, &slots, a)?;
        let path = out.join(format!("trace_{}.csv", a.name()));
        let f = fs::File::create(&path).map_err(io_err(&path))?;
        write_trace(f, exp, &run)?;
        files.push(path);
        if a == Algorithm::Aibot {
            let path = out.join("solver_trace_aibot.csv");
            let f = fs::File::create(&path).map_err(io_err(&path))?;
            write_solver_trace(f, exp, &run)?;
            files.push(path);
        }
        for (n, outcome) in run.slots.iter().enumerate() {
            let path = out.join(format!("partition_{}_slot{}.csv", a.name(), n));
            let f = fs::File::create(&path).map_err(io_err(&path))?;
            outcome.solution.partition.write_csv(
                f,
                &exp.scenario.cloud.points,
                &exp.hash,
                exp.seed(),
            )?;
            files.push(path);
            for r in &outcome.trace.records {
                timing.push(TimingRow {
                    algo: a,
                    slot: n,
                    iteration: r.iteration,
                    seconds: r.wall_time.as_secs_f64(),
                });
            }
        }
        summaries.push(summarize(exp, &run));
        runs.push(run);
    }
    let path = out.join("summary.json");
    write_json(&path, &summaries)?;
    files.push(path);
    let path = out.join("config.json");
    fs::write(&path, exp.file.to_json() + "\n").map_err(io_err(&path))?;
    files.push(path);
    write_json(&out.join("timing.json"), &timing)?;
    Ok(RunReport {
        summaries,
        files,
        runs,
    })
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub summary: Summary,
    /// A floor could not be honoured or a rate/QoS constraint is violated.
    pub infeasible: bool,
}

fn infeasible(run: &AlgoRun) -> bool {
    run.slots.iter().any(|s| {
        !s.floors.is_clean()
            || !s.report.constraints.qos_floor.satisfied
            || !s.report.constraints.rate_floor.satisfied
    })
}

/// Runs `algo` at every sweep point. Rate-floor and weight sweeps keep the
/// configured seed so that the points differ only in the swept value; seed
/// sweeps use each listed seed.
pub fn sweep(file: &ConfigFile, sweep: &Sweep, algo: Algorithm) -> Result<Vec<SweepRow>> {
    let points: Vec<(f64, ConfigFile)> = match sweep {
        Sweep::None => vec![(f64::NAN, file.clone())],
        Sweep::RMin(v) => v
            .iter()
            .map(|&r| {
                (
                    r,
                    ConfigFile {
                        r_min: r,
                        ..file.clone()
                    },
                )
            })
            .collect(),
        Sweep::Theta1(v) => v
            .iter()
            .map(|&t| {
                (
                    t,
                    ConfigFile {
                        theta1: t,
                        ..file.clone()
                    },
                )
            })
            .collect(),
        Sweep::Seed(v) => v
            .iter()
            .map(|&s| {
                (
                    s as f64,
                    ConfigFile {
                        rng_seed: s,
                        ..file.clone()
                    },
                )
            })
            .collect(),
    };
    map_indexed(points.len(), |i| {
        let (value, cfg) = &points[i];
        let exp = Experiment::new(cfg.clone())?;
        let slots = exp.slots()?;
        let run = run_algorithm(&exp, &slots, algo)?;
        Ok(SweepRow {
            value: *value,
            summary: summarize(&exp, &run),
            infeasible: infeasible(&run),
        })
    })
    .into_iter()
    .collect()
}

pub const SWEEP_RMIN_HEADER: [&str; 10] = [
    "config_hash",
    "seed",
    "algo",
    "r_min",
    "R_sum_avg",
    "crb_noncoop",
    "G_TOL",
    "rho_sum",
    "infeasible",
    "converged",
];

pub fn write_sweep_rmin<W: Write>(writer: W, base_hash: &str, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_RMIN_HEADER)?;
    for r in rows {
        let s = &r.summary;
        w.write_record([
            base_hash.to_string(),
            s.seed.to_string(),
            s.algo.name().to_string(),
            r.value.to_string(),
            s.r_sum.to_string(),
            opt(s.crb_noncoop),
            s.g_tol.to_string(),
            s.rho_sum.to_string(),
            r.infeasible.to_string(),
            s.converged.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(Path::new("sweep csv")))?;
    Ok(())
}

/// Five rate floors from zero up to twice the weakest per-UAV rate of the
/// initial equal-split solution, so that the upper points bind.
pub fn default_rmin_list(file: &ConfigFile) -> Result<Vec<f64>> {
    let exp = Experiment::new(file.clone())?;
    let slots = exp.slots()?;
    let theta2 = resolve_theta2(&exp.scenario, &slots[0])?;
    let ctx = SlotContext::new(&exp.scenario, &slots[0], theta2);
    let init = crate::aibot::initial_solution(&ctx)?;
    let report = ctx.evaluate(&init.partition.uav_cells, &init.powers)?;
    let weakest = report.rates.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((0..5).map(|i| 2.0 * weakest * i as f64 / 4.0).collect())
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub infeasible_rows: usize,
    pub file: PathBuf,
}

/// Full runs at every listed rate floor; writes `sweep_rmin.csv`.
/// Infeasible points are flagged and the sweep continues.
pub fn cmd_sweep_rmin(spec: &ExperimentSpec) -> Result<SweepReport> {
    let file = spec.load()?;
    let values = match &spec.sweep {
        Sweep::RMin(v) => v.clone(),
        Sweep::None => default_rmin_list(&file)?,
        _ => return Err(Error::config("sweep-rmin takes a list of rate floors")),
    };
    if values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config(
            "rate floors must be listed in increasing order",
        ));
    }
    prepare_out(&spec.out_dir)?;
    let mut rows = Vec::new();
    for a in spec.algo.algorithms() {
        rows.extend(sweep(&file, &Sweep::RMin(values.clone()), a)?);
    }
    let path = spec.out_dir.join("sweep_rmin.csv");
    let f = fs::File::create(&path).map_err(io_err(&path))?;
    write_sweep_rmin(f, &file.hash(), &rows)?;
    fs::write(spec.out_dir.join("config.json"), file.to_json() + "\n")
        .map_err(io_err(&spec.out_dir))?;
    Ok(SweepReport {
        infeasible_rows: rows.iter().filter(|r| r.infeasible).count(),
        rows,
        file: path,
    })
}

pub const CONVERGENCE_HEADER: [&str; 9] = [
    "config_hash",
    "seed",
    "slot",
    "iteration",
    "aibot_G_TOL",
    "aibot_best_G_TOL",
    "aibot_crb_noncoop",
    "baseline_G_TOL",
    "baseline_crb_noncoop",
];

/// Per-iteration AIBOT objective and target CRB next to the (single-pass)
/// baseline values.
pub fn write_convergence<W: Write>(
    writer: W,
    exp: &Experiment,
    aibot: &AlgoRun,
    baseline: &AlgoRun,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CONVERGENCE_HEADER)?;
    for (slot, (a, b)) in aibot.slots.iter().zip(&baseline.slots).enumerate() {
        for r in &a.trace.records {
            w.write_record([
                exp.hash.clone(),
                exp.seed().to_string(),
                slot.to_string(),
                r.iteration.to_string(),
                r.g_tol.to_string(),
                r.best_g_tol.to_string(),
                opt(r.crb_noncoop.map(|c| c.crb_distance)),
                b.report.g_tol.to_string(),
                opt(b.report.crb_noncoop.map(|c| c.crb_distance)),
            ])?;
        }
    }
    w.flush().map_err(io_err(Path::new("convergence csv")))?;
    Ok(())
}

/// Runs AIBOT and the baseline and writes `convergence.csv` alongside the
/// regular run outputs.
pub fn cmd_convergence(spec: &ExperimentSpec) -> Result<RunReport> {
    let exp = Experiment::new(spec.load()?)?;
    prepare_out(&spec.out_dir)?;
    let report = run_and_write(&exp, AlgoChoice::Both, &spec.out_dir)?;
    let path = spec.out_dir.join("convergence.csv");
    let f = fs::File::create(&path).map_err(io_err(&path))?;
    write_convergence(f, &exp, &report.runs[0], &report.runs[1])?;
    let mut report = report;
    report.files.push(path);
    Ok(report)
}

/// Process exit code for an error: 2 for configuration problems, 3 for
/// budget infeasibility, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Config(_) | Error::Json(_) => 2,
        Error::Io { .. } => 2,
        Error::InfeasibleBudget(_) => 3,
        _ => 1,
    }
}

/// Machine-readable error description.
pub fn error_json(err: &Error) -> serde_json::Value {
    let kind = match err.root() {
        Error::DegenerateGeometry(_) => "degenerate_geometry",
        Error::PerfectSensing => "perfect_sensing",
        Error::InfiniteCrb => "infinite_crb",
        Error::Config(_) => "config",
        Error::InfeasibleBudget(_) => "infeasible_budget",
        Error::OracleTooLarge { .. } => "oracle_too_large",
        Error::Solver { .. } => "solver",
        Error::Io { .. } => "io",
        Error::Json(_) => "config",
        Error::Csv(_) => "csv",
    };
    let mut v = serde_json::json!({
        "error": kind,
        "message": err.to_string(),
        "exit_code": exit_code(err),
    });
    if let Error::Io { path, .. } = err.root() {
        v["path"] = serde_json::Value::String(path.clone());
    }
    if let Error::Solver { iteration, .. } = err {
        v["iteration"] = (*iteration).into();
    }
    v
}
