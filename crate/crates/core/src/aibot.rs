//! The alternating outer loop: association with powers frozen, then powers
//! with association frozen, until the objective settles. Also the
//! weighted-Voronoi plus water-filling baseline.

use std::time::Duration;

use serde::Serialize;

use crate::association::{run_association, weighted_voronoi, AssociationContext};
use crate::config::SolverConfig;
use crate::error::Result;
use crate::instance::SlotInstance;
use crate::numeric::relative_diff;
use crate::objective::{
    calibrate_theta2, evaluate_gtol, ConstraintReport, ObjectiveReport, PowerAllocation,
    SlotContext, Solution,
};
use crate::power::{
    equal_split, run_dual_ascent, water_filling, AscentSettings, DualTraceRow, FloorReport,
    PowerProblem,
};
use crate::scenario::Scenario;
use crate::sensing::CrbEstimate;

/// Wall-clock timer for the trace. The browser target has no monotonic
/// clock in std, so there it always reads zero.
#[derive(Clone, Copy)]
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn elapsed(&self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed();
        #[cfg(target_arch = "wasm32")]
        Duration::ZERO
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AibotSettings {
    pub t1: usize,
    pub t3: usize,
    pub tol_outer: f64,
    pub ascent: AscentSettings,
    /// Turn the rate floor and the cooperative QoS constraint into power
    /// bounds inside the power step.
    pub enforce_floors: bool,
}

impl AibotSettings {
    pub fn from_solver(s: &SolverConfig) -> Result<Self> {
        Ok(AibotSettings {
            t1: s.t1,
            t3: s.t3,
            tol_outer: s.tol_outer,
            ascent: AscentSettings::from_solver(s)?,
            enforce_floors: true,
        })
    }
}

/// One row of the outer trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub g_tol: f64,
    /// Best objective seen up to and including this iteration.
    pub best_g_tol: f64,
    pub r_sum: f64,
    pub rho_sum: f64,
    pub crbs: Vec<Option<CrbEstimate>>,
    pub crb_noncoop: Option<CrbEstimate>,
    pub masses: Vec<f64>,
    pub constraints: ConstraintReport,
    pub floors: FloorReport,
    pub dual_iterations: usize,
    pub dual_converged: bool,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AibotTrace {
    pub records: Vec<IterationRecord>,
    /// Dual-ascent trace of each outer iteration (empty for the baseline).
    pub dual_traces: Vec<Vec<DualTraceRow>>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub solution: Solution,
    pub report: ObjectiveReport,
    pub floors: FloorReport,
    pub trace: AibotTrace,
    pub converged: bool,
}

/// Plain Voronoi association and an equal split of every pool.
pub fn initial_solution(ctx: &SlotContext<'_>) -> Result<Solution> {
    let s = ctx.scenario;
    let sites = s.station_positions();
    let partition = weighted_voronoi(
        &s.cloud.points,
        &sites,
        &vec![0.0; sites.len()],
        &ctx.slot.positions(),
        ctx.k(),
    );
    let problem = PowerProblem::build(ctx, &partition.uav_cells, false)?;
    let powers = PowerAllocation::from_flat(&equal_split(&problem)?, ctx.k());
    Ok(Solution { partition, powers })
}

/// The configured mapping factor, or one calibrated on the initial
/// solution of `slot`.
pub fn resolve_theta2(scenario: &Scenario, slot: &SlotInstance) -> Result<f64> {
    if let Some(t) = scenario.config.theta2 {
        return Ok(t);
    }
    let ctx = SlotContext::new(scenario, slot, 1.0);
    let init = initial_solution(&ctx)?;
    let report = ctx.evaluate(&init.partition.uav_cells, &init.powers)?;
    calibrate_theta2(report.r_sum, report.rho_sum, ctx.k())
}

fn record(
    iteration: usize,
    report: &ObjectiveReport,
    best: f64,
    solution: &Solution,
    floors: &FloorReport,
    dual: Option<(usize, bool)>,
    started: Stopwatch,
) -> IterationRecord {
    let (dual_iterations, dual_converged) = dual.unwrap_or((0, true));
    IterationRecord {
        iteration,
        g_tol: report.g_tol,
        best_g_tol: best,
        r_sum: report.r_sum,
        rho_sum: report.rho_sum,
        crbs: report.crbs.clone(),
        crb_noncoop: report.crb_noncoop,
        masses: solution.partition.masses.clone(),
        constraints: report.constraints,
        floors: floors.clone(),
        dual_iterations,
        dual_converged,
        wall_time: started.elapsed(),
    }
}

/// Alternates association and power allocation for at most `t3` passes,
/// stopping once the relative change of the objective drops below
/// `tol_outer`. Returns the best solution seen.
pub fn run_aibot(ctx: &SlotContext<'_>, settings: &AibotSettings) -> Result<RunOutcome> {
    let k = ctx.k();
    let mut current = initial_solution(ctx)?;
    // Every association pass starts from the plain Voronoi labels.
    let voronoi = current.partition.labels.clone();
    let mut trace = AibotTrace::default();
    let mut best: Option<(Solution, ObjectiveReport, FloorReport)> = None;
    let mut previous: Option<f64> = None;
    let mut converged = false;

    for t in 1..=settings.t3.max(1) {
        let started = Stopwatch::start();
        let assoc = AssociationContext::new(ctx, &current.partition.uav_cells, &current.powers);
        let partition = run_association(ctx, &assoc, &voronoi, settings.t1);
        let problem = PowerProblem::build(ctx, &partition.uav_cells, settings.enforce_floors)
            .map_err(|e| e.at_iteration(t))?;
        let state = run_dual_ascent(&problem, &settings.ascent).map_err(|e| e.at_iteration(t))?;
        current = Solution {
            partition,
            powers: PowerAllocation::from_flat(&state.powers, k),
        };
        let report = evaluate_gtol(ctx, &current).map_err(|e| e.at_iteration(t))?;
        let g = report.g_tol;
        if best.as_ref().is_none_or(|(_, r, _)| g > r.g_tol) {
            best = Some((current.clone(), report.clone(), problem.floors.clone()));
        }
        let best_g = best.as_ref().map(|(_, r, _)| r.g_tol).unwrap_or(g);
        trace.records.push(record(
            t,
            &report,
            best_g,
            &current,
            &problem.floors,
            Some((state.iterations, state.converged)),
            started,
        ));
        trace.dual_traces.push(state.trace);
        if let Some(p) = previous {
            if relative_diff(g, p) < settings.tol_outer {
                converged = true;
                break;
            }
        }
        previous = Some(g);
    }
    let (solution, report, floors) = best.expect("at least one outer iteration runs");
    Ok(RunOutcome {
        solution,
        report,
        floors,
        trace,
        converged,
    })
}

/// Plain Voronoi association with water-filling communication powers and
/// equally split sensing powers; a single pass.
pub fn run_baseline(ctx: &SlotContext<'_>) -> Result<RunOutcome> {
    let started = Stopwatch::start();
    let s = ctx.scenario;
    let sites = s.station_positions();
    let partition = weighted_voronoi(
        &s.cloud.points,
        &sites,
        &vec![0.0; sites.len()],
        &ctx.slot.positions(),
        ctx.k(),
    );
    let problem = PowerProblem::build(ctx, &partition.uav_cells, false)?;
    let powers = PowerAllocation::from_flat(&water_filling(&problem)?, ctx.k());
    let solution = Solution { partition, powers };
    let report = evaluate_gtol(ctx, &solution)?;
    let floors = FloorReport::default();
    let trace = AibotTrace {
        records: vec![record(
            1,
            &report,
            report.g_tol,
            &solution,
            &floors,
            None,
            started,
        )],
        dual_traces: Vec::new(),
    };
    Ok(RunOutcome {
        solution,
        report,
        floors,
        trace,
        converged: true,
    })
}
