//! Browser demo: three small experiments on a reduced copy of the pinned
//! scenario, each returning JSON for the page in `www/` to draw.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use isac_ot::config::ConfigFile;
use isac_ot::harness::{
    default_rmin_list, run_algorithm, summarize, sweep, Algorithm, Experiment, Sweep,
};
use isac_ot::scenario::UavKind;

/// Points drawn per scene; enough for a readable map, small enough to stay
/// interactive.
const DEMO_SAMPLES: usize = 3000;

fn scene(stations: usize, seed: u32) -> Result<Experiment, String> {
    if !(1..=8).contains(&stations) {
        return Err(format!("stations must be between 1 and 8, got {stations}"));
    }
    let mut file = ConfigFile::desk();
    file.stations = stations;
    file.sample_count = DEMO_SAMPLES;
    file.rng_seed = seed as u64;
    Experiment::new(file).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Point {
    x: f64,
    y: f64,
    cell: usize,
}

#[derive(Serialize)]
struct Uav {
    x: f64,
    y: f64,
    cell: usize,
    cooperative: bool,
}

#[derive(Serialize)]
struct PartitionMap {
    width: f64,
    height: f64,
    stations: Vec<[f64; 2]>,
    points: Vec<Point>,
    uavs: Vec<Uav>,
    masses: Vec<f64>,
    g_tol: f64,
}

pub fn partition_map_json(stations: usize, seed: u32) -> Result<String, String> {
    let exp = scene(stations, seed)?;
    let slots = exp.slots().map_err(|e| e.to_string())?;
    let run = run_algorithm(&exp, &slots, Algorithm::Aibot).map_err(|e| e.to_string())?;
    let outcome = &run.slots[0];
    let part = &outcome.solution.partition;
    let bounds = exp.scenario.config.density.bounds;
    let e = bounds.extent();
    let map = PartitionMap {
        width: e.x,
        height: e.y,
        stations: exp
            .scenario
            .stations
            .iter()
            .map(|s| [s.position.x - bounds.min.x, s.position.y - bounds.min.y])
            .collect(),
        points: exp
            .scenario
            .cloud
            .points
            .iter()
            .zip(&part.labels)
            .map(|(q, &cell)| Point {
                x: q.x - bounds.min.x,
                y: q.y - bounds.min.y,
                cell,
            })
            .collect(),
        uavs: slots[0]
            .uavs
            .iter()
            .zip(&part.uav_cells)
            .map(|(u, &cell)| Uav {
                x: u.position.x - bounds.min.x,
                y: u.position.y - bounds.min.y,
                cell,
                cooperative: u.kind == UavKind::Cooperative,
            })
            .collect(),
        masses: part.masses.clone(),
        g_tol: outcome.report.g_tol,
    };
    serde_json::to_string(&map).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Curve {
    aibot: Vec<f64>,
    best: Vec<f64>,
    baseline: f64,
    aibot_crb: Option<f64>,
    baseline_crb: Option<f64>,
}

pub fn convergence_curve_json(stations: usize, seed: u32) -> Result<String, String> {
    let exp = scene(stations, seed)?;
    let slots = exp.slots().map_err(|e| e.to_string())?;
    let a = run_algorithm(&exp, &slots, Algorithm::Aibot).map_err(|e| e.to_string())?;
    let b = run_algorithm(&exp, &slots, Algorithm::Baseline).map_err(|e| e.to_string())?;
    let records = &a.slots[0].trace.records;
    let curve = Curve {
        aibot: records.iter().map(|r| r.g_tol).collect(),
        best: records.iter().map(|r| r.best_g_tol).collect(),
        baseline: b.slots[0].report.g_tol,
        aibot_crb: summarize(&exp, &a).crb_noncoop,
        baseline_crb: summarize(&exp, &b).crb_noncoop,
    };
    serde_json::to_string(&curve).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct TradeoffRow {
    r_min: f64,
    r_sum: f64,
    crb_noncoop: Option<f64>,
    infeasible: bool,
}

pub fn rate_tradeoff_json(stations: usize, seed: u32) -> Result<String, String> {
    let exp = scene(stations, seed)?;
    let list = default_rmin_list(&exp.file).map_err(|e| e.to_string())?;
    let rows = sweep(&exp.file, &Sweep::RMin(list), Algorithm::Aibot).map_err(|e| e.to_string())?;
    let out: Vec<TradeoffRow> = rows
        .iter()
        .map(|r| TradeoffRow {
            r_min: r.value,
            r_sum: r.summary.r_sum,
            crb_noncoop: r.summary.crb_noncoop,
            infeasible: r.infeasible,
        })
        .collect();
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Cell labels of the sample cloud after AIBOT, with station and UAV
/// positions.
#[wasm_bindgen]
pub fn partition_map(stations: usize, seed: u32) -> Result<String, JsError> {
    partition_map_json(stations, seed).map_err(|e| JsError::new(&e))
}

/// Per-iteration AIBOT objective next to the baseline's.
#[wasm_bindgen]
pub fn convergence_curve(stations: usize, seed: u32) -> Result<String, JsError> {
    convergence_curve_json(stations, seed).map_err(|e| JsError::new(&e))
}

/// Sum rate and target CRB over five increasing rate floors.
#[wasm_bindgen]
pub fn rate_tradeoff(stations: usize, seed: u32) -> Result<String, JsError> {
    rate_tradeoff_json(stations, seed).map_err(|e| JsError::new(&e))
}
