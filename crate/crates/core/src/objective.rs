//! The weighted rate/QoS objective, its constraint checks, and the box-plus-budget
//! projection shared by both optimizers.

use serde::Serialize;

use crate::association::Partition;
use crate::channel::rate;
use crate::error::{Error, Result};
use crate::instance::SlotInstance;
use crate::numeric::compensated_sum;
use crate::scenario::{cell_masses, Scenario};
use crate::sensing::{estimate, localization_qos, CrbEstimate, SensingLink};

const BUDGET_RTOL: f64 = 1e-9;
const QOS_RTOL: f64 = 1e-9;

/// Communication power per cooperative UAV and sensing power per target,
/// each on the link to the UAV's serving station.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerAllocation {
    pub comm: Vec<f64>,
    pub sensing: Vec<f64>,
}

impl PowerAllocation {
    /// Flat view: communication links first, then sensing links.
    pub fn to_flat(&self) -> Vec<f64> {
        self.comm.iter().chain(&self.sensing).copied().collect()
    }

    pub fn from_flat(flat: &[f64], cooperative: usize) -> Self {
        PowerAllocation {
            comm: flat[..cooperative].to_vec(),
            sensing: flat[cooperative..].to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub partition: Partition,
    pub powers: PowerAllocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    Communication,
    Sensing,
}

/// Links of one station sharing one budget equality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetPool {
    pub station: usize,
    pub kind: PoolKind,
    /// Indices into the flat power vector.
    pub links: Vec<usize>,
    pub budget: f64,
}

/// Per-station communication and sensing pools (empty pools omitted).
pub fn budget_pools(scenario: &Scenario, uav_station: &[usize]) -> Vec<BudgetPool> {
    let k = uav_station.len() - 1;
    let cfg = &scenario.config;
    let mut pools = Vec::new();
    for m in 0..scenario.stations.len() {
        let comm: Vec<usize> = (0..k).filter(|&i| uav_station[i] == m).collect();
        if !comm.is_empty() {
            pools.push(BudgetPool {
                station: m,
                kind: PoolKind::Communication,
                links: comm,
                budget: cfg.comm_budget(),
            });
        }
        let sens: Vec<usize> = (0..=k)
            .filter(|&j| uav_station[j] == m)
            .map(|j| k + j)
            .collect();
        if !sens.is_empty() {
            pools.push(BudgetPool {
                station: m,
                kind: PoolKind::Sensing,
                links: sens,
                budget: cfg.sensing_budget(),
            });
        }
    }
    pools
}

/// Number of cooperative UAVs served by each station.
pub fn station_loads(uav_station: &[usize], stations: usize) -> Vec<usize> {
    let mut n = vec![0; stations];
    for &m in &uav_station[..uav_station.len() - 1] {
        n[m] += 1;
    }
    n
}

/// Per-link bandwidth of a station: its total split equally among its
/// cooperative UAVs (the whole band when it serves none).
pub fn link_bandwidth(total: f64, load: usize) -> f64 {
    total / load.max(1) as f64
}

/// Everything the objective needs for one slot.
#[derive(Debug, Clone, Copy)]
pub struct SlotContext<'a> {
    pub scenario: &'a Scenario,
    pub slot: &'a SlotInstance,
    pub theta2: f64,
}

impl<'a> SlotContext<'a> {
    pub fn new(scenario: &'a Scenario, slot: &'a SlotInstance, theta2: f64) -> Self {
        SlotContext {
            scenario,
            slot,
            theta2,
        }
    }

    pub fn k(&self) -> usize {
        self.slot.cooperative()
    }

    pub fn theta1(&self) -> f64 {
        self.scenario.config.theta1
    }

    pub fn bandwidths(&self, uav_station: &[usize]) -> Vec<f64> {
        let loads = station_loads(uav_station, self.scenario.stations.len());
        uav_station
            .iter()
            .map(|&m| link_bandwidth(self.scenario.stations[m].bandwidth, loads[m]))
            .collect()
    }

    /// Objective weight of one unit of rate (bit/s).
    pub fn rate_weight(&self) -> f64 {
        self.theta1() / self.k() as f64
    }

    /// Objective weight of one unit of QoS.
    pub fn qos_weight(&self) -> f64 {
        (1.0 - self.theta1()) * self.theta2 / (self.k() + 1) as f64
    }

    fn check_shape(&self, uav_station: &[usize], powers: &PowerAllocation) -> Result<()> {
        let k = self.k();
        if uav_station.len() != k + 1 || powers.comm.len() != k || powers.sensing.len() != k + 1 {
            return Err(Error::config("solution does not cover every UAV"));
        }
        if uav_station
            .iter()
            .any(|&m| m >= self.scenario.stations.len())
        {
            return Err(Error::config("association refers to an unknown station"));
        }
        Ok(())
    }

    pub fn sensing_links(
        &self,
        uav_station: &[usize],
        powers: &PowerAllocation,
    ) -> Vec<SensingLink> {
        let bw = self.bandwidths(uav_station);
        uav_station
            .iter()
            .enumerate()
            .map(|(j, &m)| SensingLink {
                target: j,
                station: m,
                gain: self.slot.links[j][m].sensing_gain,
                power: powers.sensing[j],
                bandwidth: bw[j],
            })
            .collect()
    }

    pub fn rates(&self, uav_station: &[usize], powers: &PowerAllocation) -> Vec<f64> {
        let bw = self.bandwidths(uav_station);
        (0..self.k())
            .map(|i| {
                let link = &self.slot.links[i][uav_station[i]];
                rate(bw[i], powers.comm[i] * link.snr_per_watt(bw[i]))
            })
            .collect()
    }

    /// R_sum, ρ_sum and G_TOL with per-link detail. Constraints are left
    /// at their defaults; see [`check_constraints`].
    pub fn evaluate(
        &self,
        uav_station: &[usize],
        powers: &PowerAllocation,
    ) -> Result<ObjectiveReport> {
        self.check_shape(uav_station, powers)?;
        let params = &self.scenario.config.sensing;
        let rates = self.rates(uav_station, powers);
        let links = self.sensing_links(uav_station, powers);
        let rhos: Vec<f64> = links.iter().map(|l| localization_qos(l, params)).collect();
        let crbs: Vec<Option<CrbEstimate>> =
            links.iter().map(|l| estimate(l, params).ok()).collect();
        let r_sum = compensated_sum(rates.iter().copied());
        let rho_sum = compensated_sum(rhos.iter().copied());
        let k = self.k();
        Ok(ObjectiveReport {
            r_sum,
            rho_sum,
            g_tol: combine_gtol(r_sum, rho_sum, k, self.theta1(), self.theta2),
            rates,
            rhos,
            crb_noncoop: crbs[k],
            crbs,
            constraints: ConstraintReport::default(),
        })
    }
}

/// `ϑ1 R_sum / K + (1 - ϑ1) ϑ2 ρ_sum / (K + 1)`.
pub fn combine_gtol(r_sum: f64, rho_sum: f64, k: usize, theta1: f64, theta2: f64) -> f64 {
    theta1 * r_sum / k as f64 + (1.0 - theta1) * theta2 * rho_sum / (k + 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub satisfied: bool,
    /// Largest violation (0 when satisfied).
    pub margin: f64,
    pub violations: usize,
}

impl Default for Check {
    fn default() -> Self {
        Check {
            satisfied: true,
            margin: 0.0,
            violations: 0,
        }
    }
}

impl Check {
    fn record(&mut self, violation: f64) {
        if violation > 0.0 {
            self.satisfied = false;
            self.violations += 1;
            self.margin = self.margin.max(violation);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ConstraintReport {
    pub masses: Check,
    pub labels: Check,
    pub power_box: Check,
    pub budgets: Check,
    pub qos_floor: Check,
    pub rate_floor: Check,
}

impl ConstraintReport {
    pub fn all_satisfied(&self) -> bool {
        [
            self.masses,
            self.labels,
            self.power_box,
            self.budgets,
            self.qos_floor,
            self.rate_floor,
        ]
        .iter()
        .all(|c| c.satisfied)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveReport {
    pub r_sum: f64,
    pub rho_sum: f64,
    pub g_tol: f64,
    pub rates: Vec<f64>,
    pub rhos: Vec<f64>,
    /// `None` where the sensing power is zero.
    pub crbs: Vec<Option<CrbEstimate>>,
    pub crb_noncoop: Option<CrbEstimate>,
    pub constraints: ConstraintReport,
}

pub fn evaluate_gtol(ctx: &SlotContext<'_>, solution: &Solution) -> Result<ObjectiveReport> {
    let mut report = ctx.evaluate(&solution.partition.uav_cells, &solution.powers)?;
    report.constraints = check_constraints(ctx, solution, &report);
    Ok(report)
}

/// Mapping factor that puts both objective terms on the same scale for a
/// reference solution: `(R_sum / K) / (ρ_sum / (K + 1))`.
pub fn calibrate_theta2(r_sum: f64, rho_sum: f64, k: usize) -> Result<f64> {
    let t = (r_sum / k as f64) / (rho_sum / (k + 1) as f64);
    if t > 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(Error::config(format!(
            "cannot calibrate theta2 from R_sum = {r_sum}, rho_sum = {rho_sum}"
        )))
    }
}

/// Reports every constraint for a solution whose objective was already evaluated.
pub fn check_constraints(
    ctx: &SlotContext<'_>,
    solution: &Solution,
    report: &ObjectiveReport,
) -> ConstraintReport {
    let cfg = &ctx.scenario.config;
    let m = ctx.scenario.stations.len();
    let k = ctx.k();
    let part = &solution.partition;
    let mut out = ConstraintReport::default();

    // One in-range label per cloud point.
    if part.labels.len() != ctx.scenario.cloud.len() {
        out.labels.record(1.0);
    }
    for &l in &part.labels {
        if l >= m {
            out.labels.record(1.0);
        }
    }

    // Stored masses match the labels and sum to K.
    if out.labels.satisfied {
        let masses = cell_masses(&part.labels, m, k);
        for (a, b) in masses.iter().zip(&part.masses) {
            out.masses.record((a - b).abs() - 1e-9 * k as f64);
        }
        let total = compensated_sum(part.masses.iter().copied());
        out.masses
            .record((total - k as f64).abs() - 1e-9 * k as f64);
    } else {
        out.masses.record(f64::INFINITY);
    }

    let flat = solution.powers.to_flat();
    for &p in &flat {
        out.power_box.record((cfg.p_min - p).max(p - cfg.p_max));
    }

    for pool in budget_pools(ctx.scenario, &part.uav_cells) {
        let s = compensated_sum(pool.links.iter().map(|&i| flat[i]));
        out.budgets
            .record((s - pool.budget).abs() - BUDGET_RTOL * pool.budget.max(f64::MIN_POSITIVE));
    }

    for &rho in &report.rhos[..k] {
        let tol = QOS_RTOL * cfg.rho_min.abs();
        if cfg.literal_c5 {
            out.qos_floor.record(rho - cfg.rho_min - tol);
        } else {
            out.qos_floor.record(cfg.rho_min - rho - tol);
        }
    }
    for &r in &report.rates {
        out.rate_floor.record(cfg.r_min - r - QOS_RTOL * cfg.r_min);
    }
    out
}

/// Clips `raw` to `[lo, hi]` and rescales the offsets above `lo` until the
/// entries sum to `budget`.
pub fn project_feasible(raw: &[f64], lo: &[f64], hi: &[f64], budget: f64) -> Result<Vec<f64>> {
    let n = raw.len();
    if lo.len() != n || hi.len() != n {
        return Err(Error::config(
            "projection bounds do not match the link count",
        ));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let tol = 1e-12 * budget.abs().max(f64::MIN_POSITIVE);
    let lo_sum = compensated_sum(lo.iter().copied());
    let hi_sum = compensated_sum(hi.iter().copied());
    if lo_sum > budget + tol || hi_sum < budget - tol || lo.iter().zip(hi).any(|(l, h)| l > h) {
        return Err(Error::InfeasibleBudget(format!(
            "bounds sum to [{lo_sum}, {hi_sum}] but the budget is {budget}"
        )));
    }
    let mut p: Vec<f64> = raw
        .iter()
        .zip(lo.iter().zip(hi))
        .map(|(&x, (&l, &h))| if x.is_finite() { x.clamp(l, h) } else { l })
        .collect();

    for _ in 0..=n {
        let s = compensated_sum(p.iter().copied());
        if (s - budget).abs() <= tol {
            break;
        }
        if s > budget {
            // Shrinking offsets never crosses a lower bound.
            let excess = compensated_sum(p.iter().zip(lo).map(|(x, l)| x - l));
            let f = (budget - lo_sum) / excess;
            for (x, l) in p.iter_mut().zip(lo) {
                *x = l + (*x - l) * f;
            }
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| p[i] < hi[i]).collect();
            let fixed = compensated_sum((0..n).filter(|i| p[*i] >= hi[*i]).map(|i| p[i]));
            let free_lo = compensated_sum(free.iter().map(|&i| lo[i]));
            let target = budget - fixed - free_lo;
            let offsets = compensated_sum(free.iter().map(|&i| p[i] - lo[i]));
            if offsets > 0.0 {
                let f = target / offsets;
                for &i in &free {
                    p[i] = lo[i] + (p[i] - lo[i]) * f;
                }
            } else {
                let share = target / free.len() as f64;
                for &i in &free {
                    p[i] = lo[i] + share;
                }
            }
        }
        for ((x, &l), &h) in p.iter_mut().zip(lo).zip(hi) {
            *x = x.clamp(l, h);
        }
    }
    Ok(p)
}
