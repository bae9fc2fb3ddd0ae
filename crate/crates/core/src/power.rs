//! Power allocation for a fixed association.
//!
//! Each station splits a communication budget over the cooperative UAVs it
//! serves and a sensing budget over the targets it senses. Every (station,
//! pool) is a small transport problem: the budget is the source mass, the
//! links are destinations, and the cost of sending `p` watts down a link is
//! minus that link's share of the objective. The source potential is a
//! price `ν` per watt; each link's potential is the c-transform
//! `φ_ℓ(ν) = min_p (c_ℓ(p) + ν p)` over a power grid, and the dual
//! `F(ν) = Σ φ_ℓ(ν) - ν B` is concave and piecewise linear. [`run_dual_ascent`]
//! climbs it with doubling/halving steps and recovers powers from the two
//! grid responses that bracket the budget.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::objective::{budget_pools, project_feasible, BudgetPool, PoolKind, SlotContext};

/// Per-link share of the objective as a function of transmit power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    /// `weight · log2(1 + snr_per_watt · p)`.
    Rate { weight: f64, snr_per_watt: f64 },
    /// `slope · p`.
    Linear { slope: f64 },
}

impl Utility {
    pub fn value(&self, p: f64) -> f64 {
        match *self {
            Utility::Rate {
                weight,
                snr_per_watt,
            } => weight * (snr_per_watt * p).ln_1p() / std::f64::consts::LN_2,
            Utility::Linear { slope } => slope * p,
        }
    }

    pub fn marginal(&self, p: f64) -> f64 {
        match *self {
            Utility::Rate {
                weight,
                snr_per_watt,
            } => weight * snr_per_watt / ((1.0 + snr_per_watt * p) * std::f64::consts::LN_2),
            Utility::Linear { slope } => slope,
        }
    }

    /// Maximizer of `value(p) - price · p` over `[lo, hi]`. Linear links
    /// sit at `lo` when the price matches the slope.
    pub fn best_response(&self, price: f64, lo: f64, hi: f64) -> f64 {
        if price <= 0.0 {
            return hi;
        }
        match *self {
            Utility::Rate {
                weight,
                snr_per_watt,
            } => (weight / (price * std::f64::consts::LN_2) - 1.0 / snr_per_watt).clamp(lo, hi),
            Utility::Linear { slope } => {
                if slope > price {
                    hi
                } else {
                    lo
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLink {
    pub utility: Utility,
    pub lo: f64,
    pub hi: f64,
}

/// Rate and QoS floors that could not be honoured.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FloorReport {
    /// Links whose floor exceeds `p_max` on its own.
    pub unreachable_links: Vec<usize>,
    /// Pools whose floors together exceed the budget; their floors are dropped.
    pub infeasible_pools: Vec<usize>,
}

impl FloorReport {
    pub fn is_clean(&self) -> bool {
        self.unreachable_links.is_empty() && self.infeasible_pools.is_empty()
    }
}

/// Flat link list (communication links first, then sensing links) with
/// per-pool budget equalities.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProblem {
    pub links: Vec<PowerLink>,
    pub pools: Vec<BudgetPool>,
    pub cooperative: usize,
    pub floors: FloorReport,
}

impl PowerProblem {
    /// Checks that every link belongs to exactly one pool and that every
    /// pool's box can meet its budget.
    pub fn from_parts(
        links: Vec<PowerLink>,
        pools: Vec<BudgetPool>,
        cooperative: usize,
    ) -> Result<Self> {
        let mut seen = vec![false; links.len()];
        for pool in &pools {
            for &i in &pool.links {
                if i >= links.len() || seen[i] {
                    return Err(Error::config("every link must belong to exactly one pool"));
                }
                seen[i] = true;
            }
            let lo = compensated_sum(pool.links.iter().map(|&i| links[i].lo));
            let hi = compensated_sum(pool.links.iter().map(|&i| links[i].hi));
            let tol = 1e-12 * pool.budget.abs().max(f64::MIN_POSITIVE);
            if lo > pool.budget + tol || hi < pool.budget - tol {
                return Err(Error::InfeasibleBudget(format!(
                    "station {} {:?} pool: bounds sum to [{lo}, {hi}], budget {}",
                    pool.station, pool.kind, pool.budget
                )));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::config("every link must belong to exactly one pool"));
        }
        Ok(PowerProblem {
            links,
            pools,
            cooperative,
            floors: FloorReport::default(),
        })
    }

    /// The objective of one slot as a sum of per-link utilities. With
    /// `enforce_floors`, the rate floor and the cooperative QoS constraint
    /// become per-link power bounds.
    pub fn build(
        ctx: &SlotContext<'_>,
        uav_station: &[usize],
        enforce_floors: bool,
    ) -> Result<Self> {
        let cfg = &ctx.scenario.config;
        let k = ctx.k();
        let bw = ctx.bandwidths(uav_station);
        let params = &cfg.sensing;
        let mut links = Vec::with_capacity(2 * k + 1);
        let mut floors = FloorReport::default();
        for (i, &b) in bw.iter().enumerate().take(k) {
            let g = ctx.slot.links[i][uav_station[i]].snr_per_watt(b);
            let mut link = PowerLink {
                utility: Utility::Rate {
                    weight: ctx.rate_weight() * b,
                    snr_per_watt: g,
                },
                lo: cfg.p_min,
                hi: cfg.p_max,
            };
            if enforce_floors && cfg.r_min > 0.0 {
                let floor = (2f64.powf(cfg.r_min / b) - 1.0) / g;
                if !(floor <= cfg.p_max) {
                    floors.unreachable_links.push(i);
                }
                link.lo = link.lo.max(floor.min(cfg.p_max));
            }
            links.push(link);
        }
        for j in 0..=k {
            let gain = ctx.slot.links[j][uav_station[j]].sensing_gain;
            let per_watt = gain * gain * params.qos_weight(bw[j]);
            let mut link = PowerLink {
                utility: Utility::Linear {
                    slope: ctx.qos_weight() * per_watt,
                },
                lo: cfg.p_min,
                hi: cfg.p_max,
            };
            if enforce_floors && j < k && cfg.rho_min > 0.0 {
                let bound = cfg.rho_min / per_watt;
                if cfg.literal_c5 {
                    if bound >= cfg.p_min {
                        link.hi = link.hi.min(bound);
                    } else {
                        floors.unreachable_links.push(k + j);
                    }
                } else {
                    if !(bound <= cfg.p_max) {
                        floors.unreachable_links.push(k + j);
                    }
                    link.lo = link.lo.max(bound.min(cfg.p_max));
                }
            }
            links.push(link);
        }
        let pools = budget_pools(ctx.scenario, uav_station);
        for (n, pool) in pools.iter().enumerate() {
            let lo = compensated_sum(pool.links.iter().map(|&i| links[i].lo));
            let hi = compensated_sum(pool.links.iter().map(|&i| links[i].hi));
            if lo > pool.budget {
                // Best effort: shrink every floor toward p_min by the same
                // factor so that the floors alone exhaust the budget.
                floors.infeasible_pools.push(n);
                let base = cfg.p_min * pool.links.len() as f64;
                let f = ((pool.budget - base) / (lo - base)).clamp(0.0, 1.0);
                for &i in &pool.links {
                    links[i].lo = cfg.p_min + (links[i].lo - cfg.p_min) * f;
                }
            }
            if hi < pool.budget {
                floors.infeasible_pools.push(n);
                for &i in &pool.links {
                    links[i].hi = cfg.p_max;
                }
            }
        }
        let mut problem = Self::from_parts(links, pools, k)?;
        problem.floors = floors;
        Ok(problem)
    }

    pub fn objective(&self, flat: &[f64]) -> f64 {
        compensated_sum(
            self.links
                .iter()
                .zip(flat)
                .map(|(l, &p)| l.utility.value(p)),
        )
    }

    /// Projects every pool of `flat` onto its box and budget.
    pub fn project(&self, flat: &[f64]) -> Result<Vec<f64>> {
        let mut out = flat.to_vec();
        for pool in &self.pools {
            let raw: Vec<f64> = pool.links.iter().map(|&i| flat[i]).collect();
            let lo: Vec<f64> = pool.links.iter().map(|&i| self.links[i].lo).collect();
            let hi: Vec<f64> = pool.links.iter().map(|&i| self.links[i].hi).collect();
            let p = project_feasible(&raw, &lo, &hi, pool.budget)?;
            for (&i, v) in pool.links.iter().zip(p) {
                out[i] = v;
            }
        }
        Ok(out)
    }

    /// Highest power a link can take while the rest of its pool sits at
    /// their lower bounds.
    fn effective_hi(&self, pool: &BudgetPool, link: usize) -> f64 {
        let others = compensated_sum(
            pool.links
                .iter()
                .filter(|&&i| i != link)
                .map(|&i| self.links[i].lo),
        );
        self.links[link]
            .hi
            .min(pool.budget - others)
            .max(self.links[link].lo)
    }
}

/// `levels` powers from `lo` to `hi`, log-spaced. A zero lower bound keeps
/// 0 as its own level and log-spaces the rest from `hi · 1e-6`.
pub fn power_grid(lo: f64, hi: f64, levels: usize) -> Vec<f64> {
    if !(hi > lo) || levels < 2 {
        return vec![lo];
    }
    let (start, head, count) = if lo > 0.0 {
        (lo, Vec::new(), levels)
    } else {
        (hi * 1e-6, vec![lo], levels - 1)
    };
    let mut out = head;
    if count == 1 {
        out.push(hi);
        return out;
    }
    let ratio = (hi / start).ln() / (count - 1) as f64;
    for i in 0..count {
        out.push(if i + 1 == count {
            hi
        } else {
            start * (ratio * i as f64).exp()
        });
    }
    out
}

/// `min_i (cost_i - ψ_i)`: value and index of the minimizer (lowest index on
/// ties). Errors on an empty grid.
pub fn c_transform(costs: &[f64], psi: &[f64]) -> Result<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, (&c, &s)) in costs.iter().zip(psi).enumerate() {
        let v = c - s;
        if best.is_none_or(|(b, _)| v < b) {
            best = Some((v, i));
        }
    }
    best.ok_or_else(|| Error::InfeasibleBudget("empty power grid".into()))
}

/// Source price per pool and the induced link potentials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualPotential {
    pub prices: Vec<f64>,
    pub link_potentials: Vec<f64>,
}

/// Grid response of one pool to a price.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolResponse {
    pub price: f64,
    /// `Σ φ_ℓ(ν) - ν B`.
    pub value: f64,
    pub potentials: Vec<f64>,
    pub powers: Vec<f64>,
    pub total: f64,
}

/// Discretized dual of a [`PowerProblem`].
#[derive(Debug, Clone)]
pub struct DualModel<'a> {
    pub problem: &'a PowerProblem,
    grids: Vec<Vec<f64>>,
    costs: Vec<Vec<f64>>,
}

impl<'a> DualModel<'a> {
    pub fn new(problem: &'a PowerProblem, levels: usize) -> Self {
        let mut grids = vec![Vec::new(); problem.links.len()];
        for pool in &problem.pools {
            for &i in &pool.links {
                grids[i] = power_grid(problem.links[i].lo, problem.effective_hi(pool, i), levels);
            }
        }
        let costs = grids
            .iter()
            .zip(&problem.links)
            .map(|(g, l)| g.iter().map(|&p| -l.utility.value(p)).collect())
            .collect();
        DualModel {
            problem,
            grids,
            costs,
        }
    }

    pub fn grid(&self, link: usize) -> &[f64] {
        &self.grids[link]
    }

    pub fn respond(&self, pool: usize, price: f64) -> PoolResponse {
        let pool_def = &self.problem.pools[pool];
        let mut potentials = Vec::with_capacity(pool_def.links.len());
        let mut powers = Vec::with_capacity(pool_def.links.len());
        for &i in &pool_def.links {
            let psi: Vec<f64> = self.grids[i].iter().map(|&p| -price * p).collect();
            let (phi, idx) = c_transform(&self.costs[i], &psi).expect("grids are never empty");
            potentials.push(phi);
            powers.push(self.grids[i][idx]);
        }
        let value = compensated_sum(potentials.iter().copied()) - price * pool_def.budget;
        let total = compensated_sum(powers.iter().copied());
        PoolResponse {
            price,
            value,
            potentials,
            powers,
            total,
        }
    }

    /// Continuous per-link response of one pool to a price: powers and
    /// their total.
    pub fn exact_response(&self, pool: usize, price: f64) -> (Vec<f64>, f64) {
        let def = &self.problem.pools[pool];
        let powers: Vec<f64> = def
            .links
            .iter()
            .map(|&i| {
                let l = &self.problem.links[i];
                l.utility
                    .best_response(price, l.lo, self.problem.effective_hi(def, i))
            })
            .collect();
        let total = compensated_sum(powers.iter().copied());
        (powers, total)
    }

    /// Primal powers of one pool at the budget-clearing price, searched by
    /// bisection from `hint`. At the clearing price the two one-sided
    /// responses are mixed so that the budget is met exactly.
    pub fn clearing_powers(&self, pool: usize, hint: f64) -> Vec<f64> {
        let budget = self.problem.pools[pool].budget;
        let hint = if hint > 0.0 && hint.is_finite() {
            hint
        } else {
            1.0
        };
        let mut lo = hint;
        let mut lo_resp = self.exact_response(pool, lo);
        while lo_resp.1 < budget && lo > f64::MIN_POSITIVE {
            lo *= 0.5;
            lo_resp = self.exact_response(pool, lo);
        }
        if lo_resp.1 < budget {
            lo = 0.0;
            lo_resp = self.exact_response(pool, 0.0);
        }
        let mut hi = hint.max(lo);
        let mut hi_resp = self.exact_response(pool, hi);
        while hi_resp.1 > budget && hi < f64::MAX / 4.0 {
            hi *= 2.0;
            hi_resp = self.exact_response(pool, hi);
        }
        for _ in 0..2100 {
            let mid = lo + 0.5 * (hi - lo);
            if mid <= lo || mid >= hi {
                break;
            }
            let r = self.exact_response(pool, mid);
            if r.1 >= budget {
                lo = mid;
                lo_resp = r;
            } else {
                hi = mid;
                hi_resp = r;
            }
        }
        let span = lo_resp.1 - hi_resp.1;
        let theta = if span > 0.0 {
            ((budget - hi_resp.1) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        hi_resp
            .0
            .iter()
            .zip(&lo_resp.0)
            .map(|(ph, pl)| ph + theta * (pl - ph))
            .collect()
    }

    pub fn potential(&self, prices: &[f64]) -> DualPotential {
        let mut link_potentials = vec![0.0; self.problem.links.len()];
        for (n, &price) in prices.iter().enumerate() {
            let r = self.respond(n, price);
            for (&i, phi) in self.problem.pools[n].links.iter().zip(r.potentials) {
                link_potentials[i] = phi;
            }
        }
        DualPotential {
            prices: prices.to_vec(),
            link_potentials,
        }
    }

    /// `F = Σ_pools (Σ φ_ℓ - ν B)`, an upper bound on minus the best
    /// grid objective.
    pub fn dual_value(&self, prices: &[f64]) -> f64 {
        compensated_sum(
            prices
                .iter()
                .enumerate()
                .map(|(n, &p)| self.respond(n, p).value),
        )
    }

    /// `∂F/∂ν = Σ p_ℓ(ν) - B` per pool.
    pub fn gradient(&self, prices: &[f64]) -> Vec<f64> {
        prices
            .iter()
            .enumerate()
            .map(|(n, &p)| self.respond(n, p).total - self.problem.pools[n].budget)
            .collect()
    }

    /// Marginal utility of an equal split, averaged over the pool's links.
    pub fn initial_price(&self, pool: usize) -> f64 {
        let def = &self.problem.pools[pool];
        let share = def.budget / def.links.len() as f64;
        let m = compensated_sum(def.links.iter().map(|&i| {
            let l = &self.problem.links[i];
            l.utility.marginal(share.clamp(l.lo, l.hi))
        })) / def.links.len() as f64;
        if m > 0.0 && m.is_finite() {
            m
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    /// Base step `m1`, relative to the pool's price scale.
    pub base: f64,
    pub max_doublings: u32,
}

impl StepSchedule {
    pub fn new(base: f64, max_doublings: u32) -> Result<Self> {
        if !(base > 0.0 && base.is_finite()) {
            return Err(Error::config("base step must be > 0"));
        }
        Ok(StepSchedule {
            base,
            max_doublings,
        })
    }

    /// `m_n = 2^(n-1) m1`.
    pub fn step(&self, n: u32) -> f64 {
        self.base * 2f64.powi(n as i32 - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentSettings {
    pub max_iterations: usize,
    pub tol_grad: f64,
    pub schedule: StepSchedule,
    pub grid_levels: usize,
}

impl AscentSettings {
    pub fn from_solver(s: &crate::config::SolverConfig) -> Result<Self> {
        Ok(AscentSettings {
            max_iterations: s.t2,
            tol_grad: s.tol_grad,
            schedule: StepSchedule::new(s.step_base, s.max_doublings)?,
            grid_levels: s.grid_levels,
        })
    }
}

impl Default for AscentSettings {
    fn default() -> Self {
        AscentSettings::from_solver(&crate::config::SolverConfig::default())
            .expect("defaults are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualTraceRow {
    pub iteration: usize,
    pub dual_value: f64,
    /// Euclidean norm of the budget-normalized gradient.
    pub grad_norm: f64,
    /// Largest relative step accepted in this iteration.
    pub step: f64,
    pub g_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerState {
    /// Flat powers (communication links first).
    pub powers: Vec<f64>,
    pub potential: DualPotential,
    pub dual_value: f64,
    pub grad_norm: f64,
    pub g_tol: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<DualTraceRow>,
}

struct PoolSearch {
    price: f64,
    scale: f64,
    current: PoolResponse,
    below: Option<PoolResponse>,
    above: Option<PoolResponse>,
    step: f64,
    done: bool,
}

impl PoolSearch {
    fn observe(&mut self, r: &PoolResponse, budget: f64) {
        if r.total >= budget && self.below.as_ref().is_none_or(|b| r.price > b.price) {
            self.below = Some(r.clone());
        }
        if r.total <= budget && self.above.as_ref().is_none_or(|a| r.price < a.price) {
            self.above = Some(r.clone());
        }
    }

    fn normalized_gradient(&self, budget: f64) -> f64 {
        (self.current.total - budget) / budget.max(f64::MIN_POSITIVE)
    }
}

const MIN_STEP: f64 = 1e-14;

/// Dual ascent with the doubling/halving step rule, followed by primal
/// recovery and projection. The accepted dual value never decreases.
pub fn run_dual_ascent(problem: &PowerProblem, settings: &AscentSettings) -> Result<PowerState> {
    let model = DualModel::new(problem, settings.grid_levels);
    let mut searches: Vec<PoolSearch> = (0..problem.pools.len())
        .map(|n| {
            let price = model.initial_price(n);
            let current = model.respond(n, price);
            let mut s = PoolSearch {
                price,
                scale: price,
                current: current.clone(),
                below: None,
                above: None,
                step: 0.0,
                done: false,
            };
            s.observe(&current, problem.pools[n].budget);
            s
        })
        .collect();

    let snapshot = |searches: &[PoolSearch], iteration: usize, step: f64| -> Result<DualTraceRow> {
        let powers = assemble(&model, searches)?;
        Ok(DualTraceRow {
            iteration,
            dual_value: compensated_sum(searches.iter().map(|s| s.current.value)),
            grad_norm: grad_norm(problem, searches),
            step,
            g_tol: problem.objective(&powers),
        })
    };

    let mut trace = vec![snapshot(&searches, 0, 0.0)?];
    let mut iterations = 0;
    for t in 1..=settings.max_iterations {
        if searches.iter().all(|s| s.done) {
            break;
        }
        iterations = t;
        let mut max_step: f64 = 0.0;
        for (n, s) in searches.iter_mut().enumerate() {
            if s.done {
                continue;
            }
            let budget = problem.pools[n].budget;
            let g = s.normalized_gradient(budget);
            if g.abs() < settings.tol_grad {
                s.done = true;
                continue;
            }
            let direction = s.scale * g;
            let origin = s.price;
            let propose = |m: f64| model.respond(n, origin + m * direction);

            let mut m = settings.schedule.step(1);
            let mut candidate = propose(m);
            s.observe(&candidate, budget);
            if candidate.value > s.current.value {
                let mut doublings = 1;
                while doublings <= settings.schedule.max_doublings {
                    let next_m = settings.schedule.step(doublings + 1);
                    let next = propose(next_m);
                    s.observe(&next, budget);
                    if next.value > candidate.value {
                        candidate = next;
                        m = next_m;
                        doublings += 1;
                    } else {
                        break;
                    }
                }
            } else {
                while candidate.value <= s.current.value {
                    m *= 0.5;
                    if m < MIN_STEP {
                        break;
                    }
                    candidate = propose(m);
                    s.observe(&candidate, budget);
                }
            }
            if candidate.value > s.current.value {
                s.price = candidate.price;
                s.current = candidate;
                s.step = m;
                max_step = max_step.max(m);
            } else {
                // No ascent direction at any scale: the price sits on the kink.
                s.done = true;
            }
        }
        trace.push(snapshot(&searches, t, max_step)?);
    }
    let converged = searches.iter().all(|s| s.done);
    let powers = assemble(&model, &searches)?;
    let prices: Vec<f64> = searches.iter().map(|s| s.price).collect();
    Ok(PowerState {
        g_tol: problem.objective(&powers),
        potential: model.potential(&prices),
        dual_value: compensated_sum(searches.iter().map(|s| s.current.value)),
        grad_norm: grad_norm(problem, &searches),
        iterations,
        converged,
        powers,
        trace,
    })
}

fn grad_norm(problem: &PowerProblem, searches: &[PoolSearch]) -> f64 {
    searches
        .iter()
        .enumerate()
        .map(|(n, s)| s.normalized_gradient(problem.pools[n].budget).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Primal recovery: each pool's continuous response at its clearing price,
/// searched from the bracket the grid ascent found.
fn assemble(model: &DualModel<'_>, searches: &[PoolSearch]) -> Result<Vec<f64>> {
    let problem = model.problem;
    let mut flat = vec![0.0; problem.links.len()];
    for (n, s) in searches.iter().enumerate() {
        let pool = &problem.pools[n];
        let hint = match (&s.below, &s.above) {
            (Some(b), Some(a)) => 0.5 * (b.price + a.price),
            _ => s.price,
        };
        for (&i, p) in pool.links.iter().zip(model.clearing_powers(n, hint)) {
            flat[i] = p;
        }
    }
    problem.project(&flat)
}

/// Equal share of every pool's budget per link, projected onto the box.
pub fn equal_split(problem: &PowerProblem) -> Result<Vec<f64>> {
    let mut flat = vec![0.0; problem.links.len()];
    for pool in &problem.pools {
        let share = pool.budget / pool.links.len() as f64;
        for &i in &pool.links {
            flat[i] = share;
        }
    }
    problem.project(&flat)
}

/// Classic water-filling `p_k = [μ - 1/g_k]₊` with `Σ p_k = budget`, the
/// water level found by bisection.
pub fn water_fill(gains: &[f64], budget: f64) -> Vec<f64> {
    let fill = |mu: f64| -> Vec<f64> {
        gains
            .iter()
            .map(|&g| {
                if g > 0.0 {
                    (mu - 1.0 / g).max(0.0)
                } else {
                    0.0
                }
            })
            .collect()
    };
    if budget <= 0.0 || !gains.iter().any(|&g| g > 0.0) {
        return vec![0.0; gains.len()];
    }
    let floor = gains
        .iter()
        .filter(|&&g| g > 0.0)
        .map(|&g| 1.0 / g)
        .fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (floor, floor + budget);
    while compensated_sum(fill(hi)) < budget {
        hi += budget;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if compensated_sum(fill(mid)) < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    fill(hi)
}

/// Water-filling on every communication pool and an equal split on every
/// sensing pool, both projected onto the box.
pub fn water_filling(problem: &PowerProblem) -> Result<Vec<f64>> {
    let mut flat = vec![0.0; problem.links.len()];
    for pool in &problem.pools {
        match pool.kind {
            PoolKind::Communication => {
                let gains: Vec<f64> = pool
                    .links
                    .iter()
                    .map(|&i| match problem.links[i].utility {
                        Utility::Rate { snr_per_watt, .. } => snr_per_watt,
                        Utility::Linear { .. } => 0.0,
                    })
                    .collect();
                for (&i, p) in pool.links.iter().zip(water_fill(&gains, pool.budget)) {
                    flat[i] = p;
                }
            }
            PoolKind::Sensing => {
                let share = pool.budget / pool.links.len() as f64;
                for &i in &pool.links {
                    flat[i] = share;
                }
            }
        }
    }
    problem.project(&flat)
}

/// Largest grid the oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 1_000_000;

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k.min(n));
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

/// Exhaustive search over the lattice `lo_ℓ + i δ`, `δ = (B - Σ lo)/(L - 1)`,
/// keeping only combinations with `Σ i = L - 1` (budget equality) and every
/// power within its box. Pools are independent, so each is enumerated on
/// its own. Returns the flat powers and their objective.
pub fn grid_search_oracle(problem: &PowerProblem, levels: usize) -> Result<(Vec<f64>, f64)> {
    if levels < 2 {
        return Err(Error::config("oracle needs at least two levels"));
    }
    let steps = (levels - 1) as u128;
    let mut total: u128 = 1;
    for pool in &problem.pools {
        let n = pool.links.len() as u128;
        total = total.saturating_mul(binomial(steps + n - 1, n - 1));
    }
    if total > ORACLE_LIMIT {
        return Err(Error::OracleTooLarge {
            combinations: total,
            limit: ORACLE_LIMIT,
        });
    }
    let mut flat = vec![0.0; problem.links.len()];
    for pool in &problem.pools {
        let lo: Vec<f64> = pool.links.iter().map(|&i| problem.links[i].lo).collect();
        let delta = (pool.budget - compensated_sum(lo.iter().copied())) / (levels - 1) as f64;
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut current = vec![0.0; pool.links.len()];
        enumerate(
            problem,
            pool,
            &lo,
            delta,
            levels - 1,
            0,
            &mut current,
            &mut best,
        );
        let (_, powers) = best.ok_or_else(|| {
            Error::InfeasibleBudget(format!(
                "no lattice point fits station {} pool",
                pool.station
            ))
        })?;
        for (&i, p) in pool.links.iter().zip(powers) {
            flat[i] = p;
        }
    }
    let value = problem.objective(&flat);
    Ok((flat, value))
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    problem: &PowerProblem,
    pool: &BudgetPool,
    lo: &[f64],
    delta: f64,
    remaining: usize,
    pos: usize,
    current: &mut Vec<f64>,
    best: &mut Option<(f64, Vec<f64>)>,
) {
    let link = pool.links[pos];
    let hi = problem.links[link].hi;
    let last = pos + 1 == pool.links.len();
    let choices: Vec<usize> = if last {
        vec![remaining]
    } else {
        (0..=remaining).collect()
    };
    for i in choices {
        let p = lo[pos] + i as f64 * delta;
        if p > hi * (1.0 + 1e-12) {
            break;
        }
        current[pos] = p.min(hi);
        if last {
            let v = compensated_sum(
                pool.links
                    .iter()
                    .zip(current.iter())
                    .map(|(&l, &x)| problem.links[l].utility.value(x)),
            );
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                *best = Some((v, current.clone()));
            }
        } else {
            enumerate(
                problem,
                pool,
                lo,
                delta,
                remaining - i,
                pos + 1,
                current,
                best,
            );
        }
    }
}
