//! Cell association: the optimal-transport assignment rule, the membership
//! averaging iteration built on it, and the weighted-Voronoi baseline.

use std::f64::consts::PI;
use std::io::Write;

use crate::channel::DistanceLaw;
use crate::error::Result;
use crate::numeric::{compensated_sum, map_indexed};
use crate::objective::{PowerAllocation, SlotContext};
use crate::scenario::{cell_masses, Vec3};
use crate::sensing::SensingParams;

/// Floor applied to cell masses in score denominators so that empty cells
/// can still attract points.
pub const MASS_FLOOR: f64 = 1e-6;

/// Point labels of the sample cloud with their cell masses, membership
/// history and the induced UAV association.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub cells: usize,
    pub labels: Vec<usize>,
    /// `U_m` of the labels.
    pub masses: Vec<f64>,
    /// Masses used for the last relabelling.
    pub scoring_masses: Vec<f64>,
    /// `Ɍ_m(q)`, row-major by point.
    pub membership: Vec<f64>,
    /// Serving station of every UAV (cooperative first, target last).
    pub uav_cells: Vec<usize>,
    /// Every point ended up in one cell although several exist.
    pub collapsed: bool,
    pub iterations: usize,
}

impl Partition {
    pub fn membership_row(&self, point: usize) -> &[f64] {
        &self.membership[point * self.cells..(point + 1) * self.cells]
    }

    /// CSV with columns `config_hash, seed, point_id, x, y, z, cell,
    /// membership_1..membership_M`. Cells are numbered from 1.
    pub fn write_csv<W: Write>(
        &self,
        writer: W,
        points: &[Vec3],
        config_hash: &str,
        seed: u64,
    ) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = ["config_hash", "seed", "point_id", "x", "y", "z", "cell"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((1..=self.cells).map(|m| format!("membership_{m}")));
        w.write_record(&header)?;
        for (i, q) in points.iter().enumerate() {
            let mut row = vec![
                config_hash.to_string(),
                seed.to_string(),
                i.to_string(),
                q.x.to_string(),
                q.y.to_string(),
                q.z.to_string(),
                (self.labels[i] + 1).to_string(),
            ];
            row.extend(self.membership_row(i).iter().map(|r| r.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|source| crate::Error::Io {
            path: "partition csv".into(),
            source,
        })?;
        Ok(())
    }
}

/// `-G/U + G/(U K)` with `U` floored at [`MASS_FLOOR`].
pub fn association_score(density: f64, mass: f64, k: usize) -> f64 {
    let u = mass.max(MASS_FLOOR);
    -density / u + density / (u * k as f64)
}

/// Argmin of the scores; ties go to the lowest index.
pub fn best_station(densities: &[f64], masses: &[f64], k: usize) -> usize {
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for (i, (&g, &u)) in densities.iter().zip(masses).enumerate() {
        let s = association_score(g, u, k);
        if s < best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

/// One membership step for one point at iteration `t >= 1`.
pub fn update_point(row: &mut [f64], label: usize, t: usize) {
    let keep = 1.0 - 1.0 / t as f64;
    for (m, r) in row.iter_mut().enumerate() {
        *r = if m == label {
            keep * *r
        } else {
            1.0 - keep * (1.0 - *r)
        };
    }
}

pub fn update_membership(membership: &mut [f64], labels: &[usize], cells: usize, t: usize) {
    for (row, &l) in membership.chunks_mut(cells).zip(labels) {
        update_point(row, l, t);
    }
}

/// `U_m = K · mean(1 - Ɍ_m)` for every cell.
pub fn membership_masses(membership: &[f64], cells: usize, k: usize) -> Vec<f64> {
    let n = membership.len() / cells;
    (0..cells)
        .map(|m| {
            k as f64 * compensated_sum((0..n).map(|i| 1.0 - membership[i * cells + m])) / n as f64
        })
        .collect()
}

/// Objective density `G_i(q)` of every point for every station, row-major by
/// point.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub cells: usize,
    pub values: Vec<f64>,
}

impl DensityField {
    pub fn new(cells: usize, values: Vec<f64>) -> Self {
        DensityField { cells, values }
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, point: usize) -> &[f64] {
        &self.values[point * self.cells..(point + 1) * self.cells]
    }

    pub fn relabel(&self, masses: &[f64], k: usize) -> Vec<usize> {
        map_indexed(self.len(), |i| best_station(self.row(i), masses, k))
    }
}

#[derive(Debug, Clone)]
struct StationView {
    position: Vec3,
    elements: f64,
    bandwidth: f64,
    comm_power: f64,
    sensing_power: f64,
}

/// The per-point objective density with powers and association frozen.
///
/// `G_i(q)` is what station `i` would earn if its whole band and its whole
/// current pool power served a UAV at `q`: the weighted rate
/// `B_i log2(1 + P_c,i snr_i(q))` plus the weighted QoS of the pooled
/// sensing power. With an equal split over `n` UAVs both power and noise
/// bandwidth scale by `1/n`, so `G_i / U_i` in the association score is the
/// per-UAV share under the cell's expected load. A station serving nobody
/// is credited with its pool budget.
#[derive(Debug, Clone)]
pub struct AssociationContext {
    stations: Vec<StationView>,
    rate_weight: f64,
    qos_weight: f64,
    wavelength: f64,
    noise_psd: f64,
    law: DistanceLaw,
    reference_gain: f64,
    sensing: SensingParams,
}

fn pool_power(powers: &[f64], members: impl Iterator<Item = usize>, budget: f64) -> f64 {
    let mut any = false;
    let total = compensated_sum(members.map(|i| {
        any = true;
        powers[i]
    }));
    if any {
        total
    } else {
        budget
    }
}

impl AssociationContext {
    pub fn new(ctx: &SlotContext<'_>, uav_station: &[usize], powers: &PowerAllocation) -> Self {
        let cfg = &ctx.scenario.config;
        let k = ctx.k();
        let stations = ctx
            .scenario
            .stations
            .iter()
            .enumerate()
            .map(|(m, bs)| StationView {
                position: bs.position,
                elements: bs.antenna_elements.len() as f64,
                bandwidth: bs.bandwidth,
                comm_power: pool_power(
                    &powers.comm,
                    (0..k).filter(|&i| uav_station[i] == m),
                    cfg.comm_budget(),
                ),
                sensing_power: pool_power(
                    &powers.sensing,
                    (0..=k).filter(|&j| uav_station[j] == m),
                    cfg.sensing_budget(),
                ),
            })
            .collect();
        AssociationContext {
            stations,
            rate_weight: ctx.rate_weight(),
            qos_weight: ctx.qos_weight(),
            wavelength: cfg.wavelength(),
            noise_psd: cfg.noise_psd,
            law: cfg.distance_law,
            reference_gain: cfg.reference_gain,
            sensing: cfg.sensing,
        }
    }

    pub fn stations(&self) -> usize {
        self.stations.len()
    }

    /// `G_i(q)`.
    pub fn density(&self, q: Vec3, i: usize) -> f64 {
        let s = &self.stations[i];
        let d = s.position.distance(q).max(1e-9);
        let path = self.wavelength * self.wavelength / (16.0 * PI * PI);
        let snr = path * s.elements / (self.noise_psd * s.bandwidth * d.powi(self.law.exponent()));
        let gain2 = self.reference_gain * path / (d * d);
        self.rate_weight * s.bandwidth * (s.comm_power * snr).ln_1p() / std::f64::consts::LN_2
            + self.qos_weight * s.sensing_power * gain2 * self.sensing.qos_weight(s.bandwidth)
    }

    pub fn field(&self, points: &[Vec3]) -> DensityField {
        let m = self.stations();
        let rows = map_indexed(points.len(), |i| {
            (0..m)
                .map(|s| self.density(points[i], s))
                .collect::<Vec<_>>()
        });
        DensityField::new(m, rows.concat())
    }
}

/// State after one relabelling of the association iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationStep {
    pub iteration: usize,
    pub masses: Vec<f64>,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct AssociationRun {
    pub labels: Vec<usize>,
    pub scoring_masses: Vec<f64>,
    pub membership: Vec<f64>,
    pub history: Vec<AssociationStep>,
}

/// Membership-averaging iteration from `initial` labels with `Ɍ = 0`.
///
/// Each of the `t1` passes folds the current labels into the membership
/// running average, recomputes `U_m = K · mean(1 - Ɍ_m)`, and relabels
/// every point by the score argmin.
pub fn iterate_labels(
    field: &DensityField,
    initial: &[usize],
    k: usize,
    t1: usize,
    keep_history: bool,
) -> AssociationRun {
    let cells = field.cells;
    let mut membership = vec![0.0; initial.len() * cells];
    let mut labels = initial.to_vec();
    let mut masses = vec![0.0; cells];
    let mut history = Vec::new();
    for t in 1..=t1.max(1) {
        update_membership(&mut membership, &labels, cells, t);
        masses = membership_masses(&membership, cells, k);
        labels = field.relabel(&masses, k);
        if keep_history {
            history.push(AssociationStep {
                iteration: t,
                masses: masses.clone(),
                labels: labels.clone(),
            });
        }
    }
    AssociationRun {
        labels,
        scoring_masses: masses,
        membership,
        history,
    }
}

/// Runs the association iteration on the scenario cloud and derives the UAV
/// association at the UAV positions with the same rule.
pub fn run_association(
    ctx: &SlotContext<'_>,
    assoc: &AssociationContext,
    initial: &[usize],
    t1: usize,
) -> Partition {
    let points = &ctx.scenario.cloud.points;
    let k = ctx.k();
    let field = assoc.field(points);
    let run = iterate_labels(&field, initial, k, t1, false);
    let uav_field = assoc.field(&ctx.slot.positions());
    let uav_cells = (0..uav_field.len())
        .map(|j| best_station(uav_field.row(j), &run.scoring_masses, k))
        .collect();
    build_partition(
        field.cells,
        run.labels,
        run.scoring_masses,
        run.membership,
        uav_cells,
        k,
        t1,
    )
}

fn build_partition(
    cells: usize,
    labels: Vec<usize>,
    scoring_masses: Vec<f64>,
    membership: Vec<f64>,
    uav_cells: Vec<usize>,
    k: usize,
    iterations: usize,
) -> Partition {
    let masses = cell_masses(&labels, cells, k);
    let occupied = masses.iter().filter(|&&u| u > 0.0).count();
    Partition {
        cells,
        collapsed: cells > 1 && occupied == 1,
        labels,
        masses,
        scoring_masses,
        membership,
        uav_cells,
        iterations,
    }
}

/// Sum over points of the score of the assigned cell, with masses taken from
/// the labels themselves. Lower is better.
pub fn p3_objective(field: &DensityField, labels: &[usize], k: usize) -> f64 {
    let masses = cell_masses(labels, field.cells, k);
    let w = 1.0 / labels.len() as f64;
    compensated_sum(
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| w * association_score(field.row(i)[l], masses[l], k)),
    )
}

/// Power-diagram label: `argmin_m ‖q - B_m‖² - w_m`, ties to the lowest index.
pub fn voronoi_label(q: Vec3, sites: &[Vec3], weights: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (m, (s, w)) in sites.iter().zip(weights).enumerate() {
        let d = *s - q;
        let v = d.dot(d) - w;
        if v < best_d {
            best = m;
            best_d = v;
        }
    }
    best
}

pub fn weighted_voronoi_labels(points: &[Vec3], sites: &[Vec3], weights: &[f64]) -> Vec<usize> {
    map_indexed(points.len(), |i| voronoi_label(points[i], sites, weights))
}

/// Weighted-Voronoi partition of the cloud; UAVs are associated by the same
/// rule at their positions. Memberships are set to the complement of the
/// labels.
pub fn weighted_voronoi(
    points: &[Vec3],
    sites: &[Vec3],
    weights: &[f64],
    uavs: &[Vec3],
    k: usize,
) -> Partition {
    let cells = sites.len();
    let labels = weighted_voronoi_labels(points, sites, weights);
    let mut membership = vec![0.0; points.len() * cells];
    update_membership(&mut membership, &labels, cells, 1);
    let uav_cells = uavs
        .iter()
        .map(|&u| voronoi_label(u, sites, weights))
        .collect();
    let masses = cell_masses(&labels, cells, k);
    build_partition(cells, labels, masses, membership, uav_cells, k, 0)
}
