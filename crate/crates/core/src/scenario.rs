//! Physical world: geometry, actors, spatial UAV density, global constants,
//! and the seeded Monte-Carlo discretization of space.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::DistanceLaw;
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::sensing::SensingParams;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Point or offset in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Departure angles `(azimuth, elevation)` from a base station towards a UAV.
///
/// Azimuth is `atan2(Δy, Δx)` in `(-π, π]` with `atan2(0, 0)` pinned to 0;
/// elevation is `arccos(Δz / ‖Δ‖)` in `[0, π]`, where `Δ = bs - uav`.
pub fn departure_angles(bs: Vec3, uav: Vec3) -> Result<(f64, f64)> {
    let d = bs - uav;
    let r = d.norm();
    if !(r > 0.0) {
        return Err(Error::degenerate("base station and UAV coincide"));
    }
    let mut azimuth = if d.x == 0.0 && d.y == 0.0 {
        0.0
    } else {
        d.y.atan2(d.x)
    };
    if azimuth <= -PI {
        azimuth = PI;
    }
    let elevation = (d.z / r).clamp(-1.0, 1.0).acos();
    Ok((azimuth, elevation))
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::config("bounds must be finite"));
        }
        if !(min.x < max.x && min.y < max.y && min.z < max.z) {
            return Err(Error::config(
                "bounds must have positive extent on every axis",
            ));
        }
        Ok(Aabb { min, max })
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (self.min.x..=self.max.x).contains(&p.x)
            && (self.min.y..=self.max.y).contains(&p.y)
            && (self.min.z..=self.max.z).contains(&p.z)
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: Vec3,
    /// Isotropic standard deviation in meters.
    pub std: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityKind {
    Uniform,
    /// Mixture truncated to the bounds and renormalized.
    GaussianMixture {
        components: Vec<GaussianComponent>,
    },
}

/// UAV spatial density `f(q)` on a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialDensity {
    pub bounds: Aabb,
    #[serde(flatten)]
    pub kind: DensityKind,
}

const MAX_REJECTIONS: usize = 1_000_000;

impl SpatialDensity {
    pub fn uniform(bounds: Aabb) -> Self {
        SpatialDensity {
            bounds,
            kind: DensityKind::Uniform,
        }
    }

    pub fn gaussian_mixture(bounds: Aabb, components: Vec<GaussianComponent>) -> Result<Self> {
        let d = SpatialDensity {
            bounds,
            kind: DensityKind::GaussianMixture { components },
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        Aabb::new(self.bounds.min, self.bounds.max)?;
        if let DensityKind::GaussianMixture { components } = &self.kind {
            if components.is_empty() {
                return Err(Error::config(
                    "gaussian mixture needs at least one component",
                ));
            }
            for c in components {
                if !(c.std > 0.0 && c.std.is_finite()) {
                    return Err(Error::config("mixture std devs must be > 0"));
                }
                if !(c.weight >= 0.0) || !c.mean.is_finite() {
                    return Err(Error::config(
                        "mixture weights must be >= 0 and means finite",
                    ));
                }
            }
            let total = compensated_sum(components.iter().map(|c| c.weight));
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!(
                    "mixture weights must sum to 1 (got {total})"
                )));
            }
        }
        Ok(())
    }

    /// Density up to the truncation constant; zero outside the bounds.
    pub fn unnormalized_pdf(&self, q: Vec3) -> f64 {
        if !self.bounds.contains(q) {
            return 0.0;
        }
        match &self.kind {
            DensityKind::Uniform => 1.0,
            DensityKind::GaussianMixture { components } => components
                .iter()
                .map(|c| {
                    let r2 = (q - c.mean).dot(q - c.mean);
                    let norm = (2.0 * PI * c.std * c.std).powf(1.5);
                    c.weight * (-0.5 * r2 / (c.std * c.std)).exp() / norm
                })
                .sum(),
        }
    }

    /// One draw from the (truncated) density.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec3> {
        let b = self.bounds;
        match &self.kind {
            DensityKind::Uniform => Ok(Vec3::new(
                rng.random_range(b.min.x..b.max.x),
                rng.random_range(b.min.y..b.max.y),
                rng.random_range(b.min.z..b.max.z),
            )),
            DensityKind::GaussianMixture { components } => {
                let pick = WeightedIndex::new(components.iter().map(|c| c.weight))
                    .map_err(|e| Error::config(format!("mixture weights: {e}")))?;
                for _ in 0..MAX_REJECTIONS {
                    let c = &components[pick.sample(rng)];
                    let n = Normal::new(0.0, c.std)
                        .map_err(|e| Error::config(format!("mixture std: {e}")))?;
                    let q = Vec3::new(
                        c.mean.x + n.sample(rng),
                        c.mean.y + n.sample(rng),
                        c.mean.z + n.sample(rng),
                    );
                    if b.contains(q) {
                        return Ok(q);
                    }
                }
                Err(Error::config(
                    "density has negligible mass inside its bounds",
                ))
            }
        }
    }
}

/// Seeded i.i.d. draw from `f`, each point carrying weight `1/len`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePointCloud {
    pub points: Vec<Vec3>,
    pub seed: u64,
}

impl SamplePointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.points.len() as f64
    }
}

/// Random stream `stream` of the generator family rooted at `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn sample_points(density: &SpatialDensity, n: usize, seed: u64) -> Result<SamplePointCloud> {
    if n == 0 {
        return Err(Error::config("sample count must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| density.sample(&mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(SamplePointCloud { points, seed })
}

/// `U_m = K × (weighted fraction of cloud mass in cell m)`, where
/// `membership[i]` is the fraction of point `i` belonging to the cell.
pub fn average_uav_count(membership: &[f64], k: usize) -> f64 {
    if membership.is_empty() {
        return 0.0;
    }
    k as f64 * compensated_sum(membership.iter().copied()) / membership.len() as f64
}

/// Per-cell `U_m` for a hard labelling of the cloud.
pub fn cell_masses(labels: &[usize], cells: usize, k: usize) -> Vec<f64> {
    let mut counts = vec![0usize; cells];
    for &l in labels {
        counts[l] += 1;
    }
    let n = labels.len().max(1) as f64;
    counts
        .into_iter()
        .map(|c| k as f64 * c as f64 / n)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaseStation {
    pub id: usize,
    pub position: Vec3,
    /// Element offsets of the planar array relative to `position`.
    pub antenna_elements: Vec<Vec3>,
    /// Per-station power budget in watts.
    pub total_power_budget: f64,
    /// Total bandwidth in Hz, shared equally by the associated cooperative UAVs.
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UavKind {
    Cooperative,
    NonCooperative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UavNode {
    pub id: usize,
    pub position: Vec3,
    pub kind: UavKind,
}

/// Fully resolved scenario constants in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub stations: usize,
    pub cooperative_uavs: usize,
    pub slots: usize,
    pub slot_duration: f64,
    pub carrier_frequency: f64,
    /// W/Hz.
    pub noise_psd: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Per-station budget shared by the communication and sensing pools.
    pub total_power: f64,
    /// Linear reference power gain at 1 m, folded into the sensing gain.
    pub reference_gain: f64,
    pub bandwidth: f64,
    /// Share of `total_power` given to the communication pool.
    pub comm_power_fraction: f64,
    pub theta1: f64,
    /// Rate/QoS mapping factor; `None` calibrates it on the initial solution.
    pub theta2: Option<f64>,
    pub rho_min: f64,
    /// Per-UAV rate floor in bit/s.
    pub r_min: f64,
    pub rng_seed: u64,
    pub sample_count: usize,
    pub sensing_error_std: f64,
    pub sensing: SensingParams,
    pub array_rows: usize,
    pub array_cols: usize,
    pub station_height: f64,
    pub station_positions: Option<Vec<Vec3>>,
    pub density: SpatialDensity,
    pub solver: SolverConfig,
    pub distance_law: DistanceLaw,
    /// Check the cooperative QoS constraint as a ceiling `rho <= rho_min`
    /// instead of a floor.
    pub literal_c5: bool,
}

impl ScenarioConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn comm_budget(&self) -> f64 {
        self.total_power * self.comm_power_fraction
    }

    pub fn sensing_budget(&self) -> f64 {
        self.total_power * (1.0 - self.comm_power_fraction)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_frequency", self.carrier_frequency),
            ("noise_psd", self.noise_psd),
            ("p_max", self.p_max),
            ("total_power", self.total_power),
            ("reference_gain", self.reference_gain),
            ("bandwidth", self.bandwidth),
            ("slot_duration", self.slot_duration),
            ("station_height", self.station_height),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be > 0 and finite")));
            }
        }
        if self.stations == 0 {
            return Err(Error::config("need at least one base station"));
        }
        if self.cooperative_uavs == 0 {
            return Err(Error::config("need at least one cooperative UAV"));
        }
        if self.slots == 0 {
            return Err(Error::config("slot count must be >= 1"));
        }
        if !(self.p_min >= 0.0 && self.p_min < self.p_max) {
            return Err(Error::config("need 0 <= p_min < p_max"));
        }
        if !(0.0..=1.0).contains(&self.theta1) {
            return Err(Error::config("theta1 must lie in [0, 1]"));
        }
        if let Some(t2) = self.theta2 {
            if !(t2 > 0.0 && t2.is_finite()) {
                return Err(Error::config("theta2 must be > 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.comm_power_fraction) {
            return Err(Error::config("comm_power_fraction must lie in [0, 1]"));
        }
        if self.sample_count == 0 {
            return Err(Error::config("sample_count must be >= 1"));
        }
        if !(self.sensing_error_std >= 0.0) {
            return Err(Error::config("sensing_error_std must be >= 0"));
        }
        if !(self.rho_min >= 0.0 && self.r_min >= 0.0) {
            return Err(Error::config("rho_min and r_min must be >= 0"));
        }
        if self.array_rows == 0 || self.array_cols == 0 {
            return Err(Error::config("antenna array needs at least one element"));
        }
        if let Some(p) = &self.station_positions {
            if p.len() != self.stations {
                return Err(Error::config(format!(
                    "station_positions has {} entries, expected {}",
                    p.len(),
                    self.stations
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("station positions must be finite"));
            }
        }
        self.sensing.validate()?;
        self.density.validate()?;
        self.solver.validate()?;
        Ok(())
    }
}

/// Uniform planar array in the horizontal plane, half-wavelength spacing,
/// centered on the station.
pub fn planar_array(rows: usize, cols: usize, wavelength: f64) -> Vec<Vec3> {
    let spacing = wavelength / 2.0;
    let r0 = (rows as f64 - 1.0) / 2.0;
    let c0 = (cols as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push(Vec3::new(
                (c as f64 - c0) * spacing,
                (r as f64 - r0) * spacing,
                0.0,
            ));
        }
    }
    out
}

/// Default station layout: evenly spaced on a circle of radius 0.35 × the
/// shorter horizontal side, around the center of the bounds.
pub fn ring_layout(count: usize, bounds: &Aabb, height: f64) -> Vec<Vec3> {
    let c = bounds.center();
    if count == 1 {
        return vec![Vec3::new(c.x, c.y, height)];
    }
    let e = bounds.extent();
    let radius = 0.35 * e.x.min(e.y);
    (0..count)
        .map(|m| {
            let a = 2.0 * PI * m as f64 / count as f64;
            Vec3::new(c.x + radius * a.cos(), c.y + radius * a.sin(), height)
        })
        .collect()
}

/// Static part of the world shared by every slot.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub stations: Vec<BaseStation>,
    pub cloud: SamplePointCloud,
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let lambda = config.wavelength();
        let positions = config.station_positions.clone().unwrap_or_else(|| {
            ring_layout(
                config.stations,
                &config.density.bounds,
                config.station_height,
            )
        });
        let elements = planar_array(config.array_rows, config.array_cols, lambda);
        let stations = positions
            .into_iter()
            .enumerate()
            .map(|(id, position)| BaseStation {
                id,
                position,
                antenna_elements: elements.clone(),
                total_power_budget: config.total_power,
                bandwidth: config.bandwidth,
            })
            .collect();
        let cloud = sample_points(&config.density, config.sample_count, config.rng_seed)?;
        Ok(Scenario {
            config,
            stations,
            cloud,
        })
    }

    pub fn station_positions(&self) -> Vec<Vec3> {
        self.stations.iter().map(|s| s.position).collect()
    }
}
