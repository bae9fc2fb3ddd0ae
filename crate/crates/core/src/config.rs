//! JSON configuration: field names mirror [`ScenarioConfig`], powers in dBm
//! (the reference gain in dBW) and the noise density in dBm/Hz. Everything
//! is converted to SI on load.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::DistanceLaw;
use crate::error::{Error, Result};
use crate::scenario::{Aabb, ScenarioConfig, SpatialDensity, Vec3};
use crate::sensing::SensingParams;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn dbw_to_linear(dbw: f64) -> f64 {
    10f64.powf(dbw / 10.0)
}

/// Iteration limits and tolerances of the three solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Association iterations per outer pass.
    pub t1: usize,
    /// Dual ascent iterations per outer pass.
    pub t2: usize,
    /// Outer alternations.
    pub t3: usize,
    pub tol_outer: f64,
    /// Threshold on the budget-normalized dual gradient.
    pub tol_grad: f64,
    /// Base step `m1`, relative to the current price scale.
    pub step_base: f64,
    pub max_doublings: u32,
    /// Power levels per link used by the c-transform.
    pub grid_levels: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            t1: 20,
            t2: 200,
            t3: 10,
            tol_outer: 1e-4,
            tol_grad: 1e-5,
            step_base: 0.1,
            max_doublings: 30,
            grid_levels: 64,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t1 == 0 || self.t2 == 0 || self.t3 == 0 {
            return Err(Error::config("solver iteration limits must be >= 1"));
        }
        if !(self.tol_outer > 0.0 && self.tol_grad > 0.0) {
            return Err(Error::config("solver tolerances must be > 0"));
        }
        if !(self.step_base > 0.0 && self.step_base.is_finite()) {
            return Err(Error::config("solver.step_base must be > 0"));
        }
        if self.grid_levels < 2 {
            return Err(Error::config("solver.grid_levels must be >= 2"));
        }
        Ok(())
    }
}

/// On-disk configuration. Missing keys take the reference defaults
/// (30 GHz, -169 dBm/Hz, 0..40 dBm, -50 dBW, M = 6, K = 18).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(alias = "M")]
    pub stations: usize,
    #[serde(alias = "K")]
    pub cooperative_uavs: usize,
    #[serde(alias = "N")]
    pub slots: usize,
    pub slot_duration: f64,
    pub carrier_frequency: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
    pub total_power_dbm: f64,
    pub reference_gain_dbw: f64,
    pub bandwidth: f64,
    pub comm_power_fraction: f64,
    pub theta1: f64,
    pub theta2: Option<f64>,
    pub rho_min: f64,
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
    pub literal_c5: bool,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile {
            stations: 6,
            cooperative_uavs: 18,
            slots: 1,
            slot_duration: 1.0,
            carrier_frequency: 30e9,
            noise_psd_dbm_per_hz: -169.0,
            p_min_dbm: 0.0,
            p_max_dbm: 40.0,
            total_power_dbm: 40.0,
            reference_gain_dbw: -50.0,
            bandwidth: 1e8,
            comm_power_fraction: 0.5,
            theta1: 0.5,
            theta2: None,
            rho_min: 0.0,
            r_min: 0.0,
            rng_seed: 7,
            sample_count: 10_000,
            sensing_error_std: 1.0,
            sensing: SensingParams::default(),
            array_rows: 4,
            array_cols: 4,
            station_height: 25.0,
            station_positions: None,
            density: SpatialDensity::uniform(default_bounds()),
            solver: SolverConfig::default(),
            distance_law: DistanceLaw::Squared,
            literal_c5: false,
        }
    }
}

fn default_bounds() -> Aabb {
    Aabb {
        min: Vec3::new(0.0, 0.0, 50.0),
        max: Vec3::new(1000.0, 1000.0, 150.0),
    }
}

impl ConfigFile {
    /// The small pinned scene used by the acceptance runs: three stations,
    /// six cooperative UAVs, one slot, 10⁴ sample points over
    /// 1 km × 1 km × [50 m, 150 m].
    pub fn desk() -> Self {
        ConfigFile {
            stations: 3,
            cooperative_uavs: 6,
            ..ConfigFile::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn into_config(self) -> Result<ScenarioConfig> {
        for (name, v) in [
            ("noise_psd_dbm_per_hz", self.noise_psd_dbm_per_hz),
            ("p_min_dbm", self.p_min_dbm),
            ("p_max_dbm", self.p_max_dbm),
            ("total_power_dbm", self.total_power_dbm),
            ("reference_gain_dbw", self.reference_gain_dbw),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite")));
            }
        }
        let cfg = ScenarioConfig {
            stations: self.stations,
            cooperative_uavs: self.cooperative_uavs,
            slots: self.slots,
            slot_duration: self.slot_duration,
            carrier_frequency: self.carrier_frequency,
            noise_psd: dbm_to_watts(self.noise_psd_dbm_per_hz),
            p_min: dbm_to_watts(self.p_min_dbm),
            p_max: dbm_to_watts(self.p_max_dbm),
            total_power: dbm_to_watts(self.total_power_dbm),
            reference_gain: dbw_to_linear(self.reference_gain_dbw),
            bandwidth: self.bandwidth,
            comm_power_fraction: self.comm_power_fraction,
            theta1: self.theta1,
            theta2: self.theta2,
            rho_min: self.rho_min,
            r_min: self.r_min,
            rng_seed: self.rng_seed,
            sample_count: self.sample_count,
            sensing_error_std: self.sensing_error_std,
            sensing: self.sensing,
            array_rows: self.array_rows,
            array_cols: self.array_cols,
            station_height: self.station_height,
            station_positions: self.station_positions,
            density: self.density,
            solver: self.solver,
            distance_law: self.distance_law,
            literal_c5: self.literal_c5,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
