//! Checks shared by the example and acceptance targets. Each check returns
//! `Ok(detail)` on success and `Err(reason)` otherwise so that a runner can
//! report every check on one line.

#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

macro_rules! req {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub mod criteria;
pub mod oracles;

use std::path::PathBuf;

use isac_ot::aibot::resolve_theta2;
use isac_ot::config::ConfigFile;
use isac_ot::instance::SlotInstance;
use isac_ot::objective::SlotContext;
use isac_ot::scenario::Scenario;

pub type Outcome = Result<String, String>;

/// Equal, or within `rel` of the larger magnitude.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// The pinned scenario file shipped with the repository.
pub fn pinned_config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json")
}

pub fn pinned_config() -> ConfigFile {
    ConfigFile::load(&pinned_config_path()).expect("pinned config loads")
}

/// A built scenario with its first slot and calibrated mapping factor.
pub struct Scene {
    pub scenario: Scenario,
    pub slot: SlotInstance,
    pub theta2: f64,
}

impl Scene {
    pub fn new(file: ConfigFile) -> Self {
        let scenario =
            Scenario::build(file.into_config().expect("valid config")).expect("scenario");
        let slot = SlotInstance::draw(&scenario, 0).expect("slot");
        let theta2 = resolve_theta2(&scenario, &slot).expect("theta2");
        Scene {
            scenario,
            slot,
            theta2,
        }
    }

    pub fn desk(samples: usize) -> Self {
        let mut c = ConfigFile::desk();
        c.sample_count = samples;
        Scene::new(c)
    }

    pub fn ctx(&self) -> SlotContext<'_> {
        SlotContext::new(&self.scenario, &self.slot, self.theta2)
    }
}
