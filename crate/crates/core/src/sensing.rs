//! Sensing channel gains, CRB proxies for distance and angle estimation, and
//! the localization QoS of each target.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::scenario::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingParams {
    /// RMS bandwidth of the sensing waveform, Hz.
    pub effective_bandwidth: f64,
    /// Null-to-null beamwidth, radians.
    pub null_to_null_beamwidth: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Weight of the distance term. Zero gives an angle-only QoS.
    pub varpi1: f64,
    /// Weight of the angle term.
    pub varpi2: f64,
}

impl Default for SensingParams {
    fn default() -> Self {
        SensingParams {
            effective_bandwidth: 1e7,
            null_to_null_beamwidth: 0.25,
            beta1: 1.0,
            beta2: 1.0,
            varpi1: 1e-6,
            varpi2: 1.0,
        }
    }
}

impl SensingParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("effective_bandwidth", self.effective_bandwidth),
            ("null_to_null_beamwidth", self.null_to_null_beamwidth),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("sensing.{name} must be > 0")));
            }
        }
        for (name, v) in [("varpi1", self.varpi1), ("varpi2", self.varpi2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("sensing.{name} must be >= 0")));
            }
        }
        if self.varpi1 == 0.0 && self.varpi2 == 0.0 {
            return Err(Error::config(
                "sensing.varpi1 and varpi2 cannot both be zero",
            ));
        }
        Ok(())
    }

    /// `ϖ1 b / β1 + ϖ2 / β2`: QoS per unit of `p_s |ς|²`.
    pub fn qos_weight(&self, bandwidth: f64) -> f64 {
        self.varpi1 * bandwidth / self.beta1 + self.varpi2 / self.beta2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensingLink {
    /// Target index; the non-cooperative UAV is the last one.
    pub target: usize,
    pub station: usize,
    /// Composite gain magnitude `|ς|`.
    pub gain: f64,
    pub power: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrbEstimate {
    pub crb_distance: f64,
    pub crb_angle: f64,
    pub rho: f64,
}

/// `|ς| = sqrt(β0) λ / (4π d)`.
pub fn composite_gain(bs: Vec3, uav: Vec3, wavelength: f64, reference_gain: f64) -> Result<f64> {
    let d = bs.distance(uav);
    if !(d > 0.0) {
        return Err(Error::degenerate("base station and target coincide"));
    }
    Ok(reference_gain.sqrt() * wavelength / (4.0 * PI * d))
}

/// CRB proxies with unit proportionality constant. `rho` is filled by
/// [`localization_qos`]; here it is left at zero.
pub fn crb(link: &SensingLink, params: &SensingParams) -> Result<CrbEstimate> {
    if !(link.power > 0.0) {
        return Err(Error::InfiniteCrb);
    }
    let snr = link.power * link.gain * link.gain;
    Ok(CrbEstimate {
        crb_distance: 1.0 / (snr * params.effective_bandwidth * params.effective_bandwidth),
        crb_angle: 1.0 / (snr * params.null_to_null_beamwidth),
        rho: 0.0,
    })
}

pub fn localization_qos(link: &SensingLink, params: &SensingParams) -> f64 {
    link.power * link.gain * link.gain * params.qos_weight(link.bandwidth)
}

/// CRBs and QoS together.
pub fn estimate(link: &SensingLink, params: &SensingParams) -> Result<CrbEstimate> {
    let mut e = crb(link, params)?;
    e.rho = localization_qos(link, params);
    Ok(e)
}

/// `ρ_sum` over all `K + 1` targets. Every target needs a serving link.
pub fn rho_sum(links: &[Option<SensingLink>], params: &SensingParams) -> Result<f64> {
    let rhos = links
        .iter()
        .enumerate()
        .map(|(j, l)| {
            l.as_ref()
                .map(|l| localization_qos(l, params))
                .ok_or_else(|| Error::config(format!("target {j} has no sensing link")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(compensated_sum(rhos))
}
