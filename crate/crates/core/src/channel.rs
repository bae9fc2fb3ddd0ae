//! Antenna responses, estimated communication channels with sensing-error
//! perturbation, per-link SNR and the cooperative sum rate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::scenario::{Vec3, SPEED_OF_LIGHT};

/// Smallest estimated distance accepted when drawing sensing errors.
pub const MIN_ESTIMATED_DISTANCE: f64 = 0.1;

/// Distance power in the SNR denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceLaw {
    /// `d^1`: path loss linear in distance.
    Linear,
    /// `d^2`, consistent with the `1/(4πd)` amplitude of the channel.
    #[default]
    Squared,
}

impl DistanceLaw {
    pub fn exponent(self) -> i32 {
        match self {
            DistanceLaw::Linear => 1,
            DistanceLaw::Squared => 2,
        }
    }
}

/// Array response: one unit-magnitude phase term per element.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaResponse(pub Vec<Complex64>);

impl AntennaResponse {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `κ = (2π/λ)(sin el cos az, sin el sin az, cos el)`.
pub fn wave_vector(azimuth: f64, elevation: f64, wavelength: f64) -> Vec3 {
    let k = 2.0 * PI / wavelength;
    Vec3::new(
        k * elevation.sin() * azimuth.cos(),
        k * elevation.sin() * azimuth.sin(),
        k * elevation.cos(),
    )
}

pub fn antenna_response(
    elements: &[Vec3],
    azimuth: f64,
    elevation: f64,
    wavelength: f64,
) -> AntennaResponse {
    let kappa = wave_vector(azimuth, elevation, wavelength);
    AntennaResponse(
        elements
            .iter()
            .map(|e| Complex64::from_polar(1.0, e.dot(kappa)))
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub true_distance: f64,
    pub estimated_distance: f64,
    /// `Δd = d - d̂`.
    pub sensing_error: f64,
    pub azimuth: f64,
    pub elevation: f64,
    pub phase: f64,
}

impl LinkGeometry {
    pub fn new(
        true_distance: f64,
        sensing_error: f64,
        azimuth: f64,
        elevation: f64,
        phase: f64,
    ) -> Result<Self> {
        let estimated_distance = true_distance - sensing_error;
        if !(true_distance > 0.0) || !(estimated_distance > 0.0) {
            return Err(Error::degenerate(format!(
                "link distances must be positive (d = {true_distance}, d_hat = {estimated_distance})"
            )));
        }
        Ok(LinkGeometry {
            true_distance,
            estimated_distance,
            sensing_error,
            azimuth,
            elevation,
            phase,
        })
    }

    /// `d̂ + Δd`, the distance entering the channel model.
    pub fn effective_distance(&self) -> f64 {
        self.estimated_distance + self.sensing_error
    }
}

/// Zero-mean Gaussian ranging error, redrawn until `d - Δd` exceeds
/// [`MIN_ESTIMATED_DISTANCE`].
pub fn draw_sensing_error<R: rand::Rng + ?Sized>(rng: &mut R, true_distance: f64, std: f64) -> f64 {
    if std == 0.0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, std).expect("std validated as finite and >= 0");
    loop {
        let e: f64 = normal.sample(rng);
        if true_distance - e > MIN_ESTIMATED_DISTANCE {
            return e;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommLink {
    pub geometry: LinkGeometry,
    pub response: AntennaResponse,
    /// Unit-norm beamformer.
    pub beamformer: Vec<Complex64>,
    pub bandwidth: f64,
    pub associated: bool,
}

impl CommLink {
    /// Link with the matched beamformer `w = α̂ / ‖α̂‖`.
    pub fn matched(
        geometry: LinkGeometry,
        response: AntennaResponse,
        bandwidth: f64,
        associated: bool,
    ) -> Self {
        let n = response.norm();
        let beamformer = response.0.iter().map(|c| c / n).collect();
        CommLink {
            geometry,
            response,
            beamformer,
            bandwidth,
            associated,
        }
    }
}

/// `|α̂ᴴ w|²`.
pub fn beamforming_gain(response: &AntennaResponse, beamformer: &[Complex64]) -> f64 {
    response
        .0
        .iter()
        .zip(beamformer)
        .map(|(a, w)| a.conj() * w)
        .sum::<Complex64>()
        .norm_sqr()
}

fn scaled_response(link: &CommLink, wavelength: f64, distance: f64) -> Vec<Complex64> {
    let scale = Complex64::from_polar(wavelength / (4.0 * PI * distance), link.geometry.phase);
    link.response.0.iter().map(|a| scale * a).collect()
}

/// Estimated channel `λ e^{jφ} α̂ / (4π (d̂ + Δd))`.
pub fn estimated_channel(link: &CommLink, wavelength: f64) -> Result<Vec<Complex64>> {
    let d = link.geometry.effective_distance();
    if !(d > 0.0) {
        return Err(Error::degenerate("non-positive effective distance"));
    }
    Ok(scaled_response(link, wavelength, d))
}

/// Channel error term `λ e^{jφ} α̂ / (4π Δd)`.
pub fn channel_error(link: &CommLink, wavelength: f64) -> Result<Vec<Complex64>> {
    if link.geometry.sensing_error == 0.0 {
        return Err(Error::PerfectSensing);
    }
    Ok(scaled_response(
        link,
        wavelength,
        link.geometry.sensing_error,
    ))
}

/// SNR per watt of transmit power; zero for unassociated links.
///
/// Noise power is `N_0 · b`.
pub fn unit_power_snr(link: &CommLink, noise_psd: f64, wavelength: f64, law: DistanceLaw) -> f64 {
    if !link.associated {
        return 0.0;
    }
    let g = beamforming_gain(&link.response, &link.beamformer);
    let d = link.geometry.effective_distance();
    wavelength * wavelength * g
        / (16.0 * PI * PI * noise_psd * link.bandwidth * d.powi(law.exponent()))
}

pub fn link_snr(
    link: &CommLink,
    power: f64,
    noise_psd: f64,
    wavelength: f64,
    law: DistanceLaw,
) -> f64 {
    power * unit_power_snr(link, noise_psd, wavelength, law)
}

/// Shannon rate `b log2(1 + snr)` in bit/s.
pub fn rate(bandwidth: f64, snr: f64) -> f64 {
    bandwidth * snr.log2_1p()
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

/// Per-link rates and their total for `(link, transmit power)` pairs.
pub fn sum_rate(
    links: &[(CommLink, f64)],
    noise_psd: f64,
    wavelength: f64,
    law: DistanceLaw,
) -> (Vec<f64>, f64) {
    let rates: Vec<f64> = links
        .iter()
        .map(|(l, p)| rate(l.bandwidth, link_snr(l, *p, noise_psd, wavelength, law)))
        .collect();
    let total = compensated_sum(rates.iter().copied());
    (rates, total)
}

/// Round-trip-free propagation delay `‖B - U‖ / c`.
pub fn echo_delay(bs: Vec3, uav: Vec3) -> Result<f64> {
    let d = bs.distance(uav);
    if !(d > 0.0) {
        return Err(Error::degenerate("base station and UAV coincide"));
    }
    Ok(d / SPEED_OF_LIGHT)
}
