//! One time slot of a scenario: the UAV draw and the table of
//! station-to-UAV links with their sensing errors and gains.

use std::f64::consts::PI;

use rand::Rng;

use crate::channel::{
    antenna_response, beamforming_gain, draw_sensing_error, CommLink, DistanceLaw, LinkGeometry,
};
use crate::error::{Error, Result};
use crate::scenario::{departure_angles, stream_rng, Scenario, UavKind, UavNode, Vec3};
use crate::sensing::composite_gain;

/// Precomputed quantities of one station-UAV pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkData {
    pub geometry: LinkGeometry,
    /// `λ² |α̂ᴴw|² / (16π² N0 (d̂+Δd)^e)`: SNR per watt times bandwidth, so
    /// that `snr = p · comm_gain / b`.
    pub comm_gain: f64,
    /// Composite sensing gain `|ς|`.
    pub sensing_gain: f64,
}

impl LinkData {
    /// SNR per watt on bandwidth `b`.
    pub fn snr_per_watt(&self, bandwidth: f64) -> f64 {
        self.comm_gain / bandwidth
    }
}

/// Per-slot data. UAV `k < K` is cooperative, UAV `K` is the
/// non-cooperative target.
#[derive(Debug, Clone)]
pub struct SlotInstance {
    pub slot: usize,
    pub uavs: Vec<UavNode>,
    /// `links[uav][station]`.
    pub links: Vec<Vec<LinkData>>,
}

/// Random stream for the UAV positions of slot `n`.
pub fn uav_stream(slot: usize) -> u64 {
    1 + 2 * slot as u64
}

/// Random stream for the link errors and phases of slot `n`.
pub fn link_stream(slot: usize) -> u64 {
    2 + 2 * slot as u64
}

/// Gain of the matched beamformer link with unit bandwidth, without the
/// bandwidth division.
pub fn comm_gain(
    elements: &[Vec3],
    geometry: LinkGeometry,
    wavelength: f64,
    noise_psd: f64,
    law: DistanceLaw,
) -> f64 {
    let response = antenna_response(elements, geometry.azimuth, geometry.elevation, wavelength);
    let link = CommLink::matched(geometry, response, 1.0, true);
    let g = beamforming_gain(&link.response, &link.beamformer);
    wavelength * wavelength * g
        / (16.0 * PI * PI * noise_psd * geometry.effective_distance().powi(law.exponent()))
}

impl SlotInstance {
    /// Draws the `K + 1` UAVs of slot `slot` from the scenario density and
    /// builds the link table.
    pub fn draw(scenario: &Scenario, slot: usize) -> Result<Self> {
        let cfg = &scenario.config;
        let k = cfg.cooperative_uavs;
        let mut rng = stream_rng(cfg.rng_seed, uav_stream(slot));
        let uavs = (0..=k)
            .map(|id| {
                Ok(UavNode {
                    id,
                    position: cfg.density.sample(&mut rng)?,
                    kind: if id < k {
                        UavKind::Cooperative
                    } else {
                        UavKind::NonCooperative
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_uavs(scenario, slot, uavs)
    }

    /// Builds the link table for given UAV positions.
    pub fn with_uavs(scenario: &Scenario, slot: usize, uavs: Vec<UavNode>) -> Result<Self> {
        let cfg = &scenario.config;
        if uavs.len() != cfg.cooperative_uavs + 1
            || uavs.last().map(|u| u.kind) != Some(UavKind::NonCooperative)
            || uavs[..uavs.len() - 1]
                .iter()
                .any(|u| u.kind != UavKind::Cooperative)
        {
            return Err(Error::config(
                "expected K cooperative UAVs followed by one non-cooperative UAV",
            ));
        }
        let lambda = cfg.wavelength();
        let mut rng = stream_rng(cfg.rng_seed, link_stream(slot));
        let mut links = Vec::with_capacity(uavs.len());
        for uav in &uavs {
            let mut row = Vec::with_capacity(scenario.stations.len());
            for bs in &scenario.stations {
                let d = bs.position.distance(uav.position);
                let (az, el) = departure_angles(bs.position, uav.position)?;
                let err = draw_sensing_error(&mut rng, d, cfg.sensing_error_std);
                let phase = rng.random_range(0.0..2.0 * PI);
                let geometry = LinkGeometry::new(d, err, az, el, phase)?;
                row.push(LinkData {
                    geometry,
                    comm_gain: comm_gain(
                        &bs.antenna_elements,
                        geometry,
                        lambda,
                        cfg.noise_psd,
                        cfg.distance_law,
                    ),
                    sensing_gain: composite_gain(
                        bs.position,
                        uav.position,
                        lambda,
                        cfg.reference_gain,
                    )?,
                });
            }
            links.push(row);
        }
        Ok(SlotInstance { slot, uavs, links })
    }

    pub fn cooperative(&self) -> usize {
        self.uavs.len() - 1
    }

    pub fn targets(&self) -> usize {
        self.uavs.len()
    }

    pub fn noncooperative(&self) -> usize {
        self.uavs.len() - 1
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.uavs.iter().map(|u| u.position).collect()
    }
}
