//! Physical parameters of the transmitter cell and the dimensionless
//! constants derived from them.
//!
//! Every public quantity is in SI units. The dimensionless radius
//! `rho = r / r_m` and time `tau = D1 t / r_m^2` are only used internally by
//! the transfer-function and series code.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Boltzmann constant, J/K (exact SI value).
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Mass of a K+ ion from the standard atomic weight 39.0983 u.
pub const POTASSIUM_MASS: f64 = 39.0983 * ATOMIC_MASS_UNIT;

/// 27 degrees Celsius.
pub const ROOM_TEMPERATURE: f64 = 300.15;

/// Geometry, transport and source parameters of a transmitter cell.
///
/// Defaults reproduce the reference scenario: a 5 um cell with a 0.5 um
/// generator, 1 nm potassium channels in water at 27 C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransmitterSpec {
    /// Cell radius, m.
    pub r_m: f64,
    /// Generator organelle radius, m.
    pub r_s: f64,
    /// Open-channel radius, m.
    pub r_c: f64,
    /// Number of ion channels.
    #[serde(rename = "N")]
    pub n_channels: f64,
    /// Diffusion coefficient inside the cell, m^2/s.
    #[serde(rename = "D1")]
    pub d1: f64,
    /// Diffusion coefficient outside the cell, m^2/s.
    #[serde(rename = "D2")]
    pub d2: f64,
    /// Generation rate per unit organelle area, molecules/(m^2 s).
    #[serde(rename = "S_rate")]
    pub s_rate: f64,
    /// Threshold (initial interior) concentration, molecules/m^3.
    #[serde(rename = "T_conc")]
    pub t_conc: f64,
    /// Absolute temperature, K.
    pub temperature: f64,
    /// Mass of the signalling ion, kg.
    pub ion_mass: f64,
    /// Length of the on interval, s.
    #[serde(rename = "T1")]
    pub t1: f64,
    /// Slot length, s.
    #[serde(rename = "T_slot")]
    pub t_slot: f64,
}

impl Default for TransmitterSpec {
    fn default() -> Self {
        Self {
            r_m: 5e-6,
            r_s: 0.5e-6,
            r_c: 1e-9,
            n_channels: 1e7,
            d1: 1.14e-9,
            d2: 1.14e-9,
            s_rate: 3e14,
            t_conc: 1e18,
            temperature: ROOM_TEMPERATURE,
            ion_mass: POTASSIUM_MASS,
            t1: 0.02,
            t_slot: 0.04,
        }
    }
}

impl TransmitterSpec {
    /// Reference scenario with a different channel count.
    pub fn with_channels(n_channels: f64) -> Self {
        Self {
            n_channels,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_positive = |name: &'static str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite and > 0, got {v}")))
            }
        };
        let finite_non_negative = |name: &'static str, v: f64| -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite and >= 0, got {v}")))
            }
        };
        finite_positive("r_m", self.r_m)?;
        finite_positive("r_s", self.r_s)?;
        if self.r_s >= self.r_m {
            return Err(invalid("r_s", "generator radius must be smaller than r_m"));
        }
        finite_positive("r_c", self.r_c)?;
        finite_non_negative("N", self.n_channels)?;
        finite_positive("D1", self.d1)?;
        finite_positive("D2", self.d2)?;
        finite_non_negative("S_rate", self.s_rate)?;
        finite_non_negative("T_conc", self.t_conc)?;
        finite_positive("temperature", self.temperature)?;
        finite_positive("ion_mass", self.ion_mass)?;
        finite_positive("T1", self.t1)?;
        if !(self.t_slot.is_finite() && self.t_slot > self.t1) {
            return Err(invalid(
                "T_slot",
                "slot must be longer than the on interval T1",
            ));
        }
        let open_area = self.n_channels * PI * self.r_c * self.r_c;
        if open_area >= 4.0 * PI * self.r_m * self.r_m {
            return Err(invalid("N", "open-channel area exceeds the membrane area"));
        }
        Ok(())
    }

    /// Mean thermal speed factor sqrt(k_B T / (2 pi m)), m/s.
    pub fn thermal_velocity(&self) -> f64 {
        (BOLTZMANN * self.temperature / (2.0 * PI * self.ion_mass)).sqrt()
    }

    /// Total molecules inside the cell at the start of a slot.
    pub fn initial_content(&self) -> f64 {
        self.t_conc * 4.0 / 3.0 * PI * self.r_m.powi(3)
    }

    /// Generation rate of the organelle, molecules/s.
    pub fn generation_rate(&self) -> f64 {
        4.0 * PI * self.r_s * self.r_s * self.s_rate
    }

    /// Diffusive time scale r_m^2 / D1, s.
    pub fn time_scale(&self) -> f64 {
        self.r_m * self.r_m / self.d1
    }
}

/// Fraction of the membrane area covered by open channels.
pub fn permeability(spec: &TransmitterSpec, p_open_final: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_open_final) {
        return Err(invalid(
            "p_open_final",
            format!("must lie in [0, 1], got {p_open_final}"),
        ));
    }
    if !(spec.n_channels >= 0.0) {
        return Err(invalid("N", "channel count must be >= 0"));
    }
    let z = p_open_final * spec.n_channels * PI * spec.r_c * spec.r_c
        / (4.0 * PI * spec.r_m * spec.r_m);
    if z >= 1.0 {
        return Err(Error::UnphysicalPermeability { z });
    }
    Ok(z)
}

/// Dimensionless membrane constant h = (r_m/D1) (z/(1-z)) v_thermal.
pub fn boundary_h(spec: &TransmitterSpec, z: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&z) {
        return Err(Error::UnphysicalPermeability { z });
    }
    Ok(spec.r_m / spec.d1 * (z / (1.0 - z)) * spec.thermal_velocity())
}

/// Dimensionless constants shared by the analytic, bound and simulation paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessParams {
    /// Membrane permeability.
    pub z: f64,
    /// Diffusivity ratio D2/D1.
    pub a: f64,
    /// Boundary constant.
    pub h: f64,
    /// sqrt(k_B T / (2 pi m)), m/s.
    pub v_thermal: f64,
}

impl DimensionlessParams {
    pub fn from_spec(spec: &TransmitterSpec, p_open_final: f64) -> Result<Self> {
        spec.validate()?;
        let z = permeability(spec, p_open_final)?;
        Ok(Self {
            z,
            a: spec.d2 / spec.d1,
            h: boundary_h(spec, z)?,
            v_thermal: spec.thermal_velocity(),
        })
    }

    /// Dimensionless source radius r_s / r_m.
    pub fn rho_source(spec: &TransmitterSpec) -> f64 {
        spec.r_s / spec.r_m
    }
}

/// `(tau, rho)` for a physical `(t, r)`.
pub fn to_dimensionless(spec: &TransmitterSpec, t: f64, r: f64) -> (f64, f64) {
    (spec.d1 * t / (spec.r_m * spec.r_m), r / spec.r_m)
}

/// `(t, r)` for a dimensionless `(tau, rho)`.
pub fn from_dimensionless(spec: &TransmitterSpec, tau: f64, rho: f64) -> (f64, f64) {
    (tau * spec.r_m * spec.r_m / spec.d1, rho * spec.r_m)
}
