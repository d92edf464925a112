//! Material and fluid property models.
//!
//! Densities and specific heats are constant. The brine viscosity is read
//! from a user-supplied table, and the heat capacities of soil moisture and
//! storage water switch between a liquid, a fusion and an ice regime.

use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::units::{Celsius, DynamicViscosity, SpecificHeat, VolumetricHeatCapacity};

/// Network medium (water-glycol brine).
#[derive(Debug, Clone, PartialEq)]
pub struct FluidProps {
    density: f64,
    specific_heat: SpecificHeat,
    viscosity: Vec<(Celsius, DynamicViscosity)>,
}

impl FluidProps {
    /// Builds the fluid description, checking the viscosity table.
    ///
    /// The table must have at least two entries, strictly increasing
    /// temperatures and strictly positive viscosities.
    pub fn new(
        density: f64,
        specific_heat: SpecificHeat,
        viscosity: Vec<(Celsius, DynamicViscosity)>,
    ) -> Result<Self, ParamError> {
        if !(density > 0.0) {
            return Err(ParamError::new("density", "must be > 0"));
        }
        if !(specific_heat > 0.0) {
            return Err(ParamError::new("specific_heat", "must be > 0"));
        }
        if viscosity.len() < 2 {
            return Err(ParamError::new("viscosity", "table needs at least 2 entries"));
        }
        for (i, w) in viscosity.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(ParamError::new(
                    format!("viscosity[{}]", i + 1),
                    "temperatures must be strictly increasing",
                ));
            }
        }
        if let Some(i) = viscosity.iter().position(|&(t, mu)| !(mu > 0.0) || !t.is_finite()) {
            return Err(ParamError::new(
                format!("viscosity[{i}]"),
                "viscosity must be finite and > 0",
            ));
        }
        Ok(Self {
            density,
            specific_heat,
            viscosity,
        })
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn specific_heat(&self) -> SpecificHeat {
        self.specific_heat
    }

    pub fn viscosity_table(&self) -> &[(Celsius, DynamicViscosity)] {
        &self.viscosity
    }

    /// Dynamic viscosity at `t`, linearly interpolated and clamped to the
    /// table's end values.
    pub fn viscosity(&self, t: Celsius) -> DynamicViscosity {
        let table = &self.viscosity;
        let (t_lo, mu_lo) = table[0];
        let (t_hi, mu_hi) = table[table.len() - 1];
        if t <= t_lo {
            return mu_lo;
        }
        if t >= t_hi {
            return mu_hi;
        }
        // first node strictly above t
        let k = table.partition_point(|&(tk, _)| tk <= t);
        let (t0, mu0) = table[k - 1];
        let (t1, mu1) = table[k];
        mu0 + (mu1 - mu0) * (t - t0) / (t1 - t0)
    }
}

/// Soil around pipes and storage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoilProps {
    pub density: f64,
    pub dry_specific_heat: SpecificHeat,
    pub conductivity: f64,
    /// Mass share of water in the soil, 0..=1.
    pub water_share: f64,
}

impl SoilProps {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.density > 0.0) {
            return Err(ParamError::new("density", "must be > 0"));
        }
        if !(self.dry_specific_heat > 0.0) {
            return Err(ParamError::new("dry_specific_heat", "must be > 0"));
        }
        if !(self.conductivity > 0.0) {
            return Err(ParamError::new("conductivity", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.water_share) {
            return Err(ParamError::new("water_share", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Thermal constants of water and ice.
///
/// `fusion_enthalpy` is the enthalpy of fusion spread over the 1 K band
/// between `solid_temperature` and `melting_temperature`, so it has the
/// unit of a specific heat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaterConstants {
    pub specific_heat: SpecificHeat,
    pub ice_specific_heat: SpecificHeat,
    pub fusion_enthalpy: SpecificHeat,
    pub conductivity: f64,
    pub density: f64,
    pub melting_temperature: Celsius,
    pub solid_temperature: Celsius,
}

impl Default for WaterConstants {
    fn default() -> Self {
        Self {
            specific_heat: 4182.0,
            ice_specific_heat: 2100.0,
            fusion_enthalpy: 333_550.0,
            conductivity: 0.6,
            density: 1000.0,
            melting_temperature: 0.0,
            solid_temperature: -1.0,
        }
    }
}

impl WaterConstants {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.ice_specific_heat > 0.0) {
            return Err(ParamError::new("ice_specific_heat", "must be > 0"));
        }
        if !(self.specific_heat > self.ice_specific_heat) {
            return Err(ParamError::new(
                "specific_heat",
                "must exceed ice_specific_heat",
            ));
        }
        if !(self.fusion_enthalpy > self.specific_heat) {
            return Err(ParamError::new(
                "fusion_enthalpy",
                "must exceed specific_heat",
            ));
        }
        if !(self.conductivity > 0.0) {
            return Err(ParamError::new("conductivity", "must be > 0"));
        }
        if !(self.density > 0.0) {
            return Err(ParamError::new("density", "must be > 0"));
        }
        if !(self.solid_temperature < self.melting_temperature) {
            return Err(ParamError::new(
                "solid_temperature",
                "must be below melting_temperature",
            ));
        }
        Ok(())
    }

    /// Phase regime of water at temperature `t`.
    pub fn phase(&self, t: Celsius) -> Phase {
        if t > self.melting_temperature {
            Phase::Liquid
        } else if t < self.solid_temperature {
            Phase::Ice
        } else {
            Phase::Fusion
        }
    }

    fn regime_heat(&self, t: Celsius) -> SpecificHeat {
        match self.phase(t) {
            Phase::Liquid => self.specific_heat,
            Phase::Ice => self.ice_specific_heat,
            Phase::Fusion => self.fusion_enthalpy,
        }
    }
}

/// Aggregate state used to pick the effective heat capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Liquid,
    Fusion,
    Ice,
}

/// Volumetric heat capacity of moist soil at temperature `t`.
pub fn soil_heat_capacity(
    props: &SoilProps,
    consts: &WaterConstants,
    t: Celsius,
) -> VolumetricHeatCapacity {
    let w = props.water_share;
    props.density * ((1.0 - w) * props.dry_specific_heat + consts.regime_heat(t) * w)
}

/// Effective specific heat of storage water at temperature `t`.
pub fn water_heat_capacity(consts: &WaterConstants, t: Celsius) -> SpecificHeat {
    consts.regime_heat(t)
}
