//! One finite volume of a network pipe: fluid and wall temperatures,
//! their heat exchange, and the hydraulic pressure loss.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::geometry::{pipe_geometry, PipeGeometry, PipeVolumes};
use crate::props::FluidProps;
use crate::units::{Celsius, Conductance, MassFlow, Pascal, Watts};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipeSegmentState {
    pub fluid: Celsius,
    pub wall: Celsius,
}

/// Wall material and heat transfer data of a pipe segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallMaterial {
    pub density: f64,
    pub specific_heat: f64,
    pub conductivity: f64,
    /// Convective coefficient between fluid and inner wall, W/(m²·K).
    pub fluid_wall_htc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipeSegmentParams {
    pub geometry: PipeGeometry,
    pub wall: WallMaterial,
    pub volumes: PipeVolumes,
    pub fluid_specific_heat: f64,
    fluid_wall_conductance: Conductance,
}

impl WallMaterial {
    pub fn validate(&self) -> Vec<ParamError> {
        [
            ("density", self.density),
            ("specific_heat", self.specific_heat),
            ("conductivity", self.conductivity),
            ("fluid_wall_htc", self.fluid_wall_htc),
        ]
        .into_iter()
        .filter(|(_, v)| !(*v > 0.0 && v.is_finite()))
        .map(|(name, _)| ParamError::new(name, "must be finite and > 0"))
        .collect()
    }
}

impl PipeSegmentParams {
    pub fn new(geometry: PipeGeometry, wall: WallMaterial, fluid: &FluidProps) -> Self {
        let volumes = pipe_geometry(&geometry, fluid.density(), wall.density);
        let r = geometry.inner_radius;
        let resistance = 1.0 / (r * wall.fluid_wall_htc)
            + ((r + geometry.wall_thickness / 2.0) / r).ln() / wall.conductivity;
        Self {
            geometry,
            wall,
            volumes,
            fluid_specific_heat: fluid.specific_heat(),
            fluid_wall_conductance: 2.0 * PI * geometry.length / resistance,
        }
    }

    pub fn fluid_capacity(&self) -> f64 {
        self.volumes.fluid_mass * self.fluid_specific_heat
    }

    pub fn wall_capacity(&self) -> f64 {
        self.volumes.wall_mass * self.wall.specific_heat
    }

    pub fn fluid_wall_conductance(&self) -> Conductance {
        self.fluid_wall_conductance
    }
}

/// Heat flow from the fluid into the wall center.
pub fn fluid_wall_heat_flow(params: &PipeSegmentParams, fluid: Celsius, wall: Celsius) -> Watts {
    params.fluid_wall_conductance * (fluid - wall)
}

/// Conductance from the wall center to the center of the first soil layer.
pub fn pipe_soil_conductance(
    params: &PipeSegmentParams,
    soil_layer_thickness: f64,
    soil_conductivity: f64,
) -> Conductance {
    let g = &params.geometry;
    let r = g.inner_radius;
    let ro = r + g.wall_thickness;
    let resistance = (ro / (r + g.wall_thickness / 2.0)).ln() / params.wall.conductivity
        + ((ro + soil_layer_thickness / 2.0) / ro).ln() / soil_conductivity;
    2.0 * PI * g.length / resistance
}

/// Heat flow from the pipe wall into the first soil layer.
pub fn pipe_soil_heat_flow(
    params: &PipeSegmentParams,
    soil_layer_thickness: f64,
    soil_conductivity: f64,
    wall: Celsius,
    soil: Celsius,
) -> Watts {
    pipe_soil_conductance(params, soil_layer_thickness, soil_conductivity) * (wall - soil)
}

/// Time derivatives `(dT_f/dt, dT_p/dt)` of one segment.
///
/// `inlet` is the temperature of the fluid entering the volume and
/// `wall_to_soil` the heat flow leaving the wall towards the soil.
pub fn pipe_rhs(
    params: &PipeSegmentParams,
    state: PipeSegmentState,
    inlet: Celsius,
    mass_flow: MassFlow,
    wall_to_soil: Watts,
) -> (f64, f64) {
    let q_fp = fluid_wall_heat_flow(params, state.fluid, state.wall);
    let cf = params.fluid_specific_heat;
    let d_fluid = (mass_flow * cf * (inlet - state.fluid) - q_fp) / params.fluid_capacity();
    let d_wall = (q_fp - wall_to_soil) / params.wall_capacity();
    (d_fluid, d_wall)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureDrop {
    pub delta_p: Pascal,
    pub friction: f64,
    pub reynolds: f64,
}

/// Darcy-Weisbach pressure loss with the Blasius friction factor, which is
/// used at every Reynolds number. `viscosity` is evaluated by the caller,
/// normally at the segment fluid temperature.
pub fn pressure_drop(
    geometry: &PipeGeometry,
    fluid_density: f64,
    viscosity: f64,
    mass_flow: MassFlow,
) -> PressureDrop {
    if mass_flow <= 0.0 {
        return PressureDrop {
            delta_p: 0.0,
            friction: 0.0,
            reynolds: 0.0,
        };
    }
    let d = 2.0 * geometry.inner_radius;
    let area = PI * geometry.inner_radius * geometry.inner_radius;
    let reynolds = mass_flow * d / (viscosity * area);
    let friction = blasius_friction(reynolds);
    let delta_p =
        8.0 * geometry.length * mass_flow * mass_flow / (fluid_density * PI * PI * d.powi(5)) * friction;
    PressureDrop {
        delta_p,
        friction,
        reynolds,
    }
}

pub fn blasius_friction(reynolds: f64) -> f64 {
    0.3164 * reynolds.powf(-0.25)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fluid() -> FluidProps {
        FluidProps::new(1000.0, 4000.0, vec![(0.0, 0.001), (20.0, 0.001)]).unwrap()
    }

    fn params(len: f64) -> PipeSegmentParams {
        PipeSegmentParams::new(
            PipeGeometry {
                inner_radius: 0.05,
                wall_thickness: 0.01,
                length: len,
            },
            WallMaterial {
                density: 950.0,
                specific_heat: 1900.0,
                conductivity: 0.4,
                fluid_wall_htc: 500.0,
            },
            &fluid(),
        )
    }

    #[test]
    fn fluid_wall_flow() {
        let p = params(10.0);
        assert_eq!(fluid_wall_heat_flow(&p, 7.0, 7.0), 0.0);
        assert!(fluid_wall_heat_flow(&p, 8.0, 7.0) > 0.0);
        assert!(fluid_wall_heat_flow(&p, 6.0, 7.0) < 0.0);
        // hand evaluation: 2π·10 / (1/(0.05·500) + ln(0.055/0.05)/0.4) · 5
        let r = 1.0 / 25.0 + (1.1f64).ln() / 0.4;
        let expected = 2.0 * PI * 10.0 / r * 5.0;
        assert_relative_eq!(fluid_wall_heat_flow(&p, 10.0, 5.0), expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 1128.94, max_relative = 1e-5);
    }

    #[test]
    fn rhs_cases() {
        let p = params(10.0);
        let s = PipeSegmentState { fluid: 5.0, wall: 5.0 };
        assert_eq!(pipe_rhs(&p, s, 5.0, 0.7, 0.0), (0.0, 0.0));

        let s = PipeSegmentState { fluid: 6.0, wall: 5.0 };
        let (df, _) = pipe_rhs(&p, s, 123.0, 0.0, 0.0);
        let q = fluid_wall_heat_flow(&p, 6.0, 5.0);
        assert_relative_eq!(df, -q / p.fluid_capacity(), max_relative = 1e-12);
    }

    #[test]
    fn rhs_advection_hand_value() {
        // ṁ=1, c_f=4000, ΔT=2 K, no wall exchange, m_f=100 kg -> 0.02 K/s
        let mut p = params(10.0);
        p.volumes.fluid_mass = 100.0;
        let s = PipeSegmentState { fluid: 5.0, wall: 5.0 };
        let (df, dw) = pipe_rhs(&p, s, 7.0, 1.0, 0.0);
        assert_relative_eq!(df, 0.02, max_relative = 1e-12);
        assert_eq!(dw, 0.0);
    }

    #[test]
    fn isolated_pair_conserves_energy() {
        let p = params(10.0);
        let s = PipeSegmentState { fluid: 9.0, wall: 2.0 };
        let (df, dw) = pipe_rhs(&p, s, 0.0, 0.0, 0.0);
        let de = p.fluid_capacity() * df + p.wall_capacity() * dw;
        assert!(de.abs() < 1e-9 * p.fluid_capacity() * df.abs());
    }

    #[test]
    fn pipe_soil_flow_limits() {
        let p = params(10.0);
        assert_eq!(pipe_soil_heat_flow(&p, 0.1, 1.5, 4.0, 4.0), 0.0);
        // δ_s -> 0 leaves the wall half only
        let g_wall = 2.0 * PI * 10.0 / ((0.06f64 / 0.055).ln() / 0.4);
        assert_relative_eq!(pipe_soil_conductance(&p, 1e-14, 1.5), g_wall, max_relative = 1e-9);
        let mut prev = f64::INFINITY;
        for k in 1..50 {
            let g = pipe_soil_conductance(&p, k as f64 * 0.02, 1.5);
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn pressure_drop_values() {
        let g = PipeGeometry {
            inner_radius: 0.05,
            wall_thickness: 0.01,
            length: 100.0,
        };
        assert_eq!(pressure_drop(&g, 1000.0, 1e-3, 0.0).delta_p, 0.0);
        assert_relative_eq!(blasius_friction(10_000.0), 0.03164, max_relative = 1e-12);
        let d = pressure_drop(&g, 1000.0, 1e-3, 0.1);
        assert_relative_eq!(d.reynolds, 0.1 * 0.1 / (1e-3 * PI * 0.0025), max_relative = 1e-12);
        assert_relative_eq!(d.reynolds, 1273.24, max_relative = 1e-5);
    }

    #[test]
    fn pressure_drop_scales_with_seven_quarters() {
        let g = PipeGeometry {
            inner_radius: 0.05,
            wall_thickness: 0.01,
            length: 100.0,
        };
        let flows: [f64; 5] = [0.1, 0.3, 1.0, 3.0, 10.0];
        let pts: Vec<(f64, f64)> = flows
            .iter()
            .map(|&m| (m.ln(), pressure_drop(&g, 1000.0, 1e-3, m).delta_p.ln()))
            .collect();
        for w in pts.windows(2) {
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            assert_relative_eq!(slope, 1.75, max_relative = 1e-10);
        }
    }
}
