//! Soil columns around a supply/return pipe pair.
//!
//! A column holds `4·n_s` temperatures: outer and adjacent regions of every
//! layer, on the supply and on the return side. Heat enters layer 1 from the
//! pipe walls, travels radially within each region, crosses between outer
//! and adjacent regions of the same layer, crosses between the adjacent
//! regions of the supply and return sides where the layers overlap, and
//! leaves through the undisturbed-soil boundary beyond layer `n_s`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::SoilLayerProfile;
use crate::props::{soil_heat_capacity, SoilProps, WaterConstants};
use crate::units::{Celsius, Seconds, Watts};

const HOURS_PER_YEAR: f64 = 8760.0;
const COLDEST_HOUR: f64 = 900.0;

/// Seasonal undisturbed soil temperature at installation depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryClimate {
    pub t_min: Celsius,
    pub t_max: Celsius,
    /// Seconds elapsed since the start of the year when the simulation starts.
    #[serde(default)]
    pub t0_s: Seconds,
}

pub fn boundary_temperature(b: &BoundaryClimate, t: Seconds) -> Celsius {
    let hours = (b.t0_s + t) / 3600.0;
    let a = -0.5 * (2.0 * PI * (hours - COLDEST_HOUR) / HOURS_PER_YEAR).cos() + 0.5;
    b.t_min + a * (b.t_max - b.t_min)
}

/// Which chains see the boundary temperature beyond layer `n_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryCoupling {
    /// Outer and adjacent regions of layer `n_s` both exchange heat with the
    /// boundary.
    #[default]
    Both,
    /// Only the outer region of layer `n_s` touches the boundary.
    OuterOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Outer,
    Adjacent,
}

/// Soil column parameters shared by every segment with the same burial
/// geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SoilColumn {
    pub profile: SoilLayerProfile,
    pub props: SoilProps,
    pub water: WaterConstants,
    /// Distance between the outer and adjacent region centroids per layer.
    pub outer_adjacent_distance: Vec<f64>,
    /// Distance between the supply and return adjacent regions.
    pub supply_return_distance: f64,
    pub coupling: BoundaryCoupling,
    radial: Vec<f64>,
}

impl SoilColumn {
    pub fn new(
        profile: SoilLayerProfile,
        props: SoilProps,
        water: WaterConstants,
        coupling: BoundaryCoupling,
        outer_adjacent_override: Option<f64>,
        supply_return_override: Option<f64>,
    ) -> Self {
        let outer_adjacent_distance = (1..=profile.layers)
            .map(|i| {
                outer_adjacent_override.unwrap_or_else(|| {
                    profile.outer_fraction() * PI * (profile.radius[i] + profile.radius[i - 1]) / 2.0
                })
            })
            .collect();
        let supply_return_distance =
            supply_return_override.unwrap_or(2.0 * profile.half_spacing);
        let r0 = profile.pipe_outer_radius;
        let ds = profile.layer_thickness;
        let n = profile.layers;
        // unscaled shell conductances between layer centers; the last entry
        // reaches from the center of layer n_s to the boundary radius
        let radial = (1..=n)
            .map(|i| {
                let (outer, inner) = if i < n {
                    (r0 + (i as f64 + 0.5) * ds, r0 + (i as f64 - 0.5) * ds)
                } else {
                    (r0 + n as f64 * ds, r0 + (n as f64 - 0.5) * ds)
                };
                2.0 * props.conductivity * PI * profile.length / (outer / inner).ln()
            })
            .collect();
        Self {
            profile,
            props,
            water,
            outer_adjacent_distance,
            supply_return_distance,
            coupling,
            radial,
        }
    }

    pub fn layers(&self) -> usize {
        self.profile.layers
    }

    /// Number of temperatures in one column.
    pub fn state_len(&self) -> usize {
        4 * self.profile.layers
    }

    pub fn volume(&self, region: Region, layer: usize) -> f64 {
        match region {
            Region::Outer => self.profile.volume_outer[layer - 1],
            Region::Adjacent => self.profile.volume_adjacent[layer - 1],
        }
    }

    fn k(&self, region: Region, layer: usize) -> f64 {
        match region {
            Region::Outer => self.profile.k_outer[layer - 1],
            Region::Adjacent => self.profile.k_adjacent[layer - 1],
        }
    }

    /// Heat capacity (J/K) of one region of one layer at temperature `t`.
    pub fn capacity(&self, region: Region, layer: usize, t: Celsius) -> f64 {
        self.volume(region, layer) * soil_heat_capacity(&self.props, &self.water, t)
    }
}

/// Radial heat flow from layer `layer` to layer `layer + 1` within one
/// region; for `layer == n_s`, `t_next` is the boundary temperature.
pub fn radial_layer_flow(
    col: &SoilColumn,
    t_layer: Celsius,
    t_next: Celsius,
    layer: usize,
    region: Region,
) -> Watts {
    let k = col.k(region, layer);
    if k == 0.0 {
        return 0.0;
    }
    col.radial[layer - 1] * k * (t_layer - t_next)
}

/// Heat flow from the outer into the adjacent region of `layer`.
pub fn outer_adjacent_flow(col: &SoilColumn, t_outer: Celsius, t_adjacent: Celsius, layer: usize) -> Watts {
    if col.profile.adjacent_is_empty(layer) {
        return 0.0;
    }
    let area = col.profile.layer_thickness * col.profile.length;
    col.props.conductivity * area / col.outer_adjacent_distance[layer - 1] * (t_outer - t_adjacent)
}

/// Heat flow from the supply-side into the return-side adjacent region of
/// `layer`. Zero while the layer does not reach the partner pipe.
pub fn supply_return_flow(col: &SoilColumn, t_supply: Celsius, t_return: Celsius, layer: usize) -> Watts {
    let z = &col.profile.segment_height;
    if z[layer] == 0.0 {
        return 0.0;
    }
    let area = (z[layer] - z[layer - 1]) * col.profile.length;
    col.props.conductivity * area / col.supply_return_distance * (t_supply - t_return)
}

/// Heat delivered by one pipe wall into layer 1 of its soil side.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipeHeatInput {
    pub outer: Watts,
    pub adjacent: Watts,
}

impl PipeHeatInput {
    pub fn total(&self) -> Watts {
        self.outer + self.adjacent
    }
}

/// Splits the wall-to-soil heat flow between the two regions of layer 1.
///
/// Each region receives its `k` share of the pipe-to-soil conductance,
/// driven by its own temperature, so the pipe loses exactly what the soil
/// gains.
pub fn split_pipe_heat(
    col: &SoilColumn,
    conductance: f64,
    t_wall: Celsius,
    t_outer1: Celsius,
    t_adjacent1: Celsius,
) -> PipeHeatInput {
    PipeHeatInput {
        outer: col.profile.k_outer[0] * conductance * (t_wall - t_outer1),
        adjacent: col.profile.k_adjacent[0] * conductance * (t_wall - t_adjacent1),
    }
}

/// Index helpers for the flat column layout
/// `[supply outer | supply adjacent | return outer | return adjacent]`,
/// each block `n_s` long ordered by layer.
pub fn column_index(n: usize, supply: bool, region: Region, layer: usize) -> usize {
    let side = if supply { 0 } else { 2 };
    let reg = match region {
        Region::Outer => 0,
        Region::Adjacent => 1,
    };
    (side + reg) * n + layer - 1
}

/// Heat-flow totals of one column evaluation, for energy audits.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ColumnBalance {
    /// Heat entering from both pipe walls.
    pub from_pipes: Watts,
    /// Heat leaving through the boundary beyond layer `n_s`.
    pub to_boundary: Watts,
}

/// Writes the `4·n_s` temperature derivatives of one column into `out`.
pub fn soil_rhs(
    col: &SoilColumn,
    state: &[f64],
    pipe_heat: [PipeHeatInput; 2],
    t_boundary: Celsius,
    out: &mut [f64],
) -> ColumnBalance {
    let n = col.layers();
    debug_assert_eq!(state.len(), 4 * n);
    debug_assert_eq!(out.len(), 4 * n);
    let mut balance = ColumnBalance::default();

    for (s, supply) in [true, false].into_iter().enumerate() {
        let heat = pipe_heat[s];
        balance.from_pipes += heat.total();
        let t = |region, layer| state[column_index(n, supply, region, layer)];
        let mut outer_in = heat.outer;
        let mut adjacent_in = heat.adjacent;
        for i in 1..=n {
            let t_o = t(Region::Outer, i);
            let t_a = t(Region::Adjacent, i);
            let (next_o, next_a) = if i < n {
                (t(Region::Outer, i + 1), t(Region::Adjacent, i + 1))
            } else {
                (t_boundary, t_boundary)
            };
            let q_o = radial_layer_flow(col, t_o, next_o, i, Region::Outer);
            let q_a = if i == n && col.coupling == BoundaryCoupling::OuterOnly {
                0.0
            } else {
                radial_layer_flow(col, t_a, next_a, i, Region::Adjacent)
            };
            if i == n {
                balance.to_boundary += q_o + q_a;
            }
            let q_oa = outer_adjacent_flow(col, t_o, t_a, i);
            let q_sr = supply_return_flow(
                col,
                state[column_index(n, true, Region::Adjacent, i)],
                state[column_index(n, false, Region::Adjacent, i)],
                i,
            );
            // the cross flow leaves the supply side and enters the return side
            let q_sr = if supply { q_sr } else { -q_sr };

            out[column_index(n, supply, Region::Outer, i)] =
                (outer_in - q_o - q_oa) / col.capacity(Region::Outer, i, t_o);
            let ia = column_index(n, supply, Region::Adjacent, i);
            out[ia] = if col.profile.adjacent_is_empty(i) {
                0.0
            } else {
                (adjacent_in - q_a + q_oa - q_sr) / col.capacity(Region::Adjacent, i, t_a)
            };
            outer_in = q_o;
            adjacent_in = q_a;
        }
    }
    balance
}

/// Annual heat input of rain into the soil, in kWh/(m²·a).
///
/// `precipitation` in kg/(m²·a), `specific_heat` in J/(kg·K), temperatures
/// in any consistent scale. This is a sanity figure only; rain does not
/// enter the soil energy balances.
pub fn precipitation_heat_input(
    precipitation: f64,
    specific_heat: f64,
    t_precipitation: f64,
    t_soil: f64,
) -> f64 {
    precipitation * specific_heat * (t_precipitation - t_soil) / 3.6e6
}
