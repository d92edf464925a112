//! Buried ice storage: stratified water layers with phase change, two coil
//! strings (extraction and regeneration), the concrete shell and the soil
//! shells around it.
//!
//! Layers are numbered `1..=n_w` from the base (1) to the lid (`n_w`).
//! Both coil strings share one geometry. Each string is split into `n_hx`
//! parallel coils; one representative coil per layer carries the string's
//! temperature and `n_hx` times its heat flow reaches the water.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::props::{soil_heat_capacity, water_heat_capacity, SoilProps, WaterConstants};
use crate::units::{Celsius, Conductance, MassFlow, Watts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoilInlet {
    #[default]
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoilString {
    Extraction,
    Regeneration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IceStorageParams {
    pub water_radius: f64,
    pub water_volume: f64,
    pub layers: usize,
    pub coils: usize,
    pub coil_inner_radius: f64,
    pub coil_thickness: f64,
    /// Total pipe length of all coils of one string.
    pub coil_length: f64,
    pub coil_conductivity: f64,
    pub concrete_thickness: f64,
    pub concrete_density: f64,
    pub concrete_specific_heat: f64,
    pub concrete_conductivity: f64,
    pub soil_layers: usize,
    pub soil_layer_thickness: f64,
    /// Brine to inner coil wall, W/(m²·K).
    pub htc_fluid_coil: f64,
    /// Outer coil (or ice) surface to water, W/(m²·K).
    pub htc_coil_water: f64,
    /// Water to inner concrete wall, W/(m²·K).
    pub htc_water_concrete: f64,
    pub ice_conductivity: f64,
    #[serde(default)]
    pub coil_inlet: CoilInlet,
}

impl IceStorageParams {
    pub fn validate(&self) -> Vec<ParamError> {
        let mut errs = Vec::new();
        let positive = [
            ("water_radius", self.water_radius),
            ("water_volume", self.water_volume),
            ("coil_inner_radius", self.coil_inner_radius),
            ("coil_thickness", self.coil_thickness),
            ("coil_length", self.coil_length),
            ("coil_conductivity", self.coil_conductivity),
            ("concrete_thickness", self.concrete_thickness),
            ("concrete_density", self.concrete_density),
            ("concrete_specific_heat", self.concrete_specific_heat),
            ("concrete_conductivity", self.concrete_conductivity),
            ("soil_layer_thickness", self.soil_layer_thickness),
            ("htc_fluid_coil", self.htc_fluid_coil),
            ("htc_coil_water", self.htc_coil_water),
            ("htc_water_concrete", self.htc_water_concrete),
            ("ice_conductivity", self.ice_conductivity),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                errs.push(ParamError::new(name, "must be finite and > 0"));
            }
        }
        if self.layers < 2 {
            errs.push(ParamError::new("layers", "must be >= 2"));
        }
        if self.coils < 1 {
            errs.push(ParamError::new("coils", "must be >= 1"));
        }
        if self.soil_layers < 1 {
            errs.push(ParamError::new("soil_layers", "must be >= 1"));
        }
        errs
    }
}

/// Derived volumes and masses of the storage.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageGeometry {
    pub coil_fluid_volume: f64,
    pub coil_total_volume: f64,
    /// Brine mass of one coil in one layer.
    pub coil_mass: f64,
    pub storage_volume: f64,
    pub layer_height: f64,
    pub layer_water_mass: f64,
    pub layer_area: f64,
    pub concrete_volume: Vec<f64>,
    pub concrete_mass: Vec<f64>,
    /// `soil_volume[i][j]` for water layer `i + 1` and soil shell `j + 1`.
    pub soil_volume: Vec<Vec<f64>>,
}

fn is_end(i: usize, n: usize) -> bool {
    i == 1 || i == n
}

pub fn storage_geometry(p: &IceStorageParams, fluid_density: f64, water_density: f64) -> StorageGeometry {
    let n = p.layers;
    let nf = n as f64;
    let coil_fluid_volume = PI * p.coil_inner_radius.powi(2) * p.coil_length;
    let coil_total_volume = PI * (p.coil_inner_radius + p.coil_thickness).powi(2) * p.coil_length;
    let coil_mass = fluid_density * coil_fluid_volume / (p.coils as f64 * nf);
    let storage_volume = p.water_volume + coil_total_volume;
    let rw = p.water_radius;
    let layer_height = storage_volume / (PI * rw * rw * nf);
    let layer_water_mass = water_density * p.water_volume / nf;
    let layer_area = PI * rw * rw;

    let dc = p.concrete_thickness;
    let shell = PI * ((rw + dc).powi(2) - rw * rw) * layer_height;
    let concrete_volume: Vec<f64> = (1..=n)
        .map(|i| if is_end(i, n) { shell + PI * rw * rw * dc } else { shell })
        .collect();
    let concrete_mass = concrete_volume.iter().map(|v| p.concrete_density * v).collect();

    let ds = p.soil_layer_thickness;
    let soil_volume = (1..=n)
        .map(|i| {
            (1..=p.soil_layers)
                .map(|j| {
                    let ro = rw + dc + j as f64 * ds;
                    let ri = rw + dc + (j as f64 - 1.0) * ds;
                    let v = PI * (ro * ro - ri * ri) * layer_height;
                    if is_end(i, n) {
                        v + PI * rw * rw * ds
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();

    StorageGeometry {
        coil_fluid_volume,
        coil_total_volume,
        coil_mass,
        storage_volume,
        layer_height,
        layer_water_mass,
        layer_area,
        concrete_volume,
        concrete_mass,
        soil_volume,
    }
}

/// Volume fraction of ice in a layer at temperature `t_water`.
pub fn ice_fraction(consts: &WaterConstants, t_water: Celsius) -> f64 {
    (t_water / consts.solid_temperature).clamp(0.0, 1.0)
}

/// Outer radius of the ice sleeve around the extraction coils.
pub fn ice_radius(p: &IceStorageParams, phi: f64) -> f64 {
    let r_out = p.coil_inner_radius + p.coil_thickness;
    (p.water_volume * phi / (p.layers as f64 * PI * p.coil_length) + r_out * r_out).sqrt()
}

/// Storage model with precomputed conductances.
#[derive(Debug, Clone, PartialEq)]
pub struct IceStorage {
    pub params: IceStorageParams,
    pub geometry: StorageGeometry,
    pub soil: SoilProps,
    pub water: WaterConstants,
    pub fluid_specific_heat: f64,
    wall_side: Conductance,
    wall_end: Conductance,
    shell_side: Conductance,
    shell_end: Conductance,
    soil_side: Vec<Conductance>,
    soil_end: Vec<Conductance>,
}

/// Offsets of the storage temperatures inside its state block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StorageLayout {
    pub layers: usize,
    pub soil_layers: usize,
}

impl StorageLayout {
    pub fn len(&self) -> usize {
        4 * self.layers + self.layers * self.soil_layers
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn coil(&self, string: CoilString) -> std::ops::Range<usize> {
        let start = match string {
            CoilString::Extraction => 0,
            CoilString::Regeneration => self.layers,
        };
        start..start + self.layers
    }
    pub fn water(&self) -> std::ops::Range<usize> {
        2 * self.layers..3 * self.layers
    }
    pub fn concrete(&self) -> std::ops::Range<usize> {
        3 * self.layers..4 * self.layers
    }
    /// Soil shells, row-major: water layer outer, soil shell inner.
    pub fn soil(&self) -> std::ops::Range<usize> {
        4 * self.layers..self.len()
    }
}

/// Heat-flow totals of one storage evaluation, for energy audits.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StorageBalance {
    /// Enthalpy carried in by the brine of both strings.
    pub advected_in: Watts,
    /// Heat leaving through the outer soil boundary.
    pub to_boundary: Watts,
    /// Heat taken from the water by both coil strings.
    pub extracted_from_water: Watts,
}

/// Flow conditions of one coil string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringFlow {
    pub inlet: Celsius,
    /// Total string mass flow, split equally over the coils.
    pub mass_flow: MassFlow,
}

impl IceStorage {
    pub fn new(
        params: IceStorageParams,
        soil: SoilProps,
        water: WaterConstants,
        fluid_density: f64,
        fluid_specific_heat: f64,
    ) -> Self {
        let geometry = storage_geometry(&params, fluid_density, water.density);
        let p = &params;
        let rw = p.water_radius;
        let zw = geometry.layer_height;
        let dc = p.concrete_thickness;
        let ds = p.soil_layer_thickness;
        let lc = p.concrete_conductivity;
        let ls = soil.conductivity;

        let ln_wall = ((rw + dc / 2.0) / rw).ln();
        let wall_side = 2.0 * PI * zw / (1.0 / (p.htc_water_concrete * rw) + ln_wall / lc);
        let wall_end = PI
            / (1.0 / ((2.0 * rw * zw + rw * rw) * p.htc_water_concrete)
                + ln_wall / (2.0 * lc * zw)
                + (dc / 2.0) / (lc * rw * rw));

        let ln_c = ((rw + dc) / (rw + dc / 2.0)).ln();
        let ln_s = ((rw + dc + ds / 2.0) / (rw + dc)).ln();
        let shell_side = 2.0 * PI * zw / (ln_c / lc + ln_s / ls);
        let shell_end = PI
            / (ln_c / (2.0 * lc * zw)
                + ln_s / (2.0 * ls * zw)
                + (dc / 2.0) / (lc * rw * rw)
                + (ds / 2.0) / (ls * rw * rw));

        let soil_side: Vec<f64> = (1..=p.soil_layers)
            .map(|j| {
                let jf = j as f64;
                let ratio = (rw + dc + (jf + 0.5) * ds) / (rw + dc + (jf - 0.5) * ds);
                2.0 * ls * PI * zw / ratio.ln()
            })
            .collect();
        let soil_end = soil_side
            .iter()
            .map(|g| g + ls / ds * PI * rw * rw)
            .collect();

        Self {
            params,
            geometry,
            soil,
            water,
            fluid_specific_heat,
            wall_side,
            wall_end,
            shell_side,
            shell_end,
            soil_side,
            soil_end,
        }
    }

    pub fn layout(&self) -> StorageLayout {
        StorageLayout {
            layers: self.params.layers,
            soil_layers: self.params.soil_layers,
        }
    }

    fn end(&self, i: usize) -> bool {
        is_end(i, self.params.layers)
    }

    /// Water-to-concrete conductance of layer `i` (1-based).
    pub fn wall_conductance(&self, i: usize) -> Conductance {
        if self.end(i) {
            self.wall_end
        } else {
            self.wall_side
        }
    }

    /// Concrete-to-first-soil-shell conductance of layer `i`.
    pub fn shell_conductance(&self, i: usize) -> Conductance {
        if self.end(i) {
            self.shell_end
        } else {
            self.shell_side
        }
    }

    /// Conductance from soil shell `j` to `j + 1` in row `i`.
    pub fn soil_conductance(&self, i: usize, j: usize) -> Conductance {
        if self.end(i) {
            self.soil_end[j - 1]
        } else {
            self.soil_side[j - 1]
        }
    }

    /// Natural-convection conductance between neighbouring water layers.
    pub fn convection_conductance(&self) -> Conductance {
        self.water.conductivity * self.geometry.layer_area / self.geometry.layer_height
    }

    /// Coil-to-water `UA` of one coil in one layer.
    pub fn coil_ua(&self, string: CoilString, t_water: Celsius) -> Conductance {
        let p = &self.params;
        let r = p.coil_inner_radius;
        let r_out = r + p.coil_thickness;
        let length = p.coil_length / p.coils as f64 / p.layers as f64;
        let mut resistance = 1.0 / (p.htc_fluid_coil * r)
            + (r_out / r).ln() / p.coil_conductivity
            + 1.0 / (p.htc_coil_water * r);
        if string == CoilString::Extraction {
            let r_ice = ice_radius(p, ice_fraction(&self.water, t_water));
            resistance += (r_ice / r_out).ln() / p.ice_conductivity;
        }
        2.0 * PI * length / resistance
    }

    /// Brine heat capacity of one string in one layer (all coils).
    pub fn coil_capacity(&self) -> f64 {
        self.params.coils as f64 * self.geometry.coil_mass * self.fluid_specific_heat
    }

    pub fn water_capacity(&self, t: Celsius) -> f64 {
        self.geometry.layer_water_mass * water_heat_capacity(&self.water, t)
    }

    pub fn concrete_capacity(&self, i: usize) -> f64 {
        self.geometry.concrete_mass[i - 1] * self.params.concrete_specific_heat
    }

    pub fn soil_capacity(&self, i: usize, j: usize, t: Celsius) -> f64 {
        self.geometry.soil_volume[i - 1][j - 1] * soil_heat_capacity(&self.soil, &self.water, t)
    }

    /// Layer visiting order of the brine, inlet first.
    pub fn flow_order(&self) -> Vec<usize> {
        let n = self.params.layers;
        match self.params.coil_inlet {
            CoilInlet::Bottom => (1..=n).collect(),
            CoilInlet::Top => (1..=n).rev().collect(),
        }
    }

    /// Outlet temperature of a string given its coil temperatures.
    pub fn outlet(&self, t_coil: &[f64]) -> Celsius {
        match self.params.coil_inlet {
            CoilInlet::Bottom => t_coil[t_coil.len() - 1],
            CoilInlet::Top => t_coil[0],
        }
    }

    /// Coil derivatives of one string and the per-coil heat flow into each
    /// water layer. Returns the enthalpy the brine brings in, `ṁ·c·(T_in − T_out)`.
    pub fn coil_rhs(
        &self,
        string: CoilString,
        t_coil: &[f64],
        t_water: &[f64],
        flow: StringFlow,
        d_coil: &mut [f64],
        q_coil_water: &mut [f64],
    ) -> Watts {
        let cf = self.fluid_specific_heat;
        let m_coil = flow.mass_flow / self.params.coils as f64;
        let cap = self.geometry.coil_mass * cf;
        let mut upstream = flow.inlet;
        for i in self.flow_order() {
            let k = i - 1;
            let q = self.coil_ua(string, t_water[k]) * (t_coil[k] - t_water[k]);
            q_coil_water[k] = q;
            d_coil[k] = (m_coil * cf * (upstream - t_coil[k]) - q) / cap;
            upstream = t_coil[k];
        }
        flow.mass_flow * cf * (flow.inlet - self.outlet(t_coil))
    }

    /// Heat flows from water layers into the concrete shell.
    pub fn wall_flows(&self, t_water: &[f64], t_concrete: &[f64], q: &mut [f64]) {
        for i in 1..=self.params.layers {
            q[i - 1] = self.wall_conductance(i) * (t_water[i - 1] - t_concrete[i - 1]);
        }
    }

    /// Water layer derivatives. `q_coils[i]` is the total heat from all coils
    /// of both strings into layer `i + 1`.
    pub fn water_rhs(&self, t_water: &[f64], q_coils: &[f64], q_wall: &[f64], d_water: &mut [f64]) {
        let n = self.params.layers;
        let g_nc = self.convection_conductance();
        for i in 1..=n {
            let k = i - 1;
            let mut net = q_coils[k] - q_wall[k];
            if i < n {
                net += g_nc * (t_water[k + 1] - t_water[k]);
            }
            if i > 1 {
                net -= g_nc * (t_water[k] - t_water[k - 1]);
            }
            d_water[k] = net / self.water_capacity(t_water[k]);
        }
    }

    pub fn concrete_rhs(&self, q_wall: &[f64], q_shell: &[f64], d_concrete: &mut [f64]) {
        for i in 1..=self.params.layers {
            d_concrete[i - 1] = (q_wall[i - 1] - q_shell[i - 1]) / self.concrete_capacity(i);
        }
    }

    /// Concrete-to-soil flows and soil shell derivatives. `t_soil` and
    /// `d_soil` are row-major (`layers × soil_layers`). Returns the heat
    /// leaving through the boundary.
    pub fn shell_soil_rhs(
        &self,
        t_concrete: &[f64],
        t_soil: &[f64],
        t_boundary: Celsius,
        q_shell: &mut [f64],
        d_soil: &mut [f64],
    ) -> Watts {
        let ns = self.params.soil_layers;
        let mut out = 0.0;
        for i in 1..=self.params.layers {
            let row = &t_soil[(i - 1) * ns..i * ns];
            let q_cs = self.shell_conductance(i) * (t_concrete[i - 1] - row[0]);
            q_shell[i - 1] = q_cs;
            let mut inflow = q_cs;
            for j in 1..=ns {
                let next = if j < ns { row[j] } else { t_boundary };
                let q = self.soil_conductance(i, j) * (row[j - 1] - next);
                d_soil[(i - 1) * ns + j - 1] = (inflow - q) / self.soil_capacity(i, j, row[j - 1]);
                inflow = q;
            }
            out += inflow;
        }
        out
    }

    /// Full storage right-hand side over the storage state block.
    pub fn rhs(
        &self,
        state: &[f64],
        extraction: StringFlow,
        regeneration: StringFlow,
        t_boundary: Celsius,
        d: &mut [f64],
        scratch: &mut StorageScratch,
    ) -> StorageBalance {
        let lay = self.layout();
        let n = lay.layers;
        let nhx = self.params.coils as f64;
        let t_water = &state[lay.water()];
        let t_concrete = &state[lay.concrete()];

        let mut balance = StorageBalance::default();
        for (string, flow) in [
            (CoilString::Extraction, extraction),
            (CoilString::Regeneration, regeneration),
        ] {
            let r = lay.coil(string);
            balance.advected_in += self.coil_rhs(
                string,
                &state[r.clone()],
                t_water,
                flow,
                &mut d[r],
                match string {
                    CoilString::Extraction => &mut scratch.q_ext,
                    CoilString::Regeneration => &mut scratch.q_reg,
                },
            );
        }
        for k in 0..n {
            scratch.q_coils[k] = nhx * (scratch.q_ext[k] + scratch.q_reg[k]);
        }
        balance.extracted_from_water = -scratch.q_coils.iter().sum::<f64>();

        self.wall_flows(t_water, t_concrete, &mut scratch.q_wall);
        let (d_head, d_soil) = d.split_at_mut(4 * n);
        self.water_rhs(t_water, &scratch.q_coils, &scratch.q_wall, &mut d_head[lay.water()]);
        balance.to_boundary = self.shell_soil_rhs(
            t_concrete,
            &state[lay.soil()],
            t_boundary,
            &mut scratch.q_shell,
            d_soil,
        );
        self.concrete_rhs(&scratch.q_wall, &scratch.q_shell, &mut d_head[lay.concrete()]);
        balance
    }

    /// Heat capacity (J/K) of every slot of the storage block.
    pub fn capacities(&self, state: &[f64], out: &mut [f64]) {
        let lay = self.layout();
        let ns = lay.soil_layers;
        for k in lay.coil(CoilString::Extraction).chain(lay.coil(CoilString::Regeneration)) {
            out[k] = self.coil_capacity();
        }
        for k in lay.water() {
            out[k] = self.water_capacity(state[k]);
        }
        for (i, k) in lay.concrete().enumerate() {
            out[k] = self.concrete_capacity(i + 1);
        }
        for (m, k) in lay.soil().enumerate() {
            out[k] = self.soil_capacity(m / ns + 1, m % ns + 1, state[k]);
        }
    }
}

/// Reusable buffers for [`IceStorage::rhs`].
#[derive(Debug, Clone, Default)]
pub struct StorageScratch {
    q_ext: Vec<f64>,
    q_reg: Vec<f64>,
    q_coils: Vec<f64>,
    q_wall: Vec<f64>,
    q_shell: Vec<f64>,
}

impl StorageScratch {
    pub fn new(layers: usize) -> Self {
        Self {
            q_ext: vec![0.0; layers],
            q_reg: vec![0.0; layers],
            q_coils: vec![0.0; layers],
            q_wall: vec![0.0; layers],
            q_shell: vec![0.0; layers],
        }
    }

    /// Per-coil heat flow from the extraction string into each layer, as
    /// left by the last [`IceStorage::rhs`] call.
    pub fn extraction_flows(&self) -> &[f64] {
        &self.q_ext
    }

    /// Total coil heat into each water layer from the last call.
    pub fn coil_flows(&self) -> &[f64] {
        &self.q_coils
    }

    pub fn wall_flows(&self) -> &[f64] {
        &self.q_wall
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn params(layers: usize) -> IceStorageParams {
        IceStorageParams {
            water_radius: 1.2,
            water_volume: 10.0,
            layers,
            coils: 4,
            coil_inner_radius: 0.016,
            coil_thickness: 0.002,
            coil_length: 1000.0,
            coil_conductivity: 0.4,
            concrete_thickness: 0.15,
            concrete_density: 2400.0,
            concrete_specific_heat: 880.0,
            concrete_conductivity: 2.1,
            soil_layers: 3,
            soil_layer_thickness: 0.3,
            htc_fluid_coil: 1000.0,
            htc_coil_water: 300.0,
            htc_water_concrete: 200.0,
            ice_conductivity: 2.2,
            coil_inlet: CoilInlet::Bottom,
        }
    }

    fn soil() -> SoilProps {
        SoilProps {
            density: 1800.0,
            dry_specific_heat: 850.0,
            conductivity: 1.5,
            water_share: 0.15,
        }
    }

    fn storage(layers: usize) -> IceStorage {
        IceStorage::new(params(layers), soil(), WaterConstants::default(), 1040.0, 3800.0)
    }

    #[test]
    fn geometry_values() {
        let g = storage_geometry(&params(4), 1040.0, 1000.0);
        assert_relative_eq!(g.storage_volume, 10.0 + g.coil_total_volume, max_relative = 1e-15);
        assert_relative_eq!(g.coil_total_volume, PI * 0.018f64.powi(2) * 1000.0, max_relative = 1e-12);
        assert_relative_eq!(g.coil_total_volume, 1.0179, max_relative = 1e-4);
        let lid = PI * 1.2 * 1.2 * 0.15;
        assert_relative_eq!(g.concrete_volume[0] - g.concrete_volume[1], lid, max_relative = 1e-12);
        assert_relative_eq!(g.concrete_volume[3] - g.concrete_volume[2], lid, max_relative = 1e-12);
        assert_relative_eq!(g.layer_water_mass, 2500.0);
        assert_relative_eq!(
            g.coil_mass,
            1040.0 * PI * 0.016f64.powi(2) * 1000.0 / 16.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            g.soil_volume[0][1] - g.soil_volume[1][1],
            PI * 1.44 * 0.3,
            max_relative = 1e-12
        );
    }

    #[test]
    fn ice_fraction_and_radius() {
        let c = WaterConstants::default();
        let p = params(4);
        assert_eq!(ice_fraction(&c, 5.0), 0.0);
        assert_relative_eq!(ice_radius(&p, 0.0), 0.018);
        assert_relative_eq!(ice_fraction(&c, -0.5), 0.5);
        assert_eq!(ice_fraction(&c, -1.0), 1.0);
        assert_eq!(ice_fraction(&c, -7.0), 1.0);
        let r = ice_radius(&p, 1.0);
        assert_relative_eq!(r * r - 0.018 * 0.018, 10.0 / (4.0 * PI * 1000.0), max_relative = 1e-12);
    }

    #[test]
    fn ua_cases() {
        let s = storage(4);
        assert_relative_eq!(
            s.coil_ua(CoilString::Extraction, 3.0),
            s.coil_ua(CoilString::Regeneration, 3.0),
            max_relative = 1e-15
        );
        // independent evaluation with a fully grown ice sleeve
        let p = params(4);
        let r_ice = ice_radius(&p, 1.0);
        let res = 1.0 / (1000.0 * 0.016)
            + (0.018f64 / 0.016).ln() / 0.4
            + (r_ice / 0.018).ln() / 2.2
            + 1.0 / (300.0 * 0.016);
        let expected = 2.0 * PI * (1000.0 / 4.0 / 4.0) / res;
        assert_relative_eq!(s.coil_ua(CoilString::Extraction, -3.0), expected, max_relative = 1e-12);
        // regeneration never sees ice
        assert_relative_eq!(
            s.coil_ua(CoilString::Regeneration, -3.0),
            s.coil_ua(CoilString::Regeneration, 3.0)
        );
        let mut prev = f64::INFINITY;
        for k in 0..=20 {
            let t = -(k as f64) / 20.0;
            let ua = s.coil_ua(CoilString::Extraction, t);
            assert!(ua <= prev);
            prev = ua;
        }
    }

    #[test]
    fn coil_equilibrium() {
        let s = storage(3);
        let t = [4.0, 4.0, 4.0];
        let mut d = [9.0; 3];
        let mut q = [9.0; 3];
        s.coil_rhs(
            CoilString::Extraction,
            &t,
            &t,
            StringFlow { inlet: 4.0, mass_flow: 1.3 },
            &mut d,
            &mut q,
        );
        assert_eq!(d, [0.0; 3]);
        assert_eq!(q, [0.0; 3]);
    }

    #[test]
    fn coil_flow_order_follows_inlet() {
        let mut p = params(3);
        p.coil_inlet = CoilInlet::Top;
        let s = IceStorage::new(p, soil(), WaterConstants::default(), 1040.0, 3800.0);
        let t_coil = [1.0, 2.0, 3.0];
        let t_water = t_coil;
        let mut d = [0.0; 3];
        let mut q = [0.0; 3];
        s.coil_rhs(
            CoilString::Regeneration,
            &t_coil,
            &t_water,
            StringFlow { inlet: 3.0, mass_flow: 1.0 },
            &mut d,
            &mut q,
        );
        // top layer sees the inlet, the others their upper neighbour
        assert_eq!(d[2], 0.0);
        assert!(d[1] > 0.0 && d[0] > 0.0);
        assert_eq!(s.outlet(&t_coil), 1.0);
    }

    #[test]
    fn water_at_rest_when_isothermal() {
        let s = storage(4);
        let t = [2.0; 4];
        let mut q_wall = [0.0; 4];
        s.wall_flows(&t, &t, &mut q_wall);
        assert_eq!(q_wall, [0.0; 4]);
        let mut d = [1.0; 4];
        s.water_rhs(&t, &[0.0; 4], &q_wall, &mut d);
        assert_eq!(d, [0.0; 4]);
    }

    #[test]
    fn fusion_slows_temperature_change() {
        let s = storage(2);
        let q = [-500.0, -500.0];
        let mut liquid = [0.0; 2];
        let mut fusion = [0.0; 2];
        s.water_rhs(&[3.0, 3.0], &q, &[0.0; 2], &mut liquid);
        s.water_rhs(&[-0.5, -0.5], &q, &[0.0; 2], &mut fusion);
        assert_relative_eq!(fusion[0] / liquid[0], 4182.0 / 333_550.0, max_relative = 1e-12);
        assert_relative_eq!(liquid[0] / fusion[0], 79.76, max_relative = 1e-3);
    }

    #[test]
    fn two_layer_relaxation() {
        // closed storage, no coils, no wall: conduction-only relaxation
        let s = storage(2);
        let g = s.convection_conductance();
        let m = s.geometry.layer_water_mass;
        let (t1, t2) = (10.0f64, 4.0f64);
        let mut t = [t1, t2];
        let dt = 10.0;
        let steps = 200_000;
        let mut d = [0.0; 2];
        for _ in 0..steps {
            // RK2 is plenty for this linear system
            s.water_rhs(&t, &[0.0; 2], &[0.0; 2], &mut d);
            let mid = [t[0] + 0.5 * dt * d[0], t[1] + 0.5 * dt * d[1]];
            s.water_rhs(&mid, &[0.0; 2], &[0.0; 2], &mut d);
            t[0] += dt * d[0];
            t[1] += dt * d[1];
        }
        let time = dt * steps as f64;
        let c = 4182.0;
        // analytic two-body relaxation
        let rate = 2.0 * g / (m * c);
        let diff = (t1 - t2) * (-rate * time).exp();
        let mean = 0.5 * (t1 + t2);
        assert_relative_eq!(t[0] + t[1], t1 + t2, max_relative = 1e-12);
        assert_relative_eq!(t[0] - t[1], diff, max_relative = 1e-5);
        assert_relative_eq!(0.5 * (t[0] + t[1]), mean, max_relative = 1e-12);
    }

    #[test]
    fn wall_flows_end_layers() {
        let s = storage(4);
        let p = params(4);
        let zw = s.geometry.layer_height;
        let (rw, dc, a, lc): (f64, f64, f64, f64) = (1.2, 0.15, 200.0, 2.1);
        let ln = ((rw + dc / 2.0) / rw).ln();
        let end = PI / (1.0 / ((2.0 * rw * zw + rw * rw) * a) + ln / (2.0 * lc * zw) + (dc / 2.0) / (lc * rw * rw));
        let side = 2.0 * PI * zw / (1.0 / (a * rw) + ln / lc);
        assert_relative_eq!(s.wall_conductance(1), end, max_relative = 1e-12);
        assert_relative_eq!(s.wall_conductance(4), end, max_relative = 1e-12);
        assert_relative_eq!(s.wall_conductance(2), side, max_relative = 1e-12);
        let _ = p;
        let mut q = [0.0; 4];
        s.wall_flows(&[5.0, 5.0, 5.0, 5.0], &[3.0, 3.0, 3.0, 3.0], &mut q);
        let mut q2 = [0.0; 4];
        s.wall_flows(&[3.0, 3.0, 3.0, 3.0], &[5.0, 5.0, 5.0, 5.0], &mut q2);
        for k in 0..4 {
            assert_eq!(q[k], -q2[k]);
        }
    }

    #[test]
    fn concrete_derivatives() {
        let s = storage(3);
        let mut d = [1.0; 3];
        s.concrete_rhs(&[10.0; 3], &[10.0; 3], &mut d);
        assert_eq!(d, [0.0; 3]);
        s.concrete_rhs(&[100.0, 50.0, 0.0], &[20.0, 0.0, -10.0], &mut d);
        let mut d2 = [0.0; 3];
        s.concrete_rhs(&[200.0, 100.0, 0.0], &[40.0, 0.0, -20.0], &mut d2);
        for k in 0..3 {
            assert_relative_eq!(d2[k], 2.0 * d[k], max_relative = 1e-15);
        }
        let m_mid = 2400.0 * s.geometry.concrete_volume[1];
        assert_relative_eq!(d[1], 50.0 / (m_mid * 880.0), max_relative = 1e-12);
    }

    #[test]
    fn shell_soil_audit_and_end_rows() {
        let s = storage(4);
        let ns = 3;
        let t_c = [6.0, 5.0, 4.0, 3.0];
        let t_s: Vec<f64> = (0..12).map(|k| 2.0 + 0.3 * k as f64).collect();
        let mut q = [0.0; 4];
        let mut d = vec![0.0; 12];
        let out = s.shell_soil_rhs(&t_c, &t_s, 8.0, &mut q, &mut d);
        let mut boundary = 0.0;
        for i in 1..=4 {
            let row = &t_s[(i - 1) * ns..i * ns];
            let stored: f64 = (1..=ns)
                .map(|j| s.soil_capacity(i, j, row[j - 1]) * d[(i - 1) * ns + j - 1])
                .sum();
            let b = s.soil_conductance(i, ns) * (row[ns - 1] - 8.0);
            boundary += b;
            assert!((stored - (q[i - 1] - b)).abs() < 1e-10 * q[i - 1].abs().max(b.abs()));
        }
        assert_relative_eq!(out, boundary, max_relative = 1e-12);
        for j in 1..=ns {
            assert!(s.soil_conductance(1, j) > s.soil_conductance(2, j));
            assert!(s.soil_conductance(4, j) > s.soil_conductance(3, j));
        }
        let iso = vec![8.0; 12];
        s.shell_soil_rhs(&[8.0; 4], &iso, 8.0, &mut q, &mut d);
        assert!(d.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn closed_storage_at_rest() {
        let s = storage(3);
        let lay = s.layout();
        let state = vec![3.5; lay.len()];
        let mut d = vec![1.0; lay.len()];
        let mut scratch = StorageScratch::new(3);
        let idle = StringFlow { inlet: 3.5, mass_flow: 0.0 };
        let b = s.rhs(&state, idle, idle, 3.5, &mut d, &mut scratch);
        assert!(d.iter().all(|&x| x == 0.0));
        assert_eq!(b.to_boundary, 0.0);
    }
}
