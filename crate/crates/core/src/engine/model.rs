//! The coupled network model: pipe runs with their soil columns, transfer
//! stations, the mixing valve and the ice storage, flattened into one state
//! vector.
//!
//! Flow is directed: supply from the plant (tree root) to the consumers,
//! return back to the plant, through the storage's active coil string and
//! the bypass.

use log::warn;

use crate::engine::integrator::OdeSystem;
use crate::engine::layout::StateLayout;
use crate::error::{Error, ParamError, Result, ValidationErrors};
use crate::geometry::soil_layer_profile;
use crate::ground::{boundary_temperature, column_index, soil_rhs, split_pipe_heat, BoundaryClimate, Region, SoilColumn};
use crate::hydraulics::{
    mixing_valve, pump_power, route_in_place, station_mass_flow, station_rhs, FlowTree, Mode, StationParams,
};
use crate::icestore::{CoilString, IceStorage, StorageScratch, StringFlow};
use crate::pipe::{pipe_rhs, pipe_soil_conductance, pressure_drop, PipeSegmentParams, PipeSegmentState};
use crate::props::FluidProps;
use crate::scenario::{DemandSeries, DemandSet, NodeTree, Scenario};
use crate::units::{Celsius, Conductance, MassFlow, Pascal, Seconds, Watts};

// offsets inside one segment block
const SUP_F: usize = 0;
const SUP_P: usize = 1;
const RET_F: usize = 2;
const RET_P: usize = 3;
const SOIL: usize = 4;

#[derive(Debug, Clone)]
pub struct RunModel {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub segments: usize,
    pub pipe: PipeSegmentParams,
    pub column: SoilColumn,
    pub pipe_soil: Conductance,
    offset: usize,
}

impl RunModel {
    fn block(&self) -> usize {
        SOIL + self.column.state_len()
    }

    /// First slot of segment `j` (0 = at the upstream node).
    pub fn segment_offset(&self, j: usize) -> usize {
        self.offset + j * self.block()
    }

    fn supply_outlet(&self, y: &[f64]) -> Celsius {
        y[self.segment_offset(self.segments - 1) + SUP_F]
    }

    fn return_outlet(&self, y: &[f64]) -> Celsius {
        y[self.segment_offset(0) + RET_F]
    }
}

#[derive(Debug, Clone)]
pub struct StationModel {
    pub id: String,
    pub node: usize,
    pub params: StationParams,
    pub slot: usize,
    /// Network convention: positive heat is injected into the network.
    pub demand: DemandSeries,
}

/// Controls held constant between controller samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeldControls {
    pub y: f64,
    pub mode: Mode,
}

/// Plant-level quantities of the last right-hand-side evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Observation {
    pub t_supply: Celsius,
    pub t_return: Celsius,
    pub t_water_mean: Celsius,
    pub valve_y: f64,
    pub network_flow: MassFlow,
    pub storage_flow: MassFlow,
    pub boundary: Celsius,
    /// Sum of all station heat injections.
    pub station_heat: Watts,
    /// Heat leaving through all soil boundaries.
    pub to_boundary: Watts,
    /// Heat the brine hands to the storage (enthalpy in minus out).
    pub storage_heat: Watts,
}

#[derive(Debug, Clone)]
pub struct Model {
    layout: StateLayout,
    fluid: FluidProps,
    cf: f64,
    climate: BoundaryClimate,
    tree: FlowTree,
    node_names: Vec<String>,
    node_run: Vec<Option<usize>>,
    node_station: Vec<Option<usize>>,
    runs: Vec<RunModel>,
    stations: Vec<StationModel>,
    storage: IceStorage,
    storage_offset: usize,
    scratch: StorageScratch,
    pub controls: HeldControls,
    constant_flow: Option<MassFlow>,
    pump_efficiency: f64,
    station_flow: Vec<MassFlow>,
    station_heat: Vec<Watts>,
    edge: Vec<MassFlow>,
    t_ret_node: Vec<Celsius>,
    t_sup_node: Vec<Celsius>,
    last: Observation,
    evaluations: u64,
}

impl Model {
    /// Builds the model and its initial state. Demand series are bound to
    /// consumers here; a binding to a missing series is a validation error.
    pub fn assemble(scenario: &Scenario, demands: &DemandSet) -> Result<(Self, Vec<f64>)> {
        let errs = scenario.validate();
        if !errs.is_empty() {
            return Err(ValidationErrors(errs).into());
        }
        let fluid = scenario.fluid.build()?;
        let cf = fluid.specific_heat();
        let climate = scenario.climate();
        let NodeTree {
            names: node_names,
            parent,
            feeding_run: node_run,
        } = scenario.node_tree()?;
        let tree = FlowTree::new(parent)?;

        let mut missing = Vec::new();
        let bound: Vec<DemandSeries> = scenario
            .series_bindings()
            .into_iter()
            .enumerate()
            .map(|(k, (name, scale))| match demands.get(&name) {
                Some(s) => s.scaled(scale),
                None => {
                    missing.push(ParamError::new(
                        format!("consumers[{k}]"),
                        format!("demand series `{name}` not found"),
                    ));
                    DemandSeries::default()
                }
            })
            .collect();
        if !missing.is_empty() {
            return Err(ValidationErrors(missing).into());
        }
        let known: std::collections::BTreeSet<String> =
            scenario.series_bindings().into_iter().map(|b| b.0).collect();
        for id in demands.series.keys().filter(|id| !known.contains(*id)) {
            warn!("demand series `{id}` is not bound to any consumer");
        }

        let t_b0 = boundary_temperature(&climate, 0.0);
        let t_net = scenario.initial.network.unwrap_or(t_b0);
        let t_water = scenario.initial.storage_water.unwrap_or(t_b0);
        let t_concrete = scenario.initial.storage_concrete.unwrap_or(t_water);

        let mut layout = StateLayout::new();
        let mut y0 = Vec::new();
        let mut runs = Vec::with_capacity(scenario.network.runs.len());
        let index_of = |name: &str| node_names.iter().position(|n| n == name).expect("validated node");
        for (r, cfg) in scenario.network.runs.iter().enumerate() {
            let geometry = cfg.segment_geometry();
            let pipe = PipeSegmentParams::new(geometry, scenario.pipe_material, &fluid);
            let profile = soil_layer_profile(&geometry, cfg.soil_layers, cfg.soil_layer_thickness, cfg.half_spacing)
                .map_err(|e| e.within(&format!("network.runs[{r}]")))?;
            let column = SoilColumn::new(
                profile,
                scenario.soil,
                scenario.water,
                scenario.ground.coupling,
                scenario.ground.outer_adjacent_distance,
                scenario.ground.supply_return_distance,
            );
            let pipe_soil = pipe_soil_conductance(&pipe, cfg.soil_layer_thickness, scenario.soil.conductivity);
            let run = RunModel {
                id: cfg.id.clone(),
                from: index_of(&cfg.from),
                to: index_of(&cfg.to),
                segments: cfg.segments(),
                pipe,
                column,
                pipe_soil,
                offset: layout.len(),
            };
            let n = cfg.soil_layers;
            for j in 0..run.segments {
                let seg = format!("pipe.{}.{j}", cfg.id);
                for side in ["sup", "ret"] {
                    layout.push(format!("{seg}.{side}.T_f"));
                    layout.push(format!("{seg}.{side}.T_p"));
                    y0.extend([t_net, t_net]);
                }
                for side in ["sup", "ret"] {
                    for region in ["o", "a"] {
                        for i in 1..=n {
                            layout.push(format!("soil.{}.{j}.{side}.{region}.{i}", cfg.id));
                            y0.push(match &scenario.initial.soil {
                                Some(v) => v[i - 1],
                                None => t_b0,
                            });
                        }
                    }
                }
            }
            debug_assert_eq!(layout.len(), run.offset + run.segments * run.block());
            runs.push(run);
        }

        let mut stations = Vec::with_capacity(scenario.consumers.len());
        for (c, demand) in scenario.consumers.iter().zip(bound) {
            let slot = layout.push(format!("station.{}.T_hhx", c.id));
            y0.push(t_net);
            stations.push(StationModel {
                id: c.id.clone(),
                node: index_of(&c.id),
                params: scenario.station_params(c),
                slot,
                demand,
            });
        }

        let storage = IceStorage::new(
            scenario.storage,
            scenario.storage_soil(),
            scenario.water,
            fluid.density(),
            cf,
        );
        let storage_offset = layout.len();
        let nw = scenario.storage.layers;
        for (prefix, t) in [("hx_ext", t_water), ("hx_reg", t_water), ("w", t_water), ("c", t_concrete)] {
            for i in 1..=nw {
                layout.push(format!("storage.{prefix}.{i}"));
                y0.push(t);
            }
        }
        for i in 1..=nw {
            for j in 1..=scenario.storage.soil_layers {
                layout.push(format!("storage.s.{i}.{j}"));
                y0.push(t_b0);
            }
        }
        debug_assert_eq!(layout.len() - storage_offset, storage.layout().len());

        let controller = scenario.control.build()?.with_start(scenario.simulation.start);
        let n_nodes = node_names.len();
        let mut node_station = vec![None; n_nodes];
        for (k, st) in stations.iter().enumerate() {
            node_station[st.node] = Some(k);
        }
        let model = Self {
            layout,
            fluid,
            cf,
            climate,
            tree,
            node_names,
            node_run,
            node_station,
            runs,
            stations,
            scratch: StorageScratch::new(nw),
            storage,
            storage_offset,
            controls: HeldControls {
                y: controller.y,
                mode: controller.mode(),
            },
            constant_flow: scenario.pump.constant_flow,
            pump_efficiency: scenario.pump.efficiency,
            station_flow: vec![0.0; scenario.consumers.len()],
            station_heat: vec![0.0; scenario.consumers.len()],
            edge: vec![0.0; n_nodes],
            t_ret_node: vec![0.0; n_nodes],
            t_sup_node: vec![0.0; n_nodes],
            last: Observation::default(),
            evaluations: 0,
        };
        Ok((model, y0))
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn runs(&self) -> &[RunModel] {
        &self.runs
    }

    pub fn stations(&self) -> &[StationModel] {
        &self.stations
    }

    pub fn storage(&self) -> &IceStorage {
        &self.storage
    }

    pub fn storage_offset(&self) -> usize {
        self.storage_offset
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn climate(&self) -> &BoundaryClimate {
        &self.climate
    }

    /// Plant quantities of the most recent evaluation.
    pub fn last_observation(&self) -> Observation {
        self.last
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Replaces the demand of station `k` (network convention).
    pub fn set_demand(&mut self, k: usize, demand: DemandSeries) {
        self.stations[k].demand = demand;
    }

    /// Mean storage water temperature of a state vector.
    pub fn water_mean(&self, y: &[f64]) -> Celsius {
        let w = &y[self.storage_offset..][self.storage.layout().water()];
        w.iter().sum::<f64>() / w.len() as f64
    }

    fn station_flows(&mut self, t: Seconds) {
        for (k, st) in self.stations.iter().enumerate() {
            let q = st.demand.sample(t);
            self.station_heat[k] = q;
            self.station_flow[k] = station_mass_flow(&st.params, self.cf, q);
        }
        if let Some(total) = self.constant_flow {
            let sum: f64 = self.station_flow.iter().sum();
            let n = self.station_flow.len() as f64;
            for m in &mut self.station_flow {
                *m = if sum > 0.0 { *m * total / sum } else { total / n };
            }
        }
    }

    /// The full right-hand side; also updates [`Self::last_observation`].
    fn evaluate(&mut self, t: Seconds, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self.evaluations += 1;
        let tb = boundary_temperature(&self.climate, t);
        self.station_flows(t);

        self.edge.iter_mut().for_each(|m| *m = 0.0);
        for (k, st) in self.stations.iter().enumerate() {
            self.edge[st.node] += self.station_flow[k];
        }
        let m_n = route_in_place(&self.tree, &mut self.edge);

        // return temperatures arriving at each node, leaves first
        for &node in self.tree.order().iter().rev() {
            let (mut m_sum, mut mt_sum, mut t_sum, mut count) = (0.0, 0.0, 0.0, 0usize);
            if let Some(k) = self.node_station[node] {
                let t_hhx = y[self.stations[k].slot];
                m_sum += self.station_flow[k];
                mt_sum += self.station_flow[k] * t_hhx;
                t_sum += t_hhx;
                count += 1;
            }
            for &c in self.tree.children(node) {
                let run = &self.runs[self.node_run[c].expect("non-root node has a run")];
                let t_out = run.return_outlet(y);
                m_sum += self.edge[c];
                mt_sum += self.edge[c] * t_out;
                t_sum += t_out;
                count += 1;
            }
            // without flow the mixed value is never advected; keep it finite
            self.t_ret_node[node] = if m_sum > 0.0 { mt_sum / m_sum } else { t_sum / count.max(1) as f64 };
        }
        let root = self.tree.root();
        let t_ret = self.t_ret_node[root];

        let slay = self.storage.layout();
        let so = self.storage_offset;
        let storage_flow = self.controls.y * m_n;
        let active = match self.controls.mode {
            Mode::Heating => CoilString::Extraction,
            Mode::Regeneration => CoilString::Regeneration,
        };
        let on = StringFlow {
            inlet: t_ret,
            mass_flow: storage_flow,
        };
        let off = StringFlow {
            inlet: t_ret,
            mass_flow: 0.0,
        };
        let (ext, reg) = match active {
            CoilString::Extraction => (on, off),
            CoilString::Regeneration => (off, on),
        };
        let balance = self.storage.rhs(
            &y[so..so + slay.len()],
            ext,
            reg,
            tb,
            &mut dy[so..so + slay.len()],
            &mut self.scratch,
        );
        let t_out = self.storage.outlet(&y[so..][slay.coil(active)]);
        let mix = mixing_valve(self.controls.y, m_n, t_out, t_ret);

        self.t_sup_node[root] = mix.supply_temperature;
        for run in &self.runs {
            self.t_sup_node[run.to] = run.supply_outlet(y);
        }

        let mut to_boundary = balance.to_boundary;
        for run in &self.runs {
            let m = self.edge[run.to];
            let col = &run.column;
            let n = col.layers();
            for j in 0..run.segments {
                let base = run.segment_offset(j);
                let sup = PipeSegmentState {
                    fluid: y[base + SUP_F],
                    wall: y[base + SUP_P],
                };
                let ret = PipeSegmentState {
                    fluid: y[base + RET_F],
                    wall: y[base + RET_P],
                };
                let soil = &y[base + SOIL..base + SOIL + col.state_len()];
                let sup_in = if j == 0 {
                    self.t_sup_node[run.from]
                } else {
                    y[run.segment_offset(j - 1) + SUP_F]
                };
                let ret_in = if j + 1 == run.segments {
                    self.t_ret_node[run.to]
                } else {
                    y[run.segment_offset(j + 1) + RET_F]
                };
                let heat_sup = split_pipe_heat(
                    col,
                    run.pipe_soil,
                    sup.wall,
                    soil[column_index(n, true, Region::Outer, 1)],
                    soil[column_index(n, true, Region::Adjacent, 1)],
                );
                let heat_ret = split_pipe_heat(
                    col,
                    run.pipe_soil,
                    ret.wall,
                    soil[column_index(n, false, Region::Outer, 1)],
                    soil[column_index(n, false, Region::Adjacent, 1)],
                );
                let (df, dp) = pipe_rhs(&run.pipe, sup, sup_in, m, heat_sup.total());
                dy[base + SUP_F] = df;
                dy[base + SUP_P] = dp;
                let (df, dp) = pipe_rhs(&run.pipe, ret, ret_in, m, heat_ret.total());
                dy[base + RET_F] = df;
                dy[base + RET_P] = dp;
                let cb = soil_rhs(
                    col,
                    soil,
                    [heat_sup, heat_ret],
                    tb,
                    &mut dy[base + SOIL..base + SOIL + col.state_len()],
                );
                to_boundary += cb.to_boundary;
            }
        }

        for (k, st) in self.stations.iter().enumerate() {
            dy[st.slot] = station_rhs(
                &st.params,
                self.cf,
                y[st.slot],
                self.t_sup_node[st.node],
                self.station_flow[k],
                self.station_heat[k],
            );
        }

        if let Some(k) = dy.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                slot: self.layout.name(k).to_string(),
                t,
            });
        }

        self.last = Observation {
            t_supply: mix.supply_temperature,
            t_return: t_ret,
            t_water_mean: self.water_mean(y),
            valve_y: self.controls.y,
            network_flow: m_n,
            storage_flow,
            boundary: tb,
            station_heat: self.station_heat.iter().sum(),
            to_boundary,
            storage_heat: balance.advected_in,
        };
        Ok(())
    }

    /// Heat capacity (J/K) of every slot at state `y`.
    pub fn capacities(&self, y: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; y.len()];
        for run in &self.runs {
            let col = &run.column;
            let n = col.layers();
            for j in 0..run.segments {
                let base = run.segment_offset(j);
                c[base + SUP_F] = run.pipe.fluid_capacity();
                c[base + RET_F] = run.pipe.fluid_capacity();
                c[base + SUP_P] = run.pipe.wall_capacity();
                c[base + RET_P] = run.pipe.wall_capacity();
                for supply in [true, false] {
                    for region in [Region::Outer, Region::Adjacent] {
                        for i in 1..=n {
                            let k = base + SOIL + column_index(n, supply, region, i);
                            c[k] = col.capacity(region, i, y[k]);
                        }
                    }
                }
            }
        }
        for st in &self.stations {
            c[st.slot] = st.params.mass * self.cf;
        }
        let so = self.storage_offset;
        let len = self.storage.layout().len();
        self.storage.capacities(&y[so..so + len], &mut c[so..so + len]);
        c
    }

    /// `(Σ C·dT/dt, station injections − boundary losses)` at `(t, y)`;
    /// the two agree when every internal flow telescopes.
    pub fn energy_audit(&mut self, t: Seconds, y: &[f64]) -> Result<(Watts, Watts)> {
        let mut dy = vec![0.0; y.len()];
        self.evaluate(t, y, &mut dy)?;
        let stored: f64 = self.capacities(y).iter().zip(&dy).map(|(c, d)| c * d).sum();
        let obs = self.last;
        Ok((stored, obs.station_heat - obs.to_boundary))
    }

    /// Pressure loss along the most demanding consumer path (supply and
    /// return), with viscosities at the segment fluid temperatures.
    pub fn network_pressure_drop(&self, y: &[f64]) -> Pascal {
        let rho = self.fluid.density();
        let mut path = vec![0.0; self.edge.len()];
        let mut worst: f64 = 0.0;
        for &node in self.tree.order() {
            let Some(r) = self.node_run[node] else { continue };
            let run = &self.runs[r];
            let m = self.edge[node];
            let g = run.pipe.geometry;
            let mut dp = 0.0;
            for j in 0..run.segments {
                let base = run.segment_offset(j);
                for f in [SUP_F, RET_F] {
                    dp += pressure_drop(&g, rho, self.fluid.viscosity(y[base + f]), m).delta_p;
                }
            }
            path[node] = path[run.from] + dp;
        }
        for (k, st) in self.stations.iter().enumerate() {
            if self.station_flow[k] > 0.0 {
                worst = worst.max(path[st.node]);
            }
        }
        worst
    }

    /// Evaluates the model at `(t, y)` and returns the plant quantities
    /// together with the pump power.
    pub fn observe(&mut self, t: Seconds, y: &[f64]) -> Result<(Observation, Watts)> {
        let mut dy = vec![0.0; y.len()];
        self.evaluate(t, y, &mut dy)?;
        let dp = self.network_pressure_drop(y);
        let p = pump_power(dp, self.last.network_flow, self.fluid.density(), self.pump_efficiency)?;
        Ok((self.last, p))
    }

    /// Smallest local time constant `C/G` estimated from the Jacobian
    /// diagonal at `(t, y)`, with the slot it belongs to.
    pub fn stiffest_slot(&mut self, t: Seconds, y: &[f64]) -> Result<Option<(String, Seconds)>> {
        let n = y.len();
        let mut base = vec![0.0; n];
        self.evaluate(t, y, &mut base)?;
        let mut probe = y.to_vec();
        let mut dy = vec![0.0; n];
        let mut best: Option<(usize, f64)> = None;
        for k in 0..n {
            let h = 1e-4 * y[k].abs().max(1.0);
            probe[k] = y[k] + h;
            self.evaluate(t, &probe, &mut dy)?;
            probe[k] = y[k];
            let jkk = (dy[k] - base[k]) / h;
            if jkk < 0.0 {
                let tau = -1.0 / jkk;
                if best.is_none_or(|(_, b)| tau < b) {
                    best = Some((k, tau));
                }
            }
        }
        // restore the observation of the unperturbed state
        self.evaluate(t, y, &mut dy)?;
        Ok(best.map(|(k, tau)| (self.layout.name(k).to_string(), tau)))
    }
}

impl OdeSystem for Model {
    fn len(&self) -> usize {
        self.layout.len()
    }

    fn rhs(&mut self, t: Seconds, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self.evaluate(t, y, dy)
    }

    fn slot_name(&self, k: usize) -> String {
        self.layout.name(k).to_string()
    }
}
