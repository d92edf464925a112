//! Scenario file schema (TOML) and its validation.
//!
//! Loading reports every problem at once, each with the path of the
//! offending field, e.g. `network.runs[2].half_spacing`.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::integrator::IntegratorConfig;
use crate::error::{Error, ParamError, Result, ValidationErrors};
use crate::geometry::{soil_layer_profile, PipeGeometry};
use crate::ground::{BoundaryClimate, BoundaryCoupling};
use crate::hydraulics::{Mode, SetpointEntry, StationParams, ValveControl};
use crate::icestore::IceStorageParams;
use crate::pipe::WallMaterial;
use crate::props::{FluidProps, SoilProps, WaterConstants};
use crate::units::{Celsius, Seconds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    pub fluid: FluidConfig,
    #[serde(default)]
    pub water: WaterConstants,
    pub soil: SoilProps,
    pub climate: ClimateConfig,
    #[serde(default)]
    pub ground: GroundConfig,
    pub pipe_material: WallMaterial,
    pub network: NetworkConfig,
    #[serde(default)]
    pub station: StationParamsDefault,
    pub consumers: Vec<ConsumerConfig>,
    pub storage: IceStorageParams,
    /// Soil around the storage; defaults to `soil`.
    #[serde(default)]
    pub storage_soil: Option<SoilProps>,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub pump: PumpConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    /// Explicit consumer-to-series bindings. Consumers without a binding
    /// read the series named like their id.
    #[serde(default)]
    pub bindings: Vec<BindingConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    /// Seconds since January 1 at the start of the run.
    pub start: Seconds,
    pub duration: Seconds,
    /// Interval of the rows written to the trajectory; a multiple of the
    /// output interval. Defaults to the output interval.
    pub record_interval: Option<Seconds>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            start: 0.0,
            duration: 86_400.0,
            record_interval: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidConfig {
    pub density: f64,
    pub specific_heat: f64,
    /// `[temperature °C, viscosity Pa·s]` pairs, increasing in temperature.
    pub viscosity: Vec<[f64; 2]>,
}

impl FluidConfig {
    pub fn build(&self) -> std::result::Result<FluidProps, ParamError> {
        FluidProps::new(
            self.density,
            self.specific_heat,
            self.viscosity.iter().map(|p| (p[0], p[1])).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClimateConfig {
    pub t_min: Celsius,
    pub t_max: Celsius,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundConfig {
    pub coupling: BoundaryCoupling,
    pub outer_adjacent_distance: Option<f64>,
    pub supply_return_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default = "default_root")]
    pub root: String,
    pub runs: Vec<RunConfig>,
}

fn default_root() -> String {
    "plant".to_string()
}

/// A supply/return pipe pair laid in one trench from `from` to `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length: f64,
    #[serde(default = "default_segment_length")]
    pub segment_length: f64,
    pub inner_radius: f64,
    pub wall_thickness: f64,
    pub soil_layers: usize,
    pub soil_layer_thickness: f64,
    /// Half the center distance between the supply and return pipe.
    pub half_spacing: f64,
}

fn default_segment_length() -> f64 {
    25.0
}

impl RunConfig {
    pub fn segments(&self) -> usize {
        ((self.length / self.segment_length) - 1e-9).ceil().max(1.0) as usize
    }

    /// Geometry of one segment.
    pub fn segment_geometry(&self) -> PipeGeometry {
        PipeGeometry {
            inner_radius: self.inner_radius,
            wall_thickness: self.wall_thickness,
            length: self.length / self.segments() as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationParamsDefault {
    pub mass: f64,
    pub spread: f64,
}

impl Default for StationParamsDefault {
    fn default() -> Self {
        Self {
            mass: 100.0,
            spread: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsumerConfig {
    /// Also the name of the network node the station sits at.
    pub id: String,
    #[serde(default)]
    pub mass: Option<f64>,
    #[serde(default)]
    pub spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingConfig {
    pub consumer: String,
    pub series: String,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub kp: f64,
    pub ki: f64,
    pub initial_position: f64,
    pub schedule: Vec<SetpointEntry>,
    pub overrides: Vec<OverrideEntry>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            kp: 0.05,
            ki: 1e-4,
            initial_position: 0.0,
            schedule: vec![
                SetpointEntry { day: 0.0, setpoint: 4.0, mode: Mode::Heating },
                SetpointEntry { day: 120.0, setpoint: 16.0, mode: Mode::Regeneration },
                SetpointEntry { day: 270.0, setpoint: 4.0, mode: Mode::Heating },
            ],
            overrides: Vec::new(),
        }
    }
}

impl ControlConfig {
    pub fn build(&self) -> std::result::Result<ValveControl, ParamError> {
        ValveControl::new(
            self.initial_position,
            self.kp,
            self.ki,
            self.schedule.clone(),
            self.overrides.iter().map(|o| (o.time_s, o.y)).collect(),
        )
    }
}

/// Manual valve position from elapsed `time_s` on; an entry without `y` hands
/// control back to the PI loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideEntry {
    pub time_s: Seconds,
    #[serde(default)]
    pub y: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpConfig {
    pub efficiency: f64,
    /// Fixed network flow in kg/s instead of the demand-driven sum.
    pub constant_flow: Option<f64>,
}

impl Default for PumpConfig {
    fn default() -> Self {
        Self {
            efficiency: 0.5,
            constant_flow: None,
        }
    }
}

/// Initial temperatures. Unset values start at the boundary temperature.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    /// Pipe fluid, pipe walls and stations.
    pub network: Option<Celsius>,
    pub storage_water: Option<Celsius>,
    /// Defaults to the storage water temperature.
    pub storage_concrete: Option<Celsius>,
    /// Per-layer soil temperatures around the pipes, innermost first.
    pub soil: Option<Vec<Celsius>>,
}

fn check_positive(errs: &mut Vec<ParamError>, path: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errs.push(ParamError::new(path, "must be finite and > 0"));
    }
}

fn nest(errs: &mut Vec<ParamError>, parent: &str, inner: impl IntoIterator<Item = ParamError>) {
    errs.extend(inner.into_iter().map(|e| e.within(parent)));
}

impl Scenario {
    pub fn climate(&self) -> BoundaryClimate {
        BoundaryClimate {
            t_min: self.climate.t_min,
            t_max: self.climate.t_max,
            t0_s: self.simulation.start,
        }
    }

    pub fn storage_soil(&self) -> SoilProps {
        self.storage_soil.unwrap_or(self.soil)
    }

    pub fn station_params(&self, consumer: &ConsumerConfig) -> StationParams {
        StationParams {
            mass: consumer.mass.unwrap_or(self.station.mass),
            spread: consumer.spread.unwrap_or(self.station.spread),
        }
    }

    /// Series name and scale per consumer, in consumer order.
    pub fn series_bindings(&self) -> Vec<(String, f64)> {
        let explicit: HashMap<&str, &BindingConfig> =
            self.bindings.iter().map(|b| (b.consumer.as_str(), b)).collect();
        self.consumers
            .iter()
            .map(|c| match explicit.get(c.id.as_str()) {
                Some(b) => (b.series.clone(), b.scale),
                None => (c.id.clone(), 1.0),
            })
            .collect()
    }

    /// Record interval of the trajectory rows.
    pub fn record_interval(&self) -> Seconds {
        self.simulation
            .record_interval
            .unwrap_or(self.integrator.output_interval)
    }

    /// Every problem with the scenario, each carrying its field path.
    pub fn validate(&self) -> Vec<ParamError> {
        let mut errs = Vec::new();

        if !(self.simulation.duration >= 0.0 && self.simulation.duration.is_finite()) {
            errs.push(ParamError::new("simulation.duration", "must be finite and >= 0"));
        }
        if !self.simulation.start.is_finite() {
            errs.push(ParamError::new("simulation.start", "must be finite"));
        }
        if let Some(r) = self.simulation.record_interval {
            let k = r / self.integrator.output_interval;
            if !(r > 0.0) || (k - k.round()).abs() > 1e-9 {
                errs.push(ParamError::new(
                    "simulation.record_interval",
                    "must be a positive multiple of integrator.output_interval",
                ));
            }
        }
        nest(&mut errs, "integrator", self.integrator.validate());
        if let Err(e) = self.fluid.build() {
            errs.push(e.within("fluid"));
        }
        if let Err(e) = self.water.validate() {
            errs.push(e.within("water"));
        }
        if let Err(e) = self.soil.validate() {
            errs.push(e.within("soil"));
        }
        if let Some(s) = &self.storage_soil {
            if let Err(e) = s.validate() {
                errs.push(e.within("storage_soil"));
            }
        }
        if !(self.climate.t_max >= self.climate.t_min) {
            errs.push(ParamError::new("climate.t_max", "must be >= climate.t_min"));
        }
        if let Some(d) = self.ground.outer_adjacent_distance {
            check_positive(&mut errs, "ground.outer_adjacent_distance", d);
        }
        if let Some(d) = self.ground.supply_return_distance {
            check_positive(&mut errs, "ground.supply_return_distance", d);
        }
        nest(&mut errs, "pipe_material", self.pipe_material.validate());
        check_positive(&mut errs, "station.mass", self.station.mass);
        check_positive(&mut errs, "station.spread", self.station.spread);
        nest(&mut errs, "storage", self.storage.validate());
        if let Err(e) = self.control.build() {
            errs.push(e.within("control"));
        }
        if !(self.pump.efficiency > 0.0 && self.pump.efficiency <= 1.0) {
            errs.push(ParamError::new("pump.efficiency", "must lie in (0, 1]"));
        }
        if let Some(f) = self.pump.constant_flow {
            if !(f >= 0.0 && f.is_finite()) {
                errs.push(ParamError::new("pump.constant_flow", "must be finite and >= 0"));
            }
        }
        self.validate_network(&mut errs);
        self.validate_consumers(&mut errs);
        if let Some(soil) = &self.initial.soil {
            let layers: BTreeSet<usize> = self.network.runs.iter().map(|r| r.soil_layers).collect();
            if layers.len() > 1 || layers.iter().next().is_some_and(|&n| n != soil.len()) {
                errs.push(ParamError::new(
                    "initial.soil",
                    "needs one value per soil layer and all runs with the same soil_layers",
                ));
            }
        }
        errs
    }

    fn validate_network(&self, errs: &mut Vec<ParamError>) {
        let mut ids = BTreeSet::new();
        let mut fed: HashMap<&str, usize> = HashMap::new();
        if self.network.runs.is_empty() {
            errs.push(ParamError::new("network.runs", "must not be empty"));
        }
        for (k, run) in self.network.runs.iter().enumerate() {
            let path = format!("network.runs[{k}]");
            if !valid_name(&run.id) {
                errs.push(ParamError::new(format!("{path}.id"), "must be non-empty [A-Za-z0-9_-]"));
            }
            if !ids.insert(run.id.as_str()) {
                errs.push(ParamError::new(format!("{path}.id"), format!("duplicate run id `{}`", run.id)));
            }
            if run.to == self.network.root {
                errs.push(ParamError::new(format!("{path}.to"), "the root node cannot be fed by a run"));
            }
            if let Some(prev) = fed.insert(run.to.as_str(), k) {
                errs.push(ParamError::new(
                    format!("{path}.to"),
                    format!("node `{}` is already fed by network.runs[{prev}]", run.to),
                ));
            }
            check_positive(errs, &format!("{path}.length"), run.length);
            check_positive(errs, &format!("{path}.segment_length"), run.segment_length);
            if run.soil_layers == 0 {
                errs.push(ParamError::new(format!("{path}.soil_layers"), "must be >= 1"));
            }
            let before = errs.len();
            check_positive(errs, &format!("{path}.inner_radius"), run.inner_radius);
            check_positive(errs, &format!("{path}.wall_thickness"), run.wall_thickness);
            check_positive(errs, &format!("{path}.soil_layer_thickness"), run.soil_layer_thickness);
            check_positive(errs, &format!("{path}.half_spacing"), run.half_spacing);
            if errs.len() == before && run.soil_layers > 0 {
                let g = run.segment_geometry();
                if let Err(e) = soil_layer_profile(&g, run.soil_layers, run.soil_layer_thickness, run.half_spacing) {
                    errs.push(ParamError::new(format!("{path}.half_spacing"), e.message));
                }
            }
        }
        if errs.iter().any(|e| e.field.starts_with("network")) {
            return;
        }
        if let Err(e) = self.node_tree() {
            errs.push(e);
        }
    }

    fn validate_consumers(&self, errs: &mut Vec<ParamError>) {
        if self.consumers.is_empty() {
            errs.push(ParamError::new("consumers", "at least one consumer is required"));
        }
        let nodes: BTreeSet<&str> = self.network.runs.iter().map(|r| r.to.as_str()).collect();
        let mut seen = BTreeSet::new();
        for (k, c) in self.consumers.iter().enumerate() {
            let path = format!("consumers[{k}]");
            if !seen.insert(c.id.as_str()) {
                errs.push(ParamError::new(format!("{path}.id"), format!("duplicate consumer `{}`", c.id)));
            }
            if !nodes.contains(c.id.as_str()) {
                errs.push(ParamError::new(
                    format!("{path}.id"),
                    format!("consumer `{}` is not connected to any network run", c.id),
                ));
            }
            if let Some(m) = c.mass {
                check_positive(errs, &format!("{path}.mass"), m);
            }
            if let Some(s) = c.spread {
                check_positive(errs, &format!("{path}.spread"), s);
            }
        }
        // every dead end needs a station, otherwise its pipe never carries flow
        let parents: BTreeSet<&str> = self.network.runs.iter().map(|r| r.from.as_str()).collect();
        for (k, run) in self.network.runs.iter().enumerate() {
            if !parents.contains(run.to.as_str()) && !seen.contains(run.to.as_str()) {
                errs.push(ParamError::new(
                    format!("network.runs[{k}].to"),
                    format!("dead-end node `{}` has no consumer", run.to),
                ));
            }
        }
        let mut bound = BTreeSet::new();
        for (k, b) in self.bindings.iter().enumerate() {
            let path = format!("bindings[{k}]");
            if !seen.contains(b.consumer.as_str()) {
                errs.push(ParamError::new(
                    format!("{path}.consumer"),
                    format!("unknown consumer `{}`", b.consumer),
                ));
            }
            if !bound.insert(b.consumer.as_str()) {
                errs.push(ParamError::new(format!("{path}.consumer"), "consumer bound twice"));
            }
            if b.series.is_empty() {
                errs.push(ParamError::new(format!("{path}.series"), "must not be empty"));
            }
            if !b.scale.is_finite() {
                errs.push(ParamError::new(format!("{path}.scale"), "must be finite"));
            }
        }
    }

    /// Node tree derived from the runs. Fails on cycles and on runs hanging
    /// off unknown nodes.
    pub fn node_tree(&self) -> std::result::Result<NodeTree, ParamError> {
        let mut names = vec![self.network.root.clone()];
        let mut index: HashMap<&str, usize> = HashMap::new();
        index.insert(self.network.root.as_str(), 0);
        for run in &self.network.runs {
            if !index.contains_key(run.to.as_str()) {
                index.insert(run.to.as_str(), names.len());
                names.push(run.to.clone());
            }
        }
        let mut parent = vec![None; names.len()];
        let mut feeding_run = vec![None; names.len()];
        for (k, run) in self.network.runs.iter().enumerate() {
            let Some(&p) = index.get(run.from.as_str()) else {
                return Err(ParamError::new(
                    format!("network.runs[{k}].from"),
                    format!("unknown node `{}`", run.from),
                ));
            };
            let c = index[run.to.as_str()];
            parent[c] = Some(p);
            feeding_run[c] = Some(k);
        }
        crate::hydraulics::FlowTree::new(parent.clone()).map_err(|e| e.within("network"))?;
        Ok(NodeTree {
            names,
            parent,
            feeding_run,
        })
    }
}

/// Network nodes indexed root first.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTree {
    pub names: Vec<String>,
    pub parent: Vec<Option<usize>>,
    /// Index into `network.runs` of the run ending at each node.
    pub feeding_run: Vec<Option<usize>>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// A scenario read from disk, with the directory used to resolve relative
/// paths.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub path: PathBuf,
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    let de = toml::Deserializer::new(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.message().to_string();
        Error::Parse {
            path: origin.to_string(),
            message: if path.is_empty() || path == "." {
                message
            } else {
                format!("{path}: {message}")
            },
        }
    })?;
    let errs = scenario.validate();
    if errs.is_empty() {
        Ok(scenario)
    } else {
        Err(ValidationErrors(errs).into())
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<LoadedScenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let scenario = parse_scenario(&text, &path.display().to_string())?;
    Ok(LoadedScenario {
        scenario,
        path: path.to_path_buf(),
    })
}
