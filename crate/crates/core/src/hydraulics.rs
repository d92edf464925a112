//! Transfer stations, the storage mixing valve with its PI controller, pump
//! power and mass-flow routing over the network tree.

use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::units::{Celsius, MassFlow, Pascal, Seconds, Watts};

/// Primary side of a building transfer station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationParams {
    /// Fluid mass on the network side of the heat exchanger, kg.
    pub mass: f64,
    /// Design temperature spread, K.
    pub spread: f64,
}

impl StationParams {
    pub fn validate(&self) -> Vec<ParamError> {
        let mut errs = Vec::new();
        if !(self.mass > 0.0) {
            errs.push(ParamError::new("mass", "must be > 0"));
        }
        if !(self.spread > 0.0) {
            errs.push(ParamError::new("spread", "must be > 0"));
        }
        errs
    }
}

/// `dT_hhx/dt`. Positive `heat` is injected into the network fluid.
pub fn station_rhs(
    params: &StationParams,
    specific_heat: f64,
    t_hhx: Celsius,
    t_in: Celsius,
    mass_flow: MassFlow,
    heat: Watts,
) -> f64 {
    (mass_flow * specific_heat * (t_in - t_hhx) + heat) / (params.mass * specific_heat)
}

pub fn station_mass_flow(params: &StationParams, specific_heat: f64, heat: Watts) -> MassFlow {
    heat.abs() / (specific_heat * params.spread)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValveMix {
    pub storage_flow: MassFlow,
    pub bypass_flow: MassFlow,
    pub supply_temperature: Celsius,
}

/// Splits the network flow at the mixing valve and mixes the storage outlet
/// with the bypass.
pub fn mixing_valve(y: f64, network_flow: MassFlow, t_storage_out: Celsius, t_bypass: Celsius) -> ValveMix {
    let storage_flow = y * network_flow;
    let bypass_flow = network_flow - storage_flow;
    let supply_temperature = if network_flow > 0.0 {
        let t = (storage_flow * t_storage_out + bypass_flow * t_bypass) / network_flow;
        // guard against rounding outside the inlet range
        t.clamp(t_storage_out.min(t_bypass), t_storage_out.max(t_bypass))
    } else {
        t_bypass
    };
    ValveMix {
        storage_flow,
        bypass_flow,
        supply_temperature,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// The storage supplies heat; flow passes the extraction string.
    #[default]
    Heating,
    /// The storage absorbs heat; flow passes the regeneration string.
    Regeneration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetpointEntry {
    /// Day of year (0-based, fractional allowed) from which the entry applies.
    pub day: f64,
    pub setpoint: Celsius,
    #[serde(default)]
    pub mode: Mode,
}

const DAY: f64 = 86_400.0;
const YEAR_DAYS: f64 = 365.0;

/// Sampled-data PI controller of the valve position.
#[derive(Debug, Clone, PartialEq)]
pub struct ValveControl {
    pub y: f64,
    pub kp: f64,
    pub ki: f64,
    schedule: Vec<SetpointEntry>,
    /// Manual positions `(t, y)`; `None` hands control back to the PI loop.
    overrides: Vec<(Seconds, Option<f64>)>,
    mode: Mode,
    prev_error: Option<f64>,
    /// Seconds since January 1 at elapsed time zero.
    start: Seconds,
}

impl ValveControl {
    pub fn new(
        y0: f64,
        kp: f64,
        ki: f64,
        mut schedule: Vec<SetpointEntry>,
        overrides: Vec<(Seconds, Option<f64>)>,
    ) -> Result<Self, ParamError> {
        if schedule.is_empty() {
            return Err(ParamError::new("schedule", "must not be empty"));
        }
        if !(0.0..=1.0).contains(&y0) {
            return Err(ParamError::new("initial_position", "must lie in [0, 1]"));
        }
        if !(kp >= 0.0 && ki >= 0.0) {
            return Err(ParamError::new("kp", "gains must be >= 0"));
        }
        for (k, e) in schedule.iter().enumerate() {
            if !(0.0..YEAR_DAYS).contains(&e.day) {
                return Err(ParamError::new(format!("schedule[{k}].day"), "must lie in [0, 365)"));
            }
        }
        for (k, (_, y)) in overrides.iter().enumerate() {
            if let Some(y) = y {
                if !(0.0..=1.0).contains(y) {
                    return Err(ParamError::new(format!("overrides[{k}].y"), "must lie in [0, 1]"));
                }
            }
        }
        if overrides.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ParamError::new("overrides", "times must be strictly increasing"));
        }
        schedule.sort_by(|a, b| a.day.total_cmp(&b.day));
        let mode = schedule[0].mode;
        Ok(Self {
            y: y0,
            kp,
            ki,
            schedule,
            overrides,
            mode,
            prev_error: None,
            start: 0.0,
        })
    }

    /// Schedule entry active at absolute time `t` (seconds since Jan 1).
    /// Before the first entry of the year the last entry still applies.
    pub fn entry_at(&self, t: Seconds) -> SetpointEntry {
        let day = (t / DAY).rem_euclid(YEAR_DAYS);
        let k = self.schedule.partition_point(|e| e.day <= day);
        if k == 0 {
            self.schedule[self.schedule.len() - 1]
        } else {
            self.schedule[k - 1]
        }
    }

    /// Anchors elapsed time zero at `start` seconds since January 1.
    pub fn with_start(mut self, start: Seconds) -> Self {
        self.start = start;
        self.mode = self.entry_at(start).mode;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn manual(&self, t: Seconds) -> Option<f64> {
        let k = self.overrides.partition_point(|o| o.0 <= t);
        if k == 0 {
            None
        } else {
            self.overrides[k - 1].1
        }
    }

    /// One velocity-form step with the measured supply temperature at
    /// elapsed time `t`. Returns the new valve position.
    pub fn pi_step(&mut self, t_supply: Celsius, t: Seconds, dt: Seconds) -> f64 {
        let entry = self.entry_at(self.start + t);
        if entry.mode != self.mode {
            self.mode = entry.mode;
            self.prev_error = None;
        }
        if let Some(y) = self.manual(t) {
            self.y = y;
            self.prev_error = None;
            return y;
        }
        let e = match self.mode {
            Mode::Heating => entry.setpoint - t_supply,
            Mode::Regeneration => t_supply - entry.setpoint,
        };
        let prev = self.prev_error.unwrap_or(e);
        self.y = (self.y + self.kp * (e - prev) + self.ki * e * dt).clamp(0.0, 1.0);
        self.prev_error = Some(e);
        self.y
    }
}

pub fn pump_power(
    pressure_drop: Pascal,
    mass_flow: MassFlow,
    density: f64,
    efficiency: f64,
) -> Result<Watts, ParamError> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(ParamError::new("pump_efficiency", "must lie in (0, 1]"));
    }
    Ok(pressure_drop * mass_flow / (density * efficiency))
}

/// Rooted tree of network nodes. Node `k` is fed by `parent[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowTree {
    parent: Vec<Option<usize>>,
    root: usize,
    /// Parents before children.
    order: Vec<usize>,
    children: Vec<Vec<usize>>,
}

impl FlowTree {
    pub fn new(parent: Vec<Option<usize>>) -> Result<Self, ParamError> {
        let n = parent.len();
        let roots: Vec<usize> = (0..n).filter(|&k| parent[k].is_none()).collect();
        if roots.len() != 1 {
            return Err(ParamError::new(
                "network",
                format!("expected exactly one root node, found {}", roots.len()),
            ));
        }
        let mut children = vec![Vec::new(); n];
        for (k, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n {
                    return Err(ParamError::new("network", format!("node {k} has unknown parent {p}")));
                }
                children[p].push(k);
            }
        }
        let root = roots[0];
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![root];
        while let Some(k) = stack.pop() {
            order.push(k);
            stack.extend(children[k].iter().rev());
        }
        if order.len() != n {
            return Err(ParamError::new("network", "topology contains a cycle or a disconnected node"));
        }
        Ok(Self {
            parent,
            root,
            order,
            children,
        })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, k: usize) -> Option<usize> {
        self.parent[k]
    }

    pub fn children(&self, k: usize) -> &[usize] {
        &self.children[k]
    }

    /// Depth-first order, parents first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutedFlows {
    /// Flow on the edge feeding node `k` (subtree sum); the root entry is `ṁ_n`.
    pub edge: Vec<MassFlow>,
    pub total: MassFlow,
}

/// Each edge carries the sum of all station flows downstream of it.
pub fn route_mass_flows(tree: &FlowTree, station_flow: &[MassFlow]) -> RoutedFlows {
    let mut edge = station_flow.to_vec();
    let total = route_in_place(tree, &mut edge);
    RoutedFlows { edge, total }
}

/// Allocation-free form of [`route_mass_flows`]: `flow` holds the local
/// station draws on entry and the edge flows on return. Returns `ṁ_n`.
pub fn route_in_place(tree: &FlowTree, flow: &mut [MassFlow]) -> MassFlow {
    for &k in tree.order.iter().rev() {
        if let Some(p) = tree.parent[k] {
            flow[p] += flow[k];
        }
    }
    flow[tree.root]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn station() -> StationParams {
        StationParams { mass: 10.0, spread: 2.0 }
    }

    #[test]
    fn station_examples() {
        let p = station();
        assert_eq!(station_rhs(&p, 4182.0, 3.0, 3.0, 0.4, 0.0), 0.0);
        assert_relative_eq!(station_rhs(&p, 4182.0, 3.0, 9.0, 0.0, 418.2), 0.01, max_relative = 1e-12);
        let a = station_rhs(&p, 4182.0, 3.0, 5.0, 0.2, 1000.0);
        let b = station_rhs(&p, 4182.0, 3.0, 5.0, 0.2, 3000.0);
        let c = station_rhs(&p, 4182.0, 3.0, 5.0, 0.2, 2000.0);
        assert_relative_eq!(c, 0.5 * (a + b), max_relative = 1e-12);
        assert_eq!(station_mass_flow(&p, 4182.0, 0.0), 0.0);
        assert_relative_eq!(station_mass_flow(&p, 4182.0, 4182.0), 0.5);
        assert_eq!(station_mass_flow(&p, 4182.0, -4182.0), station_mass_flow(&p, 4182.0, 4182.0));
    }

    #[test]
    fn valve_examples() {
        let full = mixing_valve(1.0, 2.0, 4.0, 0.0);
        assert_eq!(full.bypass_flow, 0.0);
        assert_eq!(full.supply_temperature, 4.0);
        let none = mixing_valve(0.0, 2.0, 4.0, 0.0);
        assert_eq!(none.storage_flow, 0.0);
        assert_eq!(none.supply_temperature, 0.0);
        assert_relative_eq!(mixing_valve(0.5, 2.0, 4.0, 0.0).supply_temperature, 2.0);
        assert_eq!(mixing_valve(0.5, 0.0, 4.0, 1.5).supply_temperature, 1.5);
    }

    proptest! {
        #[test]
        fn valve_conserves_mass_and_bounds(y in 0.0f64..=1.0, m in 0.0f64..50.0, a in -5.0f64..25.0, b in -5.0f64..25.0) {
            let v = mixing_valve(y, m, a, b);
            prop_assert_eq!(v.bypass_flow, m - v.storage_flow);
            prop_assert!((v.storage_flow + v.bypass_flow - m).abs() <= 1e-12 * m.max(1.0));
            prop_assert!(v.supply_temperature >= a.min(b) && v.supply_temperature <= a.max(b));
        }

        #[test]
        fn valve_position_stays_bounded(ts in proptest::collection::vec(-50.0f64..50.0, 1..200), kp in 0.0f64..5.0, ki in 0.0f64..1.0) {
            let sched = vec![SetpointEntry { day: 0.0, setpoint: 4.0, mode: Mode::Heating }];
            let mut c = ValveControl::new(0.5, kp, ki, sched, vec![]).unwrap();
            for (k, t) in ts.iter().enumerate() {
                let y = c.pi_step(*t, k as f64 * 60.0, 60.0);
                prop_assert!((0.0..=1.0).contains(&y));
            }
        }

        #[test]
        fn gain_scaling_scales_step(e0 in -3.0f64..3.0, e1 in -3.0f64..3.0, s in 0.1f64..4.0) {
            let sched = vec![SetpointEntry { day: 0.0, setpoint: 0.0, mode: Mode::Heating }];
            let step = |kp: f64, ki: f64| {
                let mut c = ValveControl::new(0.5, kp, ki, sched.clone(), vec![]).unwrap();
                c.kp = 0.0;
                c.ki = 0.0;
                c.pi_step(-e0, 0.0, 1.0);
                c.kp = kp;
                c.ki = ki;
                c.pi_step(-e1, 1.0, 1.0) - 0.5
            };
            let base = step(0.001, 0.0005);
            let scaled = step(0.001 * s, 0.0005 * s);
            prop_assert!((scaled - s * base).abs() <= 1e-12);
        }
    }

    #[test]
    fn pi_trivial_cases() {
        let sched = vec![SetpointEntry { day: 0.0, setpoint: 5.0, mode: Mode::Heating }];
        let mut c = ValveControl::new(0.3, 0.1, 0.01, sched.clone(), vec![]).unwrap();
        assert_eq!(c.pi_step(5.0, 0.0, 60.0), 0.3);
        assert_eq!(c.pi_step(5.0, 60.0, 60.0), 0.3);
        let mut c = ValveControl::new(1.0, 0.1, 0.01, sched, vec![]).unwrap();
        for k in 0..10 {
            assert_eq!(c.pi_step(0.0, k as f64, 1.0), 1.0);
        }
    }

    #[test]
    fn pi_closed_loop_settles() {
        let sched = vec![SetpointEntry { day: 0.0, setpoint: 5.0, mode: Mode::Heating }];
        let mut c = ValveControl::new(0.0, 0.1, 0.01, sched, vec![]).unwrap();
        // Static gain 10 behind a 20 s lag. Without any lag kp times the
        // plant gain is 1 and the sampled loop has a pole outside the unit
        // circle, so that variant limit-cycles against the clamps.
        let mut t_sup: f64 = 0.0;
        let mut settled_at = None;
        let decay = 1.0 - (-1.0f64 / 20.0).exp();
        for k in 0..2000 {
            let y = c.pi_step(t_sup, k as f64, 1.0);
            t_sup += (10.0 * y - t_sup) * decay;
            if (5.0 - t_sup).abs() < 0.05 && settled_at.is_none() {
                settled_at = Some(k);
            }
        }
        assert!(settled_at.is_some());
        assert!((5.0 - t_sup).abs() < 0.05);
    }

    #[test]
    fn regeneration_mode_inverts_error() {
        let sched = vec![SetpointEntry { day: 0.0, setpoint: 16.0, mode: Mode::Regeneration }];
        let mut c = ValveControl::new(0.5, 0.0, 0.001, sched, vec![]).unwrap();
        // supply warmer than setpoint in regeneration: open the storage
        assert!(c.pi_step(20.0, 0.0, 60.0) > 0.5);
    }

    #[test]
    fn schedule_lookup_wraps() {
        let sched = vec![
            SetpointEntry { day: 120.0, setpoint: 16.0, mode: Mode::Regeneration },
            SetpointEntry { day: 270.0, setpoint: 4.0, mode: Mode::Heating },
        ];
        let c = ValveControl::new(0.0, 0.05, 1e-4, sched, vec![]).unwrap();
        assert_eq!(c.entry_at(10.0 * DAY).setpoint, 4.0);
        assert_eq!(c.entry_at(120.0 * DAY).setpoint, 16.0);
        assert_eq!(c.entry_at(200.0 * DAY).mode, Mode::Regeneration);
        assert_eq!(c.entry_at(300.0 * DAY).setpoint, 4.0);
        assert_eq!(c.entry_at((365.0 + 130.0) * DAY).setpoint, 16.0);
    }

    #[test]
    fn overrides_hold_and_release() {
        let sched = vec![SetpointEntry { day: 0.0, setpoint: 5.0, mode: Mode::Heating }];
        let mut c = ValveControl::new(0.0, 0.0, 0.0, sched, vec![(100.0, Some(0.7)), (200.0, None)]).unwrap();
        assert_eq!(c.pi_step(0.0, 50.0, 1.0), 0.0);
        assert_eq!(c.pi_step(0.0, 150.0, 1.0), 0.7);
        // released: zero gains keep the last position
        assert_eq!(c.pi_step(0.0, 250.0, 1.0), 0.7);
    }

    #[test]
    fn controller_rejects_bad_input() {
        assert!(ValveControl::new(0.0, 0.1, 0.1, vec![], vec![]).is_err());
        let s = vec![SetpointEntry { day: 0.0, setpoint: 5.0, mode: Mode::Heating }];
        assert!(ValveControl::new(1.5, 0.1, 0.1, s.clone(), vec![]).is_err());
        assert!(ValveControl::new(0.0, 0.1, 0.1, s, vec![(0.0, Some(2.0))]).is_err());
    }

    #[test]
    fn pump_examples() {
        assert_eq!(pump_power(0.0, 2.0, 1000.0, 0.5).unwrap(), 0.0);
        assert_relative_eq!(pump_power(1e5, 2.0, 1000.0, 0.5).unwrap(), 400.0);
        assert_relative_eq!(
            pump_power(1e5, 2.0, 1000.0, 0.25).unwrap(),
            2.0 * pump_power(1e5, 2.0, 1000.0, 0.5).unwrap()
        );
        assert!(pump_power(1e5, 2.0, 1000.0, 0.0).is_err());
        assert!(pump_power(1e5, 2.0, 1000.0, -0.3).is_err());
    }

    #[test]
    fn routing_examples() {
        // 0 root, 1 junction, 2..3 consumers
        let tree = FlowTree::new(vec![None, Some(0), Some(1), Some(1)]).unwrap();
        let r = route_mass_flows(&tree, &[0.0, 0.0, 0.2, 0.3]);
        assert_relative_eq!(r.edge[1], 0.5);
        assert_relative_eq!(r.total, 0.5);
        let single = FlowTree::new(vec![None, Some(0), Some(1)]).unwrap();
        let r = route_mass_flows(&single, &[0.0, 0.0, 0.3]);
        assert_eq!(r.edge, vec![0.3, 0.3, 0.3]);
    }

    #[test]
    fn routing_rejects_cycles() {
        assert!(FlowTree::new(vec![None, Some(2), Some(1)]).is_err());
        assert!(FlowTree::new(vec![Some(0)]).is_err());
        assert!(FlowTree::new(vec![None, None]).is_err());
    }

    #[test]
    fn random_tree_root_flow() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let mut parent = vec![None];
        for k in 1..60 {
            parent.push(Some(rng.gen_range(0..k)));
        }
        // attach 30 leaves
        let inner = parent.len();
        for _ in 0..30 {
            parent.push(Some(rng.gen_range(0..inner)));
        }
        let tree = FlowTree::new(parent.clone()).unwrap();
        let flows: Vec<f64> = (0..parent.len())
            .map(|k| if k >= inner { rng.gen_range(0.0..2.0) } else { 0.0 })
            .collect();
        let r = route_mass_flows(&tree, &flows);
        let brute: f64 = flows.iter().sum();
        assert_relative_eq!(r.total, brute, max_relative = 1e-12);
        // junction balance: inflow equals the sum of outflows plus the local draw
        for k in 0..parent.len() {
            let out: f64 = tree.children(k).iter().map(|&c| r.edge[c]).sum();
            assert_relative_eq!(r.edge[k], out + flows[k], max_relative = 1e-12, epsilon = 1e-15);
        }
        assert!(r.edge.iter().all(|&m| m >= 0.0));
    }
}
