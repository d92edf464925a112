#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use gdhc_sim::scenario::{load_scenario, DemandSet, Scenario};

pub const DAY: f64 = 86_400.0;

pub fn scenario_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(file)
}

pub fn shipped(file: &str) -> Scenario {
    load_scenario(scenario_path(file)).expect("shipped scenario loads").scenario
}

pub fn shipped_demands(file: &str) -> DemandSet {
    DemandSet::load(scenario_path(file)).expect("shipped demands load")
}

/// Hourly demand CSV text for consumers `c1..c5`, building convention
/// (positive = heat delivered to the building). Winter peak around absolute
/// day 20; summer values turn negative, i.e. buildings reject cooling heat.
pub fn seasonal_demand_csv(days: usize, start_day: f64, amplitude: f64) -> String {
    const PEAKS: [f64; 5] = [1.0, 0.8, 1.2, 0.9, 1.1];
    let mut out = String::from("time_s,consumer_id,q_w\n");
    for h in 0..=days * 24 {
        let d = start_day + h as f64 / 24.0;
        let season = 0.35 + 0.65 * (2.0 * PI * (d - 20.0) / 365.0).cos();
        let daily = 1.0 + 0.2 * (2.0 * PI * ((h % 24) as f64 - 7.0) / 24.0).cos();
        for (k, p) in PEAKS.iter().enumerate() {
            out.push_str(&format!("{},c{},{:.1}\n", h * 3600, k + 1, amplitude * p * season * daily));
        }
    }
    out
}

pub fn seasonal_demands(days: usize, start_day: f64, amplitude: f64) -> DemandSet {
    DemandSet::from_reader(seasonal_demand_csv(days, start_day, amplitude).as_bytes(), "generated").unwrap()
}

/// Zero demand for every consumer of `s`.
pub fn idle_demands(s: &Scenario) -> DemandSet {
    let mut csv = String::from("time_s,consumer_id,q_w\n");
    for c in &s.consumers {
        csv.push_str(&format!("0,{},0\n1e12,{},0\n", c.id, c.id));
    }
    DemandSet::from_reader(csv.as_bytes(), "idle").unwrap()
}
