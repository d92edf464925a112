mod common;

use common::*;
use gdhc_sim::engine::{Model, OdeSystem};
use gdhc_sim::ground::boundary_temperature;
use gdhc_sim::scenario::DemandSet;

#[test]
fn minimal_state_length_by_hand() {
    let s = shipped("minimal.toml");
    let (model, y0) = Model::assemble(&s, &shipped_demands("minimal_demands.csv")).unwrap();
    // 2 segments x (4 pipe slots + 2 pipes x 2 regions x 2 soil layers)
    // + 1 station + storage (2 + 2 coil, 2 water, 2 concrete, 2 x 2 soil)
    assert_eq!(model.layout().len(), 2 * (4 + 8) + 1 + 12);
    assert_eq!(y0.len(), 37);
    assert!(model.layout().get("station.c1.T_hhx").is_some());
    assert!(model.layout().get("pipe.r1.1.ret.T_p").is_some());
    assert!(model.layout().get("storage.s.2.2").is_some());
}

#[test]
fn uniform_state_at_boundary_temperature_is_at_rest() {
    let s = shipped("five_consumers.toml");
    let (mut model, y0) = Model::assemble(&s, &idle_demands(&s)).unwrap();
    let tb = boundary_temperature(model.climate(), 0.0);
    let y = vec![tb; y0.len()];
    let mut dy = vec![f64::NAN; y.len()];
    model.rhs(0.0, &y, &mut dy).unwrap();
    for (k, d) in dy.iter().enumerate() {
        assert!(d.abs() < 1e-12, "{} drifts at {d}", model.layout().name(k));
    }
}

#[test]
fn demand_only_moves_its_own_station_at_rest() {
    let s = shipped("five_consumers.toml");
    let (mut model, y0) = Model::assemble(&s, &idle_demands(&s)).unwrap();
    let k = model.stations().iter().position(|st| st.id == "c3").unwrap();
    // building convention +2 kW, i.e. the network supplies heat
    let csv = "time_s,consumer_id,q_w\n0,c3,2000\n";
    let set = DemandSet::from_reader(csv.as_bytes(), "t").unwrap();
    model.set_demand(k, set.get("c3").unwrap().clone());
    let tb = boundary_temperature(model.climate(), 0.0);
    let y = vec![tb; y0.len()];
    let mut dy = vec![0.0; y.len()];
    model.rhs(0.0, &y, &mut dy).unwrap();
    let slot = model.stations()[k].slot;
    let c = model.capacities(&y)[slot];
    assert!((dy[slot] * c + 2000.0).abs() < 1e-9, "{}", dy[slot] * c);
    for (j, d) in dy.iter().enumerate() {
        if j != slot {
            assert!(d.abs() < 1e-12, "{}", model.layout().name(j));
        }
    }
}

#[test]
fn energy_audit_closes_on_a_random_state() {
    use rand::{Rng, SeedableRng};
    let s = shipped("five_consumers.toml");
    let (mut model, y0) = Model::assemble(&s, &shipped_demands("five_consumers_demands.csv")).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    for _ in 0..50 {
        let y: Vec<f64> = y0.iter().map(|v| v + rng.gen_range(-4.0..4.0)).collect();
        let t = rng.gen_range(0.0..5.0 * DAY);
        model.controls.y = rng.gen_range(0.0..=1.0);
        let (stored, external) = model.energy_audit(t, &y).unwrap();
        let mut dy = vec![0.0; y.len()];
        model.rhs(t, &y, &mut dy).unwrap();
        let gross: f64 = model.capacities(&y).iter().zip(&dy).map(|(c, d)| (c * d).abs()).sum();
        assert!((stored - external).abs() <= 1e-10 * gross, "{stored} vs {external}");
    }
}

#[test]
fn assembly_is_deterministic() {
    let s = shipped("five_consumers.toml");
    let d = shipped_demands("five_consumers_demands.csv");
    let (mut a, ya) = Model::assemble(&s, &d).unwrap();
    let (mut b, yb) = Model::assemble(&s, &d).unwrap();
    assert_eq!(a.layout(), b.layout());
    assert_eq!(ya, yb);
    let (mut da, mut db) = (vec![0.0; ya.len()], vec![0.0; yb.len()]);
    a.rhs(1234.0, &ya, &mut da).unwrap();
    b.rhs(1234.0, &yb, &mut db).unwrap();
    assert_eq!(da, db);
}

#[test]
fn missing_series_is_a_validation_error() {
    let s = shipped("five_consumers.toml");
    let mut d = shipped_demands("five_consumers_demands.csv");
    d.series.remove("c4");
    let err = Model::assemble(&s, &d).unwrap_err().to_string();
    assert!(err.contains("consumers[3]"), "{err}");
}
