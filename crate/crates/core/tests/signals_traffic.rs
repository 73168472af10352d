mod common;

use ecoacc::signals::{phase_at, Corridor, Phase, SignalPlan};
use ecoacc::traffic::{idm_accel, IdmParams, Role, TargetVehicle, Traffic, TrafficDemand, VehicleId};
use proptest::prelude::*;

fn plan(offset: f64) -> SignalPlan {
    SignalPlan { stop_line_position: 100.0, cycle_length: 60.0, offset, green: 30.0, yellow: 5.0, red: 25.0 }
}

/// Phase for each tenth of a second of one cycle, counted from the offset.
fn phase_table(p: &SignalPlan) -> Vec<Phase> {
    let slots = (p.cycle_length * 10.0).round() as usize;
    (0..slots)
        .map(|i| {
            let tenths = i as f64;
            if tenths < p.green * 10.0 {
                Phase::Green
            } else if tenths < (p.green + p.yellow) * 10.0 {
                Phase::Yellow
            } else {
                Phase::Red
            }
        })
        .collect()
}

fn table_lookup(p: &SignalPlan, table: &[Phase], tenths: i64) -> Phase {
    let offset = (p.offset * 10.0).round() as i64;
    let slot = (tenths - offset).rem_euclid(table.len() as i64) as usize;
    table[slot]
}

#[test]
fn phase_boundaries() {
    let p = plan(0.0);
    assert_eq!(phase_at(&p, 0.0), Phase::Green);
    assert_eq!(phase_at(&p, 34.9), Phase::Yellow);
    assert_eq!(phase_at(&p, 35.0), Phase::Red);
}

#[test]
fn phase_matches_cycle_table() {
    for offset in [0.0, 10.0, 37.5, 59.9] {
        let p = plan(offset);
        let table = phase_table(&p);
        for tenths in 0..3000i64 {
            let t = tenths as f64 / 10.0;
            assert_eq!(phase_at(&p, t), table_lookup(&p, &table, tenths), "offset {offset}, t {t}");
        }
    }
    let p = plan(10.0);
    assert_eq!(phase_at(&p, 62.0), table_lookup(&p, &phase_table(&p), 620));
}

#[test]
fn yellow_is_skipped_when_empty() {
    let p = SignalPlan { yellow: 0.0, red: 30.0, ..plan(0.0) };
    assert_eq!(phase_at(&p, 29.99), Phase::Green);
    assert_eq!(phase_at(&p, 30.0), Phase::Red);
}

proptest! {
    #[test]
    fn phase_is_periodic(tenths in 0u32..1_000_000, offset_tenths in 0u32..600) {
        let p = plan(offset_tenths as f64 / 10.0);
        let t = tenths as f64 / 10.0;
        prop_assert_eq!(phase_at(&p, t), phase_at(&p, t + p.cycle_length));
    }
}

fn idm_oracle(v: f64, gap: f64, lead: f64, p: &IdmParams) -> f64 {
    let s_star = p.min_spacing + v * p.time_headway + v * (v - lead) / (2.0 * (p.max_accel * p.comfort_decel).sqrt());
    p.max_accel * (1.0 - (v / p.desired_speed).powi(4) - (s_star / gap).powi(2))
}

fn car(v: f64) -> TargetVehicle {
    TargetVehicle::new(VehicleId(100), 0.0, v, 4.5, Role::Background)
}

#[test]
fn idm_fixed_points_and_formula() {
    let p = IdmParams::default();
    assert!(idm_accel(&car(p.desired_speed), f64::INFINITY, 0.0, &p).unwrap().abs() < 1e-3);
    assert!(idm_accel(&car(0.0), p.min_spacing, 0.0, &p).unwrap().abs() < 1e-12);
    let a = idm_accel(&car(10.0), 20.0, 5.0, &p).unwrap();
    assert!((a - idm_oracle(10.0, 20.0, 5.0, &p)).abs() < 1e-12, "{a}");
    assert!(a >= -p.max_decel && a <= p.max_accel);
    assert!(idm_accel(&car(10.0), 0.0, 5.0, &p).is_err());
}

fn open_road(length: f64) -> Corridor {
    let always_green =
        SignalPlan { stop_line_position: length / 2.0, cycle_length: 60.0, offset: 0.0, green: 60.0, yellow: 0.0, red: 0.0 };
    Corridor { length, signals: vec![always_green], speed_limit: 15.0 }
}

#[test]
fn no_demand_stays_empty() {
    let corridor = open_road(1000.0);
    let demand = TrafficDemand::default();
    let mut traffic = Traffic::new(&demand, 1);
    for n in 0..1000 {
        traffic.step(&corridor, &demand, n as f64 * 0.1, 0.1).unwrap();
        assert!(traffic.vehicles().is_empty());
    }
}

#[test]
fn lone_vehicle_reaches_free_flow() {
    let corridor = open_road(10_000.0);
    let demand = TrafficDemand::default();
    let mut traffic = Traffic::new(&demand, 1);
    traffic.spawn(10.0, 2.0, 4.5);
    for n in 0..600 {
        traffic.step(&corridor, &demand, n as f64 * 0.1, 0.1).unwrap();
    }
    let v = traffic.vehicles()[0].velocity;
    assert!((v - demand.driver.desired_speed).abs() < 0.05, "{v}");
}

fn run_urban(seed: u64, steps: usize) -> Vec<Vec<TargetVehicle>> {
    let sc = common::urban().with_seed(seed);
    let mut traffic = Traffic::new(&sc.demand, sc.corridor.signals.len());
    let mut states = Vec::with_capacity(steps);
    for n in 0..steps {
        traffic.step(&sc.corridor, &sc.demand, n as f64 * sc.dt, sc.dt).unwrap();
        states.push(traffic.vehicles().to_vec());
    }
    states
}

#[test]
fn seeded_runs_repeat_exactly() {
    assert_eq!(run_urban(42, 100), run_urban(42, 100));
}

#[test]
fn background_traffic_keeps_apart_and_stops_for_red() {
    let sc = common::urban();
    let states = run_urban(sc.seed, 3000);
    let mut crossings = 0;
    for (n, pair) in states.windows(2).enumerate() {
        let t = (n + 1) as f64 * sc.dt;
        for w in pair[1].windows(2) {
            assert!(w[0].position - w[1].position > w[0].length, "overlap at t = {t}");
        }
        for after in &pair[1] {
            let Some(before) = pair[0].iter().find(|v| v.id == after.id) else { continue };
            for s in &sc.corridor.signals {
                if before.position < s.stop_line_position && after.position >= s.stop_line_position {
                    crossings += 1;
                    let late = after.position - s.stop_line_position > 0.1;
                    let red_all_step = phase_at(s, t - sc.dt) == Phase::Red && phase_at(s, t) == Phase::Red;
                    assert!(!(late && red_all_step), "vehicle {} ran the red at {} (t = {t})", after.id, s.stop_line_position);
                }
            }
        }
    }
    assert!(crossings > 0);
}

#[test]
fn injections_follow_the_rate() {
    let corridor = open_road(20_000.0);
    let demand = TrafficDemand { injection_rate: 0.1, turn_probability: vec![0.5], rng_seed: 3, ..TrafficDemand::default() };
    let mut traffic = Traffic::new(&demand, 1);
    let duration = 3600.0;
    let steps = (duration / 0.1) as usize;
    for n in 0..steps {
        traffic.step(&corridor, &demand, n as f64 * 0.1, 0.1).unwrap();
    }
    let expected = 0.1 * duration;
    let stats = traffic.stats();
    for count in [stats.arrivals, stats.injected] {
        assert!((count as f64 - expected).abs() <= 3.0 * expected.sqrt(), "{count} vs {expected}");
    }
    assert!(stats.turned > 0);
}
