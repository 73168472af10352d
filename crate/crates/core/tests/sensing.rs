mod common;

use ecoacc::plant::PlantState;
use ecoacc::sensing::{
    predict_front_exact, predict_front_worst_case, radar_measure, spat_snapshot, LeadPlan,
    DEFAULT_RADAR_RANGE,
};
use ecoacc::signals::{phase_at, Corridor, Phase, SignalPlan};
use ecoacc::traffic::{Role, TargetVehicle, VehicleId};
use proptest::prelude::*;

const LEN: f64 = 4.5;

fn ego(position: f64, velocity: f64) -> PlantState {
    PlantState { position, velocity, wheel_force: 0.0, time: 0.0 }
}

/// A vehicle whose rear bumper sits at `rear`.
fn vehicle(rear: f64, velocity: f64) -> TargetVehicle {
    TargetVehicle::new(VehicleId(100), rear + LEN, velocity, LEN, Role::Background)
}

#[test]
fn empty_road_reads_full_range() {
    let r = radar_measure(&ego(0.0, 10.0), &[], DEFAULT_RADAR_RANGE);
    assert_eq!(r.distance, 150.0);
    assert_eq!(r.relative_velocity, 0.0);
    assert!(!r.target_present);
}

#[test]
fn lead_geometry() {
    let r = radar_measure(&ego(100.0, 10.0), &[vehicle(140.0, 8.0)], 150.0);
    assert_eq!((r.distance, r.relative_velocity, r.target_present), (40.0, -2.0, true));
}

#[test]
fn saturation_boundary() {
    let far = radar_measure(&ego(0.0, 10.0), &[vehicle(150.01, 8.0)], 150.0);
    assert_eq!((far.distance, far.relative_velocity, far.target_present), (150.0, 0.0, false));
    let near = radar_measure(&ego(0.0, 10.0), &[vehicle(149.99, 8.0)], 150.0);
    assert!(near.target_present);
    assert!((near.distance - 149.99).abs() < 1e-9);
}

#[test]
fn nearest_of_several_and_ignores_those_behind() {
    let cars = [vehicle(90.0, 9.0), vehicle(30.0, 7.0), vehicle(-20.0, 3.0)];
    let r = radar_measure(&ego(0.0, 10.0), &cars, 150.0);
    assert_eq!(r.distance, 30.0);
    assert_eq!(r.relative_velocity, -3.0);
}

#[test]
fn exact_prediction_examples() {
    let p = predict_front_exact(10.0, &LeadPlan::constant(10.0), 0.0, 20, 0.1);
    assert_eq!(p.velocities, vec![10.0; 21]);
    let p = predict_front_exact(7.0, &LeadPlan::constant(10.0), 0.0, 0, 0.1);
    assert_eq!(p.velocities, vec![7.0]);
}

#[test]
fn exact_prediction_resamples_the_plan() {
    let bps = vec![(0.0, 10.0), (2.0, 6.0), (3.0, 6.0), (5.0, 12.0)];
    let plan = LeadPlan { breakpoints: bps.clone() };
    let interp = |t: f64| -> f64 {
        if t <= bps[0].0 {
            return bps[0].1;
        }
        for i in 1..bps.len() {
            if t < bps[i].0 {
                let (t0, v0) = bps[i - 1];
                let (t1, v1) = bps[i];
                return v0 + (t - t0) / (t1 - t0) * (v1 - v0);
            }
        }
        bps[bps.len() - 1].1
    };
    let now = 1.3;
    let p = predict_front_exact(interp(now), &plan, now, 50, 0.1);
    for (k, v) in p.velocities.iter().enumerate() {
        let t = now + k as f64 * 0.1;
        assert!((v - interp(t)).abs() < 1e-9, "k = {k}");
    }
}

#[test]
fn worst_case_examples() {
    let p = predict_front_worst_case(0.0, 6.0, 20, 0.1);
    assert!(p.velocities.iter().all(|&v| v == 0.0));
    let p = predict_front_worst_case(10.0, 5.0, 30, 0.1);
    for (k, v) in p.velocities.iter().enumerate() {
        let expected = (10.0 - 0.5 * k as f64).max(0.0);
        assert!((v - expected).abs() < 1e-12, "k = {k}: {v}");
    }
    assert_eq!(p.velocities[20], 0.0);
    assert_eq!(p.velocities.len(), 31);
}

proptest! {
    #[test]
    fn worst_case_is_dominated(v0 in 0.0..20.0f64, accels in prop::collection::vec(-6.0..3.0f64, 40)) {
        let p = predict_front_worst_case(v0, 6.0, 40, 0.1);
        let mut v = v0;
        prop_assert!(p.velocities[0] <= v);
        for (k, a) in accels.iter().enumerate() {
            v = (v + a * 0.1).max(0.0);
            prop_assert!(p.velocities[k + 1] <= v + 1e-12, "k = {}", k + 1);
        }
    }

    #[test]
    fn radar_never_exceeds_range(rears in prop::collection::vec(-50.0..400.0f64, 0..6), range in 1.0..300.0f64) {
        let cars: Vec<_> = rears.iter().map(|&r| vehicle(r, 5.0)).collect();
        let r = radar_measure(&ego(0.0, 10.0), &cars, range);
        prop_assert!(r.distance <= range);
        prop_assert_eq!(r.target_present, r.distance != range);
    }
}

fn corridor() -> Corridor {
    let plan = |line: f64, offset: f64| SignalPlan {
        stop_line_position: line,
        cycle_length: 20.0,
        offset,
        green: 10.0,
        yellow: 3.0,
        red: 7.0,
    };
    Corridor { length: 500.0, signals: vec![plan(100.0, 0.0), plan(300.0, 4.5)], speed_limit: 14.0 }
}

#[test]
fn snapshot_past_the_last_signal_is_empty() {
    assert!(spat_snapshot(301.0, &corridor(), 0.0, 20, 0.1).is_none());
}

#[test]
fn all_red_plan() {
    let red = SignalPlan { stop_line_position: 50.0, cycle_length: 30.0, offset: 0.0, green: 0.0, yellow: 0.0, red: 30.0 };
    let c = Corridor { length: 100.0, signals: vec![red], speed_limit: 14.0 };
    let s = spat_snapshot(0.0, &c, 3.0, 20, 0.1).unwrap();
    assert_eq!(s.d_tl, 50.0);
    assert!(s.schedule.iter().all(|&p| p == Phase::Red));
}

#[test]
fn schedule_agrees_with_phase_at_over_full_cycles() {
    let c = corridor();
    for tenths in 0..400 {
        let now = tenths as f64 * 0.1;
        for pos in [0.0, 150.0] {
            let s = spat_snapshot(pos, &c, now, 20, 0.1).unwrap();
            let plan = &c.signals[s.signal_index];
            assert_eq!(s.schedule.len(), 21);
            assert_eq!(s.d_tl, plan.stop_line_position - pos);
            for (k, &phase) in s.schedule.iter().enumerate() {
                assert_eq!(phase, phase_at(plan, now + k as f64 * 0.1));
            }
        }
    }
}
