//! Coasting terminal set.
//!
//! For an ego speed `v`, `d_coast(v)` is the smallest gap from which the ego
//! can coast (zero traction, zero braking, wheel force starting at zero)
//! against the assumed front-vehicle behaviour without the gap ever falling
//! below `d_min`. The rollout ends once the gap can no longer shrink (the
//! front has settled and the ego is no faster) or after `coast_steps` steps.
//!
//! The table is tabulated on a velocity grid and replaced by the maximum of
//! its secants, which keeps the terminal constraint convex. Each secant is
//! lifted if needed so that it also covers the table at its segment
//! midpoint.

use thiserror::Error;

use super::MpcConfig;
use crate::plant::{resistive_force, PlantParams};

#[derive(Debug, Error, PartialEq)]
pub enum CoastingError {
    #[error("coasting table decreases between v={v_lo} (gap {d_lo}) and v={v_hi} (gap {d_hi})")]
    NonMonotone { v_lo: f64, d_lo: f64, v_hi: f64, d_hi: f64 },
}

/// How the front vehicle moves during the coasting rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrontAssumption {
    /// Starts at the ego's speed and brakes at `decel` to a stop.
    MatchEgo { decel: f64 },
    /// Starts at `velocity` and brakes at `decel` (zero: holds its speed).
    Fixed { velocity: f64, decel: f64 },
}

impl FrontAssumption {
    fn start_velocity(&self, ego_v: f64) -> (f64, f64) {
        match *self {
            FrontAssumption::MatchEgo { decel } => (ego_v, decel),
            FrontAssumption::Fixed { velocity, decel } => (velocity, decel),
        }
    }
}

/// `d >= intercept + slope·v`, exact on `[v_lo, v_hi]` up to the lift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Secant {
    pub v_lo: f64,
    pub v_hi: f64,
    pub intercept: f64,
    pub slope: f64,
}

impl Secant {
    pub fn at(&self, v: f64) -> f64 {
        self.intercept + self.slope * v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoastingSet {
    pub front: FrontAssumption,
    pub velocities: Vec<f64>,
    pub min_gap: Vec<f64>,
    pub secants: Vec<Secant>,
}

impl CoastingSet {
    /// Piecewise-linear envelope value (maximum over all secants).
    pub fn envelope(&self, v: f64) -> f64 {
        self.secants
            .iter()
            .map(|s| s.at(v))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Secants with runs of collinear neighbours merged into one piece. The
    /// envelope is unchanged; repeated rows would make the terminal
    /// constraints linearly dependent.
    pub fn pieces(&self) -> Vec<Secant> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        let mut out: Vec<Secant> = Vec::with_capacity(self.secants.len());
        for s in &self.secants {
            match out.last_mut() {
                Some(last) if close(last.slope, s.slope) && close(last.intercept, s.intercept) => {
                    last.v_hi = s.v_hi;
                }
                _ => out.push(*s),
            }
        }
        out
    }
}

/// Minimum gap seen along a coasting rollout that starts from gap `d0`.
/// Returns early once the gap drops below `floor`.
fn rollout_min_gap(
    d0: f64,
    ego_v0: f64,
    front: FrontAssumption,
    model: &PlantParams,
    dt: f64,
    steps: usize,
    floor: f64,
) -> f64 {
    let (front_v0, decel) = front.start_velocity(ego_v0);
    let mut d = d0;
    let mut v = ego_v0.max(0.0);
    let mut vf = front_v0.max(0.0);
    let mut min_d = d;
    for _ in 0..steps {
        let settled = decel == 0.0 || vf == 0.0;
        if settled && v <= vf {
            break;
        }
        d += dt * (vf - v);
        let resistance = resistive_force(v, model);
        v = if v <= 0.0 { 0.0 } else { (v - dt * resistance / model.mass).max(0.0) };
        vf = (vf - decel * dt).max(0.0);
        min_d = min_d.min(d);
        if min_d < floor {
            break;
        }
    }
    min_d
}

/// Whether coasting from `(gap, ego_v)` keeps `d >= d_min` throughout.
pub fn coasting_is_safe(gap: f64, ego_v: f64, front: FrontAssumption, config: &MpcConfig) -> bool {
    rollout_min_gap(gap, ego_v, front, &config.model, config.dt, config.coast_steps, config.d_min)
        >= config.d_min
}

/// Smallest safe initial gap for `ego_v`, by bisection.
pub fn coasting_min_gap(ego_v: f64, front: FrontAssumption, config: &MpcConfig) -> f64 {
    let d_min = config.d_min;
    if coasting_is_safe(d_min, ego_v, front, config) {
        return d_min;
    }
    let mut lo = d_min;
    let mut hi = d_min + ego_v.max(0.0) * config.dt * config.coast_steps as f64 + 1.0;
    while !coasting_is_safe(hi, ego_v, front, config) {
        hi = d_min + 2.0 * (hi - d_min);
    }
    for _ in 0..200 {
        if hi - lo <= 1e-7 * (1.0 + hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if coasting_is_safe(mid, ego_v, front, config) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn velocity_grid(config: &MpcConfig) -> Vec<f64> {
    let k = config.coast_grid;
    (0..=k)
        .map(|i| config.v_min + (config.v_max - config.v_min) * i as f64 / k as f64)
        .collect()
}

pub fn compute_coasting_set_for(
    config: &MpcConfig,
    front: FrontAssumption,
) -> Result<CoastingSet, CoastingError> {
    let velocities = velocity_grid(config);
    let min_gap: Vec<f64> = velocities
        .iter()
        .map(|&v| coasting_min_gap(v, front, config))
        .collect();
    for i in 0..min_gap.len() - 1 {
        if min_gap[i + 1] < min_gap[i] - 1e-6 {
            return Err(CoastingError::NonMonotone {
                v_lo: velocities[i],
                d_lo: min_gap[i],
                v_hi: velocities[i + 1],
                d_hi: min_gap[i + 1],
            });
        }
    }
    let secants = (0..velocities.len() - 1)
        .map(|i| {
            let (v0, v1) = (velocities[i], velocities[i + 1]);
            let (g0, g1) = (min_gap[i], min_gap[i + 1]);
            let slope = (g1 - g0) / (v1 - v0);
            let mut s = Secant { v_lo: v0, v_hi: v1, intercept: g0 - slope * v0, slope };
            let mid = 0.5 * (v0 + v1);
            let deficit = coasting_min_gap(mid, front, config) - s.at(mid);
            if deficit > 0.0 {
                s.intercept += deficit;
            }
            s
        })
        .collect();
    Ok(CoastingSet { front, velocities, min_gap, secants })
}

/// Coasting set against a front that starts at the ego's own grid speed and
/// brakes at `a_brake_max`.
pub fn compute_coasting_set(config: &MpcConfig, a_brake_max: f64) -> Result<CoastingSet, CoastingError> {
    compute_coasting_set_for(config, FrontAssumption::MatchEgo { decel: a_brake_max })
}

/// One coasting set per front starting speed on the same velocity grid.
/// The controller picks the set for the predicted terminal front speed,
/// rounded down to the grid, which is the conservative choice since the
/// required gap shrinks as the front gets faster.
#[derive(Debug, Clone, PartialEq)]
pub struct CoastingFamily {
    pub front_decel: f64,
    pub front_velocities: Vec<f64>,
    pub sets: Vec<CoastingSet>,
}

impl CoastingFamily {
    pub fn select(&self, front_terminal_velocity: f64) -> &CoastingSet {
        let idx = self
            .front_velocities
            .iter()
            .rposition(|&v| v <= front_terminal_velocity + 1e-9)
            .unwrap_or(0);
        &self.sets[idx]
    }
}

pub fn compute_coasting_family(
    config: &MpcConfig,
    front_decel: f64,
) -> Result<CoastingFamily, CoastingError> {
    let front_velocities = velocity_grid(config);
    let sets = front_velocities
        .iter()
        .map(|&velocity| {
            compute_coasting_set_for(config, FrontAssumption::Fixed { velocity, decel: front_decel })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CoastingFamily { front_decel, front_velocities, sets })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> MpcConfig {
        MpcConfig { coast_grid: 8, coast_steps: 60, ..Default::default() }
    }

    #[test]
    fn stopped_ego_needs_only_min_gap() {
        let cfg = small_config();
        let set = compute_coasting_set(&cfg, 6.0).unwrap();
        assert_eq!(set.min_gap[0], cfg.d_min);
    }

    #[test]
    fn table_is_monotone_and_above_min_gap() {
        let cfg = small_config();
        let set = compute_coasting_set(&cfg, 6.0).unwrap();
        for w in set.min_gap.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(set.min_gap.iter().all(|&g| g >= cfg.d_min));
        for (s, w) in set.secants.iter().zip(set.velocities.windows(2)) {
            assert!(s.at(w[0]) >= coasting_min_gap(w[0], set.front, &cfg) - 1e-6);
            assert!(s.at(w[1]) >= coasting_min_gap(w[1], set.front, &cfg) - 1e-6);
        }
    }

    #[test]
    fn pieces_merge_flat_segments() {
        let cfg = small_config();
        let set = compute_coasting_set_for(&cfg, FrontAssumption::Fixed { velocity: 10.0, decel: 0.0 }).unwrap();
        let pieces = set.pieces();
        assert!(pieces.len() < set.secants.len());
        assert_eq!(pieces[0].v_lo, 0.0);
        assert_eq!(pieces[0].slope, 0.0);
        for k in 0..=40 {
            let v = k as f64 * 0.5;
            let merged = pieces.iter().map(|s| s.at(v)).fold(f64::NEG_INFINITY, f64::max);
            assert!((merged - set.envelope(v)).abs() < 1e-9);
        }
    }

    #[test]
    fn slower_ego_than_constant_front_is_free() {
        let cfg = small_config();
        let front = FrontAssumption::Fixed { velocity: 10.0, decel: 0.0 };
        assert_eq!(coasting_min_gap(8.0, front, &cfg), cfg.d_min);
        assert!(coasting_min_gap(12.0, front, &cfg) > cfg.d_min);
    }

    #[test]
    fn family_selection_rounds_down() {
        let cfg = small_config();
        let fam = compute_coasting_family(&cfg, 0.0).unwrap();
        // grid step 2.5 m/s
        let s = fam.select(6.0);
        assert_eq!(s.front, FrontAssumption::Fixed { velocity: 5.0, decel: 0.0 });
        assert_eq!(fam.select(-1.0).front, FrontAssumption::Fixed { velocity: 0.0, decel: 0.0 });
        assert_eq!(fam.select(100.0).front, FrontAssumption::Fixed { velocity: 20.0, decel: 0.0 });
    }
}
