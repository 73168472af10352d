//! Background traffic on the corridor: IDM car following, signal obedience,
//! Poisson injection at the entry and at side streets, probabilistic exits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::signals::{phase_at, Corridor, Phase};

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error(
        "background collision at t={time:.3}s: vehicle {follower} overlaps vehicle {leader} (gap {gap:.3} m)"
    )]
    Collision { time: f64, follower: u32, leader: u32, gap: f64 },
    #[error("invalid traffic demand: {0}")]
    InvalidDemand(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VehicleId(pub u32);

impl VehicleId {
    pub const EGO: VehicleId = VehicleId(0);
    pub const LEAD: VehicleId = VehicleId(1);
    const FIRST_BACKGROUND: u32 = 100;
}

impl std::fmt::Display for VehicleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Who moves a vehicle. Only `Background` vehicles are advanced by the
/// traffic model; the others are written in by the harness every tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Background,
    Ego,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetVehicle {
    pub id: VehicleId,
    /// Front-bumper position, m.
    pub position: f64,
    pub velocity: f64,
    pub length: f64,
    pub role: Role,
    /// Signal index this vehicle has committed to stop at during yellow.
    pub stop_committed: Option<usize>,
}

impl TargetVehicle {
    pub fn new(id: VehicleId, position: f64, velocity: f64, length: f64, role: Role) -> Self {
        Self { id, position, velocity, length, role, stop_committed: None }
    }

    pub fn rear(&self) -> f64 {
        self.position - self.length
    }
}

/// Intelligent Driver Model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmParams {
    pub desired_speed: f64,
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub time_headway: f64,
    pub min_spacing: f64,
    pub exponent: i32,
    /// Hard braking bound, also used for the stop-on-yellow decision.
    pub max_decel: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            desired_speed: 15.0,
            max_accel: 1.5,
            comfort_decel: 2.0,
            time_headway: 1.2,
            min_spacing: 2.0,
            exponent: 4,
            max_decel: 9.0,
        }
    }
}

/// IDM acceleration of `follower` behind a leader `gap` metres ahead
/// (bumper to bumper) moving at `lead_velocity`, clamped to
/// `[-max_decel, max_accel]`. Pass `f64::INFINITY` for a free road.
pub fn idm_accel(
    follower: &TargetVehicle,
    gap: f64,
    lead_velocity: f64,
    params: &IdmParams,
) -> Result<f64, TrafficError> {
    if gap.is_nan() || gap <= 0.0 {
        return Err(TrafficError::Collision {
            time: f64::NAN,
            follower: follower.id.0,
            leader: u32::MAX,
            gap,
        });
    }
    Ok(idm_raw(follower.velocity, gap, lead_velocity, params))
}

fn idm_raw(v: f64, gap: f64, lead_velocity: f64, p: &IdmParams) -> f64 {
    let dv = v - lead_velocity;
    let s_star = p.min_spacing
        + (v * p.time_headway + v * dv / (2.0 * (p.max_accel * p.comfort_decel).sqrt())).max(0.0);
    let free = (v / p.desired_speed).powi(p.exponent);
    let interaction = if gap.is_infinite() { 0.0 } else { (s_star / gap).powi(2) };
    (p.max_accel * (1.0 - free - interaction)).clamp(-p.max_decel, p.max_accel)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficDemand {
    /// Poisson arrival rate at the corridor entry, vehicles/s.
    pub injection_rate: f64,
    pub injection_speed: f64,
    /// Exit probability when crossing each intersection (one per signal).
    pub turn_probability: Vec<f64>,
    /// Side-street arrival rate just downstream of each intersection.
    pub side_injection_rate: Vec<f64>,
    pub rng_seed: u64,
    pub driver: IdmParams,
    pub vehicle_length: f64,
    /// Time gap a follower must have to an inserted vehicle, s.
    pub entry_headway: f64,
}

impl Default for TrafficDemand {
    fn default() -> Self {
        Self {
            injection_rate: 0.0,
            injection_speed: 10.0,
            turn_probability: Vec::new(),
            side_injection_rate: Vec::new(),
            rng_seed: 0,
            driver: IdmParams::default(),
            vehicle_length: 4.5,
            entry_headway: 2.0,
        }
    }
}

impl TrafficDemand {
    pub fn validate(&self, signal_count: usize) -> Result<(), TrafficError> {
        let fail = |s: String| Err(TrafficError::InvalidDemand(s));
        if !(self.injection_rate.is_finite() && self.injection_rate >= 0.0) {
            return fail("injection_rate must be >= 0".into());
        }
        if !(self.injection_speed.is_finite() && self.injection_speed >= 0.0) {
            return fail("injection_speed must be >= 0".into());
        }
        for (name, v) in [("turn_probability", &self.turn_probability), ("side_injection_rate", &self.side_injection_rate)] {
            if !v.is_empty() && v.len() != signal_count {
                return fail(format!("{name} has {} entries for {signal_count} signals", v.len()));
            }
        }
        if self.turn_probability.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return fail("turn probabilities must lie in [0, 1]".into());
        }
        if self.side_injection_rate.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return fail("side injection rates must be >= 0".into());
        }
        let d = &self.driver;
        if !(d.desired_speed > 0.0 && d.max_accel > 0.0 && d.comfort_decel > 0.0 && d.max_decel > 0.0) {
            return fail("IDM speeds and accelerations must be > 0".into());
        }
        if !(d.time_headway >= 0.0 && d.min_spacing > 0.0 && self.vehicle_length > 0.0) {
            return fail("IDM headway, spacing and vehicle length must be positive".into());
        }
        Ok(())
    }

    fn turn_probability_at(&self, signal: usize) -> f64 {
        self.turn_probability.get(signal).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrafficStats {
    /// Poisson arrivals drawn, placed or not.
    pub arrivals: u64,
    pub injected: u64,
    pub turned: u64,
    pub exited_end: u64,
}

/// Sorted vehicle list (descending position) plus the seeded generator that
/// drives arrivals and turns.
#[derive(Debug, Clone)]
pub struct Traffic {
    vehicles: Vec<TargetVehicle>,
    rng: ChaCha8Rng,
    next_id: u32,
    /// Arrivals waiting for an entry gap: index 0 is the corridor entry,
    /// index `i + 1` the side street after signal `i`.
    pending: Vec<u64>,
    stats: TrafficStats,
}

const STOP_MARGIN: f64 = 0.05;

impl Traffic {
    pub fn new(demand: &TrafficDemand, signal_count: usize) -> Self {
        Self {
            vehicles: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(demand.rng_seed),
            next_id: VehicleId::FIRST_BACKGROUND,
            pending: vec![0; signal_count + 1],
            stats: TrafficStats::default(),
        }
    }

    pub fn vehicles(&self) -> &[TargetVehicle] {
        &self.vehicles
    }

    pub fn stats(&self) -> TrafficStats {
        self.stats
    }

    /// Inserts or replaces a vehicle, keeping the list sorted.
    pub fn upsert(&mut self, vehicle: TargetVehicle) {
        self.vehicles.retain(|v| v.id != vehicle.id);
        self.insert_sorted(vehicle);
    }

    pub fn remove(&mut self, id: VehicleId) {
        self.vehicles.retain(|v| v.id != id);
    }

    /// Adds a background vehicle with a fresh id.
    pub fn spawn(&mut self, position: f64, velocity: f64, length: f64) -> VehicleId {
        let id = VehicleId(self.next_id);
        self.next_id += 1;
        self.insert_sorted(TargetVehicle::new(id, position, velocity, length, Role::Background));
        id
    }

    fn insert_sorted(&mut self, vehicle: TargetVehicle) {
        let at = self
            .vehicles
            .iter()
            .position(|v| v.position < vehicle.position)
            .unwrap_or(self.vehicles.len());
        self.vehicles.insert(at, vehicle);
    }

    /// Advances background traffic from `time` to `time + dt`.
    pub fn step(
        &mut self,
        corridor: &Corridor,
        demand: &TrafficDemand,
        time: f64,
        dt: f64,
    ) -> Result<(), TrafficError> {
        let accels = self.accelerations(corridor, demand, time)?;

        let mut crossed: Vec<(usize, usize)> = Vec::new();
        for (idx, (veh, accel)) in self.vehicles.iter_mut().zip(&accels).enumerate() {
            let Some(a) = *accel else { continue };
            let old = veh.position;
            let v = veh.velocity;
            let v_new = v + a * dt;
            if v_new < 0.0 {
                // stops within the step: travel the exact braking distance
                veh.position += if a < 0.0 { v * v / (-2.0 * a) } else { 0.0 };
                veh.velocity = 0.0;
            } else {
                veh.position += 0.5 * (v + v_new) * dt;
                veh.velocity = v_new;
            }
            for (si, s) in corridor.signals.iter().enumerate() {
                if old < s.stop_line_position && veh.position >= s.stop_line_position {
                    crossed.push((idx, si));
                }
            }
        }

        self.check_overlaps(time + dt)?;

        // turn decisions in list order, one draw per crossing
        let mut leaving = vec![false; self.vehicles.len()];
        for (idx, si) in crossed {
            let p = demand.turn_probability_at(si);
            if p > 0.0 && self.rng.random::<f64>() < p {
                leaving[idx] = true;
                self.stats.turned += 1;
            }
            if self.vehicles[idx].stop_committed == Some(si) {
                self.vehicles[idx].stop_committed = None;
            }
        }
        for (idx, v) in self.vehicles.iter().enumerate() {
            if v.role == Role::Background && !leaving[idx] && v.position >= corridor.length {
                leaving[idx] = true;
                self.stats.exited_end += 1;
            }
        }
        let mut keep = leaving.iter().map(|l| !l);
        self.vehicles.retain(|_| keep.next().unwrap_or(true));

        self.inject(corridor, demand, time + dt, dt);
        Ok(())
    }

    fn accelerations(
        &mut self,
        corridor: &Corridor,
        demand: &TrafficDemand,
        time: f64,
    ) -> Result<Vec<Option<f64>>, TrafficError> {
        let p = &demand.driver;
        let mut out = Vec::with_capacity(self.vehicles.len());
        for i in 0..self.vehicles.len() {
            let veh = self.vehicles[i];
            if veh.role != Role::Background {
                out.push(None);
                continue;
            }
            let mut accel = match i.checked_sub(1).map(|j| &self.vehicles[j]) {
                Some(lead) => {
                    let gap = lead.rear() - veh.position;
                    if gap <= 0.0 {
                        return Err(TrafficError::Collision {
                            time,
                            follower: veh.id.0,
                            leader: lead.id.0,
                            gap,
                        });
                    }
                    idm_raw(veh.velocity, gap, lead.velocity, p)
                }
                None => idm_raw(veh.velocity, f64::INFINITY, 0.0, p),
            };

            if let Some(si) = corridor.next_signal(veh.position) {
                let plan = &corridor.signals[si];
                let line_gap = plan.stop_line_position - veh.position;
                let must_stop = match phase_at(plan, time) {
                    Phase::Red => stoppable(veh.velocity, line_gap, p.max_decel),
                    Phase::Yellow => {
                        veh.stop_committed == Some(si)
                            || stoppable(veh.velocity, line_gap, p.max_decel)
                    }
                    Phase::Green => false,
                };
                if must_stop {
                    self.vehicles[i].stop_committed = Some(si);
                    let idm_line = idm_raw(veh.velocity, line_gap.max(1e-6), 0.0, p);
                    let room = (line_gap - STOP_MARGIN).max(1e-6);
                    let kinematic = -veh.velocity * veh.velocity / (2.0 * room);
                    accel = accel.min(idm_line).min(kinematic).max(-p.max_decel);
                } else if self.vehicles[i].stop_committed == Some(si) {
                    self.vehicles[i].stop_committed = None;
                }
            }
            out.push(Some(accel));
        }
        Ok(out)
    }

    fn check_overlaps(&self, time: f64) -> Result<(), TrafficError> {
        for w in self.vehicles.windows(2) {
            let (lead, follower) = (&w[0], &w[1]);
            if follower.role != Role::Background {
                continue;
            }
            let gap = lead.rear() - follower.position;
            if gap <= 0.0 {
                return Err(TrafficError::Collision {
                    time,
                    follower: follower.id.0,
                    leader: lead.id.0,
                    gap,
                });
            }
        }
        Ok(())
    }

    fn inject(&mut self, corridor: &Corridor, demand: &TrafficDemand, time: f64, dt: f64) {
        let mut points = Vec::with_capacity(self.pending.len());
        points.push((0.0, demand.injection_rate));
        for (i, s) in corridor.signals.iter().enumerate() {
            let rate = demand.side_injection_rate.get(i).copied().unwrap_or(0.0);
            points.push((s.stop_line_position + STOP_MARGIN, rate));
        }
        for (k, (position, rate)) in points.into_iter().enumerate() {
            if rate > 0.0 {
                let lambda = rate * dt;
                let n = Poisson::new(lambda).map(|d| d.sample(&mut self.rng)).unwrap_or(0.0) as u64;
                self.stats.arrivals += n;
                self.pending[k] += n;
            }
            if self.pending[k] > 0 {
                if let Some(speed) = self.entry_speed(corridor, demand, position, time) {
                    let front = position + demand.vehicle_length;
                    self.spawn(front, speed, demand.vehicle_length);
                    self.pending[k] -= 1;
                    self.stats.injected += 1;
                }
            }
        }
    }

    /// Speed at which a vehicle whose rear sits at `rear` can enter, or
    /// `None` when the gaps to the neighbours do not allow it.
    fn entry_speed(
        &self,
        corridor: &Corridor,
        demand: &TrafficDemand,
        rear: f64,
        time: f64,
    ) -> Option<f64> {
        let p = &demand.driver;
        let front = rear + demand.vehicle_length;
        let mut speed = demand.injection_speed.min(p.desired_speed);
        if let Some(lead) = self.vehicles.iter().rev().find(|v| v.rear() >= front) {
            speed = speed.min(lead.velocity);
            let gap = lead.rear() - front;
            if gap < p.min_spacing + speed * p.time_headway {
                return None;
            }
        }
        if self.vehicles.iter().any(|v| v.position > rear && v.rear() < front) {
            return None;
        }
        if let Some(follower) = self.vehicles.iter().find(|v| v.position <= rear) {
            let gap = rear - follower.position;
            if gap < p.min_spacing + follower.velocity * demand.entry_headway {
                return None;
            }
        }
        if let Some(si) = corridor.next_signal(front) {
            let plan = &corridor.signals[si];
            if phase_at(plan, time) != Phase::Green {
                let line_gap = plan.stop_line_position - front;
                if speed * speed / (2.0 * p.comfort_decel) + p.min_spacing > line_gap {
                    return None;
                }
            }
        }
        Some(speed)
    }
}

fn stoppable(v: f64, line_gap: f64, max_decel: f64) -> bool {
    let room = line_gap - STOP_MARGIN;
    room > 0.0 && v * v <= 2.0 * max_decel * room
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::SignalPlan;

    fn veh(v: f64) -> TargetVehicle {
        TargetVehicle::new(VehicleId(100), 0.0, v, 4.5, Role::Background)
    }

    #[test]
    fn free_flow_equilibrium() {
        let p = IdmParams::default();
        let a = idm_accel(&veh(p.desired_speed), f64::INFINITY, 0.0, &p).unwrap();
        assert!(a.abs() < 1e-3);
    }

    #[test]
    fn standstill_equilibrium() {
        let p = IdmParams::default();
        let a = idm_accel(&veh(0.0), p.min_spacing, 0.0, &p).unwrap();
        assert!(a.abs() < 1e-12, "{a}");
    }

    #[test]
    fn closing_value() {
        // direct formula evaluation: s* = 2 + 12 + 50/(2*sqrt(3)),
        // a = 1.5 * (1 - (10/15)^4 - (s*/20)^2)
        let a = idm_accel(&veh(10.0), 20.0, 5.0, &IdmParams::default()).unwrap();
        assert!((a - -1.8280907529190642).abs() < 1e-12, "{a}");
    }

    #[test]
    fn clamped_to_bounds() {
        let p = IdmParams::default();
        let a = idm_accel(&veh(15.0), 0.5, 0.0, &p).unwrap();
        assert_eq!(a, -p.max_decel);
    }

    #[test]
    fn non_positive_gap_is_a_collision() {
        let p = IdmParams::default();
        assert!(matches!(idm_accel(&veh(5.0), 0.0, 0.0, &p), Err(TrafficError::Collision { .. })));
        assert!(idm_accel(&veh(5.0), -1.0, 0.0, &p).is_err());
    }

    #[test]
    fn empty_corridor_stays_empty() {
        let corridor = Corridor { length: 1000.0, signals: vec![], speed_limit: 15.0 };
        let demand = TrafficDemand::default();
        let mut t = Traffic::new(&demand, 0);
        for n in 0..500 {
            t.step(&corridor, &demand, n as f64 * 0.1, 0.1).unwrap();
            assert!(t.vehicles().is_empty());
        }
    }

    #[test]
    fn single_vehicle_reaches_free_flow() {
        let plan = SignalPlan {
            stop_line_position: 500.0,
            cycle_length: 60.0,
            offset: 0.0,
            green: 60.0,
            yellow: 0.0,
            red: 0.0,
        };
        let corridor = Corridor { length: 1e6, signals: vec![plan], speed_limit: 15.0 };
        let demand = TrafficDemand::default();
        let mut t = Traffic::new(&demand, 1);
        t.spawn(10.0, 0.0, 4.5);
        for n in 0..2000 {
            t.step(&corridor, &demand, n as f64 * 0.1, 0.1).unwrap();
        }
        let v = t.vehicles()[0].velocity;
        assert!((v - demand.driver.desired_speed).abs() < 0.05, "{v}");
    }

    #[test]
    fn stops_before_red_line() {
        let plan = SignalPlan {
            stop_line_position: 200.0,
            cycle_length: 100.0,
            offset: 0.0,
            green: 0.0,
            yellow: 0.0,
            red: 100.0,
        };
        let corridor = Corridor { length: 1000.0, signals: vec![plan], speed_limit: 15.0 };
        let demand = TrafficDemand::default();
        let mut t = Traffic::new(&demand, 1);
        t.spawn(50.0, 12.0, 4.5);
        for n in 0..900 {
            t.step(&corridor, &demand, n as f64 * 0.1, 0.1).unwrap();
        }
        let v = t.vehicles()[0];
        assert!(v.position < 200.0 && v.velocity < 1e-6, "{v:?}");
    }

    #[test]
    fn overlap_is_reported() {
        let corridor = Corridor { length: 1000.0, signals: vec![], speed_limit: 15.0 };
        let demand = TrafficDemand::default();
        let mut t = Traffic::new(&demand, 0);
        t.spawn(100.0, 0.0, 4.5);
        t.spawn(98.0, 10.0, 4.5);
        let err = t.step(&corridor, &demand, 0.0, 0.1).unwrap_err();
        assert!(matches!(err, TrafficError::Collision { .. }));
    }
}
