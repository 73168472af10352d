//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code it checks, except for plain data types.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ecoacc::mpc::{CoastingSet, FrontAssumption, MpcConfig};
use ecoacc::plant::PlantParams;
use ecoacc::qp::QpProblem;
use ecoacc::scenario::{parse_scenario, Scenario, CATCHUP_SCN, URBAN_SCN};

pub fn catchup() -> Scenario {
    parse_scenario(CATCHUP_SCN).expect("bundled catchup scenario parses")
}

pub fn urban() -> Scenario {
    parse_scenario(URBAN_SCN).expect("bundled urban scenario parses")
}

// ---------------------------------------------------------------- QP oracle

#[derive(Debug, Clone, PartialEq)]
pub enum OracleResult {
    Optimal { x: DVector<f64>, objective: f64 },
    Infeasible,
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Free,
    Lower,
    Upper,
}

/// Exhaustive active-set enumeration for a strictly convex QP
/// `min 1/2 x'Px + q'x, l <= Ax <= u`. Every assignment of at most `n` rows
/// to a bound is solved as an equality-constrained KKT system and accepted
/// if primal feasible with multipliers of the right sign
/// (`P x + q + A' y = 0`, `y <= 0` at lower bounds, `y >= 0` at upper).
/// No accepted assignment means the problem is infeasible.
pub fn enumerate_active_sets(problem: &QpProblem) -> OracleResult {
    let n = problem.q.len();
    let m = problem.l.len();
    let mut sides = vec![Side::Free; m];
    let mut best: Option<OracleResult> = None;
    enumerate(problem, 0, 0, n, &mut sides, &mut best);
    best.unwrap_or(OracleResult::Infeasible)
}

fn enumerate(
    problem: &QpProblem,
    row: usize,
    active: usize,
    n: usize,
    sides: &mut Vec<Side>,
    best: &mut Option<OracleResult>,
) {
    if best.is_some() {
        return;
    }
    if row == sides.len() {
        *best = kkt_point(problem, sides);
        return;
    }
    sides[row] = Side::Free;
    enumerate(problem, row + 1, active, n, sides, best);
    if active < n {
        let (l, u) = (problem.l[row], problem.u[row]);
        if l.is_finite() {
            sides[row] = Side::Lower;
            enumerate(problem, row + 1, active + 1, n, sides, best);
        }
        if u.is_finite() && u != l {
            sides[row] = Side::Upper;
            enumerate(problem, row + 1, active + 1, n, sides, best);
        }
        sides[row] = Side::Free;
    }
}

fn kkt_point(problem: &QpProblem, sides: &[Side]) -> Option<OracleResult> {
    let n = problem.q.len();
    let act: Vec<usize> = (0..sides.len()).filter(|&i| sides[i] != Side::Free).collect();
    let k = act.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    let mut rhs = DVector::zeros(n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(&problem.p);
    for j in 0..n {
        rhs[j] = -problem.q[j];
    }
    for (r, &i) in act.iter().enumerate() {
        for j in 0..n {
            kkt[(n + r, j)] = problem.a[(i, j)];
            kkt[(j, n + r)] = problem.a[(i, j)];
        }
        rhs[n + r] = if sides[i] == Side::Lower { problem.l[i] } else { problem.u[i] };
    }
    let lu = kkt.lu();
    if lu.determinant().abs() < 1e-12 {
        return None;
    }
    let sol = lu.solve(&rhs)?;
    let x = sol.rows(0, n).into_owned();
    let ax = &problem.a * &x;
    for i in 0..sides.len() {
        let tol = 1e-9 * (1.0 + ax[i].abs());
        if ax[i] < problem.l[i] - tol || ax[i] > problem.u[i] + tol {
            return None;
        }
    }
    for (r, &i) in act.iter().enumerate() {
        let y = sol[n + r];
        let equality = problem.l[i] == problem.u[i];
        if equality {
            continue;
        }
        match sides[i] {
            Side::Lower if y > 1e-9 => return None,
            Side::Upper if y < -1e-9 => return None,
            _ => {}
        }
    }
    let objective = 0.5 * x.dot(&(&problem.p * &x)) + problem.q.dot(&x);
    Some(OracleResult::Optimal { x, objective })
}

/// Random strictly convex QP with up to 6 variables and 8 rows. About one
/// in six is made infeasible by a pair of parallel rows with disjoint
/// ranges.
pub fn random_qp(seed: u64) -> QpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=6);
    let m = rng.random_range(1..=8);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let g = DMatrix::from_fn(n, n, |_, _| normal());
    let p = &g * g.transpose() + DMatrix::identity(n, n) * 0.1;
    let q = DVector::from_fn(n, |_, _| 3.0 * normal());
    let mut a = DMatrix::from_fn(m, n, |_, _| normal());
    let center = DVector::from_fn(n, |_, _| normal());
    let ac = &a * &center;
    let mut l = DVector::zeros(m);
    let mut u = DVector::zeros(m);
    for i in 0..m {
        let kind: f64 = rng.random();
        let lo = ac[i] - rng.random_range(0.0..2.0);
        let hi = ac[i] + rng.random_range(0.0..2.0);
        (l[i], u[i]) = if kind < 0.25 {
            (lo, f64::INFINITY)
        } else if kind < 0.5 {
            (f64::NEG_INFINITY, hi)
        } else if kind < 0.58 {
            (ac[i], ac[i])
        } else {
            (lo, hi)
        };
    }
    if m >= 2 && rng.random_bool(1.0 / 6.0) {
        // row 1 = c · row 0, asked to lie strictly above c · (row 0's range)
        let c = rng.random_range(0.5..2.0);
        let row0 = a.row(0).into_owned();
        a.row_mut(1).copy_from(&(row0 * c));
        let top = if u[0].is_finite() { u[0] } else { ac[0] + 1.0 };
        if !u[0].is_finite() {
            u[0] = top;
        }
        l[1] = c * top + rng.random_range(0.5..2.0);
        u[1] = f64::INFINITY;
    }
    QpProblem { p, q, a, l, u }
}

// ------------------------------------------------------ plant and model

/// Forward Euler of the vehicle with actuator lag, written out directly.
/// Returns `(position, velocity, force)` after each step.
pub fn euler_rollout(
    mut s: f64,
    mut v: f64,
    mut f: f64,
    command: f64,
    steps: usize,
    dt: f64,
    p: &PlantParams,
) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let drag = p.road_load_c0 + p.road_load_c1 * v + p.road_load_c2 * v * v;
        let v_next = if v == 0.0 && f <= drag { 0.0 } else { (v + dt * (f - drag) / p.mass).max(0.0) };
        s += dt * v;
        f += dt * (command - f) / p.actuator_time_constant;
        v = v_next;
        out.push((s, v, f));
    }
    out
}

/// Penalized MPC objective of an input sequence, rolled out on the affine
/// model linearized at the initial speed. Every soft family carries one
/// slack that must cover its worst row.
pub fn penalized_objective(
    x0: (f64, f64, f64),
    front: &[f64],
    inputs: &[(f64, f64)],
    cfg: &MpcConfig,
    terminal: &CoastingSet,
) -> f64 {
    let m = &cfg.model;
    let v_ref = x0.1;
    let offset = m.road_load_c0 - m.road_load_c2 * v_ref * v_ref;
    let slope = m.road_load_c1 + 2.0 * m.road_load_c2 * v_ref;
    let (mut d, mut v, mut f) = x0;
    let mut cost = 0.0;
    let mut gap = 0.0_f64;
    let mut speed = 0.0_f64;
    for (k, &(ft, fb)) in inputs.iter().enumerate() {
        cost += cfg.q_weight * (v - cfg.v_des).powi(2) + cfg.b_weight * fb * fb;
        gap = gap.max(cfg.d_min - d);
        speed = speed.max(cfg.v_min - v).max(v - cfg.v_max);
        let d_next = d + cfg.dt * (front[k] - v);
        let v_next = v + cfg.dt * (f - (offset + slope * v)) / m.mass;
        let f_next = f + cfg.dt * (ft + fb - f) / m.actuator_time_constant;
        (d, v, f) = (d_next, v_next, f_next);
    }
    cost += cfg.q_weight * (v - cfg.v_des).powi(2);
    gap = gap.max(cfg.d_min - d);
    speed = speed.max(cfg.v_min - v).max(v - cfg.v_max);
    // the floor piece duplicates the last gap row
    let term = terminal
        .secants
        .iter()
        .filter(|s| s.slope != 0.0 || s.intercept > cfg.d_min)
        .map(|s| s.intercept + s.slope * v - d)
        .fold(0.0_f64, f64::max);
    cost + cfg.slack_weight * (gap.max(0.0) + speed.max(0.0)) + cfg.terminal_slack_weight * term
}

/// Best penalized objective over every input sequence whose forces take
/// `levels` evenly spaced values per channel on the input box.
pub fn best_discrete_rollout(
    x0: (f64, f64, f64),
    front: &[f64],
    cfg: &MpcConfig,
    terminal: &CoastingSet,
    levels: usize,
) -> f64 {
    let n = cfg.horizon;
    let level = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * i as f64 / (levels - 1) as f64;
    let per_stage = levels * levels;
    let total = per_stage.pow(n as u32);
    let mut best = f64::INFINITY;
    let mut inputs = vec![(0.0, 0.0); n];
    for code in 0..total {
        let mut c = code;
        for slot in inputs.iter_mut() {
            let stage = c % per_stage;
            c /= per_stage;
            *slot = (level(stage % levels, 0.0, cfg.f_max), level(stage / levels, cfg.f_min, 0.0));
        }
        best = best.min(penalized_objective(x0, front, &inputs, cfg, terminal));
    }
    best
}

/// Smallest gap along a zero-input coast from `(gap, v)` with the wheel
/// force at zero, against a front that starts at `front_v` and brakes at
/// `decel` to a stop. Stops once the gap can no longer shrink.
pub fn coast_min_gap(gap: f64, v: f64, front: FrontAssumption, cfg: &MpcConfig) -> f64 {
    let (mut vf, decel) = match front {
        FrontAssumption::MatchEgo { decel } => (v, decel),
        FrontAssumption::Fixed { velocity, decel } => (velocity, decel),
    };
    let m = &cfg.model;
    let (mut d, mut v) = (gap, v);
    let mut lowest = d;
    for _ in 0..cfg.coast_steps {
        if (decel == 0.0 || vf == 0.0) && v <= vf {
            break;
        }
        d += cfg.dt * (vf - v);
        let drag = m.road_load_c0 + m.road_load_c1 * v + m.road_load_c2 * v * v;
        v = if v <= 0.0 { 0.0 } else { (v - cfg.dt * drag / m.mass).max(0.0) };
        vf = (vf - decel * cfg.dt).max(0.0);
        lowest = lowest.min(d);
    }
    lowest
}
