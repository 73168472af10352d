//! Condensed QP for one MPC solve.
//!
//! Decision vector:
//!
//! ```text
//! z = [F_t(0), F_b(0), ..., F_t(N-1), F_b(N-1), s_gap, s_vel, s_term, s_tl]
//! ```
//!
//! Row families, in order: input boxes (2N), slack signs (4), gap
//! `k = 0..=N` (N+1), lower and upper speed `k = 0..=N` (2(N+1)), one
//! terminal row per envelope piece (at most K) and, when the red-light rule fires, stop-line rows
//! `k = 0..=N` (N+1). Each soft family shares one slack.
//!
//! Forces enter the QP in kN so that the input columns, the tracking
//! gradient and the curvature are all of order one.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::{
    coasting::CoastingSet, cost::Trajectory, model::AffineRoadLoad, model::Condensed, MpcConfig,
    PredictionState, RedTrigger,
};
use crate::plant::ControlInput;
use crate::qp::{solve_qp, QpProblem, QpSettings, QpSolution, SolverStatus, WarmStart};
use crate::sensing::{FrontPrediction, SpatSnapshot};
use crate::signals::Phase;

const SLACKS: usize = 4;
/// N per QP force unit.
pub const FORCE_UNIT: f64 = 1000.0;
/// Curvature added on every input so the last-stage traction (which no
/// cost term sees) has a unique minimizer.
const INPUT_REGULARIZATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowFamily {
    InputBox,
    SlackSign,
    Gap,
    VelocityLower,
    VelocityUpper,
    Terminal,
    RedLight,
}

impl RowFamily {
    pub const ALL: [RowFamily; 7] = [
        RowFamily::InputBox,
        RowFamily::SlackSign,
        RowFamily::Gap,
        RowFamily::VelocityLower,
        RowFamily::VelocityUpper,
        RowFamily::Terminal,
        RowFamily::RedLight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RowFamily::InputBox => "input_box",
            RowFamily::SlackSign => "slack_sign",
            RowFamily::Gap => "gap",
            RowFamily::VelocityLower => "velocity_lower",
            RowFamily::VelocityUpper => "velocity_upper",
            RowFamily::Terminal => "terminal",
            RowFamily::RedLight => "red_light",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpLayout {
    pub horizon: usize,
    pub families: Vec<(RowFamily, Range<usize>)>,
}

impl QpLayout {
    pub fn inputs(&self) -> usize {
        2 * self.horizon
    }

    pub fn variables(&self) -> usize {
        self.inputs() + SLACKS
    }

    pub fn slack_gap(&self) -> usize {
        self.inputs()
    }

    pub fn slack_velocity(&self) -> usize {
        self.inputs() + 1
    }

    pub fn slack_terminal(&self) -> usize {
        self.inputs() + 2
    }

    pub fn slack_red(&self) -> usize {
        self.inputs() + 3
    }

    pub fn rows(&self) -> usize {
        self.families.last().map_or(0, |(_, r)| r.end)
    }

    pub fn range(&self, family: RowFamily) -> Option<Range<usize>> {
        self.families
            .iter()
            .find(|(f, _)| *f == family)
            .map(|(_, r)| r.clone())
    }

    pub fn count(&self, family: RowFamily) -> usize {
        self.range(family).map_or(0, |r| r.len())
    }

    pub fn family_of(&self, row: usize) -> Option<RowFamily> {
        self.families
            .iter()
            .find(|(_, r)| r.contains(&row))
            .map(|(f, _)| *f)
    }
}

/// A built MPC problem together with what is needed to interpret its
/// solution.
#[derive(Debug, Clone)]
pub struct MpcQp {
    pub problem: QpProblem,
    pub layout: QpLayout,
    pub condensed: Condensed,
    pub x0: PredictionState,
    pub front: FrontPrediction,
    pub road_load: AffineRoadLoad,
    /// `J(z) = 1/2 z'Pz + q'z + cost_constant` once slack terms are removed.
    pub cost_constant: f64,
    pub red_active: bool,
    config: MpcConfig,
}

struct PinnedSlacks {
    problem: QpProblem,
    /// Rows of the full problem kept, in order.
    rows: Vec<usize>,
    values: [f64; SLACKS],
    /// Row that forces each nonzero slack.
    binding: [Option<usize>; SLACKS],
    /// Inputs held at a box bound `(value, at_upper)` because a forcing row
    /// depends on them and only reaches its bound at that corner.
    fixed: Vec<Option<(f64, bool)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    /// Box-clipped optimal inputs for `k = 0..N`.
    pub inputs: Vec<ControlInput>,
    pub trajectory: Trajectory,
    /// Tracking plus braking cost; slack penalties excluded.
    pub objective: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    pub polished: bool,
    pub solve_time: f64,
    /// `[gap, velocity, terminal, red]`.
    pub slacks: [f64; 4],
    pub raw: QpSolution,
}

impl MpcSolution {
    pub fn first_input(&self) -> ControlInput {
        self.inputs[0]
    }
}

fn red_rule_fires(x0: &PredictionState, spat: &SpatSnapshot, config: &MpcConfig) -> bool {
    let (Some(sig), Some(_)) = (spat.as_ref(), x0.d_tl) else {
        return false;
    };
    match config.red_trigger {
        RedTrigger::AnyRed => sig.red_in_horizon(),
        RedTrigger::Arrival => {
            let n = sig.schedule.len() - 1;
            let arrival = if x0.v > 0.0 {
                ((sig.d_tl.max(0.0) / (x0.v * config.dt)).ceil() as usize).min(n)
            } else {
                n
            };
            sig.schedule[arrival..].contains(&Phase::Red)
        }
    }
}

/// Assembles the condensed QP. The road load is linearized about `x0.v`.
pub fn build_qp(
    x0: &PredictionState,
    front: &FrontPrediction,
    spat: &SpatSnapshot,
    config: &MpcConfig,
    coasting: &CoastingSet,
) -> MpcQp {
    let n = config.horizon;
    assert_eq!(front.horizon(), n, "front prediction length must match the horizon");
    let road_load = AffineRoadLoad::linearized(&config.model, x0.v);
    let mut x0 = *x0;
    if spat.is_none() {
        x0.d_tl = None;
    } else if let Some(sig) = spat {
        x0.d_tl = Some(sig.d_tl);
    }
    let condensed = Condensed::build(&x0, &front.velocities, &road_load, config);
    let red_active = red_rule_fires(&x0, spat, config);

    // a flat piece at the floor repeats the last gap row, and the pair would
    // make the active constraints rank deficient
    let pieces: Vec<_> = coasting
        .pieces()
        .into_iter()
        .filter(|s| !(s.slope == 0.0 && s.intercept <= config.d_min))
        .collect();
    let nu = 2 * n;
    let nz = nu + SLACKS;
    let mut families = Vec::new();
    let mut next = 0;
    let mut push = |f: RowFamily, len: usize| {
        families.push((f, next..next + len));
        next += len;
    };
    push(RowFamily::InputBox, nu);
    push(RowFamily::SlackSign, SLACKS);
    push(RowFamily::Gap, n + 1);
    push(RowFamily::VelocityLower, n + 1);
    push(RowFamily::VelocityUpper, n + 1);
    push(RowFamily::Terminal, pieces.len());
    if red_active {
        push(RowFamily::RedLight, n + 1);
    }
    let layout = QpLayout { horizon: n, families };
    let m = layout.rows();

    let mut a = DMatrix::zeros(m, nz);
    let mut l = DVector::zeros(m);
    let mut u = DVector::zeros(m);
    let inf = f64::INFINITY;

    for k in 0..n {
        a[(2 * k, 2 * k)] = 1.0;
        l[2 * k] = 0.0;
        u[2 * k] = config.f_max / FORCE_UNIT;
        a[(2 * k + 1, 2 * k + 1)] = 1.0;
        l[2 * k + 1] = config.f_min / FORCE_UNIT;
        u[2 * k + 1] = 0.0;
    }
    for i in 0..SLACKS {
        a[(nu + i, nu + i)] = 1.0;
        l[nu + i] = 0.0;
        u[nu + i] = inf;
    }
    let mut row = layout.range(RowFamily::Gap).unwrap().start;
    for k in 0..=n {
        a.view_mut((row, 0), (1, nu)).copy_from(&(condensed.d.coeff.row(k) * FORCE_UNIT));
        a[(row, layout.slack_gap())] = 1.0;
        l[row] = config.d_min - condensed.d.constant[k];
        u[row] = inf;
        row += 1;
    }
    for k in 0..=n {
        a.view_mut((row, 0), (1, nu)).copy_from(&(condensed.v.coeff.row(k) * FORCE_UNIT));
        a[(row, layout.slack_velocity())] = 1.0;
        l[row] = config.v_min - condensed.v.constant[k];
        u[row] = inf;
        row += 1;
    }
    for k in 0..=n {
        a.view_mut((row, 0), (1, nu)).copy_from(&(condensed.v.coeff.row(k) * FORCE_UNIT));
        a[(row, layout.slack_velocity())] = -1.0;
        l[row] = -inf;
        u[row] = config.v_max - condensed.v.constant[k];
        row += 1;
    }
    for s in &pieces {
        // d_N - slope·v_N + s_term >= intercept
        let coeff = (condensed.d.coeff.row(n) - condensed.v.coeff.row(n) * s.slope) * FORCE_UNIT;
        a.view_mut((row, 0), (1, nu)).copy_from(&coeff);
        a[(row, layout.slack_terminal())] = 1.0;
        l[row] = s.intercept - condensed.d.constant[n] + s.slope * condensed.v.constant[n];
        u[row] = inf;
        row += 1;
    }
    if red_active {
        let rows = condensed.d_tl.as_ref().expect("red rows need a stop line");
        for k in 0..=n {
            a.view_mut((row, 0), (1, nu)).copy_from(&(rows.coeff.row(k) * FORCE_UNIT));
            a[(row, layout.slack_red())] = 1.0;
            l[row] = -rows.constant[k];
            u[row] = inf;
            row += 1;
        }
    }
    debug_assert_eq!(row, m);

    // Σ_k Q (c_k + g_k z - v_des)^2 + Σ_k B F_b(k)^2
    let mut p = DMatrix::zeros(nz, nz);
    let mut q = DVector::zeros(nz);
    let mut cost_constant = 0.0;
    for k in 0..=n {
        let g = condensed.v.coeff.row(k) * FORCE_UNIT;
        let r = condensed.v.constant[k] - config.v_des;
        let mut block = p.view_mut((0, 0), (nu, nu));
        block += g.transpose() * &g * (2.0 * config.q_weight);
        for j in 0..nu {
            q[j] += 2.0 * config.q_weight * r * g[j];
        }
        cost_constant += config.q_weight * r * r;
    }
    for k in 0..n {
        p[(2 * k + 1, 2 * k + 1)] += 2.0 * config.b_weight * FORCE_UNIT * FORCE_UNIT;
    }
    for j in 0..nu {
        p[(j, j)] += INPUT_REGULARIZATION;
    }
    q[layout.slack_gap()] = config.slack_weight;
    q[layout.slack_velocity()] = config.slack_weight;
    q[layout.slack_terminal()] = config.terminal_slack_weight;
    q[layout.slack_red()] = config.slack_weight;

    MpcQp {
        problem: QpProblem { p, q, a, l, u },
        layout,
        condensed,
        x0,
        front: front.clone(),
        road_load,
        cost_constant,
        red_active,
        config: config.clone(),
    }
}

impl MpcQp {
    pub fn config(&self) -> &MpcConfig {
        &self.config
    }

    /// Tracking plus braking cost of an input vector (slacks ignored).
    pub fn cost_of(&self, z: &DVector<f64>) -> f64 {
        let nu = self.layout.inputs();
        let mut zi = z.clone();
        for j in nu..zi.len() {
            zi[j] = 0.0;
        }
        let mut p = self.problem.p.clone();
        for j in 0..nu {
            p[(j, j)] -= INPUT_REGULARIZATION;
        }
        let q = self.problem.q.rows(0, nu);
        0.5 * zi.dot(&(&p * &zi)) + q.dot(&zi.rows(0, nu)) + self.cost_constant
    }

    /// Box-clips the input part of `z` in place.
    pub fn clip_inputs(&self, z: &mut DVector<f64>) {
        for k in 0..self.layout.horizon {
            z[2 * k] = z[2 * k].clamp(0.0, self.config.f_max / FORCE_UNIT);
            z[2 * k + 1] = z[2 * k + 1].clamp(self.config.f_min / FORCE_UNIT, 0.0);
        }
    }

    /// Decision vector for stacked forces in N and zero slacks.
    pub fn decision_vector(&self, forces: &[f64]) -> DVector<f64> {
        let nu = self.layout.inputs();
        let mut z = DVector::zeros(self.layout.variables());
        for j in 0..nu {
            z[j] = forces[j] / FORCE_UNIT;
        }
        z
    }

    /// Largest violation of any row for stacked forces in N (in the units
    /// of each row), with each slack at the least value no input in the
    /// box avoids. Zero slacks when the state leaves every row reachable.
    pub fn unavoidable_violation(&self, forces: &[f64]) -> f64 {
        let mut z = self.decision_vector(forces);
        let nu = self.layout.inputs();
        let pinned = self.pinned_slacks();
        for k in 0..SLACKS {
            z[nu + k] = pinned.values[k];
        }
        self.problem.max_violation(&z)
    }

    pub fn trajectory(&self, z: &DVector<f64>) -> Trajectory {
        let nu = self.layout.inputs();
        let inputs_flat: Vec<f64> = z.as_slice()[..nu].iter().map(|x| x * FORCE_UNIT).collect();
        Trajectory {
            states: (0..=self.layout.horizon)
                .map(|k| self.condensed.state(k, &inputs_flat))
                .collect(),
            inputs: (0..self.layout.horizon)
                .map(|k| ControlInput { f_t: inputs_flat[2 * k], f_b: inputs_flat[2 * k + 1] })
                .collect(),
        }
    }

    /// Cold start with the slack sign multipliers at their value for an
    /// inactive soft constraint, `-weight`; ramping them up from zero costs
    /// the splitting iteration thousands of steps.
    pub fn cold_start(&self) -> WarmStart {
        let x = DVector::zeros(self.layout.variables());
        let mut y = DVector::zeros(self.layout.rows());
        if let Some(rows) = self.layout.range(RowFamily::SlackSign) {
            let nu = self.layout.inputs();
            for (i, row) in rows.enumerate() {
                y[row] = -self.problem.q[nu + i];
            }
        }
        WarmStart { x, y }
    }

    fn input_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.layout.horizon;
        let lo = (0..2 * n).map(|j| if j % 2 == 0 { 0.0 } else { self.config.f_min / FORCE_UNIT }).collect();
        let hi = (0..2 * n).map(|j| if j % 2 == 0 { self.config.f_max / FORCE_UNIT } else { 0.0 }).collect();
        (lo, hi)
    }

    /// A pinned solution as a starting point for the full problem, with
    /// pinned slacks and the sign rows of unpinned ones at `-weight`.
    fn embed_pinned(&self, pinned: &PinnedSlacks, sol: &QpSolution) -> WarmStart {
        let nu = self.layout.inputs();
        let mut start = self.cold_start();
        start.x.rows_mut(0, nu).copy_from(&sol.x);
        for k in 0..SLACKS {
            start.x[nu + k] = pinned.values[k];
        }
        for (r, &i) in pinned.rows.iter().enumerate() {
            start.y[i] = sol.y[r];
        }
        if let Some(sign) = self.layout.range(RowFamily::SlackSign) {
            for (k, row) in sign.enumerate() {
                if pinned.values[k] > 0.0 {
                    start.y[row] = 0.0;
                }
            }
        }
        start
    }

    /// The same problem with every slack fixed at the least value a single
    /// row of its family forces over the input box. Nonzero pins come from
    /// rows that the inputs cannot fix in time (the first stages sit behind
    /// the actuator lag and react only weakly). Slack columns and slack
    /// sign rows are removed and the pins are folded into the row bounds.
    fn pinned_slacks(&self) -> PinnedSlacks {
        let nu = self.layout.inputs();
        let full = &self.problem;
        let sign = self.layout.range(RowFamily::SlackSign).unwrap_or(0..0);
        let rows: Vec<usize> = (0..self.layout.rows()).filter(|i| !sign.contains(i)).collect();
        let (lo, hi) = self.input_bounds();
        // range of a_i·u over the input box
        let reach = |i: usize| {
            (0..nu).fold((0.0, 0.0), |(min, max), j| {
                let (a, b) = (full.a[(i, j)] * lo[j], full.a[(i, j)] * hi[j]);
                (min + a.min(b), max + a.max(b))
            })
        };
        let mut values = [0.0; SLACKS];
        let mut binding = [None; SLACKS];
        for (k, value) in values.iter_mut().enumerate() {
            let col = nu + k;
            for &i in &rows {
                let c = full.a[(i, col)];
                if c == 0.0 {
                    continue;
                }
                let (min, max) = reach(i);
                // a_i·u + c·s must reach [l, u]
                let need = if c > 0.0 { (full.l[i] - max) / c } else { (full.u[i] - min) / c };
                if need > *value {
                    *value = need;
                    binding[k] = Some(i);
                }
            }
        }
        // A forcing row that the inputs reach is met only with each of its
        // inputs at the bound that pushes it furthest; those inputs are held
        // there and the row, now implied by the box, is left out.
        let mut fixed: Vec<Option<(f64, bool)>> = vec![None; nu];
        let mut reached = Vec::new();
        for k in 0..SLACKS {
            let Some(i) = binding[k].filter(|_| values[k] > 0.0) else { continue };
            if (0..nu).all(|j| full.a[(i, j)] == 0.0) {
                continue;
            }
            let c = full.a[(i, nu + k)];
            let mut consistent = true;
            for j in (0..nu).filter(|&j| full.a[(i, j)] != 0.0) {
                let up = (full.a[(i, j)] > 0.0) == (c > 0.0);
                let corner = if up { (hi[j], true) } else { (lo[j], false) };
                consistent &= fixed[j].is_none_or(|f| f == corner);
                fixed[j] = Some(corner);
            }
            reached.push(i);
            if !consistent {
                // two rows want opposite corners; leave it to the solver
                fixed = vec![None; nu];
                reached.clear();
                break;
            }
        }
        let rows: Vec<usize> = rows.into_iter().filter(|i| !reached.contains(i)).collect();
        let shift = |i: usize| (0..SLACKS).map(|k| full.a[(i, nu + k)] * values[k]).sum::<f64>();
        let bound = |i: usize, upper: bool| {
            let box_row = self.layout.range(RowFamily::InputBox).filter(|r| r.contains(&i));
            match (box_row, fixed.get(i).copied().flatten()) {
                (Some(_), Some((value, _))) => value,
                _ if upper => full.u[i] - shift(i),
                _ => full.l[i] - shift(i),
            }
        };
        let problem = QpProblem {
            p: full.p.view((0, 0), (nu, nu)).into_owned(),
            q: full.q.rows(0, nu).into_owned(),
            a: DMatrix::from_fn(rows.len(), nu, |r, j| full.a[(rows[r], j)]),
            l: DVector::from_fn(rows.len(), |r, _| bound(rows[r], false)),
            u: DVector::from_fn(rows.len(), |r, _| bound(rows[r], true)),
        };
        PinnedSlacks { problem, rows, values, binding, fixed }
    }

    /// Embeds a solution of the pinned problem. Each slack's multiplier
    /// balance goes to the row that pins it (its sign row, or a violated
    /// row no input reaches); `None` when that multiplier comes out with
    /// the wrong sign, i.e. some soft family's multipliers exceed its
    /// penalty weight and a larger slack would pay off, or when the pin
    /// cannot be certified this way.
    fn lift(&self, pinned: &PinnedSlacks, sol: &QpSolution) -> Option<QpSolution> {
        let nu = self.layout.inputs();
        let mut x = DVector::zeros(self.layout.variables());
        x.rows_mut(0, nu).copy_from(&sol.x);
        let mut y = DVector::zeros(self.layout.rows());
        for (r, &i) in pinned.rows.iter().enumerate() {
            y[i] = sol.y[r];
        }
        let sign = self.layout.range(RowFamily::SlackSign)?;
        for (k, sign_row) in sign.enumerate() {
            let col = nu + k;
            x[col] = pinned.values[k];
            let (row, c) = match pinned.binding[k] {
                None => (sign_row, 1.0),
                Some(i) if (0..nu).all(|j| self.problem.a[(i, j)] == 0.0) => (i, self.problem.a[(i, col)]),
                Some(i) if !pinned.rows.contains(&i) => (i, self.problem.a[(i, col)]),
                // pinned by a row the inputs reach but whose corner was not
                // held: its multiplier is already fixed by the input columns
                Some(_) => return None,
            };
            let others: f64 = pinned
                .rows
                .iter()
                .filter(|&&i| i != row)
                .map(|&i| self.problem.a[(i, col)] * y[i])
                .sum();
            let weight = self.problem.q[col];
            // weight + others + c·y_row = 0, with y pushing the slack up
            let multiplier = -(weight + others) / c;
            let wrong_sign = if c > 0.0 { multiplier > 0.0 } else { multiplier < 0.0 };
            if wrong_sign && multiplier.abs() > 1e-9 * weight.abs().max(1.0) {
                return None;
            }
            y[row] = if wrong_sign { 0.0 } else { multiplier };
            if !pinned.rows.contains(&row) && row != sign_row {
                // the held inputs' box rows took the forcing row's share of
                // the input stationarity; hand it back
                for j in (0..nu).filter(|&j| self.problem.a[(row, j)] != 0.0) {
                    y[j] -= self.problem.a[(row, j)] * y[row];
                }
            }
        }
        for (j, f) in pinned.fixed.iter().enumerate() {
            let Some((_, at_upper)) = *f else { continue };
            // a held input must be pressed against its bound, not pulled off it
            let tol = 1e-9 * (1.0 + sol.y.amax());
            if (at_upper && y[j] < -tol) || (!at_upper && y[j] > tol) {
                return None;
            }
        }
        Some(QpSolution { x, y, ..sol.clone() })
    }

    /// Solves with the slacks pinned at their forced values first and falls
    /// back to the full soft problem only when that is infeasible or some
    /// soft constraint's multipliers exceed their penalty. With exact penalties
    /// both give the same optimum whenever the first succeeds; skipping the
    /// slack columns spares the splitting iteration their huge linear
    /// weights.
    pub fn solve(&self, warm: Option<&WarmStart>) -> MpcSolution {
        let cold;
        let warm = match warm {
            Some(w) => w,
            None => {
                cold = self.cold_start();
                &cold
            }
        };
        let settings = self.config.solver;
        let nu = self.layout.inputs();
        let pinned = self.pinned_slacks();
        let pinned_warm = WarmStart {
            x: warm.x.rows(0, nu).into_owned(),
            y: DVector::from_fn(pinned.rows.len(), |r, _| warm.y[pinned.rows[r]]),
        };
        let first = solve_qp(&pinned.problem, Some(&pinned_warm), &settings);
        let lifted = match first.status {
            SolverStatus::Infeasible => None,
            _ => self.lift(&pinned, &first),
        };
        let raw = match lifted {
            Some(sol) => sol,
            None => {
                let budget = settings.max_iter.saturating_sub(first.iterations).max(1);
                let soft_settings = QpSettings { max_iter: budget, ..settings };
                let start = match first.status {
                    SolverStatus::Infeasible => warm.clone(),
                    _ => self.embed_pinned(&pinned, &first),
                };
                let mut sol = solve_qp(&self.problem, Some(&start), &soft_settings);
                sol.iterations += first.iterations;
                sol.solve_time += first.solve_time;
                sol
            }
        };
        let mut z = raw.x.clone();
        self.clip_inputs(&mut z);
        let nu = self.layout.inputs();
        let trajectory = self.trajectory(&z);
        MpcSolution {
            inputs: trajectory.inputs.clone(),
            objective: self.cost_of(&z),
            trajectory,
            status: raw.status,
            iterations: raw.iterations,
            polished: raw.polished,
            solve_time: raw.solve_time,
            slacks: [z[nu], z[nu + 1], z[nu + 2], z[nu + 3]],
            raw,
        }
    }

    /// Warm start for this problem from a solution of the previous step's
    /// problem: stage-indexed entries move forward one stage and the last
    /// stage is repeated.
    pub fn shifted_warm_start(&self, prev: &MpcQp, sol: &QpSolution) -> WarmStart {
        let n = self.layout.horizon;
        let nu = self.layout.inputs();
        let mut x = DVector::zeros(self.layout.variables());
        if prev.layout.horizon == n {
            for k in 0..n {
                let src = (k + 1).min(n - 1);
                x[2 * k] = sol.x[2 * src];
                x[2 * k + 1] = sol.x[2 * src + 1];
            }
            for i in 0..SLACKS {
                x[nu + i] = sol.x[nu + i];
            }
        }
        let mut y = DVector::zeros(self.layout.rows());
        for (family, dst) in &self.layout.families {
            let Some(src) = prev.layout.range(*family) else { continue };
            match family {
                RowFamily::InputBox => {
                    if src.len() == dst.len() {
                        for k in 0..n {
                            let s = (k + 1).min(n - 1);
                            y[dst.start + 2 * k] = sol.y[src.start + 2 * s];
                            y[dst.start + 2 * k + 1] = sol.y[src.start + 2 * s + 1];
                        }
                    }
                }
                RowFamily::SlackSign | RowFamily::Terminal => {
                    if src.len() == dst.len() {
                        for i in 0..dst.len() {
                            y[dst.start + i] = sol.y[src.start + i];
                        }
                    }
                }
                _ => {
                    if src.len() == dst.len() {
                        let len = dst.len();
                        for i in 0..len {
                            y[dst.start + i] = sol.y[src.start + (i + 1).min(len - 1)];
                        }
                    }
                }
            }
        }
        WarmStart { x, y }
    }
}
