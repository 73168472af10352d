//! Dense convex QP solver based on operator splitting (ADMM).
//!
//! Solves
//!
//! ```text
//!     minimize    1/2 x' P x + q' x
//!     subject to  l <= A x <= u
//! ```
//!
//! with `P` positive semidefinite. The iteration follows the usual
//! splitting over the constraint box: one cached linear solve with
//! `P + σI + A' diag(ρ) A`, a projection onto `[l, u]`, and a dual update,
//! with Ruiz equilibration and occasional ρ adaptation. Once the residuals
//! are small the active set is read off the duals and the reduced KKT system
//! is solved directly ("polishing"); a polished point that checks out as
//! primal and dual feasible is returned as the exact optimum.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub l: DVector<f64>,
    pub u: DVector<f64>,
}

impl QpProblem {
    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.l.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }

    /// Largest bound violation of `A x` (0 when feasible).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let ax = &self.a * x;
        (0..self.m())
            .map(|i| (self.l[i] - ax[i]).max(ax[i] - self.u[i]).max(0.0))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_infeasible: f64,
    pub max_iter: usize,
    pub scaling_iters: usize,
    pub adapt_interval: usize,
    pub polish: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            eps_abs: 1e-4,
            eps_rel: 1e-4,
            eps_infeasible: 1e-5,
            max_iter: 4000,
            scaling_iters: 10,
            adapt_interval: 25,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolverStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

impl SolverStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverStatus::Optimal => "Optimal",
            SolverStatus::MaxIter => "MaxIter",
            SolverStatus::Infeasible => "Infeasible",
        }
    }
}

impl std::str::FromStr for SolverStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Optimal" => Ok(SolverStatus::Optimal),
            "MaxIter" => Ok(SolverStatus::MaxIter),
            "Infeasible" => Ok(SolverStatus::Infeasible),
            other => Err(format!("unknown solver status `{other}`")),
        }
    }
}

/// Primal/dual starting point in the unscaled problem space.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Constraint multipliers: negative at active lower bounds, positive at
    /// active upper bounds.
    pub y: DVector<f64>,
    pub status: SolverStatus,
    pub objective: f64,
    pub iterations: usize,
    pub polished: bool,
    pub solve_time: f64,
}

struct Scaling {
    d: DVector<f64>,
    e: DVector<f64>,
    c: f64,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Ruiz equilibration of the KKT matrix plus a scalar cost scaling.
fn equilibrate(
    p: &mut DMatrix<f64>,
    q: &mut DVector<f64>,
    a: &mut DMatrix<f64>,
    iters: usize,
) -> Scaling {
    let (n, m) = (q.len(), a.nrows());
    let mut d = DVector::from_element(n, 1.0);
    let mut e = DVector::from_element(m, 1.0);
    let mut c = 1.0;
    let clamp = |x: f64| if x < 1e-4 { 1.0 } else { x.min(1e4) };
    for _ in 0..iters {
        let mut dj = DVector::zeros(n);
        for j in 0..n {
            let pn = p.column(j).iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
            let an = a.column(j).iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
            dj[j] = 1.0 / clamp(pn.max(an)).sqrt();
        }
        let mut ei = DVector::zeros(m);
        for i in 0..m {
            let an = a.row(i).iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
            ei[i] = 1.0 / clamp(an).sqrt();
        }
        for j in 0..n {
            for i in 0..n {
                p[(i, j)] *= dj[i] * dj[j];
            }
            for i in 0..m {
                a[(i, j)] *= ei[i] * dj[j];
            }
            q[j] *= dj[j];
        }
        d.component_mul_assign(&dj);
        e.component_mul_assign(&ei);

        let mean_p = if n > 0 {
            (0..n)
                .map(|j| p.column(j).iter().fold(0.0_f64, |acc, x| acc.max(x.abs())))
                .sum::<f64>()
                / n as f64
        } else {
            1.0
        };
        // scale by the curvature alone: a few large linear weights (exact
        // penalties) must not shrink every other gradient below tolerance
        let basis = if mean_p >= 1e-4 { mean_p } else { inf_norm(q) };
        let gamma = 1.0 / clamp(basis);
        *p *= gamma;
        *q *= gamma;
        c *= gamma;
    }
    Scaling { d, e, c }
}

/// Largest residual entry relative to the size of its own terms.
fn relative_residual(r: &DVector<f64>, terms: &[&DVector<f64>]) -> f64 {
    (0..r.len())
        .map(|i| r[i].abs() / (1.0 + terms.iter().fold(0.0_f64, |acc, t| acc.max(t[i].abs()))))
        .fold(0.0, f64::max)
}

/// Componentwise primal residual test.
fn converged(ax: &DVector<f64>, z: &DVector<f64>, eps_abs: f64, eps_rel: f64) -> bool {
    (0..ax.len()).all(|i| (ax[i] - z[i]).abs() <= eps_abs + eps_rel * ax[i].abs().max(z[i].abs()))
}

/// Componentwise stationarity test: each coordinate of `Px + q + A'y` is
/// small against the largest of its own terms, so large linear weights on
/// some variables do not loosen the test for the others.
fn stationary(px: &DVector<f64>, q: &DVector<f64>, aty: &DVector<f64>, eps_abs: f64, eps_rel: f64) -> bool {
    (0..q.len()).all(|j| {
        let r = (px[j] + q[j] + aty[j]).abs();
        r <= eps_abs + eps_rel * px[j].abs().max(q[j].abs()).max(aty[j].abs())
    })
}

/// Solves `problem`, optionally from a warm start.
pub fn solve_qp(problem: &QpProblem, warm: Option<&WarmStart>, settings: &QpSettings) -> QpSolution {
    let started = Instant::now();
    let mut sol = Admm::new(problem, settings).run(warm);
    sol.solve_time = started.elapsed().as_secs_f64();
    sol
}

struct Admm<'a> {
    problem: &'a QpProblem,
    settings: &'a QpSettings,
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: DMatrix<f64>,
    l: DVector<f64>,
    u: DVector<f64>,
    at: DMatrix<f64>,
    scaling: Scaling,
    rho: DVector<f64>,
    rho_base: f64,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

const INF_BOUND: f64 = 1e20;
const RHO_EQ_FACTOR: f64 = 1e3;


impl<'a> Admm<'a> {
    fn new(problem: &'a QpProblem, settings: &'a QpSettings) -> Self {
        let mut p = problem.p.clone();
        let mut q = problem.q.clone();
        let mut a = problem.a.clone();
        let scaling = equilibrate(&mut p, &mut q, &mut a, settings.scaling_iters);
        let scale_bound = |b: f64, e: f64| {
            if b.abs() >= INF_BOUND || b.is_infinite() {
                b.signum() * f64::INFINITY
            } else {
                b * e
            }
        };
        let l = DVector::from_iterator(
            problem.m(),
            (0..problem.m()).map(|i| scale_bound(problem.l[i], scaling.e[i])),
        );
        let u = DVector::from_iterator(
            problem.m(),
            (0..problem.m()).map(|i| scale_bound(problem.u[i], scaling.e[i])),
        );
        let at = a.transpose();
        let rho_base = settings.rho;
        let rho = Self::rho_vector(&l, &u, rho_base);
        let chol = Self::factor(&p, &a, &at, &rho, settings.sigma);
        Self { problem, settings, p, q, a, l, u, at, scaling, rho, rho_base, chol }
    }

    fn rho_vector(l: &DVector<f64>, u: &DVector<f64>, rho: f64) -> DVector<f64> {
        DVector::from_iterator(
            l.len(),
            (0..l.len()).map(|i| {
                if l[i] == u[i] {
                    rho * RHO_EQ_FACTOR
                } else if l[i].is_infinite() && u[i].is_infinite() {
                    1e-6
                } else {
                    rho
                }
            }),
        )
    }

    fn factor(
        p: &DMatrix<f64>,
        a: &DMatrix<f64>,
        at: &DMatrix<f64>,
        rho: &DVector<f64>,
        sigma: f64,
    ) -> nalgebra::Cholesky<f64, nalgebra::Dyn> {
        let mut ra = a.clone();
        for (i, mut row) in ra.row_iter_mut().enumerate() {
            row *= rho[i];
        }
        let mut k = p + at * ra;
        for i in 0..k.nrows() {
            k[(i, i)] += sigma;
        }
        k.cholesky().expect("P + σI + A'ρA is positive definite for σ > 0")
    }

    fn project(&self, v: &mut DVector<f64>) {
        for i in 0..v.len() {
            v[i] = v[i].clamp(self.l[i], self.u[i]);
        }
    }

    fn run(mut self, warm: Option<&WarmStart>) -> QpSolution {
        let (n, m) = (self.problem.n(), self.problem.m());
        let s = self.settings;
        let (mut x, mut y) = match warm {
            Some(w) if w.x.len() == n && w.y.len() == m => (
                w.x.component_div(&self.scaling.d),
                w.y.component_div(&self.scaling.e) * self.scaling.c,
            ),
            _ => (DVector::zeros(n), DVector::zeros(m)),
        };
        let mut z = &self.a * &x;
        self.project(&mut z);
        if s.polish && warm.is_some() {
            // an unchanged active set is recovered without iterating
            if let Some((xp, yp)) = self.polish(&z, &y) {
                return self.finish(&xp, &yp, SolverStatus::Optimal, 0, true);
            }
        }

        let mut eps_abs = s.eps_abs;
        let mut eps_rel = s.eps_rel;
        let mut met_base_tolerance = false;
        let mut best_unpolished: Option<(DVector<f64>, DVector<f64>)> = None;

        for iter in 1..=s.max_iter {
            let y_prev = y.clone();
            let mut rhs = &x * s.sigma - &self.q;
            let w = z.component_mul(&self.rho) - &y;
            rhs += &self.at * w;
            let x_tilde = self.chol.solve(&rhs);
            let z_tilde = &self.a * &x_tilde;
            x = &x_tilde * s.alpha + &x * (1.0 - s.alpha);
            let z_relax = &z_tilde * s.alpha + &z * (1.0 - s.alpha);
            let mut z_next = &z_relax + y.component_div(&self.rho);
            self.project(&mut z_next);
            y += (&z_relax - &z_next).component_mul(&self.rho);
            z = z_next;

            let ax = &self.a * &x;
            let px = &self.p * &x;
            let aty = &self.at * &y;

            if converged(&ax, &z, eps_abs, eps_rel) && stationary(&px, &self.q, &aty, eps_abs, eps_rel) {
                if eps_abs >= s.eps_abs {
                    met_base_tolerance = true;
                    best_unpolished = Some((x.clone(), y.clone()));
                }
                if !s.polish {
                    return self.finish(&x, &y, SolverStatus::Optimal, iter, false);
                }
                if let Some((xp, yp)) = self.polish(&z, &y) {
                    return self.finish(&xp, &yp, SolverStatus::Optimal, iter, true);
                }
                // wrong active set guess: keep iterating towards a sharper one
                if eps_abs <= 1e-13 {
                    let (bx, by) = best_unpolished.take().unwrap_or((x.clone(), y.clone()));
                    return self.finish(&bx, &by, SolverStatus::Optimal, iter, false);
                }
                eps_abs *= 1e-2;
                eps_rel *= 1e-2;
            }

            if self.primal_infeasible(&(&y - &y_prev)) {
                return self.finish(&x, &y, SolverStatus::Infeasible, iter, false);
            }

            if s.polish && s.adapt_interval > 0 && iter % s.adapt_interval == 0 {
                // the active set usually settles long before the residuals do
                if let Some((xp, yp)) = self.polish(&z, &y) {
                    return self.finish(&xp, &yp, SolverStatus::Optimal, iter, true);
                }
            }

            if s.adapt_interval > 0 && iter % s.adapt_interval == 0 {
                let num = relative_residual(&(&ax - &z), &[&ax, &z]);
                let den = relative_residual(&(&px + &self.q + &aty), &[&px, &self.q, &aty]);
                let ratio = (num / den.max(1e-30)).sqrt();
                let new_rho = (self.rho_base * ratio).clamp(1e-6, 1e6);
                if new_rho > 5.0 * self.rho_base || new_rho < 0.2 * self.rho_base {
                    self.rho_base = new_rho;
                    self.rho = Self::rho_vector(&self.l, &self.u, new_rho);
                    self.chol = Self::factor(&self.p, &self.a, &self.at, &self.rho, s.sigma);
                }
            }
        }

        match best_unpolished {
            Some((bx, by)) if met_base_tolerance => {
                self.finish(&bx, &by, SolverStatus::Optimal, s.max_iter, false)
            }
            _ => self.finish(&x, &y, SolverStatus::MaxIter, s.max_iter, false),
        }
    }

    fn primal_infeasible(&self, dy: &DVector<f64>) -> bool {
        let norm = inf_norm(dy);
        if norm < 1e-12 {
            return false;
        }
        let eps = self.settings.eps_infeasible * norm;
        if inf_norm(&(&self.at * dy)) > eps {
            return false;
        }
        let mut support = 0.0;
        for i in 0..dy.len() {
            let di = dy[i];
            if di > eps * 1e-3 {
                if self.u[i].is_infinite() {
                    return false;
                }
                support += self.u[i] * di;
            } else if di < -eps * 1e-3 {
                if self.l[i].is_infinite() {
                    return false;
                }
                support += self.l[i] * di;
            }
        }
        support < -eps
    }

    /// Solves the equality-constrained QP on the active set read off the
    /// iterate and accepts the result only if it satisfies the full KKT
    /// conditions.
    fn polish(
        &self,
        z: &DVector<f64>,
        y: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let active: Vec<Option<f64>> = (0..z.len())
            .map(|i| {
                if self.l[i] == self.u[i] || (self.l[i].is_finite() && z[i] - self.l[i] < -y[i]) {
                    Some(self.l[i])
                } else if self.u[i].is_finite() && self.u[i] - z[i] < y[i] {
                    Some(self.u[i])
                } else {
                    None
                }
            })
            .collect();
        let (xp, yp) = self.solve_active(&active)?;
        self.kkt_holds(&xp, &yp, &active).then_some((xp, yp))
    }

    fn solve_active(&self, active: &[Option<f64>]) -> Option<(DVector<f64>, DVector<f64>)> {
        let (n, m) = (self.q.len(), active.len());
        let rows: Vec<(usize, f64)> =
            active.iter().enumerate().filter_map(|(i, b)| b.map(|b| (i, b))).collect();
        let na = rows.len();
        let dim = n + na;
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&self.p);
        for (r, (i, _)) in rows.iter().enumerate() {
            for j in 0..n {
                kkt[(n + r, j)] = self.a[(*i, j)];
                kkt[(j, n + r)] = self.a[(*i, j)];
            }
        }
        let mut rhs = DVector::zeros(dim);
        for j in 0..n {
            rhs[j] = -self.q[j];
        }
        for (r, (_, b)) in rows.iter().enumerate() {
            rhs[n + r] = *b;
        }
        let delta = 1e-9;
        let mut reg = kkt.clone();
        for j in 0..n {
            reg[(j, j)] += delta;
        }
        for r in 0..na {
            reg[(n + r, n + r)] -= delta;
        }
        let lu = reg.lu();
        let mut sol = lu.solve(&rhs)?;
        for _ in 0..8 {
            let resid = &rhs - &kkt * &sol;
            if inf_norm(&resid) < 1e-14 * (1.0 + inf_norm(&rhs)) {
                break;
            }
            sol += lu.solve(&resid)?;
        }
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let xp = sol.rows(0, n).into_owned();
        let mut yp = DVector::zeros(m);
        for (r, (i, _)) in rows.iter().enumerate() {
            yp[*i] = sol[n + r];
        }
        Some((xp, yp))
    }

    fn kkt_holds(&self, xp: &DVector<f64>, yp: &DVector<f64>, active: &[Option<f64>]) -> bool {
        let (n, m) = (xp.len(), yp.len());
        let axp = &self.a * xp;
        let feas_tol = 1e-8 * (1.0 + inf_norm(&axp));
        // a multiplier is wrong-signed when it moves some column's
        // stationarity by more than round-off relative to that column
        let px = &self.p * xp;
        let column_scale: Vec<f64> = (0..n).map(|j| 1.0 + self.q[j].abs() + px[j].abs()).collect();
        for i in 0..m {
            if axp[i] < self.l[i] - feas_tol || axp[i] > self.u[i] + feas_tol {
                return false;
            }
            if self.l[i] == self.u[i] || active[i].is_none() {
                continue;
            }
            let dual_tol = (0..n)
                .filter(|&j| self.a[(i, j)] != 0.0)
                .map(|j| 1e-9 * column_scale[j] / self.a[(i, j)].abs())
                .fold(f64::INFINITY, f64::min);
            let at_lower = self.l[i].is_finite() && (axp[i] - self.l[i]).abs() <= feas_tol;
            let at_upper = self.u[i].is_finite() && (axp[i] - self.u[i]).abs() <= feas_tol;
            if (yp[i] < -dual_tol && !at_lower) || (yp[i] > dual_tol && !at_upper) {
                return false;
            }
        }
        let aty = &self.at * yp;
        stationary(&px, &self.q, &aty, 1e-12, 1e-7)
    }

    fn finish(
        &self,
        x: &DVector<f64>,
        y: &DVector<f64>,
        status: SolverStatus,
        iterations: usize,
        polished: bool,
    ) -> QpSolution {
        let xs = x.component_mul(&self.scaling.d);
        let ys = y.component_mul(&self.scaling.e) / self.scaling.c;
        let objective = self.problem.objective(&xs);
        QpSolution { x: xs, y: ys, status, objective, iterations, polished, solve_time: 0.0 }
    }
}
