mod common;

use common::{enumerate_active_sets, random_qp, OracleResult};
use ecoacc::qp::{solve_qp, QpProblem, QpSettings, SolverStatus};
use nalgebra::{dmatrix, dvector, DMatrix, DVector};

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[test]
fn random_qps_match_active_set_enumeration() {
    let settings = QpSettings::default();
    let mut infeasible = 0;
    for seed in 0..200 {
        let problem = random_qp(seed);
        let sol = solve_qp(&problem, None, &settings);
        match enumerate_active_sets(&problem) {
            OracleResult::Optimal { objective, .. } => {
                assert_eq!(sol.status, SolverStatus::Optimal, "seed {seed}: {problem:?}");
                let gap = relative_gap(sol.objective, objective);
                assert!(gap <= 1e-6, "seed {seed}: {} vs {objective} ({gap:e})", sol.objective);
            }
            OracleResult::Infeasible => {
                infeasible += 1;
                assert_eq!(sol.status, SolverStatus::Infeasible, "seed {seed}: {problem:?}");
            }
        }
    }
    assert!(infeasible > 10, "only {infeasible} infeasible instances generated");
}

#[test]
fn single_variable_target() {
    // (x - 5)^2 up to a constant, inside a box that never binds
    let problem = QpProblem {
        p: dmatrix![2.0],
        q: dvector![-10.0],
        a: dmatrix![1.0],
        l: dvector![-1e3],
        u: dvector![1e3],
    };
    let sol = solve_qp(&problem, None, &QpSettings::default());
    assert_eq!(sol.status, SolverStatus::Optimal);
    assert!((sol.x[0] - 5.0).abs() <= 1e-4, "{}", sol.x[0]);
}

#[test]
fn unconstrained_minimum_is_the_newton_step() {
    let p = dmatrix![4.0, 1.0; 1.0, 2.0];
    let q = dvector![1.0, -1.0];
    let problem = QpProblem {
        p: p.clone(),
        q: q.clone(),
        a: DMatrix::zeros(0, 2),
        l: DVector::zeros(0),
        u: DVector::zeros(0),
    };
    let sol = solve_qp(&problem, None, &QpSettings::default());
    let expected = p.lu().solve(&(-q)).unwrap();
    assert_eq!(sol.status, SolverStatus::Optimal);
    assert!((sol.x - expected).amax() < 1e-9);
}

#[test]
fn inactive_rows_do_not_move_the_optimum() {
    for seed in 0..40 {
        let problem = random_qp(1000 + seed);
        let OracleResult::Optimal { x, .. } = enumerate_active_sets(&problem) else { continue };
        let ax = &problem.a * &x;
        let slack: Vec<usize> = (0..problem.m())
            .filter(|&i| ax[i] > problem.l[i] + 1e-3 && ax[i] < problem.u[i] - 1e-3)
            .collect();
        let Some(&drop) = slack.first() else { continue };
        let keep: Vec<usize> = (0..problem.m()).filter(|&i| i != drop).collect();
        let reduced = QpProblem {
            a: DMatrix::from_fn(keep.len(), problem.n(), |r, j| problem.a[(keep[r], j)]),
            l: DVector::from_fn(keep.len(), |r, _| problem.l[keep[r]]),
            u: DVector::from_fn(keep.len(), |r, _| problem.u[keep[r]]),
            ..problem.clone()
        };
        let full = solve_qp(&problem, None, &QpSettings::default());
        let less = solve_qp(&reduced, None, &QpSettings::default());
        assert_eq!(full.status, SolverStatus::Optimal);
        assert_eq!(less.status, SolverStatus::Optimal);
        assert!(relative_gap(full.objective, less.objective) < 1e-6, "seed {seed}");
    }
}

#[test]
fn warm_start_at_the_optimum_converges_at_once() {
    let problem = random_qp(3);
    let cold = solve_qp(&problem, None, &QpSettings::default());
    assert_eq!(cold.status, SolverStatus::Optimal);
    let warm = ecoacc::qp::WarmStart { x: cold.x.clone(), y: cold.y.clone() };
    let again = solve_qp(&problem, Some(&warm), &QpSettings::default());
    assert_eq!(again.status, SolverStatus::Optimal);
    assert!(again.iterations <= cold.iterations.max(1));
    assert!(relative_gap(again.objective, cold.objective) < 1e-9);
}

#[test]
fn contradictory_bounds_are_infeasible() {
    // x >= 1 and x <= -1
    let problem = QpProblem {
        p: dmatrix![1.0],
        q: dvector![0.0],
        a: dmatrix![1.0; 1.0],
        l: dvector![1.0, f64::NEG_INFINITY],
        u: dvector![f64::INFINITY, -1.0],
    };
    assert_eq!(enumerate_active_sets(&problem), OracleResult::Infeasible);
    assert_eq!(solve_qp(&problem, None, &QpSettings::default()).status, SolverStatus::Infeasible);
}
