use super::{MpcConfig, PredictionState};
use crate::plant::ControlInput;

/// Predicted states for `k = 0..=N` and inputs for `k = 0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<PredictionState>,
    pub inputs: Vec<ControlInput>,
}

/// `Σ_{k=0..N} Q (v_k - v_des)^2 + Σ_{k=0..N-1} B F_b,k^2`.
pub fn eval_cost(trajectory: &Trajectory, config: &MpcConfig) -> f64 {
    debug_assert_eq!(trajectory.states.len(), trajectory.inputs.len() + 1);
    let tracking: f64 = trajectory
        .states
        .iter()
        .map(|x| config.q_weight * (x.v - config.v_des).powi(2))
        .sum();
    let braking: f64 = trajectory
        .inputs
        .iter()
        .map(|u| config.b_weight * u.f_b * u.f_b)
        .sum();
    tracking + braking
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_cost_at_target_without_braking() {
        let cfg = MpcConfig::default();
        let x = PredictionState { v: cfg.v_des, ..Default::default() };
        let traj = Trajectory { states: vec![x; 4], inputs: vec![ControlInput { f_t: 500.0, f_b: 0.0 }; 3] };
        assert_eq!(eval_cost(&traj, &cfg), 0.0);
    }

    #[test]
    fn single_step_arithmetic() {
        let cfg = MpcConfig { q_weight: 1.0, b_weight: 0.01, v_des: 10.0, ..Default::default() };
        let traj = Trajectory {
            states: vec![
                PredictionState { v: 12.0, ..Default::default() },
                PredictionState { v: 10.0, ..Default::default() },
            ],
            inputs: vec![ControlInput { f_t: 0.0, f_b: -100.0 }],
        };
        assert!((eval_cost(&traj, &cfg) - 104.0).abs() < 1e-12);
    }
}
