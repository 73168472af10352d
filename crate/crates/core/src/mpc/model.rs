use nalgebra::{DMatrix, DVector};

use super::{MpcConfig, PredictionState};
use crate::plant::{ControlInput, PlantParams};

/// Road load with the quadratic term linearized about a reference speed:
/// `offset + slope·v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineRoadLoad {
    pub offset: f64,
    pub slope: f64,
}

impl AffineRoadLoad {
    pub fn linearized(params: &PlantParams, v_ref: f64) -> Self {
        Self {
            offset: params.road_load_c0 - params.road_load_c2 * v_ref * v_ref,
            slope: params.road_load_c1 + 2.0 * params.road_load_c2 * v_ref,
        }
    }

    pub fn force(&self, v: f64) -> f64 {
        self.offset + self.slope * v
    }
}

/// One step of the controller's prediction model.
pub fn prediction_model_f(
    x: &PredictionState,
    u: &ControlInput,
    v_p_k: f64,
    road_load: &AffineRoadLoad,
    config: &MpcConfig,
) -> PredictionState {
    let dt = config.dt;
    let m = &config.model;
    PredictionState {
        d: x.d + dt * (v_p_k - x.v),
        v: x.v + (dt / m.mass) * (x.f - road_load.force(x.v)),
        f: x.f + (dt / m.actuator_time_constant) * (u.f_t + u.f_b - x.f),
        d_tl: x.d_tl.map(|d| d - dt * x.v),
    }
}

/// One state component over `k = 0..=N` written as `constant + coeff · z`,
/// where `z` stacks the inputs `[F_t(0), F_b(0), F_t(1), F_b(1), ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRows {
    pub constant: DVector<f64>,
    pub coeff: DMatrix<f64>,
}

impl StateRows {
    fn new(horizon: usize) -> Self {
        Self {
            constant: DVector::zeros(horizon + 1),
            coeff: DMatrix::zeros(horizon + 1, 2 * horizon),
        }
    }

    pub fn eval(&self, k: usize, inputs: &[f64]) -> f64 {
        self.constant[k]
            + self
                .coeff
                .row(k)
                .iter()
                .zip(inputs)
                .map(|(c, z)| c * z)
                .sum::<f64>()
    }
}

/// Dense condensing of the affine model: every predicted state as an
/// affine function of the stacked inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Condensed {
    pub horizon: usize,
    pub d: StateRows,
    pub v: StateRows,
    pub f: StateRows,
    pub d_tl: Option<StateRows>,
}

impl Condensed {
    pub fn build(
        x0: &PredictionState,
        front: &[f64],
        road_load: &AffineRoadLoad,
        config: &MpcConfig,
    ) -> Self {
        let n = config.horizon;
        let dt = config.dt;
        let mass = config.model.mass;
        let tau = config.model.actuator_time_constant;
        let mut d = StateRows::new(n);
        let mut v = StateRows::new(n);
        let mut f = StateRows::new(n);
        let mut d_tl = x0.d_tl.map(|_| StateRows::new(n));

        d.constant[0] = x0.d;
        v.constant[0] = x0.v;
        f.constant[0] = x0.f;
        if let (Some(rows), Some(val)) = (d_tl.as_mut(), x0.d_tl) {
            rows.constant[0] = val;
        }

        let a_v = 1.0 - dt * road_load.slope / mass;
        let a_f = 1.0 - dt / tau;
        let b_f = dt / tau;
        for (k, &front_v) in front.iter().enumerate().take(n) {
            d.constant[k + 1] = d.constant[k] + dt * (front_v - v.constant[k]);
            v.constant[k + 1] =
                a_v * v.constant[k] + (dt / mass) * f.constant[k] - dt * road_load.offset / mass;
            f.constant[k + 1] = a_f * f.constant[k];
            for j in 0..2 * n {
                let (dk, vk, fk) = (d.coeff[(k, j)], v.coeff[(k, j)], f.coeff[(k, j)]);
                d.coeff[(k + 1, j)] = dk - dt * vk;
                v.coeff[(k + 1, j)] = a_v * vk + (dt / mass) * fk;
                f.coeff[(k + 1, j)] = a_f * fk;
            }
            f.coeff[(k + 1, 2 * k)] += b_f;
            f.coeff[(k + 1, 2 * k + 1)] += b_f;
            if let Some(rows) = d_tl.as_mut() {
                rows.constant[k + 1] = rows.constant[k] - dt * v.constant[k];
                for j in 0..2 * n {
                    rows.coeff[(k + 1, j)] = rows.coeff[(k, j)] - dt * v.coeff[(k, j)];
                }
            }
        }
        Self { horizon: n, d, v, f, d_tl }
    }

    pub fn state(&self, k: usize, inputs: &[f64]) -> PredictionState {
        PredictionState {
            d: self.d.eval(k, inputs),
            v: self.v.eval(k, inputs),
            f: self.f.eval(k, inputs),
            d_tl: self.d_tl.as_ref().map(|r| r.eval(k, inputs)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_speeds_preserve_gap() {
        let cfg = MpcConfig::default();
        let lin = AffineRoadLoad::linearized(&cfg.model, 10.0);
        let x = PredictionState { d: 30.0, v: 10.0, f: 0.0, d_tl: None };
        let next = prediction_model_f(&x, &ControlInput::COAST, 10.0, &lin, &cfg);
        assert_eq!(next.d, 30.0);
    }

    #[test]
    fn force_free_motion() {
        let mut cfg = MpcConfig::default();
        cfg.model.road_load_c0 = 0.0;
        cfg.model.road_load_c1 = 0.0;
        cfg.model.road_load_c2 = 0.0;
        let lin = AffineRoadLoad::linearized(&cfg.model, 7.0);
        let x = PredictionState { d: 30.0, v: 7.0, f: 0.0, d_tl: Some(12.0) };
        let next = prediction_model_f(&x, &ControlInput::COAST, 5.0, &lin, &cfg);
        assert_eq!(next.v, 7.0);
        assert_eq!(next.f, 0.0);
        assert!((next.d_tl.unwrap() - 11.3).abs() < 1e-12);
    }

    #[test]
    fn linearization_is_exact_at_reference() {
        let p = PlantParams::default();
        let lin = AffineRoadLoad::linearized(&p, 12.0);
        assert!((lin.force(12.0) - crate::plant::resistive_force(12.0, &p)).abs() < 1e-9);
    }
}
