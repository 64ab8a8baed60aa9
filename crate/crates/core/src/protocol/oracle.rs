//! Closed-form error dynamics, an independent reference for the step
//! engine.
//!
//! Error coordinates: `y_bar = y - 1 (x) x`, `chi_raw = x - x*`,
//! `e_x = x - x_hat`, `e_y = y - y_hat`. Each step falls in one of four
//! cases determined by the DoS status at `k` and `k + 1`:
//!
//! | case | DoS at k | DoS at k+1 |
//! |------|----------|------------|
//! | 1    | no       | no         |
//! | 2    | no       | yes        |
//! | 3    | yes      | yes        |
//! | 4    | yes      | no         |

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::quantization::UniformQuantizer;
use crate::topology::ProtocolMatrices;

use super::NetworkState;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorState {
    pub y_bar: DVector<f64>,
    pub chi_raw: DVector<f64>,
    pub e_x: DVector<f64>,
    pub e_y: DVector<f64>,
}

impl ErrorState {
    pub fn from_network(state: &NetworkState, x_star: &[f64]) -> Self {
        let n = state.x.len();
        Self {
            y_bar: DVector::from_fn(n * n, |c, _| state.y[c] - state.x[c % n]),
            chi_raw: DVector::from_fn(n, |i, _| state.x[i] - x_star[i]),
            e_x: DVector::from_fn(n, |i, _| state.x[i] - state.x_hat[i]),
            e_y: DVector::from_fn(n * n, |c, _| state.y[c] - state.y_hat[c]),
        }
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d = |a: &DVector<f64>, b: &DVector<f64>| (a - b).amax();
        d(&self.y_bar, &other.y_bar)
            .max(d(&self.chi_raw, &other.chi_raw))
            .max(d(&self.e_x, &other.e_x))
            .max(d(&self.e_y, &other.e_y))
    }
}

/// Case id for a `(dos_now, dos_next)` pair.
pub fn case_of(dos_now: bool, dos_next: bool) -> u8 {
    match (dos_now, dos_next) {
        (false, false) => 1,
        (false, true) => 2,
        (true, true) => 3,
        (true, false) => 4,
    }
}

/// Everything the recursions need besides the error state.
#[derive(Debug, Clone, Copy)]
pub struct OracleContext<'a> {
    pub game: &'a GameSpec,
    pub x_star: &'a [f64],
    pub matrices: &'a ProtocolMatrices,
    pub delta: f64,
    pub q_x: UniformQuantizer,
    pub q_y: UniformQuantizer,
}

/// `w - theta q(w / theta)`, the residual after one quantized update.
fn quantized_residual(w: &DVector<f64>, theta: f64, q: &UniformQuantizer) -> DVector<f64> {
    w.map(|v| v - theta * q.quantize_finite(v / theta).0 as f64)
}

/// One step of the case-`case_id` recursion with scaling `theta`.
pub fn oracle_step(err: &ErrorState, theta: f64, case_id: u8, ctx: &OracleContext<'_>) -> Result<ErrorState> {
    if !(1..=4).contains(&case_id) {
        return Err(Error::UnknownCase(case_id));
    }
    if case_id == 3 {
        return Ok(err.clone());
    }
    let n = ctx.x_star.len();
    if case_id == 4 {
        return Ok(ErrorState {
            y_bar: err.y_bar.clone(),
            chi_raw: err.chi_raw.clone(),
            e_x: quantized_residual(&err.e_x, theta, &ctx.q_x),
            e_y: quantized_residual(&err.e_y, theta, &ctx.q_y),
        });
    }

    // cases 1 and 2 share the plant and estimation updates
    let x: Vec<f64> = (0..n).map(|i| err.chi_raw[i] + ctx.x_star[i]).collect();
    let y: Vec<f64> = (0..n * n).map(|c| err.y_bar[c] + x[c % n]).collect();
    let p = DVector::from_vec(ctx.game.mixed_pseudogradient(&x, &y)?);
    let m = ctx.matrices;
    let h = m.h;
    let stacked_p = DVector::from_fn(n * n, |c, _| p[c % n]);
    let stacked_ex = DVector::from_fn(n * n, |c, _| err.e_x[c % n]);
    let a0_ex = &m.a0 * &stacked_ex;

    let y_bar = &m.h_matrix * &err.y_bar + &stacked_p * ctx.delta + (&m.s * &err.e_y) * h - &a0_ex * h;
    let chi_raw = &err.chi_raw - &p * ctx.delta;
    let w_x = &err.e_x - &p * ctx.delta;
    let w_y = &m.g_matrix * &err.e_y - (&m.s * &err.y_bar) * h - &a0_ex * h;

    let (e_x, e_y) = if case_id == 1 {
        (quantized_residual(&w_x, theta, &ctx.q_x), quantized_residual(&w_y, theta, &ctx.q_y))
    } else {
        (w_x, w_y)
    };
    Ok(ErrorState { y_bar, chi_raw, e_x, e_y })
}

/// `theta` after a step of the given case.
pub fn oracle_theta(theta: f64, case_id: u8, gamma1: f64) -> f64 {
    match case_id {
        2 | 3 => theta,
        _ => theta * gamma1,
    }
}

/// States divided by `theta`, and `pi_norm = |[|beta|, |chi|]|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledCoordinates {
    pub beta: DVector<f64>,
    pub chi: DVector<f64>,
    pub xi_x: DVector<f64>,
    pub xi_y: DVector<f64>,
    pub pi_norm: f64,
}

pub fn scaled_coordinates(err: &ErrorState, theta: f64) -> Result<ScaledCoordinates> {
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter { name: "theta", reason: format!("must be positive, got {theta}") });
    }
    let beta = &err.y_bar / theta;
    let chi = &err.chi_raw / theta;
    let pi_norm = beta.norm().hypot(chi.norm());
    Ok(ScaledCoordinates { beta, chi, xi_x: &err.e_x / theta, xi_y: &err.e_y / theta, pi_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Topology;

    fn setup() -> (GameSpec, Vec<f64>, ProtocolMatrices) {
        let game = GameSpec::new(vec![1.0, 2.0, 1.5], vec![1.0, -2.0, 3.0], 0.3, 0.5).unwrap();
        let x_star = game.solve_ne().unwrap();
        let m = Topology::path(3).unwrap().build_matrices(0.3).unwrap();
        (game, x_star, m)
    }

    fn sample_err(n: usize) -> ErrorState {
        ErrorState {
            y_bar: DVector::from_fn(n * n, |c, _| (c as f64 * 0.37).sin()),
            chi_raw: DVector::from_fn(n, |i, _| i as f64 - 1.0),
            e_x: DVector::from_fn(n, |i, _| 0.1 * i as f64),
            e_y: DVector::from_fn(n * n, |c, _| 0.05 * (c as f64).cos()),
        }
    }

    #[test]
    fn case_three_is_identity() {
        let (game, x_star, m) = setup();
        let q = UniformQuantizer::new(5).unwrap();
        let ctx = OracleContext { game: &game, x_star: &x_star, matrices: &m, delta: 0.05, q_x: q, q_y: q };
        let e = sample_err(3);
        assert_eq!(oracle_step(&e, 1.0, 3, &ctx).unwrap(), e);
    }

    #[test]
    fn case_four_dead_zone_fixpoint() {
        let (game, x_star, m) = setup();
        let q = UniformQuantizer::new(5).unwrap();
        let ctx = OracleContext { game: &game, x_star: &x_star, matrices: &m, delta: 0.05, q_x: q, q_y: q };
        let e = sample_err(3);
        // |e| <= 0.2 < theta / 2
        assert_eq!(oracle_step(&e, 1.0, 4, &ctx).unwrap(), e);
    }

    #[test]
    fn unknown_case() {
        let (game, x_star, m) = setup();
        let q = UniformQuantizer::new(5).unwrap();
        let ctx = OracleContext { game: &game, x_star: &x_star, matrices: &m, delta: 0.05, q_x: q, q_y: q };
        assert_eq!(oracle_step(&sample_err(3), 1.0, 0, &ctx), Err(Error::UnknownCase(0)));
        assert_eq!(oracle_step(&sample_err(3), 1.0, 5, &ctx), Err(Error::UnknownCase(5)));
    }

    #[test]
    fn case_mapping() {
        assert_eq!(
            [case_of(false, false), case_of(false, true), case_of(true, true), case_of(true, false)],
            [1, 2, 3, 4]
        );
        assert_eq!(oracle_theta(2.0, 1, 0.5), 1.0);
        assert_eq!(oracle_theta(2.0, 2, 0.5), 2.0);
    }

    #[test]
    fn scaled_coordinates_basics() {
        let z = ErrorState {
            y_bar: DVector::zeros(4),
            chi_raw: DVector::zeros(2),
            e_x: DVector::zeros(2),
            e_y: DVector::zeros(4),
        };
        assert_eq!(scaled_coordinates(&z, 3.0).unwrap().pi_norm, 0.0);
        let e = sample_err(2);
        let s = scaled_coordinates(&e, 1.0).unwrap();
        assert_eq!((s.beta, s.chi, s.xi_x, s.xi_y), (e.y_bar.clone(), e.chi_raw.clone(), e.e_x.clone(), e.e_y.clone()));
        assert!(scaled_coordinates(&e, 0.0).is_err());
    }
}
