//! Design-constant synthesis: gain `h`, step size `delta`, zoom factor
//! `gamma1`, the scaled-state bound `C` and the quantizer levels.

use log::{debug, warn};
use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::game::{GameConstants, GameSpec};
use crate::topology::{MatrixNorms, Topology};

/// Default fraction of `h_max` used for the consensus gain.
pub const DEFAULT_H_SAFETY: f64 = 0.99;

/// The 2x2 comparison matrix coupling scaled estimation and NE errors:
/// `[[|H| + delta l sqrt(N), delta l N], [delta l N, sqrt(1 - 2 delta mu + (delta l)^2)]]`.
pub fn hbar(norm_h: f64, delta: f64, l: f64, mu: f64, n: usize) -> Result<Matrix2<f64>> {
    let nf = n as f64;
    let disc = 1.0 - 2.0 * delta * mu + (delta * l).powi(2);
    if !(disc >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("1 - 2 delta mu + (delta l)^2 = {disc} is negative"),
        });
    }
    let off = delta * l * nf;
    Ok(Matrix2::new(norm_h + delta * l * nf.sqrt(), off, off, disc.sqrt()))
}

/// Spectral radius of [`hbar`] from the closed-form symmetric 2x2 eigenvalues.
pub fn rho_hbar(norm_h: f64, delta: f64, l: f64, mu: f64, n: usize) -> Result<f64> {
    let m = hbar(norm_h, delta, l, mu, n)?;
    Ok(sym2_spectral_radius(m[(0, 0)], m[(0, 1)], m[(1, 1)]))
}

fn sym2_spectral_radius(a: f64, b: f64, d: f64) -> f64 {
    let mean = 0.5 * (a + d);
    let r = (0.5 * (a - d)).hypot(b);
    (mean + r).abs().max((mean - r).abs())
}

/// `B(delta) = (1 - |H| - l sqrt(N) delta)(1 - sqrt(1 - 2 mu delta + l^2 delta^2)) - N^2 l^2 delta^2`.
pub fn b_margin(delta: f64, norm_h: f64, l: f64, mu: f64, n: usize) -> f64 {
    let nf = n as f64;
    let disc = (1.0 - 2.0 * mu * delta + (l * delta).powi(2)).max(0.0);
    (1.0 - norm_h - l * nf.sqrt() * delta) * (1.0 - disc.sqrt()) - (nf * l * delta).powi(2)
}

/// Step-size feasibility: `delta < 2 mu / l^2`, `delta < (1 - |H|) / (l sqrt(N))`
/// and `B(delta) > 0`.
pub fn delta_feasible(delta: f64, norm_h: f64, l: f64, mu: f64, n: usize) -> bool {
    delta > 0.0
        && delta < 2.0 * mu / (l * l)
        && delta < (1.0 - norm_h) / (l * (n as f64).sqrt())
        && b_margin(delta, norm_h, l, mu, n) > 0.0
}

/// Variant of [`delta_feasible`] with `mu` in place of `l` in the second
/// bound; reported as a diagnostic only.
pub fn delta_feasible_mu_variant(delta: f64, norm_h: f64, l: f64, mu: f64, n: usize) -> bool {
    delta > 0.0
        && delta < 2.0 * mu / (l * l)
        && delta < (1.0 - norm_h) / (mu * (n as f64).sqrt())
        && b_margin(delta, norm_h, l, mu, n) > 0.0
}

/// Feasible step size minimizing `rho(Hbar)`: logarithmic grid search
/// followed by golden-section refinement around the best grid point.
pub fn select_delta(norm_h: f64, l: f64, mu: f64, n: usize) -> Result<f64> {
    if !(norm_h < 1.0) || !(norm_h >= 0.0) {
        return Err(Error::NoFeasibleDelta(format!("|H| = {norm_h} must lie in [0, 1)")));
    }
    if !(l > 0.0 && mu > 0.0) {
        return Err(Error::NoFeasibleDelta(format!("need l, mu > 0, got l = {l}, mu = {mu}")));
    }
    let upper = (2.0 * mu / (l * l)).min((1.0 - norm_h) / (l * (n as f64).sqrt()));
    let objective = |d: f64| -> f64 {
        if delta_feasible(d, norm_h, l, mu, n) {
            rho_hbar(norm_h, d, l, mu, n).unwrap_or(f64::INFINITY)
        } else {
            f64::INFINITY
        }
    };

    const POINTS: usize = 400;
    const DECADES: f64 = 10.0;
    let grid: Vec<f64> = (0..POINTS).map(|i| upper * 10f64.powf(-DECADES * (1.0 - i as f64 / POINTS as f64))).collect();
    let (best_idx, best_val) =
        grid.iter().map(|&d| objective(d)).enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).expect("grid is non-empty");
    if !best_val.is_finite() {
        return Err(Error::NoFeasibleDelta(format!(
            "no grid point in (0, {upper:e}) satisfies the feasibility conditions"
        )));
    }

    let mut lo = if best_idx == 0 { grid[0] * 0.5 } else { grid[best_idx - 1] };
    let mut hi = if best_idx + 1 < POINTS { grid[best_idx + 1] } else { upper };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2);
        }
    }
    let (refined, refined_val) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    let delta = if refined_val <= best_val { refined } else { grid[best_idx] };
    debug!("select_delta: upper = {upper:e}, delta = {delta:e}");
    Ok(delta)
}

/// Output of [`bound_c`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayBound {
    pub c: f64,
    pub c_gamma: f64,
    pub gamma_decay: f64,
}

/// Bound `C` on the scaled states.
///
/// `Hbar` is symmetric, so `|(Hbar/gamma1)^k| = (rho/gamma1)^k` exactly:
/// `C_gamma = 1` and `gamma = rho(Hbar) / gamma1`.
#[allow(clippy::too_many_arguments)]
pub fn bound_c(
    rho_hbar: f64,
    gamma1: f64,
    theta0: f64,
    h: f64,
    norms: &MatrixNorms,
    c_x0: f64,
    c_xstar: f64,
    n: usize,
) -> Result<DecayBound> {
    if !(gamma1 > rho_hbar && gamma1 < 1.0) {
        return Err(Error::InvalidGamma1 { gamma1, rho_hbar });
    }
    if !(theta0 > 0.0) {
        return Err(Error::InvalidParameter { name: "theta0", reason: format!("must be positive, got {theta0}") });
    }
    let nf = n as f64;
    let c_gamma = 1.0;
    let gamma_decay = rho_hbar / gamma1;
    let c_bar = (gamma_decay * c_gamma).max(1.0);
    let initial = c_bar / theta0 * (nf * nf * c_x0 * c_x0 + nf * (c_xstar + c_x0).powi(2)).sqrt();
    let steady = c_gamma * h * nf * (norms.s + norms.a0) / (2.0 * gamma1 * gamma1 * (1.0 - gamma_decay));
    Ok(DecayBound { c: initial.max(steady), c_gamma, gamma_decay })
}

/// Quantizer range thresholds `A` and the smallest levels `R >= 1` with
/// `(2R + 1) / 2 >= A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelRequirement {
    pub a_x: f64,
    pub a_y: f64,
    pub r_x: u64,
    pub r_y: u64,
}

/// Smallest integer `R >= 1` with `(2R + 1) / 2 >= a`.
pub fn min_levels(a: f64) -> Result<u64> {
    if !a.is_finite() || a > 1e15 {
        return Err(Error::InvalidParameter { name: "R", reason: format!("threshold {a:e} is not representable") });
    }
    let mut r = (a - 0.5).ceil().max(1.0) as u64;
    while (r as f64) + 0.5 < a {
        r += 1;
    }
    while r > 1 && (r as f64) - 0.5 >= a {
        r -= 1;
    }
    Ok(r)
}

/// Levels for the action channels (`x`) and the estimate channels (`y`).
pub fn required_r(
    c: f64,
    gamma1: f64,
    delta: f64,
    l: f64,
    h: f64,
    norms: &MatrixNorms,
    n: usize,
) -> Result<LevelRequirement> {
    let nf = n as f64;
    let a_x = nf / (2.0 * gamma1) + (1.0 + nf.sqrt()) * delta * l * c;
    let a_y = nf * norms.g / (2.0 * gamma1) + h * norms.a0 * nf / (2.0 * gamma1) + h * norms.s * c;
    Ok(LevelRequirement { a_x, a_y, r_x: min_levels(a_x)?, r_y: min_levels(a_y)? })
}

/// Every protocol constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignParams {
    pub h: f64,
    pub delta: f64,
    pub gamma1: f64,
    pub theta0: f64,
    pub c_bound: f64,
    pub r_x: u64,
    pub r_y: u64,
    pub c_gamma: f64,
    pub gamma_decay: f64,
}

/// User-side inputs of the synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub theta0: f64,
    /// Upper bound on `max |x_i(0)|`.
    pub c_x0: f64,
    /// Upper bound on `max |x*_i|`.
    pub c_xstar: f64,
    /// Places `gamma1 = rho + margin (1 - rho)`.
    pub gamma1_margin: f64,
    /// `h = h_safety * h_max`.
    pub h_safety: f64,
}

impl Bounds {
    /// Bounds taken from concrete initial actions and equilibrium, with
    /// `theta0 = 2 C_x0` (the smallest value valid for every `gamma1 < 1`).
    pub fn from_data(x0: &[f64], x_star: &[f64], gamma1_margin: f64) -> Self {
        let c_x0 = max_abs(x0);
        let c_xstar = max_abs(x_star);
        Self { theta0: auto_theta0(c_x0), c_x0, c_xstar, gamma1_margin, h_safety: DEFAULT_H_SAFETY }
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `2 C_x0`, or 1 when the initial actions are all zero.
pub fn auto_theta0(c_x0: f64) -> f64 {
    if c_x0 > 0.0 {
        2.0 * c_x0
    } else {
        1.0
    }
}

/// Explicit values that replace synthesized ones.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DesignOverrides {
    pub h: Option<f64>,
    pub delta: Option<f64>,
    pub gamma1: Option<f64>,
    pub c_bound: Option<f64>,
    pub r_x: Option<u64>,
    pub r_y: Option<u64>,
}

/// Synthesized constants plus the intermediate quantities behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub params: DesignParams,
    pub constants: GameConstants,
    pub h_max: f64,
    pub norms: MatrixNorms,
    pub rho_hbar: f64,
    pub b_margin: f64,
    pub levels: LevelRequirement,
    /// Step size also satisfies the bound variant using `mu`.
    pub mu_variant_feasible: bool,
    /// `max |1 - delta lambda_i(M)| <= sqrt(1 - 2 delta mu + (delta l)^2)`,
    /// i.e. the gradient step contracts at least as fast as `Hbar` assumes.
    pub gradient_step_ok: bool,
}

pub fn synthesize(game: &GameSpec, topo: &Topology, bounds: &Bounds) -> Result<Synthesis> {
    synthesize_with(game, topo, bounds, &DesignOverrides::default())
}

/// Chains gain selection, step-size selection, `gamma1`, `C` and the
/// quantizer levels; any overridden value is used as given.
pub fn synthesize_with(game: &GameSpec, topo: &Topology, bounds: &Bounds, ov: &DesignOverrides) -> Result<Synthesis> {
    let n = game.n_players();
    if topo.n() != n {
        return Err(Error::Dimension { expected: n, got: topo.n() });
    }
    if !(bounds.gamma1_margin > 0.0 && bounds.gamma1_margin < 1.0) {
        return Err(Error::InvalidParameter {
            name: "gamma1_margin",
            reason: format!("must lie in (0, 1), got {}", bounds.gamma1_margin),
        });
    }
    if !(bounds.h_safety > 0.0 && bounds.h_safety < 1.0) {
        return Err(Error::InvalidParameter {
            name: "h_safety",
            reason: format!("must lie in (0, 1), got {}", bounds.h_safety),
        });
    }
    for (name, v) in [("c_x0", bounds.c_x0), ("c_xstar", bounds.c_xstar)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("must be a finite non-negative bound, got {v}"),
            });
        }
    }
    let constants = game.constants();
    let (l, mu) = (constants.lipschitz_l, constants.monotonicity_mu);

    let h_max = topo.h_max();
    let h = ov.h.unwrap_or(bounds.h_safety * h_max);
    if ov.h.is_some() && h >= h_max {
        warn!("explicit h = {h} is not below h_max = {h_max}; contraction of H is not guaranteed");
    }
    let matrices = topo.build_matrices(h)?;
    let norms = matrices.norms();

    let delta = match ov.delta {
        Some(d) if d > 0.0 && d.is_finite() => d,
        Some(d) => return Err(Error::InvalidParameter { name: "delta", reason: format!("must be positive, got {d}") }),
        None => select_delta(norms.h, l, mu, n)?,
    };
    if !delta_feasible(delta, norms.h, l, mu, n) {
        if ov.delta.is_some() {
            warn!("explicit delta = {delta} fails the step-size feasibility conditions");
        } else {
            return Err(Error::NoFeasibleDelta(format!("selected delta = {delta} is infeasible")));
        }
    }
    let rho = rho_hbar(norms.h, delta, l, mu, n)?;
    let gamma1 = ov.gamma1.unwrap_or(rho + bounds.gamma1_margin * (1.0 - rho));
    if !(gamma1 > 0.0 && gamma1 < 1.0) {
        return Err(Error::InvalidGamma1 { gamma1, rho_hbar: rho });
    }
    let needs_bound = ov.c_bound.is_none() || ov.r_x.is_none() || ov.r_y.is_none();
    if !(gamma1 > rho) {
        if needs_bound {
            return Err(Error::InvalidGamma1 { gamma1, rho_hbar: rho });
        }
        warn!("gamma1 = {gamma1} does not exceed rho(Hbar) = {rho}");
    }
    let theta0 = bounds.theta0;
    let required_theta0 = 2.0 * gamma1 * bounds.c_x0;
    if !(theta0 >= required_theta0) {
        if needs_bound {
            return Err(Error::InitialScaleTooSmall { theta0, required: required_theta0 });
        }
        warn!("theta0 = {theta0} is below 2 gamma1 C_x0 = {required_theta0}");
    }

    let (c_bound, c_gamma, gamma_decay) = match ov.c_bound {
        Some(c) => (c, 1.0, rho / gamma1),
        None => {
            let b = bound_c(rho, gamma1, theta0, h, &norms, bounds.c_x0, bounds.c_xstar, n)?;
            (b.c, b.c_gamma, b.gamma_decay)
        }
    };
    let levels = required_r(c_bound, gamma1, delta, l, h, &norms, n)?;
    let params = DesignParams {
        h,
        delta,
        gamma1,
        theta0,
        c_bound,
        r_x: ov.r_x.unwrap_or(levels.r_x),
        r_y: ov.r_y.unwrap_or(levels.r_y),
        c_gamma,
        gamma_decay,
    };
    if params.r_x == 0 || params.r_y == 0 {
        return Err(Error::InvalidParameter { name: "R", reason: "quantizer levels must be at least 1".into() });
    }

    let gradient_step_ok =
        gradient_contraction(game.jacobian(), delta) <= hbar(norms.h, delta, l, mu, n)?[(1, 1)] + 1e-12;
    if !gradient_step_ok {
        warn!("gradient step with delta = {delta} contracts slower than the comparison matrix assumes");
    }
    Ok(Synthesis {
        params,
        constants,
        h_max,
        norms,
        rho_hbar: rho,
        b_margin: b_margin(delta, norms.h, l, mu, n),
        levels,
        mu_variant_feasible: delta_feasible_mu_variant(delta, norms.h, l, mu, n),
        gradient_step_ok,
    })
}

/// Spectral norm of `I - delta M`.
fn gradient_contraction(m: &DMatrix<f64>, delta: f64) -> f64 {
    let n = m.nrows();
    let step = DMatrix::<f64>::identity(n, n) - m * delta;
    crate::topology::spectral_norm(&step).unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{default_game, default_initial_actions};
    use approx::assert_relative_eq;

    #[test]
    fn rho_hbar_degenerate_and_diagonal() {
        assert_relative_eq!(rho_hbar(0.7, 0.0, 2.0, 1.0, 4).unwrap(), 1.0);
        assert_relative_eq!(sym2_spectral_radius(0.5, 0.0, 0.9), 0.9);
    }

    #[test]
    fn rho_hbar_matches_characteristic_roots() {
        for &(nh, d, l, mu, n) in &[(0.85, 0.01, 2.6, 2.0, 5usize), (0.3, 0.05, 3.0, 1.0, 2), (0.99, 1e-4, 1.0, 1.0, 8)]
        {
            let m = hbar(nh, d, l, mu, n).unwrap();
            let tr = m[(0, 0)] + m[(1, 1)];
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            let disc = (tr * tr - 4.0 * det).sqrt();
            let oracle = ((tr + disc) / 2.0).abs().max(((tr - disc) / 2.0).abs());
            assert_relative_eq!(rho_hbar(nh, d, l, mu, n).unwrap(), oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn feasibility_edges() {
        let (nh, l, mu, n) = (0.8, 2.5, 2.0, 5);
        assert!(!delta_feasible(0.0, nh, l, mu, n));
        assert_eq!(b_margin(0.0, nh, l, mu, n), 0.0);
        assert!(delta_feasible(1e-6, nh, l, mu, n));
        assert!(!delta_feasible(2.0 * mu / (l * l), 0.0, l, mu, 1));
    }

    #[test]
    fn select_delta_is_feasible_and_locally_optimal() {
        let (nh, l, mu, n) = (0.8928, 2.6, 2.0, 5);
        let d = select_delta(nh, l, mu, n).unwrap();
        assert!(delta_feasible(d, nh, l, mu, n));
        let best = rho_hbar(nh, d, l, mu, n).unwrap();
        assert!(best < 1.0);
        for k in 1..200 {
            let probe = d * k as f64 / 100.0;
            if delta_feasible(probe, nh, l, mu, n) {
                assert!(best <= rho_hbar(nh, probe, l, mu, n).unwrap() + 1e-15);
            }
        }
    }

    #[test]
    fn select_delta_rejects_noncontracting_h() {
        assert!(select_delta(1.0, 1.0, 1.0, 2).is_err());
    }

    #[test]
    fn min_levels_examples() {
        assert_eq!(min_levels(0.2).unwrap(), 1);
        assert_eq!(min_levels(1.5).unwrap(), 1);
        assert_eq!(min_levels(1.5000001).unwrap(), 2);
        assert_eq!(min_levels(851.0).unwrap(), 851);
        assert_eq!(min_levels(851.5).unwrap(), 851);
        assert!(min_levels(f64::INFINITY).is_err());
    }

    #[test]
    fn zero_bound_limit() {
        let norms = MatrixNorms { h: 0.5, g: 1.5, s: 2.0, a0: 1.0 };
        let req = required_r(0.0, 0.8, 0.01, 2.0, 0.1, &norms, 5).unwrap();
        assert_eq!(req.r_x, (5.0 / 1.6 - 0.5_f64).ceil() as u64);
    }

    #[test]
    fn bound_c_zero_initial_data() {
        let norms = MatrixNorms { h: 0.5, g: 1.5, s: 2.0, a0: 1.0 };
        let b = bound_c(0.9, 0.95, 1.0, 0.1, &norms, 0.0, 0.0, 3).unwrap();
        let gamma = 0.9 / 0.95;
        assert_relative_eq!(b.c, 0.1 * 3.0 * 3.0 / (2.0 * 0.95 * 0.95 * (1.0 - gamma)), epsilon = 1e-12);
        assert!(bound_c(0.9, 0.9, 1.0, 0.1, &norms, 0.0, 0.0, 3).is_err());
    }

    #[test]
    fn synthesize_default() {
        let game = default_game();
        let topo = Topology::cycle(5).unwrap();
        let bounds = Bounds::from_data(&default_initial_actions(), &game.solve_ne().unwrap(), 0.1);
        let s = synthesize(&game, &topo, &bounds).unwrap();
        let p = s.params;
        assert!(s.rho_hbar < p.gamma1 && p.gamma1 < 1.0);
        assert!(s.b_margin > 0.0);
        assert!(s.gradient_step_ok);
        assert_relative_eq!(p.h, 0.99 * topo.h_max());
        assert!(p.r_x >= 1 && p.r_y >= p.r_x);
    }

    #[test]
    fn overrides_are_echoed() {
        let game = default_game();
        let topo = Topology::cycle(5).unwrap();
        let bounds = Bounds::from_data(&default_initial_actions(), &game.solve_ne().unwrap(), 0.1);
        let ov = DesignOverrides { r_y: Some(3), h: Some(0.2), ..Default::default() };
        let s = synthesize_with(&game, &topo, &bounds, &ov).unwrap();
        assert_eq!(s.params.r_y, 3);
        assert_eq!(s.params.h, 0.2);
    }

    #[test]
    fn theta0_too_small_is_rejected() {
        let game = default_game();
        let topo = Topology::cycle(5).unwrap();
        let mut bounds = Bounds::from_data(&default_initial_actions(), &game.solve_ne().unwrap(), 0.1);
        bounds.theta0 = 1.0;
        assert!(matches!(synthesize(&game, &topo, &bounds), Err(Error::InitialScaleTooSmall { .. })));
    }
}
