//! Quadratic aggregative games.
//!
//! Player `i` minimizes
//! `f_i(x) = rho_i (x_i - xd_i)^2 + (p0 * sum_j x_j + q0) * x_i`,
//! so the pseudogradient is affine: `P(x) = M x + c` with
//! `M = 2 diag(rho) + p0 (I + 1 1^T)` and `c = q0 1 - 2 rho .* xd`.
//! Because `M` and `c` are explicit, the Nash equilibrium and the
//! monotonicity / Lipschitz constants that the design bounds consume are
//! computed exactly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An N-player quadratic aggregative game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    rho: Vec<f64>,
    x_desired: Vec<f64>,
    p0: f64,
    q0: f64,
    m: DMatrix<f64>,
    c: Vec<f64>,
}

/// Constants of the pseudogradient used by the step-size and quantizer bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameConstants {
    /// `l = max_i l_i`, with `l_i` the 2-norm Lipschitz constant of `df_i/dx_i`.
    pub lipschitz_l: f64,
    /// Strong monotonicity constant `mu`.
    pub monotonicity_mu: f64,
}

impl GameSpec {
    pub fn new(rho: Vec<f64>, x_desired: Vec<f64>, p0: f64, q0: f64) -> Result<Self> {
        let n = rho.len();
        if n < 2 {
            return Err(Error::InvalidGame(format!("need at least 2 players, got {n}")));
        }
        if x_desired.len() != n {
            return Err(Error::Dimension { expected: n, got: x_desired.len() });
        }
        if rho.iter().chain(&x_desired).chain([&p0, &q0]).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("game parameters"));
        }
        if let Some(i) = rho.iter().position(|&r| r <= 0.0) {
            return Err(Error::InvalidGame(format!("rho[{i}] = {} must be positive", rho[i])));
        }

        let m = DMatrix::from_fn(n, n, |i, j| {
            let own = if i == j { 2.0 * rho[i] + p0 } else { 0.0 };
            own + p0
        });
        let c = rho.iter().zip(&x_desired).map(|(r, xd)| q0 - 2.0 * r * xd).collect();

        let lambda_min = symmetric_part(&m).symmetric_eigenvalues().min();
        if !(lambda_min > 0.0) {
            return Err(Error::NotMonotone { lambda_min });
        }

        Ok(Self { rho, x_desired, p0, q0, m, c })
    }

    pub fn n_players(&self) -> usize {
        self.rho.len()
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn x_desired(&self) -> &[f64] {
        &self.x_desired
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    /// The pseudogradient Jacobian `M`.
    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// The constant term `c` of `P(x) = M x + c`.
    pub fn offset(&self) -> &[f64] {
        &self.c
    }

    /// Payoff `f_i(x)`.
    pub fn payoff(&self, i: usize, x: &[f64]) -> f64 {
        let total: f64 = x.iter().sum();
        let d = x[i] - self.x_desired[i];
        self.rho[i] * d * d + (self.p0 * total + self.q0) * x[i]
    }

    /// `df_i/dx_i` evaluated at the profile `profile`.
    ///
    /// Summation runs over `j = 0..N` in order so that [`pseudogradient`]
    /// and [`mixed_pseudogradient`] agree bit-for-bit on identical inputs.
    ///
    /// [`pseudogradient`]: GameSpec::pseudogradient
    /// [`mixed_pseudogradient`]: GameSpec::mixed_pseudogradient
    #[inline]
    pub(crate) fn partial(&self, i: usize, profile: impl Fn(usize) -> f64) -> f64 {
        let n = self.n_players();
        let mut acc = 0.0;
        for j in 0..n {
            acc += self.m[(i, j)] * profile(j);
        }
        acc + self.c[i]
    }

    /// `P(x)`.
    pub fn pseudogradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        Ok((0..self.n_players()).map(|i| self.partial(i, |j| x[j])).collect())
    }

    /// `P(eta)`: component `i` is `df_i/dx_i` at own action `x_i` and the
    /// estimates `estimates[i*N + j]` of the other players.
    ///
    /// `estimates` is row-major `N x N`; row `i` is player `i`'s estimate
    /// vector and its diagonal entry is ignored.
    pub fn mixed_pseudogradient(&self, x: &[f64], estimates: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_players();
        self.check_len(x.len())?;
        if estimates.len() != n * n {
            return Err(Error::Dimension { expected: n * n, got: estimates.len() });
        }
        Ok(self.mixed_unchecked(x, estimates))
    }

    pub(crate) fn mixed_unchecked(&self, x: &[f64], estimates: &[f64]) -> Vec<f64> {
        let n = self.n_players();
        (0..n)
            .map(|i| {
                let row = &estimates[i * n..(i + 1) * n];
                self.partial(i, |j| if j == i { x[i] } else { row[j] })
            })
            .collect()
    }

    /// The unique Nash equilibrium, solving `M x* = -c`.
    pub fn solve_ne(&self) -> Result<Vec<f64>> {
        let n = self.n_players();
        let rhs = -DVector::from_column_slice(&self.c);
        let chol = self.m.clone().cholesky().ok_or(Error::NotMonotone { lambda_min: f64::NAN })?;
        let mut x = chol.solve(&rhs);
        // one round of iterative refinement
        let residual = &self.m * &x - &rhs;
        x -= chol.solve(&residual);
        debug_assert_eq!(x.len(), n);
        Ok(x.iter().copied().collect())
    }

    pub fn constants(&self) -> GameConstants {
        let monotonicity_mu = symmetric_part(&self.m).symmetric_eigenvalues().min();
        let lipschitz_l = self.m.row_iter().map(|r| r.norm()).fold(0.0_f64, f64::max);
        GameConstants { lipschitz_l, monotonicity_mu }
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.n_players() {
            return Err(Error::Dimension { expected: self.n_players(), got });
        }
        Ok(())
    }
}

fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// The 5-player game used by the default configuration.
///
/// Player weights are mildly heterogeneous and the price coupling `p0`
/// is small relative to them, which keeps `l / mu` close to one.
pub fn default_game() -> GameSpec {
    GameSpec::new(vec![1.0, 1.1, 0.9, 1.05, 0.95], vec![4.0, 8.0, 12.0, 16.0, 20.0], 0.1, 2.0)
        .expect("default game is valid")
}

/// Initial actions paired with [`default_game`].
pub fn default_initial_actions() -> Vec<f64> {
    vec![10.0, 0.0, 5.0, 20.0, 15.0]
}
