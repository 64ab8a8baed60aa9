//! Run-level property checks: oracle equivalence, encoder/decoder
//! synchrony, DoS freeze, the `theta` identity and the scaled-error bound.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::protocol::oracle::{case_of, oracle_step, oracle_theta, scaled_coordinates, ErrorState, OracleContext};
use crate::protocol::{Protocol, RunOptions};
use crate::sampling::{random_game, random_mask, random_topology};
use crate::sweep;
use crate::tuner::{synthesize_with, Bounds, DesignOverrides};

/// Worst-case deviations between the engine and the error recursions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OracleComparison {
    /// Max absolute componentwise deviation of the error state.
    pub max_deviation: f64,
    /// Max relative deviation of `theta`.
    pub max_theta_deviation: f64,
}

/// Runs the engine and the case recursions side by side from the same
/// initial state and compares them after every step.
pub fn oracle_comparison(protocol: &Protocol, x0: &[f64], mask: &[bool]) -> Result<OracleComparison> {
    let d = protocol.design();
    let matrices = protocol.topology().build_matrices(d.h)?;
    let (q_x, q_y) = protocol.quantizers();
    let ctx = OracleContext {
        game: protocol.game(),
        x_star: protocol.x_star(),
        matrices: &matrices,
        delta: d.delta,
        q_x,
        q_y,
    };

    let mut state = protocol.initial_state(x0)?;
    let mut err = ErrorState::from_network(&state, protocol.x_star());
    let mut theta = d.theta0;
    let mut out = OracleComparison::default();
    for k in 0..mask.len().saturating_sub(1) {
        let case = case_of(mask[k], mask[k + 1]);
        err = oracle_step(&err, theta, case, &ctx)?;
        theta = oracle_theta(theta, case, d.gamma1);
        protocol.step(&mut state, mask[k], mask[k + 1])?;
        let observed = ErrorState::from_network(&state, protocol.x_star());
        out.max_deviation = out.max_deviation.max(observed.max_abs_diff(&err));
        out.max_theta_deviation = out.max_theta_deviation.max(((state.theta() - theta) / theta).abs());
    }
    Ok(out)
}

/// Invariants observed along one run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunChecks {
    /// Max relative error of `theta(k)` against `gamma1^{T_S} theta0`.
    pub theta_rel_err: f64,
    /// A DoS step changed `x` or `y`.
    pub freeze_violations: u64,
    /// `theta` changed across a step into a DoS instant.
    pub hold_violations: u64,
    /// Max of `|xi_x|_inf` and `|xi_y|_inf` at DoS-free instants `k >= 1`.
    pub max_scaled_error: f64,
    pub saturation_events: u64,
    pub final_err: f64,
    pub initial_err: f64,
}

/// Runs the engine with decoder copies enabled and checks the invariants.
pub fn run_checks(protocol: &Protocol, x0: &[f64], mask: &[bool]) -> Result<RunChecks> {
    let d = *protocol.design();
    let mut checks = RunChecks::default();
    // exact multiplication chain theta0 * gamma1 * ... * gamma1
    let mut expect = d.theta0;
    let mut prev: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    let x_star = protocol.x_star().to_vec();
    let summary = protocol.run_observed(x0, mask, RunOptions { decimation: 1, dual_codec: true }, |rec, state| {
        let k = rec.k as usize;
        if k > 0 && !mask[k] {
            expect *= d.gamma1;
        }
        checks.theta_rel_err = checks.theta_rel_err.max(((rec.theta - expect) / expect).abs());
        if let Some((px, py, ptheta)) = &prev {
            if mask[k - 1] && (px != &state.x || py != &state.y) {
                checks.freeze_violations += 1;
            }
            if mask[k] && *ptheta != rec.theta {
                checks.hold_violations += 1;
            }
        }
        if k > 0 && !mask[k] {
            let err = ErrorState::from_network(state, &x_star);
            if let Ok(s) = scaled_coordinates(&err, rec.theta) {
                checks.max_scaled_error = checks.max_scaled_error.max(s.xi_x.amax()).max(s.xi_y.amax());
            }
        }
        prev = Some((state.x.clone(), state.y.clone(), rec.theta));
    })?;
    checks.saturation_events = summary.saturation_events;
    checks.final_err = summary.final_err;
    checks.initial_err = summary.initial_err;
    Ok(checks)
}

/// Outcome of the randomized oracle-equivalence suite.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SuiteReport {
    pub runs: usize,
    pub comparison: OracleComparison,
}

/// Oracle equivalence over random games and graphs with
/// `N` cycling through `{2, 3, 5}`, random bursty DoS flags and, on every
/// other run, deliberately coarse quantizers so that saturated symbols are
/// exercised too.
pub fn random_oracle_suite(base_seed: u64, runs: usize, steps: usize) -> Result<SuiteReport> {
    let seeds: Vec<u64> = (0..runs as u64).map(|r| base_seed.wrapping_add(r)).collect();
    let results = sweep::map(&seeds, |&seed| -> Result<OracleComparison> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = [2, 3, 5][(seed % 3) as usize];
        let game = random_game(&mut rng, n)?;
        let topo = random_topology(&mut rng, n, 0.4)?;
        let x0: Vec<f64> = (0..n).map(|_| rand::Rng::gen_range(&mut rng, -20.0..20.0)).collect();
        let x_star = game.solve_ne()?;
        let bounds = Bounds::from_data(&x0, &x_star, 0.1);
        let ov = if seed % 2 == 0 {
            DesignOverrides::default()
        } else {
            DesignOverrides { r_x: Some(2), r_y: Some(2), ..Default::default() }
        };
        let design = synthesize_with(&game, &topo, &bounds, &ov)?.params;
        let protocol = Protocol::new(game, topo, design)?;
        let mask = random_mask(&mut rng, steps, 0.15);
        oracle_comparison(&protocol, &x0, &mask)
    });
    let mut report = SuiteReport { runs, ..Default::default() };
    for r in results {
        let c = r?;
        report.comparison.max_deviation = report.comparison.max_deviation.max(c.max_deviation);
        report.comparison.max_theta_deviation = report.comparison.max_theta_deviation.max(c.max_theta_deviation);
    }
    Ok(report)
}
