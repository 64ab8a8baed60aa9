//! Step engine for the quantized NE-seeking protocol under DoS.
//!
//! One step from instant `k` to `k + 1`:
//! 1. players move along their estimated pseudogradient unless DoS is
//!    active at `k`;
//! 2. estimates follow the leader-follower consensus law unless DoS is
//!    active at `k`;
//! 3. if instant `k + 1` is DoS-free, every channel quantizes its
//!    innovation with the current `theta` and the hats advance;
//!    otherwise the hats hold;
//! 4. `theta` zooms in if instant `k + 1` is DoS-free and holds otherwise.

pub mod codec;
pub mod oracle;
pub mod record;

use log::debug;

use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::quantization::{ScalingState, UniformQuantizer};
use crate::topology::Topology;
use crate::tuner::DesignParams;

use codec::{DecoderBank, Encoder};
pub use record::{write_csv, StepRecord, CSV_FLOAT_DIGITS};

/// Complete protocol state at one sampling instant.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub x: Vec<f64>,
    /// Row-major `N x N`: `y[i*N + j]` is player `i`'s estimate of `x_j`.
    pub y: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub scaling: ScalingState,
    pub step_k: u64,
}

impl NetworkState {
    /// Zero estimates and hats, `theta = theta0`.
    pub fn initial(x0: &[f64], theta0: f64, gamma1: f64) -> Result<Self> {
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial actions"));
        }
        let n = x0.len();
        Ok(Self {
            x: x0.to_vec(),
            y: vec![0.0; n * n],
            x_hat: vec![0.0; n],
            y_hat: vec![0.0; n * n],
            scaling: ScalingState::new(theta0, gamma1)?,
            step_k: 0,
        })
    }

    pub fn theta(&self) -> f64 {
        self.scaling.theta
    }
}

/// Quantizer activity of one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepOutcome {
    /// Whether the channels transmitted (instant `k + 1` DoS-free).
    pub transmitted: bool,
    pub max_qarg_x: f64,
    pub max_qarg_y: f64,
    pub saturated: bool,
}

/// A game, a graph and the design constants, ready to simulate.
#[derive(Debug, Clone)]
pub struct Protocol {
    game: GameSpec,
    topo: Topology,
    design: DesignParams,
    x_star: Vec<f64>,
    q_x: UniformQuantizer,
    q_y: UniformQuantizer,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl Protocol {
    pub fn new(game: GameSpec, topo: Topology, design: DesignParams) -> Result<Self> {
        let n = game.n_players();
        if topo.n() != n {
            return Err(Error::Dimension { expected: n, got: topo.n() });
        }
        for (name, v) in [("h", design.h), ("delta", design.delta), ("theta0", design.theta0)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter { name, reason: format!("must be positive, got {v}") });
            }
        }
        let x_star = game.solve_ne()?;
        let neighbors = (0..n)
            .map(|i| (0..n).filter(|&l| topo.weight(i, l) > 0.0).map(|l| (l, topo.weight(i, l))).collect())
            .collect();
        Ok(Self {
            q_x: UniformQuantizer::new(design.r_x)?,
            q_y: UniformQuantizer::new(design.r_y)?,
            game,
            topo,
            design,
            x_star,
            neighbors,
        })
    }

    pub fn game(&self) -> &GameSpec {
        &self.game
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn design(&self) -> &DesignParams {
        &self.design
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    pub fn n(&self) -> usize {
        self.game.n_players()
    }

    pub fn quantizers(&self) -> (UniformQuantizer, UniformQuantizer) {
        (self.q_x, self.q_y)
    }

    pub fn initial_state(&self, x0: &[f64]) -> Result<NetworkState> {
        if x0.len() != self.n() {
            return Err(Error::Dimension { expected: self.n(), got: x0.len() });
        }
        NetworkState::initial(x0, self.design.theta0, self.design.gamma1)
    }

    /// `u = -delta P(eta)` when DoS-free, zero otherwise.
    pub fn control_input(&self, state: &NetworkState, dos_active: bool) -> Vec<f64> {
        if dos_active {
            return vec![0.0; self.n()];
        }
        self.game.mixed_unchecked(&state.x, &state.y).into_iter().map(|p| -self.design.delta * p).collect()
    }

    pub fn err_ne(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.x_star).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// Consensus update of the estimates:
    /// `y_ij -= h [sum_l a_il (yh_ij - yh_lj) + a_ij (yh_ij - xh_j)]`,
    /// reading neighbor hats through the receiver-side accessors.
    fn estimate(
        &self,
        y: &mut [f64],
        own_y_hat: &[f64],
        recv_y: impl Fn(usize, usize, usize) -> f64,
        recv_x: impl Fn(usize, usize) -> f64,
    ) {
        let n = self.n();
        let h = self.design.h;
        for i in 0..n {
            for j in 0..n {
                let own = own_y_hat[i * n + j];
                let mut acc = 0.0;
                for &(l, a) in &self.neighbors[i] {
                    acc += a * (own - recv_y(i, l, j));
                }
                let a_ij = self.topo.weight(i, j);
                if a_ij > 0.0 {
                    acc += a_ij * (own - recv_x(i, j));
                }
                y[i * n + j] -= h * acc;
            }
        }
    }

    /// Advances `state` from instant `k` to `k + 1`.
    ///
    /// `dos_now` and `dos_next` are the DoS status at `k` and `k + 1`.
    pub fn step(&self, state: &mut NetworkState, dos_now: bool, dos_next: bool) -> Result<StepOutcome> {
        self.step_inner(state, dos_now, dos_next, None)
    }

    fn step_inner(
        &self,
        state: &mut NetworkState,
        dos_now: bool,
        dos_next: bool,
        mut bank: Option<&mut DecoderBank>,
    ) -> Result<StepOutcome> {
        let n = self.n();
        if !dos_now {
            let p = self.game.mixed_unchecked(&state.x, &state.y);
            let mut y = std::mem::take(&mut state.y);
            match bank.as_deref() {
                Some(b) => self.estimate(&mut y, &state.y_hat, |i, l, j| b.y_copy(i, l, j), |i, j| b.x_copy(i, j)),
                None => {
                    let (y_hat, x_hat) = (&state.y_hat, &state.x_hat);
                    self.estimate(&mut y, y_hat, |_, l, j| y_hat[l * n + j], |_, j| x_hat[j])
                }
            }
            state.y = y;
            for (x, pi) in state.x.iter_mut().zip(p) {
                *x += -self.design.delta * pi;
            }
        }

        let theta = state.scaling.theta;
        let mut out = StepOutcome { transmitted: !dos_next, ..StepOutcome::default() };
        if !dos_next {
            let mut sym_x = vec![0i64; n];
            let mut sym_y = vec![0i64; n * n];
            for j in 0..n {
                let mut enc = Encoder { hat: state.x_hat[j] };
                let t = enc.encode(state.x[j], theta, &self.q_x);
                state.x_hat[j] = enc.hat;
                sym_x[j] = t.symbol;
                out.max_qarg_x = out.max_qarg_x.max(t.arg.abs());
                out.saturated |= t.saturated;
            }
            for c in 0..n * n {
                let mut enc = Encoder { hat: state.y_hat[c] };
                let t = enc.encode(state.y[c], theta, &self.q_y);
                state.y_hat[c] = enc.hat;
                sym_y[c] = t.symbol;
                out.max_qarg_y = out.max_qarg_y.max(t.arg.abs());
                out.saturated |= t.saturated;
            }
            if let Some(b) = bank.as_deref_mut() {
                b.deliver(&sym_x, &sym_y, theta);
            }
        }
        if let Some(b) = bank.as_deref() {
            b.check(&state.x_hat, &state.y_hat, state.step_k + 1)?;
        }
        if out.max_qarg_x.is_nan() || out.max_qarg_y.is_nan() || state.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("protocol state"));
        }

        state.scaling = state.scaling.advance(dos_next, state.step_k + 1)?;
        state.step_k += 1;
        Ok(out)
    }

    /// Runs `mask.len() - 1` steps from `x0`, where `mask[k]` is the DoS
    /// status of instant `k`, and calls `observe` on every record
    /// `k = 0..=K`.
    pub fn run_observed(
        &self,
        x0: &[f64],
        mask: &[bool],
        options: RunOptions,
        mut observe: impl FnMut(&StepRecord, &NetworkState),
    ) -> Result<Summary> {
        if mask.is_empty() {
            return Err(Error::InvalidParameter { name: "mask", reason: "need the status of instant 0".into() });
        }
        let mut state = self.initial_state(x0)?;
        let mut bank = options
            .dual_codec
            .then(|| DecoderBank::new(self.neighbors.iter().map(|nb| nb.iter().map(|&(l, _)| l).collect()).collect()));
        let initial_err = self.err_ne(&state.x);
        let mut summary = Summary {
            steps: mask.len() as u64 - 1,
            initial_err,
            final_err: initial_err,
            first_saturation: None,
            saturation_events: 0,
            min_theta: state.theta(),
            successes: mask[1..].iter().filter(|&&d| !d).count() as u64,
            max_qarg_x: 0.0,
            max_qarg_y: 0.0,
            final_x: state.x.clone(),
        };
        let rec0 = StepRecord::new(0, mask[0], &state, initial_err, StepOutcome::default());
        observe(&rec0, &state);
        for k in 0..mask.len() - 1 {
            let out = self.step_inner(&mut state, mask[k], mask[k + 1], bank.as_mut())?;
            let rec = StepRecord::new(state.step_k, mask[k + 1], &state, self.err_ne(&state.x), out);
            if rec.saturated {
                summary.saturation_events += 1;
                summary.first_saturation.get_or_insert(rec.k);
            }
            summary.max_qarg_x = summary.max_qarg_x.max(rec.max_qarg_x);
            summary.max_qarg_y = summary.max_qarg_y.max(rec.max_qarg_y);
            summary.min_theta = summary.min_theta.min(rec.theta);
            observe(&rec, &state);
        }
        summary.final_err = self.err_ne(&state.x);
        summary.final_x = state.x;
        debug!(
            "run: {} steps, final err {:e}, saturation events {}",
            summary.steps, summary.final_err, summary.saturation_events
        );
        Ok(summary)
    }

    /// [`run_observed`](Self::run_observed) keeping every `decimation`-th
    /// record plus the last one.
    pub fn run(&self, x0: &[f64], mask: &[bool], options: RunOptions) -> Result<RunOutput> {
        let dec = options.decimation.max(1);
        let last = mask.len().saturating_sub(1) as u64;
        let mut records = Vec::new();
        let summary = self.run_observed(x0, mask, options, |rec, _| {
            if rec.k % dec == 0 || rec.k == last {
                records.push(rec.clone());
            }
        })?;
        Ok(RunOutput { records, summary })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub decimation: u64,
    /// Keep independent receiver-side hat copies and check them against the
    /// transmitters every step.
    pub dual_codec: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { decimation: 1, dual_codec: false }
    }
}

/// Aggregate results of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub steps: u64,
    pub initial_err: f64,
    pub final_err: f64,
    pub first_saturation: Option<u64>,
    pub saturation_events: u64,
    pub min_theta: f64,
    /// DoS-free instants among `1..=K`, i.e. the number of zoom-ins.
    pub successes: u64,
    pub max_qarg_x: f64,
    pub max_qarg_y: f64,
    pub final_x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    pub summary: Summary,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Protocol {
        let game = GameSpec::new(vec![1.0, 1.0], vec![1.0, -1.0], 0.5, 0.0).unwrap();
        let topo = Topology::path(2).unwrap();
        let design = DesignParams {
            h: 0.25,
            delta: 0.1,
            gamma1: 0.5,
            theta0: 4.0,
            c_bound: 1.0,
            r_x: 10,
            r_y: 10,
            c_gamma: 1.0,
            gamma_decay: 0.5,
        };
        Protocol::new(game, topo, design).unwrap()
    }

    #[test]
    fn full_freeze_under_dos() {
        let p = small();
        let mut s = p.initial_state(&[1.0, 2.0]).unwrap();
        p.step(&mut s, false, false).unwrap();
        let before = s.clone();
        p.step(&mut s, true, true).unwrap();
        assert_eq!(
            (&s.x, &s.y, &s.x_hat, &s.y_hat, s.theta()),
            (&before.x, &before.y, &before.x_hat, &before.y_hat, before.theta())
        );
    }

    #[test]
    fn control_input_cases() {
        let p = small();
        let mut s = p.initial_state(&[1.0, 2.0]).unwrap();
        assert_eq!(p.control_input(&s, true), vec![0.0, 0.0]);
        s.x = p.x_star().to_vec();
        s.y = [p.x_star(), p.x_star()].concat();
        for u in p.control_input(&s, false) {
            assert!(u.abs() < 1e-14);
        }
    }

    #[test]
    fn single_step_by_hand() {
        // M = 2I + 0.5(I + 11^T) = [[3, .5], [.5, 3]], c = [-2, 2]
        let p = small();
        let mut s = p.initial_state(&[1.0, 2.0]).unwrap();
        let out = p.step(&mut s, false, false).unwrap();
        // estimates are zero: P_1 = 3*1 + 0.5*0 - 2 = 1, P_2 = 0.5*0 + 3*2 + 2 = 8
        assert_eq!(s.x, vec![1.0 - 0.1, 2.0 - 0.8]);
        // zero hats: the estimation law leaves y at zero
        assert_eq!(s.y, vec![0.0; 4]);
        // x_hat += 4 q(x / 4): q(0.225) = 0, q(0.3) = 0
        assert_eq!(s.x_hat, vec![0.0, 0.0]);
        assert_eq!(out.max_qarg_x, s.x[1] / 4.0);
        assert_eq!(s.theta(), 2.0);

        // second step: hats still zero, so y stays zero; x moves again
        let x1 = [s.x[0], s.x[1]];
        let out = p.step(&mut s, false, false).unwrap();
        let expect = [x1[0] - 0.1 * (3.0 * x1[0] - 2.0), x1[1] - 0.1 * (3.0 * x1[1] + 2.0)];
        assert_eq!(s.x, expect.to_vec());
        // x_2 / theta = 0.76 / 2 = 0.38 -> 0 ; x_1 / 2 = 0.33 -> 0
        assert_eq!(s.x_hat, vec![0.0, 0.0]);
        assert!((out.max_qarg_x - expect[0].abs().max(expect[1].abs()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn hats_follow_quantized_innovations() {
        let p = small();
        let mut s = p.initial_state(&[10.0, -7.0]).unwrap();
        p.step(&mut s, false, false).unwrap();
        // x(1) = [10 - 0.1*(30 - 2), -7 - 0.1*(-21 + 2)] = [7.2, -5.1]
        assert_eq!(s.x, vec![10.0 - 0.1 * 28.0, -7.0 - 0.1 * (-21.0 + 2.0)]);
        // q(7.2 / 4 = 1.8) = 2, q(-5.1 / 4 = -1.275) = -1
        assert_eq!(s.x_hat, vec![8.0, -4.0]);
        // next step: y_12 -= h a_12 (0 - x_hat_2)
        p.step(&mut s, false, true).unwrap();
        assert_eq!(s.y[1], 0.25 * -4.0);
        assert_eq!(s.y[2], 0.25 * 8.0);
        assert_eq!(s.y[0], 0.0);
        assert_eq!(s.theta(), 2.0);
    }

    #[test]
    fn dual_codec_matches_shared_state() {
        let p = small();
        let mask: Vec<bool> = (0..60).map(|k| k % 7 == 3 || k % 5 == 0).collect();
        let a = p.run(&[3.0, -2.0], &mask, RunOptions::default()).unwrap();
        let b = p.run(&[3.0, -2.0], &mask, RunOptions { decimation: 1, dual_codec: true }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn decimation_keeps_last() {
        let p = small();
        let mask = vec![false; 26];
        let out = p.run(&[3.0, -2.0], &mask, RunOptions { decimation: 10, dual_codec: false }).unwrap();
        let ks: Vec<u64> = out.records.iter().map(|r| r.k).collect();
        assert_eq!(ks, vec![0, 10, 20, 25]);
    }

    #[test]
    fn always_on_freezes_actions() {
        let p = small();
        let mask = vec![true; 100];
        let out = p.run(&[3.0, -2.0], &mask, RunOptions::default()).unwrap();
        assert!(out.records.iter().all(|r| r.x == vec![3.0, -2.0]));
        assert_eq!(out.summary.successes, 0);
    }
}
