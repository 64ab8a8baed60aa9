use thiserror::Error;

/// Errors raised by the game, topology, quantizer, DoS, tuning and protocol layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("pseudogradient matrix is not positive definite (lambda_min = {lambda_min:e}); strong monotonicity fails")]
    NotMonotone { lambda_min: f64 },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("communication graph is disconnected")]
    Disconnected,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("DoS time {t} outside trace horizon [0, {horizon}]")]
    OutOfHorizon { t: f64, horizon: f64 },

    #[error("beyond maximum resilience: 1/T + delta/tau_D = {margin} >= 1")]
    BeyondResilience { margin: f64 },

    #[error("no feasible step size found: {0}")]
    NoFeasibleDelta(String),

    #[error("zoom-in factor gamma1 = {gamma1} must lie in (rho(Hbar) = {rho_hbar}, 1)")]
    InvalidGamma1 { gamma1: f64, rho_hbar: f64 },

    #[error("initial scale theta0 = {theta0} too small: need theta0 >= 2*gamma1*C_x0 = {required}")]
    InitialScaleTooSmall { theta0: f64, required: f64 },

    #[error("scaling parameter underflow at step {step} (theta = {theta:e})")]
    ThetaUnderflow { step: u64, theta: f64 },

    #[error("unknown case id {0}; expected 1..=4")]
    UnknownCase(u8),

    #[error("encoder/decoder desynchronized on channel {channel} at step {step}")]
    CodecDesync { channel: String, step: u64 },

    #[error("trace parse error at line {line}: {reason}")]
    TraceParse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
