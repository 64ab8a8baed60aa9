//! Distributed Nash-equilibrium seeking over a bandwidth-limited network
//! under denial-of-service attacks.
//!
//! Players of a quadratic aggregative game estimate each other's actions
//! through a consensus protocol. All transmissions go through finite-level
//! uniform quantizers whose common scale `theta` zooms in after every
//! successful transmission and holds while the network is jammed.
//!
//! * [`game`] — payoffs, pseudogradient, equilibrium and the constants `l`, `mu`;
//! * [`topology`] — graph and stacked protocol matrices;
//! * [`quantization`] — quantizer and scaling state;
//! * [`dos`] — attack traces and their frequency/duration certification;
//! * [`tuner`] — synthesis of `h`, `delta`, `gamma1`, `C`, `R_x`, `R_y`;
//! * [`protocol`] — the step engine and its error-dynamics oracle;
//! * [`verify`] — run-level property checks.

// NaN-rejecting `!(x > 0.0)` checks and index loops over matrices are deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dos;
pub mod error;
pub mod game;
pub mod protocol;
pub mod quantization;
pub mod sampling;
pub mod sweep;
pub mod topology;
pub mod tuner;
pub mod verify;

pub use dos::{DosInterval, DosParams, DosTrace};
pub use error::{Error, Result};
pub use game::{GameConstants, GameSpec};
pub use protocol::{NetworkState, Protocol, RunOptions, RunOutput, StepRecord, Summary};
pub use quantization::{ScalingState, UniformQuantizer};
pub use topology::{MatrixNorms, ProtocolMatrices, Topology};
pub use tuner::{Bounds, DesignOverrides, DesignParams, Synthesis};
