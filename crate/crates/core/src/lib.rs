//! Pairs-trading engine driven by minimum-weight cycle search in market graphs.
//!
//! The pipeline: market feeds update a fixed-point price book; a similarity-weighted
//! directed market graph is rebuilt on every quote change; cycle selection through a
//! dummy node is encoded as a structured QUBO and searched with a ballistic
//! simulated-bifurcation heuristic; verified tradable cycles open pair positions that
//! a per-pair state machine manages until close. A deterministic backcast simulator
//! replays recorded or synthetic feeds through the whole stack.

pub mod backcast;
pub mod config;
pub mod decimal;
pub mod engine;
pub mod feed;
pub mod marketgraph;
pub mod num;
pub mod oracle;
pub mod positions;
pub mod qubo;
pub mod sbm;
pub mod synth;
pub mod verify;

/// Scalar used for graph weights, QUBO evaluation and reporting.
pub type Real = f64;

/// Scalar used inside the simulated-bifurcation core (32-bit, mirroring the
/// fixed hardware precision).
pub type SbReal = f32;

pub use decimal::{Money, Price};
pub use num::Scalar;
