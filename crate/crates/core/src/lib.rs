//! Simulation and security analysis of two quantum secure direct
//! communication protocols: the two-step EPR-block protocol and its variant
//! with four-particle GHZ decoys.
//!
//! - [`qstate`]: state vectors, Bell/GHZ preparation, local gates, Z/X/Bell
//!   measurements.
//! - [`channel`]: Eve's entangling probe.
//! - [`protocol`]: executable protocol runs and the detection-rate estimator.
//! - [`analysis`]: closed forms for detection, information gain and
//!   eavesdropping success.
//! - [`verify`]: self-check suite comparing simulation with the closed forms.

pub mod analysis;
pub mod channel;
pub mod exec;
pub mod protocol;
pub mod qstate;
pub mod verify;

pub use analysis::Protocol;
pub use channel::AttackParams;
pub use exec::Execution;
pub use protocol::{ProtocolConfig, RunReport};
