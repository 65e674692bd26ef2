//! Secure UAV-aided rate-splitting downlink with QoE (sum MOS) objective.
//!
//! The crate synthesizes Rician channels with norm-bounded eavesdropper CSI
//! error, evaluates common/private/eavesdropper/secrecy rates and MOS, and
//! maximizes sum MOS by alternating a beamforming and a trajectory
//! successive-convex-approximation step, each solved as a conic program.

pub mod ao;
pub mod bf;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod plot;
pub mod rates;
pub mod traj;

pub use error::{Error, Result};
