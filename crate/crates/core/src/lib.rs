//! Linearized wide-network analysis of binary knowledge distillation.
//!
//! Students are modelled as linearizations `f(x; w₀) + Δwᵀφ(x)` of
//! NTK-parameterized ReLU networks. The crate provides the effective logits
//! induced by the distillation loss, analytic and empirical neural tangent
//! kernels, synthetic tasks, the weight-change metrics (data inefficiency,
//! angle distribution, transfer-risk bound) and the hard-label correction
//! analysis for imperfect teachers.

pub mod distillation;
pub mod error;
pub mod hardlabel;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod rng;
pub mod tasks;

pub use error::{Error, Result};

/// Library version, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
