//! Weighted-trajectory stochastic simulation of open bosonic systems in the
//! doubled coherent-state phase space, with user-selectable drift and
//! diffusion gauges, batch-mean error estimation, and exact truncated
//! number-basis oracles for validation.
//!
//! The core objects:
//!
//! - [`ensemble`] — weighted samples (Ω, α⃗, β⃗), reproducible counter-based
//!   noise streams, and coherent / Gaussian initial conditions.
//! - [`models`] — built-in systems (driven one-+two-boson absorber,
//!   single-mode laser, Kerr oscillator) with Ito and Stratonovich drifts and
//!   canonical noise matrices.
//! - [`gauges`] — drift gauges (modify trajectories, compensate through the
//!   weight) and diffusion gauges (rotate the noise matrix, BBᵀ invariant).
//! - [`integrator`] — Ito Euler-Maruyama and semi-implicit Stratonovich
//!   midpoint stepping with divergence capture and deterministic parallel
//!   ensemble runs.
//! - [`estimator`] — weighted moments ⟨â†ⁿâᵐ⟩, weight diagnostics, and
//!   z-score series comparison.
//! - [`fock`] — deterministic RK4 master-equation reference solutions.

pub mod ensemble;
pub mod error;
pub mod estimator;
pub mod fock;
pub mod gauges;
pub mod integrator;
pub mod linalg;
pub mod models;
pub mod rng;

pub use ensemble::{C64, Ensemble, TrajectoryState, init_coherent, init_gaussian};
pub use error::{Error, Result};
pub use estimator::{compare_series, moment, weight_diagnostics, MomentEstimate};
pub use gauges::{apply_drift_gauge, canonical_factor, diffusion_transform, GaugedSystem};
pub use integrator::{run_ensemble, MomentSpec, RecordSet, RunOutput, Scheme, StepConfig};
pub use models::{absorber_model, kerr_model, laser_model, Model};
pub use rng::{gaussian_block, NoiseStream};
