//! Mean-field interacting random walks on the nonnegative integers.
//!
//! `N` particles each step up at rate `1 + δ` and down at rate 1 (reflected
//! at 0). Every ordered pair `(i, k)` with `x_k < x_i` additionally fires at
//! rate `(λ/N) φ(x_i, x_k)` and moves particle `i` down by `ψ(x_i, x_k)`.
//!
//! * [`sim`]: exact event-driven simulation, a recurrence probe, a coupled
//!   domination check and an empirical mean-field distance.
//! * [`nonlinear`]: the single-particle limit: master equation, the map
//!   `μ ↦ π^μ` and its fixed points.
//! * [`gaps`], [`jackson`], [`critical`]: the gap process, its Jackson
//!   network and the resulting critical interaction strengths.
//! * [`lyapunov`]: drift computations and finite-box certificates.
//! * [`sweep`], [`report`]: parameter sweeps and CSV output.

pub mod config;
pub mod critical;
pub mod error;
pub mod gaps;
pub mod jackson;
pub mod lyapunov;
pub mod measure;
pub mod model;
pub mod nonlinear;
pub mod report;
pub mod rng;
pub mod sim;
pub mod sweep;

pub use error::{Error, Result};
pub use measure::ProbabilityVector;
pub use model::{Kernel, ModelSpec, ParticleState};
