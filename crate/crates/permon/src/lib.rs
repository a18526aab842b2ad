//! Persistent monitoring of fixed targets by speed- and
//! acceleration-bounded agents on parametric closed trajectories.
//!
//! Agents patrol ellipses or Fourier curves inside a rectangular mission
//! space, driving down a weighted uncertainty metric that grows at every
//! unobserved target. Collisions with obstacles and between agents are
//! penalized through clearance deficits, and the trajectory parameters are
//! tuned by gradient descent with an event-driven gradient estimator that
//! propagates uncertainty sensitivities and resets them at floor-hit
//! events.
//!
//! Entry points:
//! - [`scenario`]: scenario documents and the built-in cases,
//! - [`simulator::simulate`]: one forward pass with objective, traces,
//!   events, and gradient,
//! - [`optimizer::optimize`]: multi-start gradient descent,
//! - [`validation::check`]: finite-difference gradient verification.
//!
//! The `examples/` directory of this crate holds one runnable example per
//! capability; the `permon` binary exposes the same operations as
//! subcommands.

pub mod cli;
pub mod collision;
pub mod ipa;
pub mod kinematics;
pub mod optimizer;
pub mod scenario;
pub mod sensing;
pub mod simulator;
pub mod uncertainty;
pub mod validation;
mod vec2;

pub use vec2::Vec2;
