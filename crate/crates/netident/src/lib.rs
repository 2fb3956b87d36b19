//! Identify which interaction graph a diffusively coupled network is using,
//! from nothing but its steady-state response to a constant input.
//!
//! The model class: agents with monotone steady-state relations k⁻¹ coupled
//! through strictly increasing functions over an unknown undirected graph.
//! A constant exogenous input w is applied, the network settles, and the
//! steady-state output y satisfies k⁻¹(y) + ℰ g(ℰᵀ y) = −w. For a family of
//! candidate graphs, an *indication vector* w makes the steady-state outputs
//! of all candidates distinct, so the graph can be read back from y — by
//! nearest-entry lookup in general, and by exact per-agent digit decoding in
//! the linear case.
//!
//! Module map:
//! - [`exact`]: arbitrary-precision rational scalars and matrices.
//! - [`graph`]: canonical edge lists, incidence/Laplacian, family enumeration.
//! - [`models`]: agent/controller behaviours, linear and neural presets.
//! - [`steady_state`]: exact linear solves and the damped-Newton solver.
//! - [`indication`]: Gaussian and radix input designs, separation indices.
//! - [`detection`]: lookup tables, nearest-entry detection, radix decoding,
//!   full linear reconstruction.
//! - [`simulation`]: fixed-step RK4 integration of the closed loop, used to
//!   validate everything end to end.

pub mod detection;
pub mod exact;
pub mod graph;
pub mod indication;
pub mod models;
pub mod simulation;
pub mod steady_state;
pub mod textio;
