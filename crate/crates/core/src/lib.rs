//! Simulation and analysis of the gliding Lagrange top: an axisymmetric top
//! whose tip slides with friction on a horizontal plane.
//!
//! * [`dynamics`] holds the equations of motion in a vector chart and an
//!   Euler-angle chart, the reaction force and the monitored scalars.
//! * [`integrator`] advances the vector chart with an adaptive
//!   Dormand–Prince 5(4) pair, dense output and event handling.
//! * [`analysis`] classifies stability of the vertical spins, detects
//!   convergence, and numerically checks the no-other-limit results.
//! * [`checks`] bundles the invariant suites run by the command-line `check`.

pub mod analysis;
pub mod chart;
pub mod checks;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod params;
pub mod state;

pub use error::{Error, Result};
pub use params::{ConstantFriction, FrictionModel, Guards, PhysicalParams};
pub use state::{EulerRate, EulerState, VectorRate, VectorState};
