//! Stochastic kinetic models over many interacting individuals, with exact
//! and variational inference, reference samplers, an epidemic front end,
//! data interchange and evaluation tools.

// Numeric kernels index several parallel arrays by state and time, and
// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod epidemic;
pub mod error;
pub mod eval;
pub mod exact;
pub mod fixtures;
pub mod io;
pub mod model;
pub mod samplers;
pub mod vi;

pub use error::{Result, SkmError};
pub use model::{
    EventSpec, ObservationModel, Observations, Participant, SkmSystem, TrajectoryBundle,
};
