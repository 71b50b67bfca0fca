//! Solver and verification harness for the 2D compressible
//! magneto-micropolar boundary-layer equations.
//!
//! Pipeline: outflow traces from the Bernoulli system ([`outflow`]), the
//! symmetrized system in stream-function coordinates ([`coefficients`],
//! [`linear_step`]), Picard iteration over the time window ([`picard`]), and
//! the inverse transform back to physical variables ([`transform`]).
//! [`diagnostics`] and [`studies`] hold the checks.

pub mod coefficients;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod io;
pub mod linear_step;
pub mod numerics;
pub mod outflow;
pub mod picard;
pub mod pipeline;
pub mod state;
pub mod studies;
pub mod transform;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use state::{PhysicalParams, TransformedState};
