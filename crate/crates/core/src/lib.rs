//! Finite element solver for the stochastic Maxwell-Landau-Lifshitz-Gilbert
//! system using a linear tangent-plane scheme with a theta-weighted exchange
//! term, Nédélec edge elements for the magnetic field, and Monte Carlo
//! averaging over Wiener paths.

// NaN-rejecting `!(x > 0.0)` checks and index loops over local element arrays are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod check;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod noise;
pub mod output;
pub mod quadrature;
pub mod sparse;
pub mod stepper;

pub use config::{GMode, SimConfig};
pub use error::{Error, Result};
