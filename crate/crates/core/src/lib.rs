//! Exact simulation and limit analysis of mean-field networks of spiking
//! neurons with reset-and-kick interactions.

// `!(x >= 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fluct;
pub mod limit;
pub mod meanfield;
pub mod model;
pub mod poly;
pub mod quadrature;
pub mod sim;

pub use error::{Error, Result};
pub use meanfield::{DensitySnapshot, RateCurve, SolverOptions};
pub use model::{InitialDensity, Model, ModelParams, RateFunction};
