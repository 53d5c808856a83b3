//! Mean-field limit: the self-consistent rate curve, the flow, and the
//! explicit limit density.

mod curve;
mod density;
mod solver;

pub use curve::RateCurve;
pub use density::{
    density_at, moments, DensitySnapshot, LimitDensity, Moments, BRANCH_OUTSIDE, BRANCH_RESET,
    BRANCH_TRANSPORT, DEFAULT_NODES,
};
pub use solver::{moment_table, solve_rate_curve, MomentTable, SolverOptions};
