//! Shared fixtures for the benchmarks.

use spikefield::meanfield::{solve_rate_curve, RateCurve, SolverOptions};
use spikefield::Model;

/// Default model with its rate curve on `[0, horizon]`.
pub fn default_setup(horizon: f64) -> (Model, RateCurve) {
    let model = Model::default_model();
    let curve = solve_rate_curve(&model, &SolverOptions::default().with_horizon(horizon)).expect("default model solves");
    (model, curve)
}
