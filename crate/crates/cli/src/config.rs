use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use spikefield::limit::LimitConfig;
use spikefield::ModelParams;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Simulate,
    SolveMeanfield,
    Rates,
    Fluctuations,
    LimitSystem,
    Mesoscopic,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::SolveMeanfield => "solve-meanfield",
            Kind::Rates => "rates",
            Kind::Fluctuations => "fluctuations",
            Kind::LimitSystem => "limit-system",
            Kind::Mesoscopic => "mesoscopic",
        }
    }
}

/// One experiment. Replica `r` always runs with seed `base_seed + r`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    pub model: ModelParams,
    pub neurons: usize,
    pub ladder: Vec<usize>,
    pub horizon: f64,
    /// Time step of the mean-field solver and of the Galerkin scheme.
    pub dt: f64,
    pub replicas: usize,
    pub base_seed: u64,
    /// Coupled limit particles; unset means a per-kind default.
    pub coupled: Option<usize>,
    pub times: Vec<f64>,
    /// Panel is `1, f, x^1..x^panel_degree`.
    pub panel_degree: usize,
    pub degree: usize,
    pub closure_degree: usize,
    pub paths: usize,
    pub particles: usize,
    /// Picard iteration cap of the mean-field solver.
    pub max_iterations: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: None,
            model: ModelParams::default_model(),
            neurons: 1000,
            ladder: vec![100, 1000, 10_000],
            horizon: 1.0,
            dt: 1e-3,
            replicas: 100,
            base_seed: 0,
            coupled: None,
            times: vec![1.0],
            panel_degree: 3,
            degree: 8,
            closure_degree: 10,
            paths: 2000,
            particles: 2,
            max_iterations: 200,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Sets the kind from the command line; a conflicting kind in the file is an error.
    pub fn with_kind(mut self, kind: Kind) -> CliResult<Self> {
        match self.kind {
            Some(k) if k != kind => Err(CliError::Config(format!(
                "config declares kind {} but {} was requested",
                k.name(),
                kind.name()
            ))),
            _ => {
                self.kind = Some(kind);
                Ok(self)
            }
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be positive");
        }
        if !(self.dt > 0.0 && self.dt < self.horizon) {
            return bad("dt must lie in (0, horizon)");
        }
        if self.times.iter().any(|t| !(0.0..=self.horizon).contains(t)) {
            return bad("times must lie in [0, horizon]");
        }
        if self.neurons == 0 || self.ladder.contains(&0) {
            return bad("network sizes must be positive");
        }
        if self.replicas == 0 {
            return bad("replicas must be positive");
        }
        Ok(())
    }

    /// Horizon of the rate curve every kind works against.
    pub fn curve_horizon(&self) -> f64 {
        self.times.iter().cloned().fold(self.horizon, f64::max)
    }

    pub fn limit_config(&self) -> LimitConfig {
        LimitConfig {
            degree: self.degree,
            dt: self.dt,
            horizon: self.horizon,
            times: self.times.clone(),
            paths: self.paths,
            particles: self.particles,
            seed: self.base_seed,
            ..LimitConfig::default()
        }
    }
}
