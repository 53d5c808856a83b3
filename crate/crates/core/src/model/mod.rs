//! Model instance, assumption checks and the test-function panel.

mod init;
mod panel;
mod rate;
mod validate;

pub use init::InitialDensity;
pub use panel::{
    weighted_sobolev_norm, NormOptions, PanelEntry, TestFnKind, TestFunction, TestFunctionPanel,
};
pub use rate::{CustomRate, LowerGrowth, RateFunction, RateKind, RateSpec, MAX_DERIVATIVE};
pub use validate::{validate_model, validation_grid, Check, Scope, ValidationReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Leak rate `alpha`, synaptic weight `h`, rate function `f`, initial law `g0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub h: f64,
    pub rate: RateFunction,
    pub init: InitialDensity,
}

impl ModelParams {
    /// alpha = 1, h = 0.5, f(x) = x, g0 = uniform[0, 1].
    pub fn default_model() -> Self {
        ModelParams {
            alpha: 1.0,
            h: 0.5,
            rate: RateFunction::linear(),
            init: InitialDensity::Uniform { right: 1.0 },
        }
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(self)?)
    }
}

/// A model that passed the simulation-level assumption checks.
#[derive(Clone, Debug)]
pub struct Model {
    params: ModelParams,
    report: ValidationReport,
}

impl Model {
    pub fn new(params: ModelParams) -> Result<Self> {
        let report = validate_model(&params);
        if !report.passes(Scope::Simulation) {
            return Err(Error::ModelRejected(report.summary(Scope::Simulation)));
        }
        Ok(Model { params, report })
    }

    pub fn default_model() -> Self {
        Model::new(ModelParams::default_model()).expect("default model is valid")
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn h(&self) -> f64 {
        self.params.h
    }

    pub fn rate(&self) -> &RateFunction {
        &self.params.rate
    }

    pub fn init(&self) -> &InitialDensity {
        &self.params.init
    }

    /// Errors unless every check up to `scope` passed.
    pub fn require(&self, scope: Scope) -> Result<()> {
        if self.report.passes(scope) {
            Ok(())
        } else {
            Err(Error::ModelRejected(self.report.summary(scope)))
        }
    }

    /// `f(2h)`: the mark level defining the good event.
    pub fn good_event_level(&self) -> f64 {
        self.params.rate.eval(2.0 * self.params.h)
    }
}
