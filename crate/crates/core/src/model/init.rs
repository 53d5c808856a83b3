use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Law of the initial membrane potentials, supported on `[0, right]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum InitialDensity {
    Uniform { right: f64 },
    /// Triangular density on `[0, right]` with its peak at `mode`.
    Triangular { right: f64, mode: f64 },
    /// Degenerate law: every neuron starts at `at`. Has no density, so it is
    /// usable by the particle simulator only.
    PointMass { at: f64 },
}

impl InitialDensity {
    pub fn uniform(right: f64) -> Result<Self> {
        let d = InitialDensity::Uniform { right };
        d.check()?;
        Ok(d)
    }

    pub fn triangular(right: f64, mode: f64) -> Result<Self> {
        let d = InitialDensity::Triangular { right, mode };
        d.check()?;
        Ok(d)
    }

    pub fn point_mass(at: f64) -> Result<Self> {
        let d = InitialDensity::PointMass { at };
        d.check()?;
        Ok(d)
    }

    pub fn check(&self) -> Result<()> {
        let ok = match *self {
            InitialDensity::Uniform { right } => right > 0.0 && right.is_finite(),
            InitialDensity::Triangular { right, mode } => {
                right > 0.0 && right.is_finite() && (0.0..=right).contains(&mode)
            }
            InitialDensity::PointMass { at } => at >= 0.0 && at.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("bad initial law {self:?}")))
        }
    }

    /// Right edge of the support.
    pub fn support_right(&self) -> f64 {
        match *self {
            InitialDensity::Uniform { right } | InitialDensity::Triangular { right, .. } => right,
            InitialDensity::PointMass { at } => at,
        }
    }

    pub fn has_density(&self) -> bool {
        !matches!(self, InitialDensity::PointMass { .. })
    }

    /// Points inside the support where the density is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            InitialDensity::Triangular { right, mode } if mode > 0.0 && mode < right => vec![mode],
            _ => Vec::new(),
        }
    }

    /// Density value; zero outside `[0, right]`. The point mass reports 0.
    pub fn density(&self, x: f64) -> f64 {
        match *self {
            InitialDensity::Uniform { right } => {
                if (0.0..=right).contains(&x) {
                    1.0 / right
                } else {
                    0.0
                }
            }
            InitialDensity::Triangular { right, mode } => {
                if !(0.0..=right).contains(&x) {
                    0.0
                } else if x < mode {
                    2.0 * x / (right * mode)
                } else {
                    2.0 * (right - x) / (right * (right - mode))
                }
            }
            InitialDensity::PointMass { .. } => 0.0,
        }
    }

    /// One-sided derivative of the density from the right (left at the edge).
    pub fn density_derivative(&self, x: f64) -> f64 {
        match *self {
            InitialDensity::Uniform { .. } | InitialDensity::PointMass { .. } => 0.0,
            InitialDensity::Triangular { right, mode } => {
                if !(0.0..=right).contains(&x) {
                    0.0
                } else if x < mode {
                    2.0 / (right * mode)
                } else {
                    -2.0 / (right * (right - mode))
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            InitialDensity::Uniform { right } => (x / right).clamp(0.0, 1.0),
            InitialDensity::Triangular { right, mode } => {
                if x <= 0.0 {
                    0.0
                } else if x >= right {
                    1.0
                } else if x < mode {
                    x * x / (right * mode)
                } else {
                    1.0 - (right - x).powi(2) / (right * (right - mode))
                }
            }
            InitialDensity::PointMass { at } => {
                if x >= at {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Inverse-CDF sampler: maps `u` in `[0, 1)` to a draw from the law.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            InitialDensity::Uniform { right } => u * right,
            InitialDensity::Triangular { right, mode } => {
                if u * right < mode {
                    (u * right * mode).sqrt()
                } else {
                    right - ((1.0 - u) * right * (right - mode)).sqrt()
                }
            }
            InitialDensity::PointMass { at } => at,
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}
