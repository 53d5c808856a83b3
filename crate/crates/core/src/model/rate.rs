use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;

/// Highest derivative order the model ever needs from the rate function.
pub const MAX_DERIVATIVE: usize = 6;

/// `f(x) >= c1 * x^beta` for `x >= k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerGrowth {
    pub c1: f64,
    pub beta: f64,
    pub k: f64,
}

/// User-supplied rate function: `derivative(x, order)` for `order <= 6`.
#[derive(Clone)]
pub struct CustomRate {
    pub name: String,
    pub derivative: Arc<dyn Fn(f64, usize) -> f64 + Send + Sync>,
}

impl fmt::Debug for CustomRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomRate").field("name", &self.name).finish()
    }
}

#[derive(Clone, Debug)]
pub enum RateKind {
    /// Nonnegative coefficients in the monomial basis.
    Polynomial(Poly),
    /// `c * x^beta`.
    Power { c: f64, beta: u32 },
    Custom(CustomRate),
}

/// The spiking rate `f` together with its declared polynomial growth.
#[derive(Clone, Debug)]
pub struct RateFunction {
    kind: RateKind,
    alpha_growth: f64,
    lower_growth: Option<LowerGrowth>,
}

impl RateFunction {
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidModel(
                "polynomial rate coefficients must be finite and nonnegative".into(),
            ));
        }
        let poly = Poly::new(coeffs);
        if poly.is_zero() {
            return Err(Error::InvalidModel("rate polynomial is identically zero".into()));
        }
        let degree = poly.degree();
        let lower = LowerGrowth {
            c1: poly.coeff(degree),
            beta: degree as f64,
            k: 0.0,
        };
        Ok(RateFunction {
            alpha_growth: (degree as f64).max(1.0),
            lower_growth: (degree >= 1).then_some(lower),
            kind: RateKind::Polynomial(poly),
        })
    }

    /// `f(x) = x`.
    pub fn linear() -> Self {
        Self::polynomial(vec![0.0, 1.0]).expect("valid")
    }

    pub fn power(c: f64, beta: u32) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) || beta == 0 {
            return Err(Error::InvalidModel(
                "power rate needs c > 0 and integer beta >= 1".into(),
            ));
        }
        Ok(RateFunction {
            kind: RateKind::Power { c, beta },
            alpha_growth: beta as f64,
            lower_growth: Some(LowerGrowth {
                c1: c,
                beta: beta as f64,
                k: 0.0,
            }),
        })
    }

    pub fn custom(
        name: impl Into<String>,
        alpha_growth: f64,
        derivative: impl Fn(f64, usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        RateFunction {
            kind: RateKind::Custom(CustomRate {
                name: name.into(),
                derivative: Arc::new(derivative),
            }),
            alpha_growth,
            lower_growth: None,
        }
    }

    pub fn with_alpha_growth(mut self, alpha_growth: f64) -> Self {
        self.alpha_growth = alpha_growth;
        self
    }

    pub fn with_lower_growth(mut self, lower: LowerGrowth) -> Self {
        self.lower_growth = Some(lower);
        self
    }

    pub fn kind(&self) -> &RateKind {
        &self.kind
    }

    pub fn alpha_growth(&self) -> f64 {
        self.alpha_growth
    }

    pub fn lower_growth(&self) -> Option<LowerGrowth> {
        self.lower_growth
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            RateKind::Polynomial(p) => p.eval(x),
            RateKind::Power { c, beta } => c * x.powi(*beta as i32),
            RateKind::Custom(r) => (r.derivative)(x, 0),
        }
    }

    pub fn derivative(&self, x: f64, order: usize) -> f64 {
        match &self.kind {
            RateKind::Polynomial(p) => p.eval_derivative(x, order),
            RateKind::Power { c, beta } => {
                let b = *beta as usize;
                if order > b {
                    return 0.0;
                }
                let falling: f64 = (0..order).map(|j| (b - j) as f64).product();
                c * falling * x.powi((b - order) as i32)
            }
            RateKind::Custom(r) => (r.derivative)(x, order),
        }
    }

    /// Monomial expansion when `f` is polynomial.
    pub fn as_poly(&self) -> Option<Poly> {
        match &self.kind {
            RateKind::Polynomial(p) => Some(p.clone()),
            RateKind::Power { c, beta } => Some(Poly::monomial(*beta as usize).scale(*c)),
            RateKind::Custom(_) => None,
        }
    }

    pub fn spec(&self) -> Result<RateSpec> {
        let alpha_growth = Some(self.alpha_growth);
        match &self.kind {
            RateKind::Polynomial(p) => Ok(RateSpec::Polynomial {
                coeffs: p.coeffs().to_vec(),
                alpha_growth,
            }),
            RateKind::Power { c, beta } => Ok(RateSpec::Power {
                c: *c,
                beta: *beta,
                alpha_growth,
            }),
            RateKind::Custom(r) => Err(Error::InvalidModel(format!(
                "custom rate `{}` cannot be serialized",
                r.name
            ))),
        }
    }
}

/// Serialized form of a rate function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateSpec {
    Polynomial {
        coeffs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha_growth: Option<f64>,
    },
    Power {
        c: f64,
        beta: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha_growth: Option<f64>,
    },
}

impl TryFrom<RateSpec> for RateFunction {
    type Error = Error;

    fn try_from(spec: RateSpec) -> Result<Self> {
        let (rate, growth) = match spec {
            RateSpec::Polynomial {
                coeffs,
                alpha_growth,
            } => (RateFunction::polynomial(coeffs)?, alpha_growth),
            RateSpec::Power {
                c,
                beta,
                alpha_growth,
            } => (RateFunction::power(c, beta)?, alpha_growth),
        };
        Ok(match growth {
            Some(g) => rate.with_alpha_growth(g),
            None => rate,
        })
    }
}

impl Serialize for RateFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec()
            .map_err(serde::ser::Error::custom)?
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RateFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = RateSpec::deserialize(d)?;
        RateFunction::try_from(spec).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_derivatives() {
        let f = RateFunction::power(2.0, 3).unwrap();
        assert_eq!(f.eval(2.0), 16.0);
        assert_eq!(f.derivative(2.0, 1), 24.0);
        assert_eq!(f.derivative(2.0, 3), 12.0);
        assert_eq!(f.derivative(2.0, 4), 0.0);
        assert_eq!(f.as_poly().unwrap().coeffs(), &[0.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn rejects_negative_coefficients() {
        assert!(RateFunction::polynomial(vec![0.0, -1.0]).is_err());
        assert!(RateFunction::polynomial(vec![0.0]).is_err());
        assert!(RateFunction::power(1.0, 0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let f = RateFunction::polynomial(vec![0.1, 0.0, 2.0]).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"kind":"polynomial","coeffs":[0.1,0.0,2.0],"alpha_growth":2.0}"#);
        let back: RateFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back.as_poly(), f.as_poly());
        let custom = RateFunction::custom("exp", 1.0, |x, _| x.exp());
        assert!(serde_json::to_string(&custom).is_err());
    }
}
