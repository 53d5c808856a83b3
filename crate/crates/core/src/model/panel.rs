//! Test functions and the weighted Sobolev norm
//! `||psi||_{k,p} = (sum_{l<=k} int_0^inf |psi^(l)|^2 / (1 + x^{2p}) dx)^{1/2}`.

use serde::Serialize;

use super::RateFunction;
use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::quadrature::adaptive_simpson;

#[derive(Clone, Debug)]
pub enum TestFnKind {
    Poly(Poly),
    Rate(RateFunction),
}

/// A member of the admissible test-function panel.
#[derive(Clone, Debug)]
pub struct TestFunction {
    pub name: String,
    pub kind: TestFnKind,
    /// Weight exponent `p` used for this member.
    pub weight: f64,
    /// `weight > alpha_growth + 1/2`.
    pub admissible: bool,
}

impl TestFunction {
    pub fn poly(name: impl Into<String>, poly: Poly, weight: f64, alpha_growth: f64) -> Self {
        TestFunction {
            name: name.into(),
            kind: TestFnKind::Poly(poly),
            weight,
            admissible: weight > alpha_growth + 0.5,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    pub fn derivative(&self, x: f64, order: usize) -> f64 {
        match &self.kind {
            TestFnKind::Poly(p) => p.eval_derivative(x, order),
            TestFnKind::Rate(f) => f.derivative(x, order),
        }
    }

    pub fn as_poly(&self) -> Option<Poly> {
        match &self.kind {
            TestFnKind::Poly(p) => Some(p.clone()),
            TestFnKind::Rate(f) => f.as_poly(),
        }
    }

    /// Polynomial growth exponent of the `order`-th derivative.
    pub fn growth(&self, order: usize) -> Option<f64> {
        match &self.kind {
            TestFnKind::Poly(p) => {
                let d = p.nth_derivative(order);
                (!d.is_zero()).then(|| d.degree() as f64)
            }
            TestFnKind::Rate(f) => match f.as_poly() {
                Some(p) => {
                    let d = p.nth_derivative(order);
                    (!d.is_zero()).then(|| d.degree() as f64)
                }
                None => Some(f.alpha_growth()),
            },
        }
    }
}

/// Panel row as written to reports.
#[derive(Clone, Debug, Serialize)]
pub struct PanelEntry {
    pub name: String,
    pub weight: f64,
    pub admissible: bool,
}

#[derive(Clone, Debug)]
pub struct TestFunctionPanel {
    pub functions: Vec<TestFunction>,
}

impl TestFunctionPanel {
    /// The constant 1, the rate `f`, and `x^k` for `k = 1..=degree`.
    ///
    /// Each member gets weight `max(alpha_growth, own growth) + 1`, which is
    /// admissible and keeps its weighted norm finite.
    pub fn standard(rate: &RateFunction, degree: usize) -> Self {
        let ag = rate.alpha_growth();
        let mut functions = vec![TestFunction::poly("one", Poly::constant(1.0), ag + 1.0, ag)];
        let f_growth = rate
            .as_poly()
            .map(|p| p.degree() as f64)
            .unwrap_or(ag)
            .max(ag);
        functions.push(TestFunction {
            name: "f".into(),
            kind: TestFnKind::Rate(rate.clone()),
            weight: f_growth + 1.0,
            admissible: f_growth + 1.0 > ag + 0.5,
        });
        for k in 1..=degree {
            let w = (k as f64).max(ag) + 1.0;
            functions.push(TestFunction::poly(format!("x^{k}"), Poly::monomial(k), w, ag));
        }
        TestFunctionPanel { functions }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&TestFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Polynomial forms of all members; `None` if any member is not polynomial.
    pub fn polys(&self) -> Option<Vec<Poly>> {
        self.functions.iter().map(TestFunction::as_poly).collect()
    }

    pub fn entries(&self) -> Vec<PanelEntry> {
        self.functions
            .iter()
            .map(|f| PanelEntry {
                name: f.name.clone(),
                weight: f.weight,
                admissible: f.admissible,
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NormOptions {
    /// Split point between the direct and the log-mapped tail quadrature.
    pub x_max: f64,
    pub tol: f64,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            x_max: 1e3,
            tol: 1e-10,
        }
    }
}

/// Weighted Sobolev norm `||psi||_{k,p}`.
///
/// `[0, x_max]` is integrated by adaptive Simpson over decades; the tail is
/// mapped by `x = x_max e^s`, where the declared growth `g` of each derivative
/// makes the integrand decay like `e^{-(2p - 2g - 1) s}`. A non-positive decay
/// rate, or a tail remainder above tolerance, is a divergent-integral error.
pub fn weighted_sobolev_norm(psi: &TestFunction, k: usize, p: f64, opts: NormOptions) -> Result<f64> {
    if k > 6 {
        return Err(Error::InvalidArgument(format!("derivative order {k} > 6")));
    }
    if !(p >= 0.0) {
        return Err(Error::InvalidArgument(format!("weight exponent {p} < 0")));
    }
    let mut total = 0.0;
    for l in 0..=k {
        let Some(g) = psi.growth(l) else {
            continue;
        };
        let decay = 2.0 * p - 2.0 * g - 1.0;
        if decay <= 0.0 {
            return Err(Error::DivergentIntegral(format!(
                "{}: derivative {l} grows like x^{g}, weight p={p} too small",
                psi.name
            )));
        }
        let integrand = |x: f64| {
            let d = psi.derivative(x, l);
            d * d / (1.0 + x.powf(2.0 * p))
        };
        let mut edges = vec![0.0, 1.0];
        while *edges.last().unwrap() < opts.x_max {
            let next = (edges.last().unwrap() * 10.0).min(opts.x_max);
            edges.push(next);
        }
        let head: f64 = edges
            .windows(2)
            .map(|w| adaptive_simpson(integrand, w[0], w[1], opts.tol * 1e-2))
            .sum();

        let mapped = |s: f64| {
            let x = opts.x_max * s.exp();
            integrand(x) * x
        };
        let chunk = 1.0 / decay;
        let mut tail = 0.0;
        let mut s = 0.0;
        let mut converged = false;
        for _ in 0..400 {
            tail += adaptive_simpson(mapped, s, s + chunk, opts.tol * 1e-2);
            s += chunk;
            // Remainder of a geometric tail with rate `decay`.
            let remainder = mapped(s) / decay;
            if remainder < opts.tol * 1e-2 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::DivergentIntegral(format!(
                "{}: tail of derivative {l} exceeds tolerance",
                psi.name
            )));
        }
        total += head + tail;
    }
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_one() -> TestFunction {
        TestFunction::poly("one", Poly::constant(1.0), 1.0, 1.0)
    }

    #[test]
    fn zero_function_has_zero_norm() {
        let z = TestFunction::poly("zero", Poly::zero(), 1.0, 1.0);
        assert_eq!(weighted_sobolev_norm(&z, 3, 1.0, NormOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn constant_closed_form() {
        // int_0^inf dx / (1 + x^2) = pi / 2
        let v = weighted_sobolev_norm(&constant_one(), 0, 1.0, NormOptions::default()).unwrap();
        assert!((v - std::f64::consts::FRAC_PI_2.sqrt()).abs() < 1e-9, "{v}");
    }

    #[test]
    fn monomial_closed_form() {
        // int_0^inf x^2 / (1 + x^4) dx = pi / (2 sqrt 2); derivative term pi / (2 sqrt 2) too
        let x = TestFunction::poly("x", Poly::monomial(1), 2.0, 1.0);
        let expect = std::f64::consts::PI / (2.0 * 2f64.sqrt());
        let v0 = weighted_sobolev_norm(&x, 0, 2.0, NormOptions::default()).unwrap();
        assert!((v0 * v0 - expect).abs() < 1e-9);
        let v1 = weighted_sobolev_norm(&x, 1, 2.0, NormOptions::default()).unwrap();
        assert!((v1 * v1 - 2.0 * expect).abs() < 1e-9);
    }

    #[test]
    fn divergent_weight_is_an_error() {
        let x2 = TestFunction::poly("x^2", Poly::monomial(2), 2.0, 1.0);
        assert!(matches!(
            weighted_sobolev_norm(&x2, 0, 2.0, NormOptions::default()),
            Err(Error::DivergentIntegral(_))
        ));
        assert!(matches!(
            weighted_sobolev_norm(&constant_one(), 0, 0.5, NormOptions::default()),
            Err(Error::DivergentIntegral(_))
        ));
    }

    #[test]
    fn standard_panel_layout() {
        let f = RateFunction::linear();
        let panel = TestFunctionPanel::standard(&f, 4);
        let names: Vec<_> = panel.functions.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["one", "f", "x^1", "x^2", "x^3", "x^4"]);
        assert!(panel.functions.iter().all(|t| t.admissible));
        assert!(panel.polys().is_some());
    }

    #[test]
    fn norm_monotone_in_order() {
        let f = RateFunction::polynomial(vec![0.0, 1.0, 0.5]).unwrap();
        let panel = TestFunctionPanel::standard(&f, 4);
        for psi in &panel.functions {
            let mut prev = 0.0;
            for k in 0..=5 {
                let v = weighted_sobolev_norm(psi, k, psi.weight, NormOptions::default()).unwrap();
                assert!(v + 1e-8 >= prev, "{} k={k}: {v} < {prev}", psi.name);
                prev = v;
            }
        }
    }
}
