//! Numerical proxies for the standing assumptions on `f` and `g0`.
//!
//! Analytic conditions (convexity, polynomial growth of six derivatives,
//! C1 density with compact support) are checked on a log-spaced grid of
//! 10^4 points over `[0, 10^3]`.

use serde::{Deserialize, Serialize};

use super::{InitialDensity, LowerGrowth, ModelParams, RateFunction, MAX_DERIVATIVE};
use crate::quadrature::GaussLegendre;

pub const GRID_POINTS: usize = 10_000;
pub const GRID_MAX: f64 = 1e3;

/// Which consumers require a check to pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Needed by the particle simulator (and everything else).
    Simulation,
    /// Needed by the mean-field density and solver.
    MeanField,
    /// Recorded only.
    Informational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub scope: Scope,
    pub passed: bool,
    pub evidence: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub lower_growth: Option<LowerGrowth>,
}

impl ValidationReport {
    /// True when every check needed up to `scope` passed.
    pub fn passes(&self, scope: Scope) -> bool {
        self.checks
            .iter()
            .filter(|c| c.scope <= scope && c.scope != Scope::Informational)
            .all(|c| c.passed)
    }

    pub fn failures(&self, scope: Scope) -> Vec<&Check> {
        self.checks
            .iter()
            .filter(|c| c.scope <= scope && c.scope != Scope::Informational && !c.passed)
            .collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary(&self, scope: Scope) -> String {
        self.failures(scope)
            .iter()
            .map(|c| format!("{}: {}", c.name, c.evidence))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// The validation grid: 0 followed by log-spaced points up to `GRID_MAX`.
pub fn validation_grid() -> Vec<f64> {
    let lo: f64 = 1e-6;
    let n = GRID_POINTS - 1;
    let ratio = (GRID_MAX / lo).ln() / (n - 1) as f64;
    std::iter::once(0.0)
        .chain((0..n).map(|i| lo * (ratio * i as f64).exp()))
        .collect()
}

pub fn validate_model(params: &ModelParams) -> ValidationReport {
    let mut checks = vec![
        check(
            "leak_rate_positive",
            Scope::Simulation,
            params.alpha > 0.0 && params.alpha.is_finite(),
            format!("alpha = {}", params.alpha),
        ),
        check(
            "weight_nonnegative",
            Scope::Simulation,
            params.h >= 0.0 && params.h.is_finite(),
            format!("h = {}", params.h),
        ),
        check(
            "purely_excitatory",
            Scope::Informational,
            params.h > 0.0,
            format!("h = {}", params.h),
        ),
    ];
    let grid = validation_grid();
    checks.extend(rate_checks(&params.rate, &grid));
    checks.extend(init_checks(&params.init));
    ValidationReport {
        checks,
        lower_growth: params.rate.lower_growth(),
    }
}

fn check(name: &str, scope: Scope, passed: bool, evidence: String) -> Check {
    Check {
        name: name.to_string(),
        scope,
        passed,
        evidence,
    }
}

fn rate_checks(rate: &RateFunction, grid: &[f64]) -> Vec<Check> {
    let values: Vec<f64> = grid.iter().map(|&x| rate.eval(x)).collect();
    let mut out = Vec::new();

    let bad_pos = grid
        .iter()
        .zip(&values)
        .find(|(&x, &v)| !(v.is_finite() && v >= 0.0 && (x == 0.0 || v > 0.0)));
    out.push(check(
        "rate_positive",
        Scope::Simulation,
        bad_pos.is_none(),
        match bad_pos {
            Some((x, v)) => format!("f({x}) = {v}"),
            None => format!("f > 0 on {} grid points", grid.len() - 1),
        },
    ));

    let bad_mono = values
        .windows(2)
        .position(|w| !(w[1] >= w[0] - 1e-12 * w[0].abs()));
    out.push(check(
        "rate_nondecreasing",
        Scope::Simulation,
        bad_mono.is_none(),
        match bad_mono {
            Some(i) => format!("f decreases between x={} and x={}", grid[i], grid[i + 1]),
            None => "first differences nonnegative".into(),
        },
    ));

    let slopes: Vec<f64> = grid
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, v)| (v[1] - v[0]) / (x[1] - x[0]))
        .collect();
    let bad_convex = slopes
        .windows(2)
        .position(|s| !(s[1] >= s[0] - 1e-7 * s[0].abs().max(s[1].abs()).max(1e-12)));
    out.push(check(
        "rate_convex",
        Scope::Simulation,
        bad_convex.is_none(),
        match bad_convex {
            Some(i) => format!("second difference negative near x={}", grid[i + 1]),
            None => "second differences nonnegative".into(),
        },
    ));

    let growth = growth_check(rate, grid);
    out.push(check(
        "rate_growth",
        Scope::Simulation,
        growth.is_ok(),
        match growth {
            Ok(msg) | Err(msg) => msg,
        },
    ));

    let lower = rate.lower_growth();
    out.push(check(
        "rate_lower_growth",
        Scope::Informational,
        lower.is_some(),
        match lower {
            Some(l) => format!("f(x) >= {} x^{} for x >= {}", l.c1, l.beta, l.k),
            None => "no lower growth bound declared".into(),
        },
    ));
    out
}

/// `sup |f^(k)| / (1 + x^a)` must stay bounded: the log-log slope of the
/// ratio over the last grid decade may not exceed 0.05.
fn growth_check(rate: &RateFunction, grid: &[f64]) -> Result<String, String> {
    let a = rate.alpha_growth();
    if !(a >= 1.0) {
        return Err(format!("alpha_growth = {a} < 1"));
    }
    let mut worst: f64 = 0.0;
    for k in 0..=MAX_DERIVATIVE {
        let mut lo = 0.0f64;
        let mut hi = 0.0f64;
        for &x in grid {
            let r = rate.derivative(x, k).abs() / (1.0 + x.powf(a));
            if !r.is_finite() {
                return Err(format!("derivative {k} not finite at x={x}"));
            }
            if (GRID_MAX / 100.0..GRID_MAX / 10.0).contains(&x) {
                lo = lo.max(r);
            } else if x >= GRID_MAX / 10.0 {
                hi = hi.max(r);
            }
        }
        if hi == 0.0 {
            continue;
        }
        if lo == 0.0 {
            return Err(format!("derivative {k} vanishes then grows"));
        }
        let slope = (hi / lo).log10();
        worst = worst.max(slope);
        if slope > 0.05 {
            return Err(format!(
                "derivative {k} outgrows x^{a}: tail log-slope {slope:.3}"
            ));
        }
    }
    Ok(format!("max tail log-slope {worst:.4} with alpha_growth {a}"))
}

fn init_checks(init: &InitialDensity) -> Vec<Check> {
    let mut out = vec![check(
        "initial_support",
        Scope::Simulation,
        init.check().is_ok(),
        format!("support right edge {}", init.support_right()),
    )];
    out.push(check(
        "initial_density_exists",
        Scope::MeanField,
        init.has_density(),
        if init.has_density() {
            "absolutely continuous".into()
        } else {
            "point mass has no Lebesgue density".into()
        },
    ));
    if !init.has_density() {
        return out;
    }
    let a = init.support_right();
    let gl = GaussLegendre::new(16);
    let mass: f64 = gl
        .composite_nodes(0.0, a, &init.breakpoints(), 8)
        .into_iter()
        .map(|(x, w)| w * init.density(x))
        .sum();
    out.push(check(
        "initial_density_normalized",
        Scope::MeanField,
        (mass - 1.0).abs() < 1e-10,
        format!("integral = {mass:.14}"),
    ));

    // Slope jumps of order one between adjacent cells reveal a kink.
    let n = GRID_POINTS;
    let dx = a / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| i as f64 * dx).collect();
    let slopes: Vec<f64> = xs
        .windows(2)
        .map(|w| (init.density(w[1]) - init.density(w[0])) / dx)
        .collect();
    let scale = 1.0 + slopes.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let jump = slopes
        .windows(2)
        .map(|s| (s[1] - s[0]).abs())
        .fold(0.0f64, f64::max);
    out.push(check(
        "initial_density_c1",
        Scope::MeanField,
        jump <= 1e-2 * scale,
        format!("max slope jump {jump:.3e} (scale {scale:.3e})"),
    ));

    let beyond = [a * (1.0 + 1e-9), a * 1.5, a * 10.0];
    let leak = beyond.iter().any(|&x| init.density(x) != 0.0);
    out.push(check(
        "initial_compact_support",
        Scope::MeanField,
        !leak,
        format!("density vanishes beyond {a}"),
    ));
    out
}
