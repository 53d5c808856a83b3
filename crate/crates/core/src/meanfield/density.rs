use serde::Serialize;

use super::curve::RateCurve;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::quadrature::{adaptive_simpson, GaussLegendre};

pub const DEFAULT_NODES: usize = 4096;
const INNER_TOL: f64 = 1e-9;
const JUMP_TOL: f64 = 1e-6;

/// Branch tags of the limit density.
pub const BRANCH_OUTSIDE: u8 = 0;
pub const BRANCH_RESET: u8 = 1;
pub const BRANCH_TRANSPORT: u8 = 2;

/// Pointwise evaluator of the explicit limit density at a fixed time.
pub struct LimitDensity<'a> {
    model: &'a Model,
    curve: &'a RateCurve,
    t: f64,
    shock: f64,
    right_edge: f64,
}

impl<'a> LimitDensity<'a> {
    pub fn new(model: &'a Model, curve: &'a RateCurve, t: f64) -> Result<Self> {
        if model.h() <= 0.0 {
            return Err(Error::InvalidArgument(
                "the limit density has a 1/h boundary value; h must be positive".into(),
            ));
        }
        if !model.init().has_density() {
            return Err(Error::InvalidArgument("initial law has no density".into()));
        }
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!("negative time {t}")));
        }
        curve.check_covers(t)?;
        let shock = curve.shock(t);
        let right_edge = curve.flow(0.0, t, model.init().support_right());
        Ok(LimitDensity {
            model,
            curve,
            t,
            shock,
            right_edge,
        })
    }

    pub fn shock(&self) -> f64 {
        self.shock
    }

    pub fn right_edge(&self) -> f64 {
        self.right_edge
    }

    /// Breakpoints in `[0, right_edge]` where the density is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![self.shock];
        for x0 in self.model.init().breakpoints() {
            b.push(self.curve.flow(0.0, self.t, x0));
        }
        b.sort_by(f64::total_cmp);
        b
    }

    /// `int_s^t (alpha - f(phi_{s,u}(x))) du`.
    fn log_growth(&self, s: f64, x: f64) -> f64 {
        if self.t <= s {
            return 0.0;
        }
        let alpha = self.model.alpha();
        let f = self.model.rate();
        adaptive_simpson(|u| alpha - f.eval(self.curve.flow(s, u, x)), s, self.t, INNER_TOL)
    }

    /// Density of particles reset since time 0, valid for `y < shock`.
    pub fn reset_branch(&self, y: f64) -> f64 {
        let beta = if y >= self.shock {
            0.0
        } else {
            self.curve.reset_time(self.t, y.max(0.0))
        };
        self.log_growth(beta, 0.0).exp() / self.model.h()
    }

    /// Density of particles that never spiked, valid for `y >= shock`.
    pub fn transport_branch(&self, y: f64) -> f64 {
        let a = self.model.init().support_right();
        let x0 = (y - self.shock) * (self.model.alpha() * self.t).exp();
        if x0 > a * (1.0 + 1e-12) || x0 < -1e-12 {
            return 0.0;
        }
        let x0 = x0.clamp(0.0, a);
        self.model.init().density(x0) * self.log_growth(0.0, x0).exp()
    }

    /// Density value with its branch tag. Right-continuous at the shock.
    pub fn eval(&self, y: f64) -> (f64, u8) {
        if self.t == 0.0 {
            let v = self.model.init().density(y);
            let tag = if v > 0.0 || (0.0..=self.right_edge).contains(&y) {
                BRANCH_TRANSPORT
            } else {
                BRANCH_OUTSIDE
            };
            return (v, tag);
        }
        if y < 0.0 || y > self.right_edge {
            (0.0, BRANCH_OUTSIDE)
        } else if y < self.shock {
            (self.reset_branch(y), BRANCH_RESET)
        } else {
            (self.transport_branch(y), BRANCH_TRANSPORT)
        }
    }

    /// `int psi dg_t` by composite Gauss-Legendre on each smooth piece.
    pub fn integrate(&self, psi: impl Fn(f64) -> f64) -> f64 {
        let gl = GaussLegendre::new(8);
        let mut total = 0.0;
        if self.t > 0.0 && self.shock > 0.0 {
            for (y, w) in gl.composite_nodes(0.0, self.shock, &[], 32) {
                total += w * psi(y) * self.reset_branch(y);
            }
        }
        let breaks = self.breakpoints();
        for (y, w) in gl.composite_nodes(self.shock, self.right_edge, &breaks, 32) {
            let g = if self.t == 0.0 {
                self.model.init().density(y)
            } else {
                self.transport_branch(y)
            };
            total += w * psi(y) * g;
        }
        total
    }

    /// `exp(-int_0^t (f(phi_{0,u}(0)) - alpha) du) (g0(0) - 1/h)`, integrated
    /// with a fixed Gauss-Legendre rule independently of the branch evaluators.
    pub fn jump_closed_form(&self) -> f64 {
        let alpha = self.model.alpha();
        let f = self.model.rate();
        let gl = GaussLegendre::new(16);
        let integral = if self.t > 0.0 {
            gl.integrate_panels(|u| f.eval(self.curve.shock(u)) - alpha, 0.0, self.t, 64)
        } else {
            0.0
        };
        (-integral).exp() * (self.model.init().density(0.0) - 1.0 / self.model.h())
    }
}

/// `g_t` on a spatial grid, with the shock and support edge kept exact.
#[derive(Clone, Debug, Serialize)]
pub struct DensitySnapshot {
    pub time: f64,
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub branch: Vec<u8>,
    /// Piecewise-trapezoid CDF at the grid nodes.
    pub cdf: Vec<f64>,
    pub shock: f64,
    pub right_edge: f64,
    /// A priori support bound `a + h int_0^T p` over the curve's horizon.
    pub support_bound: f64,
    pub left_limit: f64,
    pub right_limit: f64,
    pub jump_size: f64,
    pub jump_closed_form: f64,
    /// Total mass by quadrature on the smooth pieces.
    pub mass: f64,
}

impl DensitySnapshot {
    /// Largest spacing of the spatial grid.
    pub fn max_spacing(&self) -> f64 {
        self.x.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Interpolated CDF; exact 0 and 1 outside the grid.
    pub fn cdf_at(&self, y: f64) -> f64 {
        let n = self.x.len();
        if y <= self.x[0] {
            return 0.0;
        }
        if y >= self.x[n - 1] {
            return *self.cdf.last().unwrap();
        }
        let i = self.x.partition_point(|&v| v <= y) - 1;
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        if x1 <= x0 {
            return self.cdf[i + 1];
        }
        let w = (y - x0) / (x1 - x0);
        self.cdf[i] * (1.0 - w) + self.cdf[i + 1] * w
    }

    /// Interpolated density, right-continuous at duplicated nodes.
    pub fn value_at(&self, y: f64) -> f64 {
        let n = self.x.len();
        if y < self.x[0] || y > self.x[n - 1] {
            return 0.0;
        }
        let i = (self.x.partition_point(|&v| v <= y)).clamp(1, n - 1) - 1;
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        if x1 <= x0 {
            return self.g[i + 1];
        }
        let w = ((y - x0) / (x1 - x0)).clamp(0.0, 1.0);
        self.g[i] * (1.0 - w) + self.g[i + 1] * w
    }
}

/// Evaluates both branches of `g_t` on `nodes` equally spaced points of
/// `[0, support_bound]`, plus duplicated nodes at the shock and right edge.
pub fn density_at(model: &Model, curve: &RateCurve, t: f64, nodes: usize) -> Result<DensitySnapshot> {
    let dens = LimitDensity::new(model, curve, t)?;
    let nodes = nodes.max(2);
    let support_bound = curve.support_bound(model.init().support_right(), curve.horizon());
    let upper = support_bound.max(dens.right_edge());
    let shock = dens.shock();
    let right_edge = dens.right_edge();

    let mut x = Vec::with_capacity(nodes + 4);
    let mut g = Vec::with_capacity(nodes + 4);
    let mut branch = Vec::with_capacity(nodes + 4);
    let mut special = vec![(shock, true), (right_edge, false)];
    if t == 0.0 {
        special.retain(|s| !s.1);
    }
    let mut next_special = 0;
    let left_limit = if t == 0.0 {
        1.0 / model.h()
    } else {
        dens.reset_branch(shock)
    };
    let right_limit = if t == 0.0 {
        model.init().density(0.0)
    } else {
        dens.transport_branch(shock)
    };

    for k in 0..nodes {
        let y = upper * k as f64 / (nodes - 1) as f64;
        while next_special < special.len() && special[next_special].0 <= y {
            let (s, is_shock) = special[next_special];
            if is_shock {
                x.extend([s, s]);
                g.extend([left_limit, right_limit]);
                branch.extend([BRANCH_RESET, BRANCH_TRANSPORT]);
            } else {
                let inside = if t == 0.0 {
                    model.init().density(model.init().support_right())
                } else {
                    dens.transport_branch(s)
                };
                x.extend([s, s]);
                g.extend([inside, 0.0]);
                branch.extend([BRANCH_TRANSPORT, BRANCH_OUTSIDE]);
            }
            next_special += 1;
        }
        if x.last() == Some(&y) {
            continue;
        }
        let (v, tag) = dens.eval(y);
        x.push(y);
        g.push(v);
        branch.push(tag);
    }
    if let Some((i, &v)) = g.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeDensity {
            time: t,
            value: if v.is_nan() { f64::NAN } else { g[i] },
        });
    }

    let mut cdf = vec![0.0; x.len()];
    for i in 1..x.len() {
        cdf[i] = cdf[i - 1] + 0.5 * (x[i] - x[i - 1]) * (g[i] + g[i - 1]);
    }

    let jump_size = right_limit - left_limit;
    let jump_closed_form = dens.jump_closed_form();
    if (jump_size - jump_closed_form).abs() > JUMP_TOL {
        return Err(Error::BranchMismatch {
            time: t,
            direct: jump_size,
            closed_form: jump_closed_form,
        });
    }
    let mass = dens.integrate(|_| 1.0);

    Ok(DensitySnapshot {
        time: t,
        x,
        g,
        branch,
        cdf,
        shock,
        right_edge,
        support_bound,
        left_limit,
        right_limit,
        jump_size,
        jump_closed_form,
        mass,
    })
}

/// Moments of `g_t` from pointwise quadrature of the explicit density.
#[derive(Clone, Debug, Serialize)]
pub struct Moments {
    pub time: f64,
    /// `g_t(x^k)`, `k = 0..=k_max`.
    pub raw: Vec<f64>,
    /// `g_t(f)`.
    pub rate: f64,
    /// `g_t(f x^k)`, `k = 0..=k_max`.
    pub rate_weighted: Vec<f64>,
}

pub fn moments(model: &Model, curve: &RateCurve, t: f64, k_max: usize) -> Result<Moments> {
    let dens = LimitDensity::new(model, curve, t)?;
    let f = model.rate();
    let raw = (0..=k_max)
        .map(|k| dens.integrate(|y| y.powi(k as i32)))
        .collect();
    let rate_weighted: Vec<f64> = (0..=k_max)
        .map(|k| dens.integrate(|y| f.eval(y) * y.powi(k as i32)))
        .collect();
    Ok(Moments {
        time: t,
        raw,
        rate: rate_weighted[0],
        rate_weighted,
    })
}
