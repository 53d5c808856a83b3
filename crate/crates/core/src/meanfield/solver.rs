use serde::{Deserialize, Serialize};

use super::curve::RateCurve;
use crate::error::{Error, Result};
use crate::model::{InitialDensity, Model, Scope};
use crate::quadrature::GaussLegendre;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub horizon: f64,
    /// Requested step; shrunk so that it divides the horizon.
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Gauss-Legendre order and panel count for the initial-position integral.
    pub gl_order: usize,
    pub gl_panels: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            horizon: 2.0,
            dt: 1e-3,
            tol: 1e-10,
            max_iter: 200,
            gl_order: 8,
            gl_panels: 32,
        }
    }
}

impl SolverOptions {
    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize
    }
}

pub(crate) fn initial_nodes(init: &InitialDensity, opts: &SolverOptions) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(opts.gl_order);
    gl.composite_nodes(0.0, init.support_right(), &init.breakpoints(), opts.gl_panels)
        .into_iter()
        .map(|(x, w)| (x, w * init.density(x)))
        .collect()
}

/// Walks the discrete limit law `Q_{t_k}` for every grid time, given the curve.
///
/// Particles that never spiked sit at `phi_{0,t}(x0)` with weight
/// `g0(x0) exp(-int_0^t f(phi_{0,s}(x0)) ds)`; particles whose last reset was
/// at `r` sit at `phi_{r,t}(0)` with weight `p_r exp(-int_r^t f(phi_{r,s}(0)) ds) dr`.
/// Survival exponents are marched with Simpson's rule per step and the reset
/// time is integrated by the trapezoid rule on the grid.
pub(crate) fn sweep_measure(
    model: &Model,
    curve: &RateCurve,
    nodes: &[(f64, f64)],
    mut visit: impl FnMut(usize, f64, f64),
) {
    let f = model.rate();
    let alpha = model.alpha();
    let h = model.h();
    let m = curve.len() - 1;
    let dt = curve.dt;
    let decay: Vec<f64> = (0..=m).map(|k| (-alpha * curve.time(k)).exp()).collect();
    let kn: Vec<f64> = (0..=m).map(|k| curve.exp_integral_node(k)).collect();
    let mid_t: Vec<f64> = (0..=m).map(|k| (k as f64 - 0.5).max(0.0) * dt).collect();
    let decay_mid: Vec<f64> = mid_t.iter().map(|&t| (-alpha * t).exp()).collect();
    let k_mid: Vec<f64> = mid_t.iter().map(|&t| curve.exp_integral(t)).collect();
    let sixth = dt / 6.0;

    for &(x0, w0) in nodes {
        if w0 == 0.0 {
            continue;
        }
        visit(0, x0, w0);
        let mut lam = 0.0;
        let mut f_prev = f.eval(x0);
        for k in 1..=m {
            let y_mid = decay_mid[k] * (x0 + h * k_mid[k]);
            let y = decay[k] * (x0 + h * kn[k]);
            let f_here = f.eval(y);
            lam += sixth * (f_prev + 4.0 * f.eval(y_mid) + f_here);
            f_prev = f_here;
            visit(k, y, w0 * (-lam).exp());
        }
    }

    let mut lam = vec![0.0; m + 1];
    let mut f_prev = vec![0.0; m + 1];
    let f0 = f.eval(0.0);
    for k in 1..=m {
        for j in 0..k {
            let y_mid = h * decay_mid[k] * (k_mid[k] - kn[j]);
            let y = h * decay[k] * (kn[k] - kn[j]);
            let f_here = f.eval(y);
            let prev = if j + 1 == k { f0 } else { f_prev[j] };
            lam[j] += sixth * (prev + 4.0 * f.eval(y_mid) + f_here);
            f_prev[j] = f_here;
            let c = if j == 0 { 0.5 } else { 1.0 };
            visit(k, y, c * dt * curve.values[j] * (-lam[j]).exp());
        }
        visit(k, 0.0, 0.5 * dt * curve.values[k]);
    }
}

/// Fixed point of `p -> (t -> int f dg_t^{(p)})` by Picard sweeps.
pub fn solve_rate_curve(model: &Model, opts: &SolverOptions) -> Result<RateCurve> {
    model.require(Scope::MeanField)?;
    if !(opts.horizon > 0.0 && opts.dt > 0.0 && opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("bad solver options {opts:?}")));
    }
    let steps = opts.steps();
    let dt = opts.horizon / steps as f64;
    let nodes = initial_nodes(model.init(), opts);
    let p0: f64 = nodes.iter().map(|&(x, w)| w * model.rate().eval(x)).sum();
    let mut curve = RateCurve::from_values(model.alpha(), model.h(), dt, vec![p0; steps + 1]);
    let mut history = Vec::new();

    for iter in 1..=opts.max_iter {
        let mut next = vec![0.0; steps + 1];
        let mut mass = vec![0.0; steps + 1];
        sweep_measure(model, &curve, &nodes, |k, y, w| {
            next[k] += w * model.rate().eval(y);
            mass[k] += w;
        });
        if let Some((k, &v)) = next.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeDensity {
                time: k as f64 * dt,
                value: v,
            });
        }
        let residual = next
            .iter()
            .zip(&curve.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        history.push(residual);
        curve.set_values(next);
        curve.mass_defect = mass.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
        if residual < opts.tol {
            curve.iterations = iter;
            curve.residual = residual;
            curve.residual_history = history;
            return Ok(curve);
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

/// Raw moments `g_{t_k}(x^m)`, `m = 0..=degree`, at every grid time, taken
/// from the same discrete law the solver iterates on.
#[derive(Clone, Debug, Serialize)]
pub struct MomentTable {
    pub dt: f64,
    pub degree: usize,
    /// `rows[k][m] = g_{t_k}(x^m)`.
    pub rows: Vec<Vec<f64>>,
}

impl MomentTable {
    /// Moment `m` at an arbitrary time by linear interpolation.
    pub fn at(&self, t: f64, m: usize) -> f64 {
        let last = self.rows.len() - 1;
        let pos = (t / self.dt).max(0.0);
        let k = (pos.floor() as usize).min(last.saturating_sub(1));
        let w = (pos - k as f64).clamp(0.0, 1.0);
        if last == 0 {
            return self.rows[0][m];
        }
        self.rows[k][m] * (1.0 - w) + self.rows[k + 1][m] * w
    }

    /// `g_t(P)` for a polynomial given by its coefficients.
    pub fn poly_at(&self, t: f64, coeffs: &[f64]) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(m, c)| c * self.at(t, m))
            .sum()
    }
}

pub fn moment_table(model: &Model, curve: &RateCurve, degree: usize) -> MomentTable {
    let nodes = initial_nodes(model.init(), &SolverOptions::default());
    let mut rows = vec![vec![0.0; degree + 1]; curve.len()];
    sweep_measure(model, curve, &nodes, |k, y, w| {
        let row = &mut rows[k];
        let mut pow = w;
        for v in row.iter_mut() {
            *v += pow;
            pow *= y;
        }
    });
    MomentTable {
        dt: curve.dt,
        degree,
        rows,
    }
}
