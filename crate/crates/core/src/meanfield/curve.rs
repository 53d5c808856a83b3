use serde::Serialize;

use crate::error::{Error, Result};

/// Self-consistent firing rate `p_t = g_t(f)` on a uniform grid.
///
/// Between nodes `p` is linear, so every flow quantity below is evaluated in
/// closed form from the cumulative integrals `K(t) = int_0^t e^{alpha u} p_u du`.
#[derive(Clone, Debug, Serialize)]
pub struct RateCurve {
    pub dt: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    /// Largest deviation of the discrete limit law's mass from 1.
    pub mass_defect: f64,
    #[serde(skip)]
    alpha: f64,
    #[serde(skip)]
    h: f64,
    #[serde(skip)]
    exp_cumulative: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl RateCurve {
    pub fn from_values(alpha: f64, h: f64, dt: f64, values: Vec<f64>) -> Self {
        assert!(values.len() >= 2, "rate curve needs at least two nodes");
        let mut curve = RateCurve {
            dt,
            values,
            iterations: 0,
            residual: 0.0,
            residual_history: Vec::new(),
            mass_defect: 0.0,
            alpha,
            h,
            exp_cumulative: Vec::new(),
            cumulative: Vec::new(),
        };
        curve.rebuild();
        curve
    }

    /// Replaces the node values and refreshes the cumulative integrals.
    pub(crate) fn set_values(&mut self, values: Vec<f64>) {
        self.values = values;
        self.rebuild();
    }

    fn rebuild(&mut self) {
        let n = self.values.len();
        let mut k = vec![0.0; n];
        let mut c = vec![0.0; n];
        for i in 1..n {
            let t0 = (i - 1) as f64 * self.dt;
            k[i] = k[i - 1] + self.cell_exp_integral(i - 1, t0, self.dt);
            c[i] = c[i - 1] + 0.5 * self.dt * (self.values[i - 1] + self.values[i]);
        }
        self.exp_cumulative = k;
        self.cumulative = c;
    }

    /// `int_{t0}^{t0+tau} e^{alpha u} p_u du` inside cell `cell` starting at `t0`.
    #[inline]
    fn cell_exp_integral(&self, cell: usize, t0: f64, tau: f64) -> f64 {
        let a = self.alpha;
        let p0 = self.values[cell];
        let slope = (self.values[cell + 1] - p0) / self.dt;
        let z = a * tau;
        let (e1, e2) = if z.abs() < 1e-4 {
            // series for int_0^tau e^{a v} dv and int_0^tau v e^{a v} dv
            (
                tau * (1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0),
                tau * tau * (0.5 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0),
            )
        } else {
            let em1 = z.exp_m1();
            (em1 / a, (z * (em1 + 1.0) - em1) / (a * a))
        };
        (a * t0).exp() * (p0 * e1 + slope * e2)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn check_covers(&self, t: f64) -> Result<()> {
        if t > self.horizon() * (1.0 + 1e-12) + 1e-12 {
            Err(Error::CurveCoverage {
                covered: self.horizon(),
                requested: t,
            })
        } else {
            Ok(())
        }
    }

    #[inline]
    fn locate(&self, t: f64) -> (usize, f64) {
        let last = self.values.len() - 2;
        let cell = ((t / self.dt).floor().max(0.0) as usize).min(last);
        (cell, cell as f64 * self.dt)
    }

    /// Linear interpolation of `p_t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let (cell, t0) = self.locate(t);
        let w = ((t - t0) / self.dt).clamp(0.0, 1.0);
        self.values[cell] * (1.0 - w) + self.values[cell + 1] * w
    }

    /// `K(t) = int_0^t e^{alpha u} p_u du`.
    #[inline]
    pub fn exp_integral(&self, t: f64) -> f64 {
        let (cell, t0) = self.locate(t);
        self.exp_cumulative[cell] + self.cell_exp_integral(cell, t0, t - t0)
    }

    /// `K` at grid node `k`.
    #[inline]
    pub fn exp_integral_node(&self, k: usize) -> f64 {
        self.exp_cumulative[k]
    }

    /// `int_0^t p_u du`.
    pub fn integral(&self, t: f64) -> f64 {
        let (cell, t0) = self.locate(t);
        let tau = t - t0;
        let p0 = self.values[cell];
        let slope = (self.values[cell + 1] - p0) / self.dt;
        self.cumulative[cell] + p0 * tau + 0.5 * slope * tau * tau
    }

    /// Flow of the limit dynamics between jumps:
    /// `phi_{s,t}(x) = e^{-alpha (t-s)} x + h int_s^t e^{-alpha (t-u)} p_u du`.
    #[inline]
    pub fn flow(&self, s: f64, t: f64, x: f64) -> f64 {
        let decay = (-self.alpha * (t - s)).exp();
        decay * x + self.h * (-self.alpha * t).exp() * (self.exp_integral(t) - self.exp_integral(s))
    }

    /// Inverse of `x -> phi_{s,t}(x)`.
    pub fn flow_inverse(&self, s: f64, t: f64, y: f64) -> f64 {
        let drift = self.flow(s, t, 0.0);
        (y - drift) * (self.alpha * (t - s)).exp()
    }

    /// Position at time `t` of the jump discontinuity: `phi_{0,t}(0)`.
    pub fn shock(&self, t: f64) -> f64 {
        self.flow(0.0, t, 0.0)
    }

    /// The reset time `s in [0, t]` with `phi_{s,t}(0) = y`, by bisection to 1e-12.
    pub fn reset_time(&self, t: f64, y: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, t);
        // phi_{s,t}(0) decreases from shock(t) at s = 0 to 0 at s = t.
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if self.flow(mid, t, 0.0) > y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Upper bound on every limit particle up to `t`: `a + h int_0^t p`.
    pub fn support_bound(&self, initial_right: f64, t: f64) -> f64 {
        initial_right + self.h * self.integral(t)
    }
}
