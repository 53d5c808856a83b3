use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::RateCurve;
use crate::model::Model;

/// One limit particle on `[0, T]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitPath {
    pub initial: f64,
    pub jumps: Vec<f64>,
    /// Values at the requested observation times.
    pub values: Vec<f64>,
}

impl LimitPath {
    /// Last jump time at or before `t` (0 if none).
    pub fn last_jump(&self, t: f64) -> f64 {
        let k = self.jumps.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.jumps[k - 1]
        }
    }

    /// Whether a jump falls in `(a, b]`.
    pub fn jumps_in(&self, a: f64, b: f64) -> bool {
        let k = self.jumps.partition_point(|&s| s <= a);
        k < self.jumps.len() && self.jumps[k] <= b
    }
}

/// Independent limit particles: flow between jumps, reset to 0 at rate
/// `f(X)`, simulated exactly by thinning against windowed bounds.
pub fn simulate_limit_particles(
    model: &Model,
    curve: &RateCurve,
    count: usize,
    horizon: f64,
    seed: u64,
    observe: &[f64],
) -> Result<Vec<LimitPath>> {
    curve.check_covers(horizon)?;
    let f = model.rate();
    let h = model.h();
    let window = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let x0 = model.init().sample(&mut rng);
        let (mut x_ref, mut t_ref) = (x0, 0.0);
        let mut jumps = Vec::new();
        let mut t = 0.0;
        while t < horizon {
            let end = (t + window).min(horizon);
            let reach = curve.flow(t_ref, t, x_ref) + h * (curve.integral(end) - curve.integral(t)).max(0.0);
            let bound = f.eval(reach) + 1e-9;
            let e: f64 = Exp1.sample(&mut rng);
            let cand = t + e / bound;
            if cand > end {
                t = end;
                continue;
            }
            t = cand;
            let z = rng.random::<f64>() * bound;
            let rate = f.eval(curve.flow(t_ref, t, x_ref));
            if rate > bound {
                return Err(Error::DominationViolation {
                    neuron: out.len(),
                    time: t,
                    rate,
                    bound,
                });
            }
            if z <= rate {
                jumps.push(t);
                x_ref = 0.0;
                t_ref = t;
            }
        }
        let values = observe
            .iter()
            .map(|&s| {
                let k = jumps.partition_point(|&j| j <= s);
                if k == 0 {
                    curve.flow(0.0, s, x0)
                } else {
                    curve.flow(jumps[k - 1], s, 0.0)
                }
            })
            .collect();
        out.push(LimitPath {
            initial: x0,
            jumps,
            values,
        });
    }
    Ok(out)
}
