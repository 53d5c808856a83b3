use rayon::prelude::*;
use serde::Serialize;

use super::galerkin::LimitTrace;
use crate::error::{Error, Result};
use crate::fluct::MeanSe;
use crate::meanfield::RateCurve;
use crate::model::Model;
use crate::sim::{simulate, LimitPath, SimConfig};

/// `Xbar^i_t + N^{-1/2} Ubar^i_t` on the trace grid.
#[derive(Clone, Debug, Serialize)]
pub struct MesoTrajectory {
    pub neurons: usize,
    pub times: Vec<f64>,
    pub x_bar: Vec<f64>,
    /// `Ubar^i_t` in integral form.
    pub u: Vec<f64>,
    pub corrected: Vec<f64>,
}

/// Limit particle value at `t` from its jump times.
pub fn limit_value(path: &LimitPath, curve: &RateCurve, t: f64) -> f64 {
    let k = path.jumps.partition_point(|&s| s <= t);
    if k == 0 {
        curve.flow(0.0, t, path.initial)
    } else {
        curve.flow(path.jumps[k - 1], t, 0.0)
    }
}

/// Integral form
/// `Ubar_t = h int_{L_t}^t e^{-alpha(t-s)} (etabar_s(f) ds + dW_s(1))`,
/// with `L_t` rounded up to the grid.
pub fn integral_form(model: &Model, path: &LimitPath, trace: &LimitTrace) -> Vec<f64> {
    let alpha = model.alpha();
    let h = model.h();
    let dt = trace.dt;
    let steps = trace.dw_one.len();
    // prefix[n] = sum_{m<n} e^{alpha s_m} h (etabar_m(f) dt + dW_m)
    let mut prefix = vec![0.0; steps + 1];
    for n in 0..steps {
        let s = n as f64 * dt;
        prefix[n + 1] = prefix[n] + (alpha * s).exp() * h * (trace.eta_f[n] * dt + trace.dw_one[n]);
    }
    (0..=steps)
        .map(|j| {
            let t = j as f64 * dt;
            let last = path.last_jump(t);
            let start = if last > 0.0 { ((last / dt).ceil() as usize).min(j) } else { 0 };
            (-alpha * t).exp() * (prefix[j] - prefix[start])
        })
        .collect()
}

pub fn mesoscopic_reconstruct(
    model: &Model,
    curve: &RateCurve,
    path: &LimitPath,
    trace: &LimitTrace,
    neurons: usize,
) -> MesoTrajectory {
    let u = integral_form(model, path, trace);
    let times: Vec<f64> = (0..u.len()).map(|n| trace.time(n)).collect();
    let x_bar: Vec<f64> = times.iter().map(|&t| limit_value(path, curve, t)).collect();
    let scale = 1.0 / (neurons as f64).sqrt();
    let corrected = x_bar.iter().zip(&u).map(|(x, u)| x + scale * u).collect();
    MesoTrajectory {
        neurons,
        times,
        x_bar,
        u,
        corrected,
    }
}

/// Largest gap between the SDE and integral forms of `Ubar`, and the bound
/// `5 dt sup_n (|h etabar_n(f)| + |h dW_n| / dt)` it is held to.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FormConsistency {
    pub max_gap: f64,
    pub bound: f64,
}

impl FormConsistency {
    pub fn holds(&self) -> bool {
        self.max_gap <= self.bound
    }
}

pub fn form_consistency(model: &Model, sde: &[f64], integral: &[f64], trace: &LimitTrace) -> FormConsistency {
    let h = model.h();
    let dt = trace.dt;
    let sup = trace
        .dw_one
        .iter()
        .zip(&trace.eta_f)
        .map(|(dw, ef)| (h * ef).abs() + (h * dw).abs() / dt)
        .fold(0.0, f64::max);
    let max_gap = sde.iter().zip(integral).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    FormConsistency {
        max_gap,
        bound: 5.0 * dt * sup,
    }
}

/// `sqrt(N) E|X^{N,i}_T - Xbar^i_T - N^{-1/2} U^plug_T|` next to the
/// uncorrected `sqrt(N) E|X^{N,i}_T - Xbar^i_T|`, per `N`.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualRow {
    pub neurons: usize,
    pub replicas: usize,
    pub residual: MeanSe,
    pub uncorrected: MeanSe,
    /// Fraction of coupled particles with a nonzero TV counter.
    pub mismatched: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualTable {
    pub horizon: f64,
    pub rows: Vec<ResidualRow>,
}

impl ResidualTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].residual.mean < w[0].residual.mean)
    }

    pub fn to_csv(&self, header: &serde_json::Value) -> Result<String> {
        let mut out = format!("# {}\n", serde_json::to_string(header)?);
        out.push_str("N,replicas,residual_mean,residual_se,uncorrected_mean,uncorrected_se,mismatched\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.neurons, r.replicas, r.residual.mean, r.residual.se, r.uncorrected.mean, r.uncorrected.se, r.mismatched
            ));
        }
        Ok(out)
    }
}

/// Mesoscopic residual with the plug-in corrector, where `etabar(f)` and
/// `W(1)` are replaced by `eta^N(f)` and `W^N(1)` of the same run; replica
/// `r` uses seed `base_seed + r`.
pub fn residual_scaling(
    model: &Model,
    curve: &RateCurve,
    ladder: &[usize],
    replicas: usize,
    horizon: f64,
    base_seed: u64,
    coupled: Option<usize>,
) -> Result<ResidualTable> {
    if replicas < 2 {
        return Err(Error::InsufficientReplicas {
            got: replicas,
            required: 2,
        });
    }
    if coupled == Some(0) {
        return Err(Error::InvalidArgument("residual scaling needs coupled particles".into()));
    }
    curve.check_covers(horizon)?;
    let mut rows = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let k = coupled.unwrap_or(n).min(n);
        let sqrt_n = (n as f64).sqrt();
        let per: Vec<(f64, f64, f64)> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let cfg = SimConfig {
                    coupled: k,
                    observe: vec![horizon],
                    ..SimConfig::new(n, horizon, base_seed + r as u64)
                };
                let out = simulate(model, Some(curve), &cfg)?;
                let obs = &out.observations[0];
                let (mut res, mut plain) = (0.0, 0.0);
                for c in &obs.coupled {
                    let u = sqrt_n * (c.finite - c.limit);
                    res += (u - c.corrector).abs();
                    plain += u.abs();
                }
                let mismatched = out.tv.iter().filter(|&&t| t > 0).count();
                Ok((res / k as f64, plain / k as f64, mismatched as f64 / k as f64))
            })
            .collect::<Result<_>>()?;
        rows.push(ResidualRow {
            neurons: n,
            replicas,
            residual: MeanSe::of(&per.iter().map(|p| p.0).collect::<Vec<_>>()),
            uncorrected: MeanSe::of(&per.iter().map(|p| p.1).collect::<Vec<_>>()),
            mismatched: per.iter().map(|p| p.2).sum::<f64>() / replicas as f64,
        });
    }
    Ok(ResidualTable { horizon, rows })
}
