use rayon::prelude::*;
use serde::Serialize;

use super::stats::MeanSe;
use crate::error::{Error, Result};
use crate::meanfield::{density_at, RateCurve, DEFAULT_NODES};
use crate::model::Model;
use crate::sim::{simulate, wasserstein1, SimConfig};

use super::collect::W1_MAX_SPACING;

/// Standard error above this fraction of the mean triggers a warning.
pub const SE_WARNING_FRACTION: f64 = 0.2;

#[derive(Clone, Debug, Serialize)]
pub struct RateRow {
    pub neurons: usize,
    pub replicas: usize,
    /// `sqrt(N) mean_i |X^{N,i}_T - Xbar^i_T|`.
    pub coupling: MeanSe,
    /// `sqrt(N) W1(mu^N_T, g_T)`; absent when `h = 0` (the limit law has an atom at 0).
    pub wasserstein: Option<MeanSe>,
    /// `sqrt(N) mean_i tv_i`.
    pub tv: MeanSe,
    pub insufficient_replicas: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateTable {
    pub horizon: f64,
    /// Coupled particles per replica; `None` couples every neuron.
    pub coupled: Option<usize>,
    pub rows: Vec<RateRow>,
}

impl RateTable {
    /// Ratios of consecutive rows for a chosen column.
    pub fn ratios(&self, column: impl Fn(&RateRow) -> f64) -> Vec<f64> {
        self.rows.windows(2).map(|w| column(&w[1]) / column(&w[0])).collect()
    }

    pub fn to_csv(&self, header: &serde_json::Value) -> Result<String> {
        let mut out = format!("# {}\n", serde_json::to_string(header)?);
        out.push_str("N,replicas,coupling_mean,coupling_se,w1_mean,w1_se,tv_mean,tv_se,insufficient_replicas\n");
        for r in &self.rows {
            let (wm, ws) = r.wasserstein.map_or((f64::NAN, f64::NAN), |w| (w.mean, w.se));
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.neurons,
                r.replicas,
                r.coupling.mean,
                r.coupling.se,
                wm,
                ws,
                r.tv.mean,
                r.tv.se,
                r.insufficient_replicas
            ));
        }
        Ok(out)
    }
}

/// `sqrt(N)`-scaled coupling error, W1 distance and TV counter at `T` for
/// every `N` of the ladder; replica `r` uses seed `base_seed + r`. The
/// per-replica statistics average over `min(coupled, N)` coupled particles
/// (all `N` when `coupled` is `None`).
pub fn rate_scaling(
    model: &Model,
    curve: &RateCurve,
    ladder: &[usize],
    replicas: usize,
    horizon: f64,
    base_seed: u64,
    coupled: Option<usize>,
) -> Result<RateTable> {
    if replicas < 2 {
        return Err(Error::InsufficientReplicas {
            got: replicas,
            required: 2,
        });
    }
    if coupled == Some(0) {
        return Err(Error::InvalidArgument("rate scaling needs coupled particles".into()));
    }
    curve.check_covers(horizon)?;
    let snapshot = if model.h() > 0.0 {
        Some(density_at(model, curve, horizon, DEFAULT_NODES)?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let k = coupled.unwrap_or(n).min(n);
        let per: Vec<(f64, Option<f64>, f64)> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let cfg = SimConfig {
                    coupled: k,
                    observe: vec![horizon],
                    keep_empirical: snapshot.is_some(),
                    ..SimConfig::new(n, horizon, base_seed + r as u64)
                };
                let out = simulate(model, Some(curve), &cfg)?;
                let obs = &out.observations[0];
                let sqrt_n = (n as f64).sqrt();
                let coupling = sqrt_n * obs.coupled.iter().map(|c| (c.finite - c.limit).abs()).sum::<f64>() / k as f64;
                let tv = sqrt_n * out.tv.iter().sum::<u64>() as f64 / k as f64;
                let w1 = match (&snapshot, &obs.empirical) {
                    (Some(s), Some(e)) => Some(sqrt_n * wasserstein1(e, s, W1_MAX_SPACING).distance),
                    _ => None,
                };
                Ok((coupling, w1, tv))
            })
            .collect::<Result<_>>()?;
        let coupling = MeanSe::of(&per.iter().map(|p| p.0).collect::<Vec<_>>());
        let tv = MeanSe::of(&per.iter().map(|p| p.2).collect::<Vec<_>>());
        let wasserstein = snapshot
            .as_ref()
            .map(|_| MeanSe::of(&per.iter().filter_map(|p| p.1).collect::<Vec<_>>()));
        let noisy = |m: &MeanSe| m.mean != 0.0 && m.se > SE_WARNING_FRACTION * m.mean.abs();
        let insufficient_replicas = noisy(&coupling) || noisy(&tv) || wasserstein.as_ref().is_some_and(noisy);
        rows.push(RateRow {
            neurons: n,
            replicas,
            coupling,
            wasserstein,
            tv,
            insufficient_replicas,
        });
    }
    Ok(RateTable {
        horizon,
        coupled,
        rows,
    })
}
