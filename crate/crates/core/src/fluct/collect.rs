use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::{density_at, moments, DensitySnapshot, RateCurve, DEFAULT_NODES};
use crate::model::{Model, TestFunctionPanel};
use crate::poly::Poly;
use crate::sim::{simulate, wasserstein1, Observation, SimConfig};

/// Grid spacing above which a W1 evaluation is flagged as coarse.
pub const W1_MAX_SPACING: f64 = 1e-2;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FluctConfig {
    pub neurons: usize,
    pub coupled: usize,
    pub times: Vec<f64>,
    pub replicas: usize,
    pub base_seed: u64,
    /// Compute `W1(mu^N_t, g_t)` at every time.
    pub wasserstein: bool,
}

impl Default for FluctConfig {
    fn default() -> Self {
        FluctConfig {
            neurons: 1000,
            coupled: 8,
            times: vec![1.0],
            replicas: 100,
            base_seed: 0,
            wasserstein: false,
        }
    }
}

/// Exact sums of one replica at one time.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObservedSums {
    pub power_sums: Vec<f64>,
    pub power_integrals: Vec<f64>,
    pub spike_sums: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CoupledSample {
    /// `U^{N,i}_t = sqrt(N) (X^{N,i}_t - Xbar^i_t)`.
    pub u: f64,
    /// `|X^{N,i}_t - Xbar^i_t|`.
    pub abs_error: f64,
    /// Plug-in corrector.
    pub corrector: f64,
    /// `sqrt(N) |X^{N,i}_t - Xbar^i_t - corrector / sqrt(N)|`.
    pub residual: f64,
    pub tv: u64,
    pub last_jump: f64,
}

/// One replica's fluctuation observables on the panel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluctuationSample {
    pub seed: u64,
    pub neurons: usize,
    pub times: Vec<f64>,
    /// `eta^N_t(phi)` per time and panel member.
    pub eta: Vec<Vec<f64>>,
    /// `W^N_t(phi)`.
    pub martingale: Vec<Vec<f64>>,
    /// `(sum_spikes phi^2(X_{s-}) - int mu^N_s(f phi^2) ds N) / N`.
    pub qv_gap: Vec<Vec<f64>>,
    pub coupled: Vec<Vec<CoupledSample>>,
    pub wasserstein: Vec<Option<f64>>,
    pub sums: Vec<ObservedSums>,
    pub good_breached: bool,
    pub apriori_held: bool,
    pub edge_constant_held: bool,
}

impl FluctuationSample {
    fn combine(coeffs: &[f64], v: &[f64]) -> f64 {
        coeffs.iter().zip(v).map(|(c, s)| c * s).sum()
    }

    /// `W^N_t(phi)` for any polynomial `phi`.
    pub fn martingale_of(&self, k: usize, phi: &Poly, rate: &Poly) -> f64 {
        let s = &self.sums[k];
        let comp = Self::combine(rate.mul(phi).coeffs(), &s.power_integrals);
        (Self::combine(phi.coeffs(), &s.spike_sums) - comp) / (self.neurons as f64).sqrt()
    }

    /// `int_0^t mu^N_s(f phi psi) ds`: the angle bracket of `W^N(phi)` and `W^N(psi)`.
    pub fn bracket_of(&self, k: usize, phi: &Poly, psi: &Poly, rate: &Poly) -> f64 {
        let s = &self.sums[k];
        Self::combine(rate.mul(phi).mul(psi).coeffs(), &s.power_integrals) / self.neurons as f64
    }

    /// `mu^N_t(f)`.
    pub fn empirical_rate(&self, k: usize, rate: &Poly) -> f64 {
        Self::combine(rate.coeffs(), &self.sums[k].power_sums) / self.neurons as f64
    }
}

/// All replicas plus the limit quantities they were compared with.
#[derive(Clone, Debug, Serialize)]
pub struct FluctuationRun {
    pub config: FluctConfig,
    pub panel: Vec<String>,
    /// `g_t(phi)` per time and panel member.
    pub limit_values: Vec<Vec<f64>>,
    pub samples: Vec<FluctuationSample>,
}

impl FluctuationRun {
    pub fn panel_index(&self, name: &str) -> Option<usize> {
        self.panel.iter().position(|n| n == name)
    }

    /// Column of `eta^N_t(phi)` across replicas.
    pub fn eta_column(&self, k: usize, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.eta[k][j]).collect()
    }

    pub fn martingale_column(&self, k: usize, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.martingale[k][j]).collect()
    }

    pub fn qv_gap_column(&self, k: usize, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.qv_gap[k][j]).collect()
    }

    pub fn coupled_column(&self, k: usize, i: usize) -> Vec<CoupledSample> {
        self.samples.iter().map(|s| s.coupled[k][i]).collect()
    }
}

/// Polynomial forms of the panel, or an error for non-polynomial rates.
pub(crate) fn panel_polys(panel: &TestFunctionPanel) -> Result<Vec<Poly>> {
    panel
        .polys()
        .ok_or_else(|| Error::InvalidArgument("fluctuation observables need polynomial test functions".into()))
}

pub(crate) fn rate_poly(model: &Model) -> Result<Poly> {
    model
        .rate()
        .as_poly()
        .ok_or_else(|| Error::InvalidArgument("exact compensators need a polynomial rate".into()))
}

/// Runs `replicas` coupled simulations with seeds `base_seed + r` and
/// evaluates the fluctuation observables on the panel at every time.
pub fn collect_fluctuations(
    model: &Model,
    curve: &RateCurve,
    panel: &TestFunctionPanel,
    cfg: &FluctConfig,
) -> Result<FluctuationRun> {
    let polys = panel_polys(panel)?;
    let rate = rate_poly(model)?;
    let phi_degree = polys.iter().map(Poly::degree).max().unwrap_or(0);
    let power_degree = (rate.degree() + 2 * phi_degree).max(2);
    if cfg.times.is_empty() || cfg.times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidArgument("need nonnegative observation times".into()));
    }
    let horizon = cfg.times.iter().cloned().fold(0.0, f64::max).max(1e-12);
    curve.check_covers(horizon)?;

    let mut limit_values = Vec::with_capacity(cfg.times.len());
    for &t in &cfg.times {
        let mut raw = moments(model, curve, t, phi_degree)?.raw;
        // Mass one exactly, so the constant term of a test function cancels.
        raw[0] = 1.0;
        limit_values.push(polys.iter().map(|p| p.integrate_moments(&raw)).collect::<Vec<_>>());
    }
    let snapshots: Vec<Option<DensitySnapshot>> = if cfg.wasserstein {
        cfg.times
            .iter()
            .map(|&t| density_at(model, curve, t, DEFAULT_NODES).map(Some))
            .collect::<Result<_>>()?
    } else {
        vec![None; cfg.times.len()]
    };

    let times = cfg.times.clone();
    let samples: Vec<FluctuationSample> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.base_seed + r as u64;
            let sim_cfg = SimConfig {
                coupled: cfg.coupled,
                observe: times.clone(),
                keep_empirical: cfg.wasserstein,
                power_degree,
                ..SimConfig::new(cfg.neurons, horizon, seed)
            };
            let out = simulate(model, Some(curve), &sim_cfg)?;
            let mut obs: Vec<&Observation> = Vec::with_capacity(times.len());
            // observations come back sorted; map them to the requested order
            for &t in &times {
                let o = out
                    .observations
                    .iter()
                    .find(|o| o.time == t.min(horizon))
                    .expect("every requested time is observed");
                obs.push(o);
            }
            Ok(build_sample(seed, cfg.neurons, &times, &obs, &polys, &rate, &limit_values, &snapshots, &out))
        })
        .collect::<Result<_>>()?;

    Ok(FluctuationRun {
        config: cfg.clone(),
        panel: panel.functions.iter().map(|f| f.name.clone()).collect(),
        limit_values,
        samples,
    })
}

#[allow(clippy::too_many_arguments)]
fn build_sample(
    seed: u64,
    neurons: usize,
    times: &[f64],
    obs: &[&Observation],
    polys: &[Poly],
    rate: &Poly,
    limit_values: &[Vec<f64>],
    snapshots: &[Option<DensitySnapshot>],
    out: &crate::sim::SimOutcome,
) -> FluctuationSample {
    let n = neurons as f64;
    let sqrt_n = n.sqrt();
    let mut eta = Vec::new();
    let mut martingale = Vec::new();
    let mut qv_gap = Vec::new();
    let mut coupled = Vec::new();
    let mut wasserstein = Vec::new();
    let mut sums = Vec::new();
    for (k, o) in obs.iter().enumerate() {
        let s = ObservedSums {
            power_sums: o.power_sums.clone(),
            power_integrals: o.power_integrals.clone(),
            spike_sums: o.spike_sums.clone(),
        };
        let combine = FluctuationSample::combine;
        eta.push(
            polys
                .iter()
                .zip(&limit_values[k])
                .map(|(p, &g)| {
                    // The constant term cancels exactly: both laws have mass one.
                    let emp = combine(p.coeffs(), &s.power_sums) / n;
                    sqrt_n * (emp - g)
                })
                .collect(),
        );
        martingale.push(
            polys
                .iter()
                .map(|p| {
                    let comp = combine(rate.mul(p).coeffs(), &s.power_integrals);
                    (combine(p.coeffs(), &s.spike_sums) - comp) / sqrt_n
                })
                .collect(),
        );
        qv_gap.push(
            polys
                .iter()
                .map(|p| {
                    let sq = p.mul(p);
                    let comp = combine(rate.mul(&sq).coeffs(), &s.power_integrals);
                    (combine(sq.coeffs(), &s.spike_sums) - comp) / n
                })
                .collect(),
        );
        coupled.push(
            o.coupled
                .iter()
                .map(|c| {
                    let diff = c.finite - c.limit;
                    CoupledSample {
                        u: sqrt_n * diff,
                        abs_error: diff.abs(),
                        corrector: c.corrector,
                        residual: (sqrt_n * diff - c.corrector).abs(),
                        tv: c.tv,
                        last_jump: c.last_jump,
                    }
                })
                .collect(),
        );
        wasserstein.push(match (&snapshots[k], &o.empirical) {
            (Some(snap), Some(emp)) => Some(wasserstein1(emp, snap, W1_MAX_SPACING).distance),
            _ => None,
        });
        sums.push(s);
    }
    FluctuationSample {
        seed,
        neurons,
        times: times.to_vec(),
        eta,
        martingale,
        qv_gap,
        coupled,
        wasserstein,
        sums,
        good_breached: out.good.breached,
        apriori_held: out.apriori.held,
        edge_constant_held: out.apriori.edge_constant_held,
    }
}
