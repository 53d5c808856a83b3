use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::driver::{psd_factor, DriverDiagnostics, GaussianDriver};
use crate::error::{Error, Result};
use crate::fluct::rate_poly;
use crate::meanfield::{moment_table, MomentTable, RateCurve};
use crate::model::{Model, Scope};
use crate::poly::Poly;
use crate::sim::{simulate_limit_particles, LimitPath};

/// Stream offset separating particle seeds from driver seeds.
const PARTICLE_SEED_SALT: u64 = 0x5851_f42d_4c95_7f2d;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LimitConfig {
    /// Highest monomial kept; `eta(x^k) = 0` is imposed for `k > degree`.
    pub degree: usize,
    pub dt: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub paths: usize,
    /// Limit particles `Ubar^i` per path, all sharing the path's noise.
    pub particles: usize,
    pub seed: u64,
    /// `|eta(x^D)|` above this aborts the run.
    pub blowup: f64,
    /// Full grid traces kept for the first this-many paths.
    pub trace_paths: usize,
    /// Sample `eta_0` from the iid CLT law (otherwise `eta_0 = 0`).
    pub initial_fluctuation: bool,
    /// Drive with `W` (otherwise the noise is switched off).
    pub driver: bool,
}

impl Default for LimitConfig {
    fn default() -> Self {
        LimitConfig {
            degree: 8,
            dt: 1e-3,
            horizon: 1.0,
            times: vec![1.0],
            paths: 2000,
            particles: 2,
            seed: 0,
            blowup: 1e6,
            trace_paths: 1,
            initial_fluctuation: true,
            driver: true,
        }
    }
}

impl LimitConfig {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }

    fn grid_dt(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    fn time_index(&self, t: f64) -> usize {
        ((t / self.grid_dt()).round() as usize).min(self.steps())
    }
}

/// Per-step linear maps of the Euler scheme: `eta' = P eta + G z`, with
/// `z` standard normal and `dW = F z`.
struct StepMaps {
    propagate: Vec<DMatrix<f64>>,
    noise: Vec<DMatrix<f64>>,
    dw_one: Vec<DVector<f64>>,
    covariance: Vec<DMatrix<f64>>,
    map: Vec<DMatrix<f64>>,
}

/// Drift `A(s)` and noise map `B(s)` of the truncated hierarchy on
/// `eta(x^0..x^D)`.
fn generator(model: &Model, rate: &Poly, table: &MomentTable, p: f64, s: f64, d: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let alpha = model.alpha();
    let h = model.h();
    let dim = d + 1;
    let mut a = DMatrix::zeros(dim, dim);
    let mut b = DMatrix::zeros(dim, dim);
    for k in 1..=d {
        let kf = k as f64;
        let lower = if k == 1 { 1.0 } else { table.at(s, k - 1) };
        a[(k, k)] -= alpha * kf;
        a[(k, k - 1)] += h * p * kf;
        for (m, &c) in rate.coeffs().iter().enumerate() {
            if k + m <= d {
                a[(k, k + m)] -= c;
            }
            a[(k, m)] += h * kf * lower * c;
        }
        b[(k, k)] -= 1.0;
        b[(k, 0)] += h * kf * lower;
    }
    // mass fluctuation stays at zero
    for j in 0..dim {
        a[(0, j)] = 0.0;
    }
    (a, b)
}

fn step_maps(model: &Model, curve: &RateCurve, rate: &Poly, table: &MomentTable, driver: &GaussianDriver, cfg: &LimitConfig) -> StepMaps {
    let d = cfg.degree;
    let dt = driver.dt;
    let eye = DMatrix::<f64>::identity(d + 1, d + 1);
    let mut maps = StepMaps {
        propagate: Vec::new(),
        noise: Vec::new(),
        dw_one: Vec::new(),
        covariance: Vec::new(),
        map: Vec::new(),
    };
    for n in 0..driver.steps() {
        let s = n as f64 * dt;
        let (a, b) = generator(model, rate, table, curve.value_at(s), s, d);
        let f = driver.factor(n);
        let scale = if cfg.driver { 1.0 } else { 0.0 };
        maps.propagate.push(&eye + a * dt);
        maps.noise.push(&b * f * scale);
        maps.dw_one.push(f.row(0).transpose() * scale);
        maps.covariance.push(driver.covariance(n) * scale);
        maps.map.push(b);
    }
    maps
}

/// `Cov_{g0}(x^a, x^b)` for `a, b = 0..D`.
fn initial_covariance(table: &MomentTable, d: usize) -> DMatrix<f64> {
    let m = |j: usize| if j == 0 { 1.0 } else { table.rows[0][j] };
    DMatrix::from_fn(d + 1, d + 1, |a, b| if a == 0 || b == 0 { 0.0 } else { m(a + b) - m(a) * m(b) })
}

fn prepare(model: &Model, curve: &RateCurve, cfg: &LimitConfig) -> Result<(Poly, MomentTable, GaussianDriver)> {
    model.require(Scope::MeanField)?;
    let rate = rate_poly(model)?;
    if rate.degree() > cfg.degree {
        return Err(Error::InvalidArgument(format!(
            "rate of degree {} is not in the span of x^0..x^{}",
            rate.degree(),
            cfg.degree
        )));
    }
    if !(cfg.dt > 0.0 && cfg.horizon > 0.0) {
        return Err(Error::InvalidArgument("need dt > 0 and T > 0".into()));
    }
    if cfg.times.iter().any(|&t| !(0.0..=cfg.horizon).contains(&t)) {
        return Err(Error::InvalidArgument("observation times must lie in [0, T]".into()));
    }
    curve.check_covers(cfg.horizon)?;
    let table = moment_table(model, curve, rate.degree() + 2 * cfg.degree);
    let driver = GaussianDriver::new(&table, &rate, cfg.degree, cfg.grid_dt(), cfg.steps())?;
    Ok((rate, table, driver))
}

/// `Var[etabar_t(f)]` of the Euler scheme at the requested times, by the
/// exact covariance recursion `S' = P S P^T + B C B^T`.
pub fn fluctuation_variance(model: &Model, curve: &RateCurve, cfg: &LimitConfig) -> Result<Vec<f64>> {
    let (rate, table, driver) = prepare(model, curve, cfg)?;
    let maps = step_maps(model, curve, &rate, &table, &driver, cfg);
    let d = cfg.degree;
    let coef = DVector::from_fn(d + 1, |k, _| rate.coeff(k));
    let mut sigma = if cfg.initial_fluctuation {
        initial_covariance(&table, d)
    } else {
        DMatrix::zeros(d + 1, d + 1)
    };
    let idx: Vec<usize> = cfg.times.iter().map(|&t| cfg.time_index(t)).collect();
    let mut var_at = vec![0.0; driver.steps() + 1];
    var_at[0] = (coef.transpose() * &sigma * &coef)[(0, 0)];
    for n in 0..driver.steps() {
        let p = &maps.propagate[n];
        let b = &maps.map[n];
        sigma = p * &sigma * p.transpose() + b * &maps.covariance[n] * b.transpose();
        var_at[n + 1] = (coef.transpose() * &sigma * &coef)[(0, 0)];
    }
    Ok(idx.iter().map(|&k| var_at[k]).collect())
}

/// `Var[etabar_t(f)]` at degree `low` and at degree `high`.
#[derive(Clone, Debug, Serialize)]
pub struct ClosureCheck {
    pub low_degree: usize,
    pub high_degree: usize,
    pub times: Vec<f64>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    pub max_relative_gap: f64,
}

impl ClosureCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_relative_gap <= tol
    }
}

pub fn closure_check(model: &Model, curve: &RateCurve, cfg: &LimitConfig, high_degree: usize) -> Result<ClosureCheck> {
    let low = fluctuation_variance(model, curve, cfg)?;
    let high = fluctuation_variance(
        model,
        curve,
        &LimitConfig {
            degree: high_degree,
            ..cfg.clone()
        },
    )?;
    let max_relative_gap = low
        .iter()
        .zip(&high)
        .map(|(l, h)| if *h == 0.0 { (l - h).abs() } else { (l - h).abs() / h.abs() })
        .fold(0.0, f64::max);
    Ok(ClosureCheck {
        low_degree: cfg.degree,
        high_degree,
        times: cfg.times.clone(),
        low,
        high,
        max_relative_gap,
    })
}

/// One path's values at the observation times.
#[derive(Clone, Debug, Serialize)]
pub struct LimitSample {
    /// `etabar_t(x^k)`, `k = 0..D`.
    pub eta: Vec<Vec<f64>>,
    pub eta_f: Vec<f64>,
    /// `W_t(1)`.
    pub w_one: Vec<f64>,
    /// `Ubar^i_t` per time and particle.
    pub u: Vec<Vec<f64>>,
    /// `L^i_t` per time and particle.
    pub last_jump: Vec<Vec<f64>>,
}

/// Full grid trace of one path.
#[derive(Clone, Debug, Serialize)]
pub struct LimitTrace {
    pub dt: f64,
    /// `etabar_{t_n}(x^k)` on the grid.
    pub eta: Vec<Vec<f64>>,
    pub eta_f: Vec<f64>,
    /// Increment of `W(1)` over step `n`.
    pub dw_one: Vec<f64>,
    pub particles: Vec<LimitPath>,
    /// `Ubar^i` on the grid, SDE form.
    pub u: Vec<Vec<f64>>,
}

impl LimitTrace {
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// `t, eta(x^0)..eta(x^D), eta(f), W(1), Ubar^1..`.
    pub fn to_csv(&self, header: &serde_json::Value) -> Result<String> {
        let mut out = format!("# {}\n", serde_json::to_string(header)?);
        let d = self.eta.first().map_or(0, |r| r.len());
        let mut cols = vec!["t".to_string()];
        cols.extend((0..d).map(|k| format!("eta_x{k}")));
        cols.push("eta_f".into());
        cols.push("w_one".into());
        cols.extend((1..=self.u.len()).map(|i| format!("u{i}")));
        out.push_str(&cols.join(","));
        out.push('\n');
        let mut w = 0.0;
        for n in 0..self.eta.len() {
            let mut row = vec![self.time(n).to_string()];
            row.extend(self.eta[n].iter().map(f64::to_string));
            row.push(self.eta_f[n].to_string());
            row.push(w.to_string());
            row.extend(self.u.iter().map(|u| u[n].to_string()));
            out.push_str(&row.join(","));
            out.push('\n');
            if n < self.dw_one.len() {
                w += self.dw_one[n];
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitRun {
    pub config: LimitConfig,
    pub driver: DriverDiagnostics,
    /// Exact `Var[etabar_t(f)]` of the scheme.
    pub eta_f_variance: Vec<f64>,
    pub samples: Vec<LimitSample>,
    pub traces: Vec<LimitTrace>,
}

impl LimitRun {
    /// All `Ubar^i_t` at time index `k`, pooled over paths and particles.
    pub fn u_column(&self, k: usize) -> Vec<f64> {
        self.samples.iter().flat_map(|s| s.u[k].iter().copied()).collect()
    }

    pub fn particle_column(&self, k: usize, i: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.u[k][i]).collect()
    }

    pub fn eta_f_column(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.eta_f[k]).collect()
    }

    pub fn w_one_column(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.w_one[k]).collect()
    }
}

/// Euler-Maruyama for the truncated `etabar` hierarchy and for `Ubar^i`
/// driven by independent limit particles; path `r` draws its noise from
/// stream `r` of `seed`.
pub fn simulate_limit_system(model: &Model, curve: &RateCurve, cfg: &LimitConfig) -> Result<LimitRun> {
    let (rate, table, driver) = prepare(model, curve, cfg)?;
    let maps = step_maps(model, curve, &rate, &table, &driver, cfg);
    let d = cfg.degree;
    let dt = driver.dt;
    let steps = driver.steps();
    let alpha = model.alpha();
    let h = model.h();
    let coef = DVector::from_fn(d + 1, |k, _| rate.coeff(k));
    let (init_factor, _) = psd_factor(&initial_covariance(&table, d))?;
    let idx: Vec<usize> = cfg.times.iter().map(|&t| cfg.time_index(t)).collect();
    let eta_f_variance = fluctuation_variance(model, curve, cfg)?;

    let particles = simulate_limit_particles(
        model,
        curve,
        cfg.paths * cfg.particles,
        cfg.horizon,
        cfg.seed ^ PARTICLE_SEED_SALT,
        &[],
    )?;

    let results: Vec<(LimitSample, Option<LimitTrace>)> = (0..cfg.paths)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let mine = &particles[r * cfg.particles..(r + 1) * cfg.particles];
            let keep = r < cfg.trace_paths;
            let mut eta = if cfg.initial_fluctuation {
                let z = DVector::from_fn(d + 1, |_, _| rand::Rng::sample::<f64, _>(&mut rng, StandardNormal));
                &init_factor * z
            } else {
                DVector::zeros(d + 1)
            };
            eta[0] = 0.0;
            let mut u = vec![0.0; cfg.particles];
            let mut w = 0.0;
            let mut sample = LimitSample {
                eta: Vec::with_capacity(idx.len()),
                eta_f: Vec::with_capacity(idx.len()),
                w_one: Vec::with_capacity(idx.len()),
                u: Vec::with_capacity(idx.len()),
                last_jump: Vec::with_capacity(idx.len()),
            };
            let mut trace = keep.then(|| LimitTrace {
                dt,
                eta: Vec::with_capacity(steps + 1),
                eta_f: Vec::with_capacity(steps + 1),
                dw_one: Vec::with_capacity(steps),
                particles: mine.to_vec(),
                u: vec![Vec::with_capacity(steps + 1); cfg.particles],
            });
            let record = |n: usize, eta: &DVector<f64>, u: &[f64], w: f64, sample: &mut LimitSample, trace: &mut Option<LimitTrace>| {
                let ef = coef.dot(eta);
                for _ in idx.iter().filter(|&&k| k == n) {
                    sample.eta.push(eta.iter().copied().collect());
                    sample.eta_f.push(ef);
                    sample.w_one.push(w);
                    sample.u.push(u.to_vec());
                    let t = n as f64 * dt;
                    sample.last_jump.push(mine.iter().map(|p| p.last_jump(t)).collect());
                }
                if let Some(tr) = trace.as_mut() {
                    tr.eta.push(eta.iter().copied().collect());
                    tr.eta_f.push(ef);
                    for (col, v) in tr.u.iter_mut().zip(u) {
                        col.push(*v);
                    }
                }
            };
            record(0, &eta, &u, w, &mut sample, &mut trace);
            for n in 0..steps {
                let z = DVector::from_fn(d + 1, |_, _| rand::Rng::sample::<f64, _>(&mut rng, StandardNormal));
                let dw0 = maps.dw_one[n].dot(&z);
                let ef = coef.dot(&eta);
                let (s0, s1) = (n as f64 * dt, (n + 1) as f64 * dt);
                for (ui, p) in u.iter_mut().zip(mine) {
                    *ui += (-alpha * *ui + h * ef) * dt + h * dw0;
                    if p.jumps_in(s0, s1) {
                        *ui = 0.0;
                    }
                }
                eta = &maps.propagate[n] * &eta + &maps.noise[n] * z;
                eta[0] = 0.0;
                w += dw0;
                let top = eta[d];
                if !top.is_finite() || top.abs() > cfg.blowup {
                    return Err(Error::ClosureInstability { time: s1, value: top });
                }
                if let Some(tr) = trace.as_mut() {
                    tr.dw_one.push(dw0);
                }
                record(n + 1, &eta, &u, w, &mut sample, &mut trace);
            }
            Ok((sample, trace))
        })
        .collect::<Result<_>>()?;

    let mut samples = Vec::with_capacity(results.len());
    let mut traces = Vec::new();
    for (s, t) in results {
        samples.push(s);
        traces.extend(t);
    }
    // requested order may differ from grid order
    let order: Vec<usize> = {
        let mut o: Vec<usize> = (0..idx.len()).collect();
        o.sort_by_key(|&k| idx[k]);
        o
    };
    for s in &mut samples {
        let mut inv = vec![0; order.len()];
        for (pos, &k) in order.iter().enumerate() {
            inv[k] = pos;
        }
        let pick = |v: &Vec<Vec<f64>>| inv.iter().map(|&p| v[p].clone()).collect::<Vec<_>>();
        s.eta = pick(&s.eta);
        s.u = pick(&s.u);
        s.last_jump = pick(&s.last_jump);
        s.eta_f = inv.iter().map(|&p| s.eta_f[p]).collect();
        s.w_one = inv.iter().map(|&p| s.w_one[p]).collect();
    }

    Ok(LimitRun {
        config: cfg.clone(),
        driver: driver.diagnostics(),
        eta_f_variance,
        samples,
        traces,
    })
}
