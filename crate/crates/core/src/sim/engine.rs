use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::log::{Event, EventLog, Snapshot, SystemTag};
use super::network::Network;
use crate::error::{Error, Result};
use crate::meanfield::RateCurve;
use crate::model::Model;

/// Relative slack on the finite bound, so that the cached maximum covers
/// rounding in the affine representation.
const BOUND_SLACK: f64 = 1e-12;
/// Additive margin on the windowed bound of a limit particle.
const LIMIT_MARGIN: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub neurons: usize,
    /// Limit particles coupled to neurons `0..coupled`.
    pub coupled: usize,
    pub horizon: f64,
    pub seed: u64,
    /// Times at which observations are taken (clamped to the horizon).
    pub observe: Vec<f64>,
    pub spike_cap: u64,
    pub record_events: bool,
    /// Keep sorted potentials in each observation.
    pub keep_empirical: bool,
    /// Highest power sum tracked exactly.
    pub power_degree: usize,
    /// Lookahead window for the limit-particle bounds.
    pub window: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            neurons: 100,
            coupled: 0,
            horizon: 1.0,
            seed: 0,
            observe: Vec::new(),
            spike_cap: 100_000_000,
            record_events: false,
            keep_empirical: false,
            power_degree: 2,
            window: 0.1,
        }
    }
}

impl SimConfig {
    pub fn new(neurons: usize, horizon: f64, seed: u64) -> Self {
        SimConfig {
            neurons,
            horizon,
            seed,
            ..SimConfig::default()
        }
    }
}

/// State of coupled pair `i` at an observation time.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoupledObs {
    pub finite: f64,
    pub limit: f64,
    pub tv: u64,
    /// Last jump time of the limit particle (0 if none).
    pub last_jump: f64,
    /// Plug-in mesoscopic corrector built from this run's own spike train.
    pub corrector: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    /// `P_m = sum_j x_j^m`.
    pub power_sums: Vec<f64>,
    /// `int_0^t P_m ds`.
    pub power_integrals: Vec<f64>,
    /// `sum over finite spikes s <= t of X_{s-}^m`.
    pub spike_sums: Vec<f64>,
    pub spikes: u64,
    pub good_count: u64,
    pub max_potential: f64,
    pub empirical: Option<Vec<f64>>,
    pub coupled: Vec<CoupledObs>,
}

/// Counts dominated-stream points with mark below `f(2h)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GoodEventMonitor {
    pub threshold_rate: f64,
    pub count: u64,
    pub limit: f64,
    pub breached: bool,
}

/// Pathwise a priori bounds, checked after every finite spike.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AprioriMonitor {
    pub checks: u64,
    /// `max_i X_t <= max_i X_0 + 3 mean X_0 + 4 h N_t` and
    /// `(1/N) sum_spikes (h + X_{s-}) <= 3 mean X_0 + 4 h N_t` on every check.
    pub held: bool,
    /// Whether `max_i X_t <= a + 4 h N_t` (support edge as constant) also held.
    pub edge_constant_held: bool,
    /// Largest `max_i X_t - (4a + 4 h N_t)` seen; must stay negative.
    pub worst_margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimOutcome {
    pub seed: u64,
    pub log: EventLog,
    pub observations: Vec<Observation>,
    pub spikes: u64,
    pub limit_spikes: u64,
    pub candidates: u64,
    pub good: GoodEventMonitor,
    pub apriori: AprioriMonitor,
    pub tv: Vec<u64>,
}
struct LimitParticle {
    x_ref: f64,
    t_ref: f64,
    bound: f64,
    window_end: f64,
    next_candidate: f64,
    version: u32,
    tv: u64,
    last_jump: f64,
    /// `sum e^{alpha s}` over finite spikes up to the last limit jump.
    fin_at_jump: f64,
}

impl LimitParticle {
    fn value(&self, curve: &RateCurve, t: f64) -> f64 {
        curve.flow(self.t_ref, t, self.x_ref)
    }

    fn next_time(&self) -> f64 {
        self.next_candidate.min(self.window_end)
    }
}

/// Min-heap entry for the per-particle schedule.
#[derive(Clone, Copy, PartialEq)]
struct Pending {
    time: f64,
    particle: u32,
    version: u32,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.particle.cmp(&self.particle))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn exp_draw(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    if rate > 0.0 {
        let e: f64 = Exp1.sample(rng);
        e / rate
    } else {
        f64::INFINITY
    }
}

/// Exact simulation of the finite network and, optionally, of limit
/// particles sharing the per-neuron Poisson randomness of neurons `0..n`.
///
/// All neurons share one dominating stream of rate `N L`, where `L` bounds
/// `f` at the current maximal potential (and is at least `f(2h)`); each
/// point picks a neuron uniformly and carries a mark uniform on `[0, L]`.
/// Coupled limit particle `i` owns a second stream of rate `Lbar_i` (its
/// windowed bound) with marks uniform on `[0, Lbar_i]`, of which only marks
/// above the current `L` are used. Neuron `i` therefore sees a Poisson
/// measure of intensity `ds dz` on `[0, max(L, Lbar_i)]`, read by both systems.
pub fn simulate(model: &Model, curve: Option<&RateCurve>, cfg: &SimConfig) -> Result<SimOutcome> {
    let n = cfg.neurons;
    if n == 0 || !(cfg.horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need N >= 1 and T > 0, got N={n}, T={}",
            cfg.horizon
        )));
    }
    if cfg.coupled > n {
        return Err(Error::InvalidArgument(format!("coupled {} > N {n}", cfg.coupled)));
    }
    let curve = match (cfg.coupled, curve) {
        (0, c) => c,
        (_, Some(c)) => {
            c.check_covers(cfg.horizon)?;
            Some(c)
        }
        (_, None) => {
            return Err(Error::InvalidArgument("coupled particles need a rate curve".into()));
        }
    };

    let f = model.rate();
    let alpha = model.alpha();
    let h = model.h();
    let horizon = cfg.horizon;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let init: Vec<f64> = (0..n).map(|_| model.init().sample(&mut rng)).collect();
    let mean0 = init.iter().sum::<f64>() / n as f64;
    let max0 = init.iter().cloned().fold(0.0, f64::max);
    let edge = model.init().support_right();
    let mut net = Network::new(alpha, h, init.clone(), cfg.power_degree);

    let good_level = model.good_event_level();
    let mut good = GoodEventMonitor {
        threshold_rate: good_level,
        count: 0,
        limit: 2.0 * good_level * n as f64 * horizon,
        breached: false,
    };
    let mut apriori = AprioriMonitor {
        checks: 0,
        held: true,
        edge_constant_held: true,
        worst_margin: f64::NEG_INFINITY,
    };
    let mut spike_load = 0.0;

    let bound_of = |xmax: f64| f.eval(xmax * (1.0 + BOUND_SLACK) + 1e-15).max(good_level);
    let mut big_l = bound_of(net.max_potential());

    let mut particles: Vec<LimitParticle> = (0..cfg.coupled)
        .map(|i| LimitParticle {
            x_ref: init[i],
            t_ref: 0.0,
            bound: 0.0,
            window_end: f64::INFINITY,
            next_candidate: f64::INFINITY,
            version: 0,
            tv: 0,
            last_jump: 0.0,
            fin_at_jump: 0.0,
        })
        .collect();
    let mut schedule = BinaryHeap::with_capacity(2 * cfg.coupled);
    // New window from `t`: bound, window end and first own-stream point.
    let refresh = |p: &mut LimitParticle, i: usize, c: &RateCurve, t: f64, rng: &mut ChaCha8Rng, heap: &mut BinaryHeap<Pending>| {
        let end = (t + cfg.window).min(horizon);
        let x_now = p.value(c, t);
        p.x_ref = x_now;
        p.t_ref = t;
        let reach = x_now + h * (c.integral(end) - c.integral(t)).max(0.0);
        p.bound = f.eval(reach) + LIMIT_MARGIN;
        p.window_end = if end >= horizon { f64::INFINITY } else { end };
        p.next_candidate = t + exp_draw(rng, p.bound);
        p.version = p.version.wrapping_add(1);
        heap.push(Pending {
            time: p.next_time(),
            particle: i as u32,
            version: p.version,
        });
    };
    if let Some(c) = curve {
        for (i, p) in particles.iter_mut().enumerate() {
            refresh(p, i, c, 0.0, &mut rng, &mut schedule);
        }
    }

    let mut observe: Vec<f64> = cfg.observe.iter().map(|&t| t.clamp(0.0, horizon)).collect();
    observe.sort_by(f64::total_cmp);
    let mut next_obs = 0;

    let degree = cfg.power_degree;
    let mut spike_sums = vec![0.0; degree + 1];
    let mut fin_exp_sum = 0.0;
    let mut log = EventLog::default();
    let mut observations = Vec::with_capacity(observe.len());
    let mut spikes = 0u64;
    let mut limit_spikes = 0u64;
    let mut candidates = 0u64;
    let mut last_accept = f64::NEG_INFINITY;
    let sqrt_n = (n as f64).sqrt();

    let mut t = 0.0;
    let mut next_common = exp_draw(&mut rng, n as f64 * big_l);

    loop {
        while let Some(top) = schedule.peek() {
            if particles[top.particle as usize].version == top.version {
                break;
            }
            schedule.pop();
        }
        let own = schedule.peek().copied();
        let (t_next, from_own) = match own {
            Some(p) if p.time < next_common => (p.time, true),
            _ => (next_common, false),
        };

        // Observations due before the next point.
        while next_obs < observe.len() && observe[next_obs] <= t_next.min(horizon) {
            let to = observe[next_obs];
            net.advance(to - t);
            t = to;
            let corrector_base = (-alpha * t).exp();
            let coupled = particles
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let c = curve.expect("curve present when coupled");
                    let k_diff = c.exp_integral(t) - c.exp_integral(p.last_jump);
                    CoupledObs {
                        finite: net.potential(i),
                        limit: p.value(c, t),
                        tv: p.tv,
                        last_jump: p.last_jump,
                        corrector: corrector_base
                            * (h / sqrt_n * (fin_exp_sum - p.fin_at_jump) - h * sqrt_n * k_diff),
                    }
                })
                .collect();
            let max_potential = net.max_potential();
            let empirical = cfg.keep_empirical.then(|| net.empirical_measure());
            if cfg.record_events {
                log.snapshots.push(Snapshot {
                    time: t,
                    potentials: empirical.clone().unwrap_or_else(|| net.empirical_measure()),
                });
            }
            observations.push(Observation {
                time: t,
                power_sums: net.powers.sums.clone(),
                power_integrals: net.powers.integrals.clone(),
                spike_sums: spike_sums.clone(),
                spikes,
                good_count: good.count,
                max_potential,
                empirical,
                coupled,
            });
            next_obs += 1;
        }

        if t_next > horizon {
            net.advance(horizon - t);
            break;
        }
        net.advance(t_next - t);
        t = t_next;

        if from_own {
            let c = curve.expect("curve present when coupled");
            let i = own.expect("own point").particle as usize;
            schedule.pop();
            let p = &mut particles[i];
            if p.window_end <= p.next_candidate {
                refresh(p, i, c, t, &mut rng, &mut schedule);
                continue;
            }
            let z = rng.random::<f64>() * p.bound;
            if z > big_l {
                // Only this stream covers marks above L; the finite neuron's
                // rate is at most L, so only the limit particle can accept.
                candidates += 1;
                let rate = f.eval(p.value(c, t));
                if rate > p.bound {
                    return Err(Error::DominationViolation {
                        neuron: i,
                        time: t,
                        rate,
                        bound: p.bound,
                    });
                }
                if z <= rate {
                    if t <= last_accept {
                        return Err(Error::EventTie(t));
                    }
                    last_accept = t;
                    limit_spikes += 1;
                    p.tv += 1;
                    p.x_ref = 0.0;
                    p.t_ref = t;
                    p.last_jump = t;
                    p.fin_at_jump = fin_exp_sum;
                    if cfg.record_events {
                        log.events.push(Event { t, i, sys: SystemTag::Limit });
                    }
                    refresh(p, i, c, t, &mut rng, &mut schedule);
                    continue;
                }
            }
            p.next_candidate = t + exp_draw(&mut rng, p.bound);
            schedule.push(Pending {
                time: p.next_time(),
                particle: i as u32,
                version: p.version,
            });
            continue;
        }

        candidates += 1;
        let j = rng.random_range(0..n);
        let z = rng.random::<f64>() * big_l;
        if z <= good_level {
            good.count += 1;
        }
        let x = net.potential(j);
        let rate = f.eval(x);
        if rate > big_l {
            return Err(Error::DominationViolation {
                neuron: j,
                time: t,
                rate,
                bound: big_l,
            });
        }
        let finite_accepts = z <= rate;
        let limit_accepts = match (j < particles.len(), curve) {
            (true, Some(c)) => {
                let p = &particles[j];
                let rate_bar = f.eval(p.value(c, t));
                if rate_bar > p.bound.max(big_l) {
                    return Err(Error::DominationViolation {
                        neuron: j,
                        time: t,
                        rate: rate_bar,
                        bound: p.bound.max(big_l),
                    });
                }
                z <= rate_bar
            }
            _ => false,
        };
        if finite_accepts || limit_accepts {
            if t <= last_accept {
                return Err(Error::EventTie(t));
            }
            last_accept = t;
        }
        if finite_accepts {
            spikes += 1;
            if spikes > cfg.spike_cap {
                return Err(Error::SpikeOverflow(cfg.spike_cap));
            }
            let pre = net.spike(j);
            let mut xp = 1.0;
            for s in spike_sums.iter_mut() {
                *s += xp;
                xp *= pre;
            }
            fin_exp_sum += (alpha * t).exp();
            spike_load += h + pre;

            let nt = good.count as f64 / n as f64;
            let xmax = net.max_potential();
            apriori.checks += 1;
            let tt1 = max0 + 3.0 * mean0 + 4.0 * h * nt;
            let tt2 = 3.0 * mean0 + 4.0 * h * nt;
            let tol = 1e-9 * (1.0 + tt1);
            if xmax > tt1 + tol || spike_load / n as f64 > tt2 + tol {
                apriori.held = false;
            }
            if xmax > edge + 4.0 * h * nt + tol {
                apriori.edge_constant_held = false;
            }
            apriori.worst_margin = apriori.worst_margin.max(xmax - (4.0 * edge + 4.0 * h * nt));
            big_l = bound_of(xmax);
        }
        if j < particles.len() {
            let c = curve.expect("curve present when coupled");
            if finite_accepts != limit_accepts {
                particles[j].tv += 1;
            }
            if limit_accepts {
                limit_spikes += 1;
                let p = &mut particles[j];
                p.x_ref = 0.0;
                p.t_ref = t;
                p.last_jump = t;
                p.fin_at_jump = fin_exp_sum;
                refresh(p, j, c, t, &mut rng, &mut schedule);
            }
        }
        if cfg.record_events && (finite_accepts || limit_accepts) {
            let sys = match (finite_accepts, limit_accepts) {
                (true, true) => SystemTag::Both,
                (true, false) => SystemTag::Finite,
                _ => SystemTag::Limit,
            };
            log.events.push(Event { t, i: j, sys });
        }
        next_common = t + exp_draw(&mut rng, n as f64 * big_l);
    }

    good.breached = good.count as f64 > good.limit;
    Ok(SimOutcome {
        seed: cfg.seed,
        log,
        observations,
        spikes,
        limit_spikes,
        candidates,
        good,
        apriori,
        tv: particles.iter().map(|p| p.tv).collect(),
    })
}
