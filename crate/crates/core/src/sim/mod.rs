//! Exact event-driven simulation of the finite network and of coupled limit
//! particles.

mod engine;
mod limit;
mod log;
mod network;
mod wasserstein;

pub use engine::{
    simulate, AprioriMonitor, CoupledObs, GoodEventMonitor, Observation, SimConfig, SimOutcome,
};
pub use limit::{simulate_limit_particles, LimitPath};
pub use log::{Event, EventLog, Snapshot, SystemTag};
pub use network::{Network, PowerSums};
pub use wasserstein::{wasserstein1, wasserstein1_samples, Wasserstein};

/// Convenience wrapper: the finite network alone, with the event log kept.
pub fn simulate_network(
    model: &crate::model::Model,
    neurons: usize,
    horizon: f64,
    seed: u64,
    snapshot_times: &[f64],
) -> crate::Result<EventLog> {
    let cfg = SimConfig {
        record_events: true,
        observe: snapshot_times.to_vec(),
        ..SimConfig::new(neurons, horizon, seed)
    };
    Ok(simulate(model, None, &cfg)?.log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::{solve_rate_curve, RateCurve, SolverOptions};
    use crate::model::{InitialDensity, Model, ModelParams};

    fn default_curve() -> (Model, RateCurve) {
        let model = Model::default_model();
        let opts = SolverOptions {
            horizon: 1.0,
            dt: 5e-3,
            ..SolverOptions::default()
        };
        let curve = solve_rate_curve(&model, &opts).unwrap();
        (model, curve)
    }

    #[test]
    fn single_neuron_first_spike_law() {
        // One neuron starting at x0 fires before t with probability
        // 1 - exp(-x0 (1 - e^{-t})) when f(x) = x and alpha = 1.
        let params = ModelParams {
            init: InitialDensity::point_mass(0.8).unwrap(),
            ..ModelParams::default_model()
        };
        let model = Model::new(params).unwrap();
        let reps = 20_000;
        let mut times: Vec<f64> = (0..reps)
            .map(|s| {
                let log = simulate_network(&model, 1, 30.0, s, &[]).unwrap();
                assert!(log.events.len() <= 1);
                log.first_time(0).unwrap_or(f64::INFINITY)
            })
            .collect();
        times.sort_by(f64::total_cmp);
        let cdf = |t: f64| 1.0 - (-0.8 * (1.0 - (-t).exp())).exp();
        let ks = times
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_finite())
            .map(|(k, &t)| {
                let lo = k as f64 / reps as f64;
                let hi = (k + 1) as f64 / reps as f64;
                (cdf(t) - lo).abs().max((cdf(t) - hi).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.63 / (reps as f64).sqrt(), "KS {ks}");
        let silent = times.iter().filter(|t| t.is_infinite()).count() as f64 / reps as f64;
        assert!((silent - (-0.8f64).exp()).abs() < 0.015);
    }

    #[test]
    fn quiescent_network_never_fires() {
        let params = ModelParams {
            init: InitialDensity::point_mass(0.0).unwrap(),
            ..ModelParams::default_model()
        };
        let model = Model::new(params).unwrap();
        let log = simulate_network(&model, 50, 5.0, 3, &[]).unwrap();
        assert!(log.events.is_empty());
    }

    #[test]
    fn reruns_are_bit_identical() {
        let model = Model::default_model();
        let a = simulate_network(&model, 200, 1.0, 42, &[0.5]).unwrap();
        let b = simulate_network(&model, 200, 1.0, 42, &[0.5]).unwrap();
        assert_eq!(a, b);
        assert!(a.is_strictly_increasing());
        let c = simulate_network(&model, 200, 1.0, 43, &[0.5]).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn uncoupled_weight_makes_processes_coincide() {
        let model = Model::new(ModelParams::default_model().with_h(0.0)).unwrap();
        let curve = RateCurve::from_values(1.0, 0.0, 0.01, vec![0.5; 201]);
        for seed in 0..20 {
            let cfg = SimConfig {
                coupled: 10,
                observe: vec![0.5, 1.0, 2.0],
                record_events: true,
                ..SimConfig::new(10, 2.0, seed)
            };
            let out = simulate(&model, Some(&curve), &cfg).unwrap();
            assert!(out.tv.iter().all(|&v| v == 0));
            assert!(out.log.events.iter().all(|e| e.sys == SystemTag::Both));
            for obs in &out.observations {
                for c in &obs.coupled {
                    assert!((c.finite - c.limit).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn observations_match_direct_summation() {
        let (model, curve) = default_curve();
        let cfg = SimConfig {
            coupled: 4,
            observe: vec![0.3, 0.9],
            keep_empirical: true,
            power_degree: 4,
            ..SimConfig::new(300, 1.0, 9)
        };
        let out = simulate(&model, Some(&curve), &cfg).unwrap();
        assert!(out.apriori.held && out.apriori.worst_margin < 0.0);
        for obs in &out.observations {
            let mu = obs.empirical.as_ref().unwrap();
            assert!(mu.windows(2).all(|w| w[0] <= w[1]));
            for m in 0..=4 {
                let direct: f64 = mu.iter().map(|x| x.powi(m)).sum();
                assert!((obs.power_sums[m as usize] - direct).abs() < 1e-9 * (1.0 + direct));
            }
            // f(x) = x: the total rate over N is the first moment.
            assert!((obs.power_sums[1] / 300.0 - mu.iter().sum::<f64>() / 300.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coupled_runs_respect_domination_and_order() {
        let (model, curve) = default_curve();
        for seed in 0..10 {
            let cfg = SimConfig {
                coupled: 8,
                record_events: true,
                ..SimConfig::new(100, 1.0, seed)
            };
            let out = simulate(&model, Some(&curve), &cfg).unwrap();
            assert!(out.log.is_strictly_increasing());
        }
        let short = RateCurve::from_values(1.0, 0.5, 0.01, vec![0.5; 11]);
        let cfg = SimConfig {
            coupled: 1,
            ..SimConfig::new(10, 1.0, 0)
        };
        assert!(matches!(
            simulate(&model, Some(&short), &cfg),
            Err(crate::Error::CurveCoverage { .. })
        ));
    }

    #[test]
    fn spike_cap_is_enforced() {
        let model = Model::default_model();
        let cfg = SimConfig {
            spike_cap: 5,
            ..SimConfig::new(100, 1.0, 1)
        };
        assert!(matches!(
            simulate(&model, None, &cfg),
            Err(crate::Error::SpikeOverflow(5))
        ));
    }

    #[test]
    fn wasserstein_of_own_law_is_small() {
        use rand::SeedableRng;
        let (model, curve) = default_curve();
        let snap = crate::meanfield::density_at(&model, &curve, 0.0, 2049).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut s: Vec<f64> = (0..10_000).map(|_| model.init().sample(&mut rng)).collect();
        s.sort_by(f64::total_cmp);
        let w = wasserstein1(&s, &snap, 1e-2);
        assert!(w.distance < 0.02 && !w.coarse_grid, "{w:?}");
        assert_eq!(wasserstein1_samples(&[0.3; 4], &[0.3; 4]), 0.0);
    }

    #[test]
    fn wasserstein_matches_quantile_oracle() {
        // For a uniform law, W1 = int_0^1 |F_emp^{-1}(u) - u| du, computed exactly.
        let (model, curve) = default_curve();
        let snap = crate::meanfield::density_at(&model, &curve, 0.0, 4097).unwrap();
        let s = vec![0.1, 0.15, 0.6, 0.95];
        let n = s.len() as f64;
        let oracle: f64 = s
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let (a, b) = (k as f64 / n, (k + 1) as f64 / n);
                // int_a^b |x - u| du
                let piece = |lo: f64, hi: f64| 0.5 * ((hi - x) * (hi - x).abs() - (lo - x) * (lo - x).abs());
                piece(a, b)
            })
            .sum();
        let w = wasserstein1(&s, &snap, 1e-2);
        assert!((w.distance - oracle).abs() < 1e-6, "{} vs {oracle}", w.distance);
    }
}
