//! Limit fluctuation system: Gaussian driver, truncated moment hierarchy for
//! `etabar`, the `Ubar^i` equations and the mesoscopic correction.

mod driver;
mod galerkin;
mod meso;

pub use driver::{psd_factor, DriverDiagnostics, GaussianDriver, MAX_REMOVED_FRACTION};
pub use galerkin::{
    closure_check, fluctuation_variance, simulate_limit_system, ClosureCheck, LimitConfig, LimitRun, LimitSample,
    LimitTrace,
};
pub use meso::{
    form_consistency, integral_form, limit_value, mesoscopic_reconstruct, residual_scaling, FormConsistency,
    MesoTrajectory, ResidualRow, ResidualTable,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluct::stats;
    use crate::meanfield::{moment_table, solve_rate_curve, RateCurve, SolverOptions};
    use crate::model::{Model, ModelParams};
    use crate::poly::Poly;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Model, RateCurve) {
        let model = Model::default_model();
        let curve = solve_rate_curve(&model, &SolverOptions::default().with_horizon(1.0)).unwrap();
        (model, curve)
    }

    #[test]
    fn quiet_system_stays_at_zero() {
        let model = Model::new(ModelParams::default_model().with_h(0.0)).unwrap();
        let curve = RateCurve::from_values(1.0, 0.0, 1e-3, vec![0.5; 1001]);
        let cfg = LimitConfig {
            paths: 4,
            initial_fluctuation: false,
            driver: false,
            trace_paths: 4,
            ..LimitConfig::default()
        };
        let run = simulate_limit_system(&model, &curve, &cfg).unwrap();
        for (s, tr) in run.samples.iter().zip(&run.traces) {
            assert!(s.eta[0].iter().all(|&v| v == 0.0));
            assert!(s.u[0].iter().all(|&v| v == 0.0));
            assert!(tr.u.iter().flatten().all(|&v| v == 0.0));
            for p in &tr.particles {
                let meso = mesoscopic_reconstruct(&model, &curve, p, tr, 100);
                assert!(meso.u.iter().all(|&v| v == 0.0));
                assert_eq!(meso.corrected, meso.x_bar);
            }
        }
    }

    #[test]
    fn gaussian_driver_of_one_has_rate_integral_as_variance() {
        let (model, curve) = setup();
        let cfg = LimitConfig {
            degree: 1,
            paths: 100_000,
            particles: 0,
            initial_fluctuation: false,
            trace_paths: 0,
            seed: 7,
            ..LimitConfig::default()
        };
        let run = simulate_limit_system(&model, &curve, &cfg).unwrap();
        let var = stats::variance(&run.w_one_column(0));
        let oracle = curve.integral(1.0);
        assert!((var / oracle - 1.0).abs() < 0.02, "{var} vs {oracle}");
        assert!((run.driver.total_variance_one / oracle - 1.0).abs() < 1e-4);
    }

    #[test]
    fn driver_covariance_matches_weighted_moments() {
        let (model, curve) = setup();
        let rate = Poly::monomial(1);
        let table = moment_table(&model, &curve, 5);
        let driver = GaussianDriver::new(&table, &rate, 2, 1e-3, 1000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<Vec<f64>> = (0..10_000)
            .map(|_| {
                let mut acc = vec![0.0; 3];
                for n in 0..driver.steps() {
                    let dw = driver.increment(n, &mut rng);
                    for (a, d) in acc.iter_mut().zip(dw.iter()) {
                        *a += d;
                    }
                }
                acc
            })
            .collect();
        // oracle: int_0^1 g_s(x^{1+j+k}) ds by Simpson on the table rows
        let rows = &table.rows;
        let simpson = |m: usize| {
            let n = rows.len() - 1;
            let w = |k: usize| if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            (0..=n).map(|k| w(k) * rows[k][m]).sum::<f64>() * table.dt / 3.0
        };
        for j in 0..3 {
            for k in j..3 {
                let xs: Vec<f64> = draws.iter().map(|d| d[j]).collect();
                let ys: Vec<f64> = draws.iter().map(|d| d[k]).collect();
                let (mx, my) = (stats::mean(&xs), stats::mean(&ys));
                let prods: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).collect();
                let se = (stats::variance(&prods) / prods.len() as f64).sqrt();
                let oracle = simpson(1 + j + k);
                let cov = stats::covariance(&xs, &ys);
                assert!((cov - oracle).abs() < 3.0 * se, "({j},{k}) {cov} vs {oracle} +- {se}");
            }
        }
    }

    #[test]
    fn closure_is_stable_between_degrees() {
        let (model, curve) = setup();
        let cfg = LimitConfig {
            times: vec![0.25, 0.5, 1.0],
            ..LimitConfig::default()
        };
        let check = closure_check(&model, &curve, &cfg, 10).unwrap();
        assert!(check.passes(0.05), "{check:?}");
        // eta_0(x) has the uniform variance 1/12
        let v0 = fluctuation_variance(
            &model,
            &curve,
            &LimitConfig {
                times: vec![0.0],
                ..cfg
            },
        )
        .unwrap();
        assert!((v0[0] - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn scheme_variance_matches_covariance_recursion() {
        let (model, curve) = setup();
        let cfg = LimitConfig {
            degree: 4,
            paths: 4000,
            times: vec![0.5, 1.0],
            seed: 5,
            ..LimitConfig::default()
        };
        let run = simulate_limit_system(&model, &curve, &cfg).unwrap();
        for k in 0..2 {
            let col = run.eta_f_column(k);
            let (v, se) = (stats::variance(&col), stats::variance_se(&col));
            assert!((v - run.eta_f_variance[k]).abs() < 3.0 * se, "{v} vs {}", run.eta_f_variance[k]);
        }
    }

    #[test]
    fn mass_fluctuation_and_resets_are_exact() {
        let (model, curve) = setup();
        let cfg = LimitConfig {
            degree: 4,
            paths: 20,
            particles: 3,
            trace_paths: 20,
            ..LimitConfig::default()
        };
        let run = simulate_limit_system(&model, &curve, &cfg).unwrap();
        let mut resets = 0;
        for tr in &run.traces {
            assert!(tr.eta.iter().all(|row| row[0] == 0.0));
            for (p, u) in tr.particles.iter().zip(&tr.u) {
                for n in 0..tr.dw_one.len() {
                    if p.jumps_in(tr.time(n), tr.time(n + 1)) {
                        assert_eq!(u[n + 1], 0.0);
                        resets += 1;
                    }
                }
            }
        }
        assert!(resets > 10);
    }

    #[test]
    fn integral_and_sde_forms_agree() {
        let (model, curve) = setup();
        let cfg = LimitConfig {
            degree: 4,
            paths: 50,
            particles: 2,
            trace_paths: 50,
            ..LimitConfig::default()
        };
        let run = simulate_limit_system(&model, &curve, &cfg).unwrap();
        assert_eq!(run.traces.len() * 2, 100);
        for tr in &run.traces {
            for (p, u) in tr.particles.iter().zip(&tr.u) {
                let c = form_consistency(&model, u, &integral_form(&model, p, tr), tr);
                assert!(c.holds(), "{c:?}");
            }
        }
    }

    #[test]
    fn common_noise_correlates_neurons() {
        let (model, curve) = setup();
        let cfg = LimitConfig {
            degree: 4,
            paths: 500,
            trace_paths: 0,
            ..LimitConfig::default()
        };
        let run = simulate_limit_system(&model, &curve, &cfg).unwrap();
        let c = stats::correlation(&run.particle_column(0, 0), &run.particle_column(0, 1));
        assert!(c > 0.5, "{c}");
    }

    #[test]
    fn corrector_cancels_on_matched_paths() {
        let (model, curve) = setup();
        let table = residual_scaling(&model, &curve, &[50, 200], 4, 1.0, 0, None).unwrap();
        assert_eq!(table.rows.len(), 2);
        for r in &table.rows {
            assert!(r.residual.mean < r.uncorrected.mean);
            if r.mismatched == 0.0 {
                assert!(r.residual.mean < 1e-9);
            }
        }
        assert_eq!(table.to_csv(&serde_json::json!({})).unwrap().lines().count(), 4);
    }

    #[test]
    fn blowup_bound_is_enforced() {
        let (model, curve) = setup();
        let cfg = LimitConfig {
            degree: 4,
            paths: 1,
            blowup: 1e-12,
            ..LimitConfig::default()
        };
        assert!(matches!(
            simulate_limit_system(&model, &curve, &cfg),
            Err(crate::Error::ClosureInstability { .. })
        ));
    }

    #[test]
    fn trace_csv_has_header_and_grid() {
        let (model, curve) = setup();
        let cfg = LimitConfig {
            degree: 2,
            dt: 0.01,
            paths: 1,
            particles: 1,
            ..LimitConfig::default()
        };
        let run = simulate_limit_system(&model, &curve, &cfg).unwrap();
        let csv = run.traces[0].to_csv(&serde_json::json!({"seed": 0})).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("# {\"seed\":0}"));
        assert_eq!(lines.next(), Some("t,eta_x0,eta_x1,eta_x2,eta_f,w_one,u1"));
        assert_eq!(lines.count(), 101);
    }
}
