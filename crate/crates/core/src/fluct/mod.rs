//! Finite-N fluctuation observables and their statistical checks.

mod collect;
mod rates;
pub mod stats;

pub use collect::{
    collect_fluctuations, CoupledSample, FluctConfig, FluctuationRun, FluctuationSample, ObservedSums,
    W1_MAX_SPACING,
};
pub(crate) use collect::rate_poly;
pub use rates::{rate_scaling, RateRow, RateTable, SE_WARNING_FRACTION};
pub use stats::{gaussianity, GaussianityReport, MeanSe};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::{solve_rate_curve, SolverOptions};
    use crate::model::{Model, ModelParams, TestFunctionPanel};
    use crate::poly::Poly;

    fn setup() -> (Model, crate::meanfield::RateCurve, TestFunctionPanel) {
        let model = Model::default_model();
        let curve = solve_rate_curve(
            &model,
            &SolverOptions {
                horizon: 1.0,
                dt: 5e-3,
                ..SolverOptions::default()
            },
        )
        .unwrap();
        let panel = TestFunctionPanel::standard(model.rate(), 3);
        (model, curve, panel)
    }

    #[test]
    fn mass_fluctuation_vanishes_and_martingale_starts_at_zero() {
        let (model, curve, panel) = setup();
        let cfg = FluctConfig {
            neurons: 200,
            coupled: 2,
            times: vec![0.0, 0.5, 1.0],
            replicas: 8,
            ..FluctConfig::default()
        };
        let run = collect_fluctuations(&model, &curve, &panel, &cfg).unwrap();
        let one = run.panel_index("one").unwrap();
        for s in &run.samples {
            for k in 0..3 {
                assert_eq!(s.eta[k][one], 0.0);
            }
            for v in &s.martingale[0] {
                assert_eq!(*v, 0.0);
            }
            assert!(s.apriori_held);
        }
    }

    #[test]
    fn martingale_helpers_agree_with_panel_columns() {
        let (model, curve, panel) = setup();
        let cfg = FluctConfig {
            neurons: 100,
            coupled: 1,
            times: vec![1.0],
            replicas: 3,
            ..FluctConfig::default()
        };
        let run = collect_fluctuations(&model, &curve, &panel, &cfg).unwrap();
        let rate = model.rate().as_poly().unwrap();
        let j = run.panel_index("x^2").unwrap();
        for s in &run.samples {
            let w = s.martingale_of(0, &Poly::monomial(2), &rate);
            assert!((w - s.martingale[0][j]).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_fluctuation_variance_is_iid_clt() {
        // eta^N_0(x) has variance Var_{g0}(x) = 1/12 for the uniform law.
        let (model, curve, panel) = setup();
        let cfg = FluctConfig {
            neurons: 100,
            coupled: 0,
            times: vec![0.0],
            replicas: 2000,
            ..FluctConfig::default()
        };
        let run = collect_fluctuations(&model, &curve, &panel, &cfg).unwrap();
        let col = run.eta_column(0, run.panel_index("x^1").unwrap());
        let v = stats::variance(&col);
        let se = stats::variance_se(&col);
        assert!((v - 1.0 / 12.0).abs() < 3.0 * se, "{v} +- {se}");
    }

    #[test]
    fn zero_weight_rates_are_exactly_zero() {
        let model = Model::new(ModelParams::default_model().with_h(0.0)).unwrap();
        let curve = crate::meanfield::RateCurve::from_values(1.0, 0.0, 0.01, vec![0.5; 101]);
        let table = rate_scaling(&model, &curve, &[100, 1000], 5, 1.0, 0, Some(4)).unwrap();
        for row in &table.rows {
            // identical paths; only rounding of the two flow representations remains
            assert!(row.coupling.mean < 1e-12);
            assert_eq!(row.tv.mean, 0.0);
            assert!(row.wasserstein.is_none());
        }
        assert!(table.to_csv(&serde_json::json!({})).unwrap().lines().count() == 4);
    }
}
