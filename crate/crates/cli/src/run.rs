use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use spikefield::fluct::{collect_fluctuations, gaussianity, rate_scaling, stats, FluctConfig, MeanSe};
use spikefield::fluct::stats::MIN_REPLICAS;
use spikefield::limit::{closure_check, form_consistency, integral_form, mesoscopic_reconstruct, residual_scaling, simulate_limit_system};
use spikefield::meanfield::{density_at, solve_rate_curve, RateCurve, SolverOptions, DEFAULT_NODES};
use spikefield::model::TestFunctionPanel;
use spikefield::sim::{simulate, SimConfig};
use spikefield::Model;

use crate::config::{ExperimentConfig, Kind};
use crate::error::{CliError, CliResult};
use crate::output::{csv, OutputTree};

/// Consecutive-N ratio band for the scaling tables.
pub const RATIO_BAND: (f64, f64) = (0.4, 2.5);
/// Largest tolerated good-event breach frequency.
pub const BREACH_LIMIT: f64 = 1e-3;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: std::path::PathBuf,
    pub workers: Option<usize>,
    pub plotdata: bool,
    pub assert: bool,
}

/// Outcome of a finished run: artifact hashes and the checks evaluated.
#[derive(Debug)]
pub struct RunReport {
    pub hashes: std::collections::BTreeMap<String, String>,
    pub checks: Vec<Check>,
}

pub fn run(kind: Kind, config: ExperimentConfig, opts: &RunOptions) -> CliResult<RunReport> {
    let cfg = config.with_kind(kind)?;
    cfg.validate()?;
    let model = Model::new(cfg.model.clone())?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = opts.workers {
        pool = pool.num_threads(k.max(1));
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| {
        let mut out = OutputTree::create(&opts.out)?;
        let ctx = Ctx {
            cfg: &cfg,
            model: &model,
            plot: opts.plotdata,
        };
        let checks = match kind {
            Kind::Simulate => ctx.simulate(&mut out)?,
            Kind::SolveMeanfield => ctx.solve(&mut out)?,
            Kind::Rates => ctx.rates(&mut out)?,
            Kind::Fluctuations => ctx.fluctuations(&mut out)?,
            Kind::LimitSystem => ctx.limit_system(&mut out)?,
            Kind::Mesoscopic => ctx.mesoscopic(&mut out)?,
        };
        out.write_json("checks.json", &json!({ "config": &cfg, "checks": &checks }))?;
        let hashes = out.finish(&serde_json::to_value(&cfg)?)?;
        let failures: Vec<String> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        if opts.assert && !failures.is_empty() {
            return Err(CliError::Assert(failures));
        }
        Ok(RunReport { hashes, checks })
    })
}

pub fn run_file(kind: Kind, config: &Path, opts: &RunOptions) -> CliResult<RunReport> {
    run(kind, ExperimentConfig::load(config)?, opts)
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    model: &'a Model,
    plot: bool,
}

fn num(x: f64) -> String {
    x.to_string()
}

fn ratio_check(name: &str, ratios: &[f64]) -> Check {
    let ok = ratios.iter().all(|r| (RATIO_BAND.0..=RATIO_BAND.1).contains(r));
    Check::new(name, ok, format!("ratios {ratios:?}"))
}

impl Ctx<'_> {
    fn header(&self) -> Value {
        json!({ "config": self.cfg })
    }

    fn curve(&self) -> CliResult<RateCurve> {
        let opts = SolverOptions {
            horizon: self.cfg.curve_horizon(),
            dt: self.cfg.dt,
            max_iter: self.cfg.max_iterations,
            ..SolverOptions::default()
        };
        Ok(solve_rate_curve(self.model, &opts)?)
    }

    fn simulate(&self, out: &mut OutputTree) -> CliResult<Vec<Check>> {
        let cfg = self.cfg;
        let coupled = cfg.coupled.unwrap_or(0).min(cfg.neurons);
        let curve = if coupled > 0 { Some(self.curve()?) } else { None };
        let mut rows = Vec::new();
        let (mut held, mut breaches) = (true, 0usize);
        let mut plot = Vec::new();
        for r in 0..cfg.replicas {
            let seed = cfg.base_seed + r as u64;
            let sim_cfg = SimConfig {
                coupled,
                observe: cfg.times.clone(),
                record_events: true,
                ..SimConfig::new(cfg.neurons, cfg.horizon, seed)
            };
            let res = simulate(self.model, curve.as_ref(), &sim_cfg)?;
            let header = json!({ "config": cfg, "seed": seed });
            let mut buf = Vec::new();
            res.log.write_ndjson(&header, &mut buf)?;
            out.write(&format!("events_r{r}.ndjson"), &buf)?;
            if !cfg.times.is_empty() {
                let mut buf = Vec::new();
                res.log.write_snapshots_csv(&header, &mut buf)?;
                out.write(&format!("snapshots_r{r}.csv"), &buf)?;
            }
            if r == 0 && self.plot {
                plot = res.log.events.iter().enumerate().map(|(k, e)| (e.t, (k + 1) as f64, 0.0)).collect();
            }
            held &= res.apriori.held;
            breaches += res.good.breached as usize;
            rows.push(vec![
                seed.to_string(),
                res.spikes.to_string(),
                res.limit_spikes.to_string(),
                res.good.count.to_string(),
                res.good.breached.to_string(),
                res.apriori.held.to_string(),
                res.apriori.edge_constant_held.to_string(),
                num(res.apriori.worst_margin),
                res.tv.iter().sum::<u64>().to_string(),
            ]);
        }
        let cols = [
            "seed",
            "spikes",
            "limit_spikes",
            "good_count",
            "good_breached",
            "apriori_held",
            "edge_constant_held",
            "worst_margin",
            "tv_total",
        ];
        out.write("replicas.csv", csv(&self.header(), &cols, rows)?.as_bytes())?;
        if self.plot {
            out.write_plot("spike_count", &self.header(), &plot)?;
        }
        let freq = breaches as f64 / cfg.replicas as f64;
        Ok(vec![
            Check::new("apriori_bound", held, format!("held on all {} replicas: {held}", cfg.replicas)),
            Check::new("good_event", freq < BREACH_LIMIT, format!("breach frequency {freq}")),
        ])
    }

    fn solve(&self, out: &mut OutputTree) -> CliResult<Vec<Check>> {
        let curve = self.curve()?;
        let header = self.header();
        let rows = (0..curve.len()).map(|k| vec![num(curve.time(k)), num(curve.values[k])]);
        out.write("rate_curve.csv", csv(&header, &["t", "p"], rows)?.as_bytes())?;
        let h = self.model.h();
        let mut checks = Vec::new();
        let mut snapshots = Vec::new();
        if h > 0.0 && self.model.init().has_density() {
            for (k, &t) in self.cfg.times.iter().enumerate() {
                let snap = density_at(self.model, &curve, t, DEFAULT_NODES)?;
                let rows = (0..snap.x.len()).map(|j| {
                    vec![num(snap.x[j]), num(snap.g[j]), snap.branch[j].to_string(), num(snap.cdf[j])]
                });
                let head = json!({ "config": self.cfg, "time": t, "shock": snap.shock, "right_edge": snap.right_edge });
                out.write(&format!("density_{k}.csv"), csv(&head, &["x", "g", "branch", "cdf"], rows)?.as_bytes())?;
                let gap = (snap.g[0] - 1.0 / h).abs();
                checks.push(Check::new(format!("boundary_t{t}"), gap < 1e-2, format!("|g_t(0) - 1/h| = {gap:e}")));
                if t > 0.0 {
                    let d = (snap.jump_size - snap.jump_closed_form).abs();
                    checks.push(Check::new(format!("jump_t{t}"), d < 1e-6, format!("jump mismatch {d:e}")));
                }
                snapshots.push(json!({
                    "time": t, "g0": snap.g[0], "shock": snap.shock, "jump": snap.jump_size,
                    "jump_closed_form": snap.jump_closed_form, "mass": snap.mass,
                }));
            }
        }
        checks.push(Check::new(
            "convergence",
            curve.residual <= SolverOptions::default().tol,
            format!("{} iterations, residual {:e}", curve.iterations, curve.residual),
        ));
        out.write_json(
            "solver.json",
            &json!({
                "config": self.cfg,
                "iterations": curve.iterations,
                "residual": curve.residual,
                "residual_history": curve.residual_history,
                "mass_defect": curve.mass_defect,
                "snapshots": snapshots,
            }),
        )?;
        if self.plot {
            let pts: Vec<_> = (0..curve.len()).map(|k| (curve.time(k), curve.values[k], 0.0)).collect();
            out.write_plot("rate_curve", &header, &pts)?;
        }
        Ok(checks)
    }

    fn rates(&self, out: &mut OutputTree) -> CliResult<Vec<Check>> {
        let cfg = self.cfg;
        let curve = self.curve()?;
        let table = rate_scaling(self.model, &curve, &cfg.ladder, cfg.replicas, cfg.horizon, cfg.base_seed, cfg.coupled)?;
        out.write("rate_table.csv", table.to_csv(&self.header())?.as_bytes())?;
        if self.plot {
            let pick = |f: &dyn Fn(&spikefield::fluct::RateRow) -> Option<MeanSe>| {
                table
                    .rows
                    .iter()
                    .filter_map(|r| f(r).map(|m| (r.neurons as f64, m.mean, m.se)))
                    .collect::<Vec<_>>()
            };
            out.write_plot("coupling", &self.header(), &pick(&|r| Some(r.coupling)))?;
            out.write_plot("tv", &self.header(), &pick(&|r| Some(r.tv)))?;
            out.write_plot("wasserstein", &self.header(), &pick(&|r| r.wasserstein))?;
        }
        let mut checks = vec![
            ratio_check("coupling_ratios", &table.ratios(|r| r.coupling.mean)),
            ratio_check("tv_ratios", &table.ratios(|r| r.tv.mean)),
        ];
        if self.model.h() > 0.0 {
            checks.push(ratio_check(
                "wasserstein_ratios",
                &table.ratios(|r| r.wasserstein.map_or(f64::NAN, |w| w.mean)),
            ));
        }
        Ok(checks)
    }

    fn fluctuations(&self, out: &mut OutputTree) -> CliResult<Vec<Check>> {
        let cfg = self.cfg;
        let curve = self.curve()?;
        let panel = TestFunctionPanel::standard(self.model.rate(), cfg.panel_degree);
        let fc = FluctConfig {
            neurons: cfg.neurons,
            coupled: cfg.coupled.unwrap_or(8).min(cfg.neurons),
            times: cfg.times.clone(),
            replicas: cfg.replicas,
            base_seed: cfg.base_seed,
            wasserstein: false,
        };
        let run = collect_fluctuations(self.model, &curve, &panel, &fc)?;
        let header = self.header();
        let names = &run.panel;

        let mut cols: Vec<String> = vec!["seed".into(), "t".into()];
        for prefix in ["eta", "w", "qv_gap"] {
            cols.extend(names.iter().map(|n| format!("{prefix}_{n}")));
        }
        let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
        let rows = run.samples.iter().flat_map(|s| {
            s.times.iter().enumerate().map(move |(k, t)| {
                let mut row = vec![s.seed.to_string(), num(*t)];
                row.extend(s.eta[k].iter().map(|v| num(*v)));
                row.extend(s.martingale[k].iter().map(|v| num(*v)));
                row.extend(s.qv_gap[k].iter().map(|v| num(*v)));
                row
            })
        });
        out.write("fluctuations.csv", csv(&header, &col_refs, rows)?.as_bytes())?;

        let rows = run.samples.iter().flat_map(|s| {
            s.times.iter().enumerate().flat_map(move |(k, t)| {
                s.coupled[k].iter().enumerate().map(move |(i, c)| {
                    vec![
                        s.seed.to_string(),
                        num(*t),
                        i.to_string(),
                        num(c.u),
                        num(c.corrector),
                        num(c.residual),
                        c.tv.to_string(),
                        num(c.last_jump),
                    ]
                })
            })
        });
        let cols = ["seed", "t", "particle", "u", "corrector", "residual", "tv", "last_jump"];
        out.write("coupled.csv", csv(&header, &cols, rows)?.as_bytes())?;

        let mut checks = Vec::new();
        let mut mart_rows = Vec::new();
        let mut gauss_rows = Vec::new();
        let mut var_plot = Vec::new();
        let f_idx = run.panel_index("f");
        for (k, &t) in cfg.times.iter().enumerate() {
            for (j, name) in names.iter().enumerate() {
                let gap = MeanSe::of(&run.qv_gap_column(k, j));
                let ok = gap.within(3.0) || (gap.mean == 0.0 && gap.se == 0.0);
                checks.push(Check::new(
                    format!("martingale_{name}_t{t}"),
                    ok,
                    format!("mean {:e} se {:e}", gap.mean, gap.se),
                ));
                mart_rows.push(vec![num(t), name.clone(), num(gap.mean), num(gap.se), ok.to_string()]);
                if cfg.replicas >= MIN_REPLICAS {
                    let rep = gaussianity(format!("eta_{name}_t{t}"), &run.eta_column(k, j))?;
                    if Some(j) == f_idx {
                        checks.push(Check::new(format!("gaussian_f_t{t}"), rep.passes(), format!("{rep:?}")));
                    }
                    gauss_rows.push(vec![
                        num(t),
                        name.clone(),
                        rep.replicas.to_string(),
                        num(rep.mean),
                        num(rep.variance),
                        num(rep.skewness),
                        num(rep.excess_kurtosis),
                        num(rep.ks),
                        num(rep.ks_threshold),
                        rep.degenerate.to_string(),
                        rep.passes().to_string(),
                    ]);
                }
            }
            if let Some(j) = f_idx {
                let col = run.eta_column(k, j);
                var_plot.push((t, stats::variance(&col), stats::variance_se(&col)));
            }
        }
        let cols = ["t", "phi", "qv_gap_mean", "qv_gap_se", "within_3se"];
        out.write("martingale.csv", csv(&header, &cols, mart_rows)?.as_bytes())?;
        if !gauss_rows.is_empty() {
            let cols = [
                "t", "phi", "replicas", "mean", "variance", "skewness", "excess_kurtosis", "ks", "ks_threshold",
                "degenerate", "passes",
            ];
            out.write("gaussianity.csv", csv(&header, &cols, gauss_rows)?.as_bytes())?;
        }
        if self.plot {
            out.write_plot("eta_f_variance", &header, &var_plot)?;
        }
        Ok(checks)
    }

    fn limit_system(&self, out: &mut OutputTree) -> CliResult<Vec<Check>> {
        let cfg = self.cfg;
        let curve = self.curve()?;
        let lc = spikefield::limit::LimitConfig {
            trace_paths: cfg.paths.min(100),
            ..cfg.limit_config()
        };
        let closure = closure_check(self.model, &curve, &lc, cfg.closure_degree)?;
        let run = simulate_limit_system(self.model, &curve, &lc)?;
        let header = json!({ "config": cfg, "driver": run.driver, "eta0_law": "iid-clt-gaussian" });
        if let Some(tr) = run.traces.first() {
            out.write("galerkin_trace.csv", tr.to_csv(&header)?.as_bytes())?;
            if self.plot {
                let pts: Vec<_> = tr.eta_f.iter().enumerate().map(|(n, v)| (tr.time(n), *v, 0.0)).collect();
                out.write_plot("eta_f_path", &header, &pts)?;
            }
        }
        let mut rows = Vec::new();
        for (k, &t) in cfg.times.iter().enumerate() {
            let u = run.u_column(k);
            let ef = run.eta_f_column(k);
            let corr = if cfg.particles >= 2 {
                stats::correlation(&run.particle_column(k, 0), &run.particle_column(k, 1))
            } else {
                f64::NAN
            };
            rows.push(vec![
                num(t),
                num(stats::variance(&u)),
                num(stats::variance_se(&u)),
                num(stats::variance(&ef)),
                num(run.eta_f_variance[k]),
                num(stats::variance(&run.w_one_column(k))),
                num(curve.integral(t)),
                num(corr),
            ]);
        }
        let cols = ["t", "var_u", "var_u_se", "var_eta_f", "var_eta_f_exact", "var_w_one", "rate_integral", "corr_u12"];
        out.write("limit_summary.csv", csv(&header, &cols, rows)?.as_bytes())?;
        out.write_json("closure.json", &json!({ "config": cfg, "closure": &closure }))?;

        let mut consistent = true;
        let mut worst = 0.0f64;
        for tr in &run.traces {
            for (p, u) in tr.particles.iter().zip(&tr.u) {
                let c = form_consistency(self.model, u, &integral_form(self.model, p, tr), tr);
                consistent &= c.holds();
                worst = worst.max(c.max_gap / c.bound);
            }
        }
        Ok(vec![
            Check::new(
                "closure",
                closure.passes(0.05),
                format!("D={} vs D={}: max relative gap {:e}", closure.low_degree, closure.high_degree, closure.max_relative_gap),
            ),
            Check::new("integral_vs_sde_form", consistent, format!("worst gap/bound {worst:e}")),
        ])
    }

    fn mesoscopic(&self, out: &mut OutputTree) -> CliResult<Vec<Check>> {
        let cfg = self.cfg;
        let curve = self.curve()?;
        let table = residual_scaling(self.model, &curve, &cfg.ladder, cfg.replicas, cfg.horizon, cfg.base_seed, cfg.coupled)?;
        let header = self.header();
        out.write("residuals.csv", table.to_csv(&header)?.as_bytes())?;

        let lc = spikefield::limit::LimitConfig {
            paths: 1,
            particles: 1,
            trace_paths: 1,
            ..cfg.limit_config()
        };
        let run = simulate_limit_system(self.model, &curve, &lc)?;
        let tr = &run.traces[0];
        let n = cfg.ladder.last().copied().unwrap_or(cfg.neurons);
        let meso = mesoscopic_reconstruct(self.model, &curve, &tr.particles[0], tr, n);
        let rows = (0..meso.times.len()).map(|k| {
            vec![num(meso.times[k]), num(meso.x_bar[k]), num(meso.u[k]), num(meso.corrected[k])]
        });
        let head = json!({ "config": cfg, "neurons": n, "jumps": tr.particles[0].jumps });
        out.write("meso_trajectory.csv", csv(&head, &["t", "x_bar", "u", "corrected"], rows)?.as_bytes())?;
        if self.plot {
            let pts: Vec<_> = table.rows.iter().map(|r| (r.neurons as f64, r.residual.mean, r.residual.se)).collect();
            out.write_plot("residual", &header, &pts)?;
        }
        let values: Vec<f64> = table.rows.iter().map(|r| r.residual.mean).collect();
        Ok(vec![Check::new(
            "residual_decreasing",
            table.strictly_decreasing(),
            format!("sqrt(N) E|residual| = {values:?}"),
        )])
    }
}
