use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use bandit_lds::harness::{
    best_dac_in_hindsight, disturbance_hash, estimate_loss_bound, grid_search, preset, regret_report,
    replay_costs, run_experiment, run_experiment_with, simulate, summary_csv, write_outputs, ExperimentConfig,
    NoiseKind, OracleOptions, RunRecord, SystemSpec, GRID_NAMES,
};
use bandit_lds::lds::{CostKind, SystemPreset};
use bandit_lds::policies::{
    lqr_gain, Controller, ControllerContext, ControllerRegistry, DacPolicy, FixedDacController, PolicySnapshot,
    StepFeedback,
};
use bandit_lds::Error;
use nalgebra::{DMatrix, DVector};

fn small(name: &str, noise: NoiseKind, cost: CostKind, horizon: usize, runs: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { name: name.into(), horizon, runs, cost, ..ExperimentConfig::default() };
    cfg.disturbance.kind = noise;
    cfg
}

fn oracle_opts() -> OracleOptions {
    OracleOptions { max_iterations: 5_000, tolerance: 1e-8, cost_from: 0, grid_step: None }
}

fn sample_ci(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

#[test]
fn summary_matches_raw_trajectories() {
    let mut cfg = small("ci", NoiseKind::Gaussian, CostKind::Quadratic, 60, 5);
    cfg.output.raw = true;
    let rec = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&rec, None, dir.path()).unwrap();

    let mut raw: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for alg in rec.algorithms() {
        for seed in cfg.seed_list() {
            let mut reader = csv::Reader::from_path(dir.path().join("raw").join(alg).join(format!("{seed}.csv"))).unwrap();
            let col = reader.headers().unwrap().iter().position(|h| h == "cost").unwrap();
            let costs: Vec<f64> = reader.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
            raw.entry(alg.clone()).or_default().push(costs);
        }
    }
    let mut summary = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    let headers = summary.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = summary.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), cfg.horizon + 1);
    for (alg, seeds) in &raw {
        let col = |suffix: &str| headers.iter().position(|h| h == format!("{alg}_{suffix}")).unwrap();
        for (t, row) in rows.iter().enumerate() {
            let step: Vec<f64> = seeds.iter().map(|c| c[t]).collect();
            let avg: Vec<f64> = seeds.iter().map(|c| c[..=t].iter().sum::<f64>() / (t + 1) as f64).collect();
            let (m, ci) = sample_ci(&step);
            let (am, aci) = sample_ci(&avg);
            for (v, expect) in [(col("mean"), m), (col("ci"), ci), (col("avg_mean"), am), (col("avg_ci"), aci)] {
                let got: f64 = row[v].parse().unwrap();
                assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1.0), "{alg} t={t}");
            }
        }
    }
}

fn toy(noise: NoiseKind, cost: CostKind) -> ExperimentConfig {
    let mut cfg = small("toy", noise, cost, 150, 4);
    cfg.system = SystemSpec::Preset("toy-1d".into());
    cfg.oracle.enabled = true;
    cfg
}

#[test]
fn regret_accounting_is_consistent() {
    for (noise, cost) in [(NoiseKind::Gaussian, CostKind::Quadratic), (NoiseKind::Sinusoidal, CostKind::L1)] {
        let rec = run_experiment(&toy(noise, cost)).unwrap();
        let oracles = rec.oracles().unwrap();
        let report = regret_report(&rec, &oracles).unwrap();
        for a in &report.algorithms {
            let totals: Vec<f64> = rec.costs(&a.algorithm).unwrap().iter().map(|c| c.iter().sum()).collect();
            let oracle: Vec<f64> = oracles.iter().map(|o| o.step_costs.iter().sum()).collect();
            for s in 0..totals.len() {
                assert!((a.regret_per_seed[s] - (totals[s] - oracle[s])).abs() < 1e-9);
            }
            assert!((a.regret_mean - (a.cost_mean - a.oracle_cost_mean)).abs() < 1e-9 * a.cost_mean.max(1.0));
            let last = a.trend.last().unwrap();
            assert_eq!(last.steps, rec.config.horizon + 1);
            assert!((last.regret_mean - a.regret_mean).abs() < 1e-9 * a.cost_mean.max(1.0));
        }
        for o in &oracles {
            let sum: f64 = o.step_costs.iter().sum();
            assert!((sum - o.objective).abs() < 1e-9 * sum.max(1.0));
            assert!(o.objective <= o.objective_at_zero);
        }
    }
}

#[test]
fn oracle_policy_replays_to_zero_regret() {
    let rec = run_experiment(&toy(NoiseKind::Gaussian, CostKind::Quadratic)).unwrap();
    let sys = SystemPreset::Toy1d.build();
    let gain = lqr_gain(sys.a(), sys.b()).unwrap().gain;
    for s in &rec.seeds {
        let o = s.oracle.as_ref().unwrap();
        let mut ctrl = FixedDacController::new("hindsight", &sys, DacPolicy::new(gain.clone(), o.tensor.clone()).unwrap());
        let traj = simulate(&sys, &mut ctrl, &s.disturbances, CostKind::Quadratic).unwrap();
        let regret: f64 = traj.costs.iter().sum::<f64>() - o.step_costs.iter().sum::<f64>();
        assert!(regret.abs() < 1e-9 * o.objective.max(1.0), "{regret}");
        let replay = replay_costs(&sys, &gain, &s.disturbances, CostKind::Quadratic, &o.tensor, 0).unwrap();
        for (a, b) in replay.iter().zip(&traj.costs) {
            assert!((a - b).abs() < 1e-9 * b.max(1.0));
        }
    }
}

#[test]
fn zero_disturbance_oracle_is_zero() {
    let sys = SystemPreset::DoubleIntegrator.build();
    let gain = lqr_gain(sys.a(), sys.b()).unwrap().gain;
    let class = bandit_lds::policies::DacClassParams { kappa: 1.5, gamma: 0.1, kappa_b: 1.0, memory: 4 };
    let w = vec![DVector::zeros(2); 101];
    for cost in [CostKind::Quadratic, CostKind::L1, CostKind::Linf, CostKind::Relu] {
        let o = best_dac_in_hindsight(&sys, &gain, &w, cost, &class, &oracle_opts()).unwrap();
        assert!(o.tensor.flatten().iter().all(|&x| x == 0.0), "{cost:?}");
        assert_eq!(o.objective, 0.0);
    }
}

#[test]
fn toy_oracle_agrees_with_grid() {
    let sys = SystemPreset::Toy1d.build();
    let gain = lqr_gain(sys.a(), sys.b()).unwrap().gain;
    for memory in [1, 2] {
        let class = bandit_lds::policies::DacClassParams { kappa: 1.0, gamma: 0.1, kappa_b: 1.0, memory };
        let w: Vec<DVector<f64>> = (0..=80).map(|t| DVector::from_element(1, (t as f64 / 5.0).sin())).collect();
        for cost in [CostKind::Quadratic, CostKind::L1] {
            let o = best_dac_in_hindsight(&sys, &gain, &w, cost, &class, &oracle_opts()).unwrap();
            let (_, grid) = grid_search(&sys, &gain, &w, cost, &class, 0.005, 0).unwrap();
            assert!(o.objective <= grid + 1e-2, "H={memory} {cost:?}: {} vs {grid}", o.objective);
            assert!(grid <= o.objective + 1e-2, "H={memory} {cost:?}: {} vs {grid}", o.objective);
        }
    }
}

#[test]
fn hindsight_policy_beats_zero_on_sinusoidal_double_integrator() {
    let mut cfg = preset("sinusoidal-quadratic").unwrap();
    cfg.runs = 1;
    cfg.algorithms = vec!["lqr".into()];
    cfg.oracle.enabled = true;
    let rec = run_experiment(&cfg).unwrap();
    let o = rec.seeds[0].oracle.as_ref().unwrap();
    assert!(o.objective < o.objective_at_zero, "{} vs {}", o.objective, o.objective_at_zero);
    let lqr: f64 = rec.costs("lqr").unwrap()[0].iter().sum();
    assert!((lqr - o.objective_at_zero).abs() < 1e-9 * lqr);
}

#[test]
fn bpc_average_regret_falls_with_horizon() {
    let per_step = |horizon: usize| -> f64 {
        let mut cfg = preset("sinusoidal-quadratic").unwrap();
        cfg.horizon = horizon;
        cfg.runs = 10;
        cfg.algorithms = vec!["bpc".into()];
        cfg.oracle.enabled = true;
        let rec = run_experiment(&cfg).unwrap();
        let report = regret_report(&rec, &rec.oracles().unwrap()).unwrap();
        report.algorithms[0].regret_mean / (horizon + 1) as f64
    };
    let r = [per_step(500), per_step(1000), per_step(2000)];
    assert!(r[0] > r[1] && r[1] > r[2], "{r:?}");
}

#[test]
fn mismatched_disturbances_are_rejected() {
    let rec = run_experiment(&toy(NoiseKind::Gaussian, CostKind::Quadratic)).unwrap();
    let mut oracles = rec.oracles().unwrap();
    oracles.swap(0, 1);
    assert!(matches!(regret_report(&rec, &oracles), Err(Error::Provenance(_))));
    oracles.pop();
    assert!(matches!(regret_report(&rec, &oracles), Err(Error::Provenance(_))));
}

fn bits(rec: &RunRecord) -> Vec<u64> {
    rec.seeds
        .iter()
        .flat_map(|s| s.runs.iter())
        .flat_map(|r| r.trajectory.costs.iter().chain(r.trajectory.states.iter().flat_map(|x| x.iter())))
        .map(|x| x.to_bits())
        .collect()
}

#[test]
fn runs_are_bit_reproducible_across_thread_counts() {
    let mut cfg = small("det", NoiseKind::Gaussian, CostKind::Quadratic, 200, 6);
    cfg.algorithms = vec!["lqr".into(), "gpc".into(), "bpc".into(), "bpc-sysid-lsq".into()];
    cfg.sysid.explore_steps = Some(100);
    cfg.system = SystemSpec::Preset("scaled-double-integrator".into());
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = one.install(|| run_experiment(&cfg).unwrap());
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(summary_csv(&a).unwrap(), summary_csv(&b).unwrap());
    let seeds: Vec<u64> = a.seeds.iter().map(|s| s.seed).collect();
    assert_eq!(seeds, cfg.seed_list());
}

#[test]
fn algorithms_share_one_disturbance_per_seed() {
    let cfg = small("paired", NoiseKind::Gaussian, CostKind::Quadratic, 100, 3);
    let rec = run_experiment(&cfg).unwrap();
    for s in &rec.seeds {
        assert_eq!(disturbance_hash(&s.disturbances), s.disturbance_hash);
        for r in &s.runs {
            assert_eq!(r.trajectory.disturbances, *s.disturbances);
        }
    }
    assert_ne!(rec.seeds[0].disturbance_hash, rec.seeds[1].disturbance_hash);
    let mut cfg2 = cfg.clone();
    cfg2.algorithms = vec!["bpc".into()];
    let rec2 = run_experiment(&cfg2).unwrap();
    assert_eq!(rec2.seeds[0].disturbance_hash, rec.seeds[0].disturbance_hash);
}

#[test]
fn loss_bound_comes_from_a_linear_feedback_dry_run() {
    let cfg = small("lb", NoiseKind::Gaussian, CostKind::Quadratic, 500, 2);
    let rec = run_experiment(&cfg).unwrap();
    let sys = cfg.system.build().unwrap();
    let generator = cfg.disturbance.generator(2).unwrap();
    for s in &rec.seeds {
        let bound = estimate_loss_bound(&sys, &generator, cfg.cost, cfg.horizon, 200, s.seed).unwrap();
        assert_eq!(s.loss_bound, Some(bound));
        assert!(bound >= 1.0);
        assert_eq!(s.runs[2].snapshot.params["loss_bound"], serde_json::json!(bound));
    }
    let mut unknown = cfg.clone();
    unknown.algorithms = vec!["lqr-sysid-lsq".into()];
    unknown.sysid.explore_steps = Some(100);
    assert_eq!(run_experiment(&unknown).unwrap().seeds[0].loss_bound, None);
}

#[test]
fn lqr_without_noise_costs_nothing() {
    let cfg = small("quiet", NoiseKind::Zero, CostKind::Quadratic, 100, 2);
    let rec = run_experiment(&cfg).unwrap();
    for c in rec.costs("lqr").unwrap() {
        assert!(c.iter().all(|&x| x == 0.0));
    }
}

#[test]
fn presets_round_trip_through_toml() {
    for g in GRID_NAMES {
        for cfg in bandit_lds::harness::grid(g).unwrap() {
            let text = cfg.to_toml();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg, "{}", cfg.name);
        }
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let base = ExperimentConfig::default();
    let cases: Vec<ExperimentConfig> = vec![
        ExperimentConfig { horizon: 0, ..base.clone() },
        ExperimentConfig { runs: 0, ..base.clone() },
        ExperimentConfig { algorithms: vec![], ..base.clone() },
        ExperimentConfig { algorithms: vec!["bpc".into(), "bpc".into()], ..base.clone() },
        ExperimentConfig { algorithms: vec!["nope".into()], ..base.clone() },
        ExperimentConfig { seeds: Some(vec![1, 2]), runs: 3, ..base.clone() },
        ExperimentConfig { system: SystemSpec::Preset("unknown".into()), ..base.clone() },
        ExperimentConfig { system: SystemSpec::Matrices { a: vec![vec![1.0, 0.0]], b: vec![vec![1.0]] }, ..base.clone() },
    ];
    for cfg in cases {
        let err = cfg.validate().unwrap_err();
        assert!(err.is_config(), "{err}");
        assert!(run_experiment(&cfg).is_err());
    }
    let mut bad = base.clone();
    bad.bpc.eta_scale = -1.0;
    assert!(bad.validate().unwrap_err().is_config());
    assert!(ExperimentConfig::from_toml("horizon = 10\nunknown_key = 1\n").is_err());
    assert!(ExperimentConfig::from_toml("horizon = 10\nruns = 2\n").is_ok());
}

#[test]
fn outputs_are_written_atomically() {
    let mut cfg = small("files", NoiseKind::Sinusoidal, CostKind::Quadratic, 40, 2);
    cfg.output.raw = true;
    cfg.output.plot = true;
    let rec = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let first = write_outputs(&rec, None, dir.path()).unwrap();
    let bytes: Vec<Vec<u8>> = first.iter().map(|p| std::fs::read(p).unwrap()).collect();
    let second = write_outputs(&rec, None, dir.path()).unwrap();
    assert_eq!(first, second);
    for (p, b) in second.iter().zip(&bytes) {
        assert_eq!(&std::fs::read(p).unwrap(), b);
    }
    assert_eq!(first.len(), 3 + 2 * 3 + 1);
    let mut stray = Vec::new();
    for entry in walk(dir.path()) {
        if entry.file_name().unwrap().to_string_lossy().contains(".tmp") {
            stray.push(entry);
        }
    }
    assert!(stray.is_empty(), "{stray:?}");
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("regret.json")).unwrap()).unwrap();
    assert_eq!(json["runs"], 2);
    assert!(json["regret"].is_null());
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

struct Silent {
    m: usize,
    fail_at: Option<usize>,
}

impl Controller for Silent {
    fn name(&self) -> &str {
        "silent"
    }

    fn act(&mut self, t: usize, _x: &DVector<f64>) -> bandit_lds::Result<DVector<f64>> {
        Ok(DVector::zeros(if self.fail_at == Some(t) { self.m + 1 } else { self.m }))
    }

    fn observe(&mut self, _fb: &StepFeedback<'_>) -> bandit_lds::Result<()> {
        Ok(())
    }

    fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot::new("silent", &DMatrix::zeros(self.m, 1), None)
    }
}

#[test]
fn custom_strategies_run_through_the_harness() {
    let mut reg = ControllerRegistry::with_builtins();
    reg.register(
        "silent",
        Arc::new(|ctx: &ControllerContext| Ok(Box::new(Silent { m: ctx.nominal.input_dim(), fail_at: None }) as Box<dyn Controller>)),
    );
    reg.register(
        "broken",
        Arc::new(|ctx: &ControllerContext| Ok(Box::new(Silent { m: ctx.nominal.input_dim(), fail_at: Some(7) }) as Box<dyn Controller>)),
    );
    let mut cfg = small("custom", NoiseKind::Sinusoidal, CostKind::Quadratic, 50, 3);
    cfg.algorithms = vec!["lqr".into(), "silent".into()];
    let calls = AtomicUsize::new(0);
    let rec = run_experiment_with(&cfg, &reg, &|done, total| {
        assert!(done <= total && total == 3);
        calls.fetch_add(1, Ordering::Relaxed);
    })
    .unwrap();
    assert_eq!(calls.load(Ordering::Relaxed), 3);
    for s in &rec.seeds {
        assert!(s.get("silent").unwrap().trajectory.inputs.iter().all(|u| u.norm() == 0.0));
    }
    assert!(run_experiment(&cfg).unwrap_err().is_config());

    cfg.algorithms = vec!["broken".into()];
    cfg.seed = 40;
    match run_experiment_with(&cfg, &reg, &|_, _| {}).unwrap_err() {
        Error::Run { algorithm, seed, t, source } => {
            assert_eq!((algorithm.as_str(), t), ("broken", 7));
            assert!((40..43).contains(&seed));
            assert!(matches!(*source, Error::Shape(_)));
        }
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn divergence_reports_the_step() {
    let mut cfg = small("unstable", NoiseKind::Gaussian, CostKind::Quadratic, 200, 1);
    cfg.system = SystemSpec::Matrices { a: vec![vec![3.0]], b: vec![vec![1.0]] };
    let mut reg = ControllerRegistry::with_builtins();
    reg.register(
        "silent",
        Arc::new(|ctx: &ControllerContext| Ok(Box::new(Silent { m: ctx.nominal.input_dim(), fail_at: None }) as Box<dyn Controller>)),
    );
    cfg.algorithms = vec!["silent".into()];
    match run_experiment_with(&cfg, &reg, &|_, _| {}).unwrap_err() {
        Error::Run { algorithm, t, source, .. } => {
            assert_eq!(algorithm, "silent");
            assert!(t > 0 && t < 50);
            assert!(matches!(*source, Error::Divergence { .. }));
        }
        other => panic!("unexpected error {other}"),
    }
}
