use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::oracle::{best_dac_in_hindsight, disturbance_hash, HindsightOracleResult, OracleOptions};
use super::simulate::simulate_at;
use super::stats::{mean_ci, CostSummary};
use crate::error::{Error, Result};
use crate::lds::{CostKind, DisturbanceGenerator, LinearSystem, Trajectory};
use crate::policies::{lqr_gain, ControllerContext, ControllerRegistry, LqrController, PolicySnapshot};
use crate::rng::{self, Stream};

#[derive(Debug, Clone)]
pub struct AlgorithmRun {
    pub algorithm: String,
    pub trajectory: Trajectory,
    pub snapshot: PolicySnapshot,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    /// The single realization every algorithm of this seed consumed.
    pub disturbances: Arc<Vec<DVector<f64>>>,
    pub disturbance_hash: String,
    /// Loss bound handed to known-dynamics learners.
    pub loss_bound: Option<f64>,
    pub runs: Vec<AlgorithmRun>,
    pub oracle: Option<HindsightOracleResult>,
}

impl SeedRun {
    pub fn get(&self, algorithm: &str) -> Option<&AlgorithmRun> {
        self.runs.iter().find(|r| r.algorithm == algorithm)
    }
}

/// Everything produced by one experiment, ordered by seed index.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedRun>,
}

impl RunRecord {
    pub fn algorithms(&self) -> &[String] {
        &self.config.algorithms
    }

    fn algorithm_index(&self, algorithm: &str) -> Result<usize> {
        self.config
            .algorithms
            .iter()
            .position(|a| a == algorithm)
            .ok_or_else(|| Error::Input(format!("algorithm '{algorithm}' is not part of this record")))
    }

    /// `costs[s][t]` for one algorithm.
    pub fn costs(&self, algorithm: &str) -> Result<Vec<&[f64]>> {
        let i = self.algorithm_index(algorithm)?;
        Ok(self.seeds.iter().map(|s| s.runs[i].trajectory.costs.as_slice()).collect())
    }

    pub fn summary(&self, algorithm: &str) -> Result<CostSummary> {
        Ok(CostSummary::from_costs(&self.costs(algorithm)?))
    }

    /// Mean and CI half-width across seeds of the per-step cost averaged over `range`.
    pub fn window_mean(&self, algorithm: &str, range: std::ops::Range<usize>) -> Result<(f64, f64)> {
        let per_seed: Vec<f64> = self
            .costs(algorithm)?
            .iter()
            .map(|c| c[range.clone()].iter().sum::<f64>() / range.len() as f64)
            .collect();
        Ok(mean_ci(&per_seed))
    }

    /// Mean and CI half-width across seeds of the total cost.
    pub fn total_cost(&self, algorithm: &str) -> Result<(f64, f64)> {
        let per_seed: Vec<f64> = self.costs(algorithm)?.iter().map(|c| c.iter().sum()).collect();
        Ok(mean_ci(&per_seed))
    }

    pub fn oracles(&self) -> Option<Vec<&HindsightOracleResult>> {
        self.seeds.iter().map(|s| s.oracle.as_ref()).collect()
    }
}

/// Progress callback: `(seeds finished, seeds total)`.
pub type Progress<'a> = &'a (dyn Fn(usize, usize) + Sync);

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord> {
    run_experiment_with(cfg, &ControllerRegistry::with_builtins(), &|_, _| {})
}

/// Runs every seed on the rayon pool and merges by seed index.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    registry: &ControllerRegistry,
    progress: Progress<'_>,
) -> Result<RunRecord> {
    cfg.validate_with(registry)?;
    let sys = cfg.system.build()?;
    let seeds = cfg.seed_list();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<Result<SeedRun>> = seeds
        .par_iter()
        .map(|&seed| {
            let r = run_seed(cfg, registry, &sys, seed);
            let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            progress(k, seeds.len());
            r
        })
        .collect();
    let seeds = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(RunRecord { config: cfg.clone(), seeds })
}

/// Whether an algorithm is told the true dynamics.
fn knows_dynamics(name: &str) -> bool {
    !name.contains("-sysid-")
}

/// Largest per-step cost of `u = -K x` over a dry run of `steps` rounds on
/// an independent disturbance draw, floored at 1.
pub fn estimate_loss_bound(
    sys: &LinearSystem,
    generator: &DisturbanceGenerator,
    cost: CostKind,
    horizon: usize,
    steps: usize,
    seed: u64,
) -> Result<f64> {
    let mut w = generator.generate(horizon, &mut rng::stream(seed, Stream::Auxiliary(0)))?;
    w.truncate(steps.max(1));
    let mut ctrl = LqrController::new(lqr_gain(sys.a(), sys.b())?.gain);
    let traj = simulate_at(sys, &mut ctrl, &w, cost).map_err(|(_, e)| e)?;
    Ok(traj.costs.iter().copied().fold(1.0, f64::max))
}

fn run_seed(cfg: &ExperimentConfig, registry: &ControllerRegistry, sys: &LinearSystem, seed: u64) -> Result<SeedRun> {
    let ctx_err = |alg: &'static str, t: usize| move |e: Error| e.in_run(alg, seed, t);
    let generator = cfg.disturbance.generator(sys.state_dim())?;
    let w = Arc::new(generator.generate(cfg.horizon, &mut rng::stream(seed, Stream::Disturbance))?);
    let hash = disturbance_hash(&w);
    let settings = cfg.controller_settings();
    let loss_bound = match settings.bpc.loss_bound {
        Some(b) => Some(b),
        None if cfg.algorithms.iter().any(|a| knows_dynamics(a)) => Some(
            estimate_loss_bound(sys, &generator, cfg.cost, cfg.horizon, settings.bpc.warmup, seed)
                .map_err(ctx_err("loss-bound", 0))?,
        ),
        None => None,
    };
    let mut runs = Vec::with_capacity(cfg.algorithms.len());
    for alg in &cfg.algorithms {
        let ctx = ControllerContext {
            nominal: sys.clone(),
            cost: cfg.cost,
            horizon: cfg.horizon,
            settings: settings.clone(),
            loss_bound: if knows_dynamics(alg) { loss_bound } else { settings.bpc.loss_bound },
            seed,
        };
        let mut ctrl = registry.create(alg, &ctx).map_err(|e| e.in_run(alg, seed, 0))?;
        let traj = simulate_at(sys, ctrl.as_mut(), &w, cfg.cost).map_err(|(t, e)| e.in_run(alg, seed, t))?;
        if disturbance_hash(&traj.disturbances) != hash {
            return Err(Error::Provenance(format!("{alg} (seed {seed}) consumed a different disturbance sequence")));
        }
        log::debug!("seed {seed} {alg}: total cost {:.6}", traj.total_cost());
        runs.push(AlgorithmRun { algorithm: alg.clone(), trajectory: traj, snapshot: ctrl.snapshot() });
    }
    let oracle = if cfg.oracle.enabled {
        let class = oracle_class(cfg, sys)?;
        let gain = lqr_gain(sys.a(), sys.b())?.gain;
        let opts = OracleOptions {
            max_iterations: cfg.oracle.max_iterations,
            tolerance: cfg.oracle.tolerance,
            cost_from: if cfg.oracle.skip_transient { class_memory(cfg) } else { 0 },
            grid_step: None,
        };
        Some(best_dac_in_hindsight(sys, &gain, &w, cfg.cost, &class, &opts).map_err(ctx_err("oracle", 0))?)
    } else {
        None
    };
    Ok(SeedRun { seed, disturbances: w, disturbance_hash: hash, loss_bound, runs, oracle })
}

fn class_memory(cfg: &ExperimentConfig) -> usize {
    cfg.dac.memory_for(cfg.horizon)
}

/// The learners' DAC class with the oracle's memory override.
pub fn oracle_class(cfg: &ExperimentConfig, sys: &LinearSystem) -> Result<crate::policies::DacClassParams> {
    let mut class = cfg.dac.class(cfg.horizon, sys.kappa_b())?;
    if let Some(h) = cfg.oracle.memory {
        class.memory = h;
    }
    Ok(class)
}
