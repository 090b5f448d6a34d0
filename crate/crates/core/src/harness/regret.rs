use serde::Serialize;

use super::oracle::HindsightOracleResult;
use super::run::RunRecord;
use super::stats::mean_ci;
use crate::error::{Error, Result};

pub const COMPARATOR: &str = "best fixed DAC policy in hindsight on the realized disturbance sequence";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendPoint {
    /// Number of steps summed (`t < steps`).
    pub steps: usize,
    pub regret_mean: f64,
    pub regret_ci: f64,
    pub regret_over_t34: f64,
    pub regret_over_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmRegret {
    pub algorithm: String,
    pub cost_mean: f64,
    pub cost_ci: f64,
    pub oracle_cost_mean: f64,
    pub regret_mean: f64,
    pub regret_ci: f64,
    pub regret_per_seed: Vec<f64>,
    pub trend: Vec<TrendPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSeedSummary {
    pub seed: u64,
    pub disturbance_hash: String,
    pub objective: f64,
    pub objective_at_zero: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport {
    pub comparator: &'static str,
    pub horizon: usize,
    pub cost_from: usize,
    pub oracle_memory: usize,
    pub oracle: Vec<OracleSeedSummary>,
    pub algorithms: Vec<AlgorithmRegret>,
}

/// Horizons `T/8, T/4, T/2, T` (in steps, deduplicated).
pub fn horizon_ladder(steps: usize) -> Vec<usize> {
    let mut out: Vec<usize> = [8, 4, 2, 1].iter().map(|d| (steps / d).max(1)).collect();
    out.dedup();
    out
}

/// Regret of every algorithm against per-seed oracles computed on the same
/// disturbance realizations.
pub fn regret_report(record: &RunRecord, oracles: &[&HindsightOracleResult]) -> Result<RegretReport> {
    if oracles.len() != record.seeds.len() {
        return Err(Error::Provenance(format!(
            "{} oracle results for {} seeds",
            oracles.len(),
            record.seeds.len()
        )));
    }
    let cost_from = oracles.first().map_or(0, |o| o.cost_from);
    for (s, o) in record.seeds.iter().zip(oracles) {
        if s.disturbance_hash != o.disturbance_hash {
            return Err(Error::Provenance(format!(
                "oracle for seed {} was computed on disturbances {} but the run used {}",
                s.seed, o.disturbance_hash, s.disturbance_hash
            )));
        }
        if o.cost_from != cost_from {
            return Err(Error::Provenance("oracles disagree on the first counted step".into()));
        }
    }
    let steps = record.config.horizon + 1;
    let ladder = horizon_ladder(steps);
    let prefix = |c: &[f64], upto: usize| -> f64 { c[cost_from.min(upto)..upto].iter().sum() };
    let mut algorithms = Vec::new();
    for alg in record.algorithms() {
        let costs = record.costs(alg)?;
        let totals: Vec<f64> = costs.iter().map(|c| prefix(c, steps)).collect();
        let oracle_totals: Vec<f64> = oracles.iter().map(|o| prefix(&o.step_costs, steps)).collect();
        let per_seed: Vec<f64> = totals.iter().zip(&oracle_totals).map(|(a, b)| a - b).collect();
        let (cost_mean, cost_ci) = mean_ci(&totals);
        let (regret_mean, regret_ci) = mean_ci(&per_seed);
        let trend = ladder
            .iter()
            .map(|&h| {
                let r: Vec<f64> = costs
                    .iter()
                    .zip(oracles)
                    .map(|(c, o)| prefix(c, h) - prefix(&o.step_costs, h))
                    .collect();
                let (m, ci) = mean_ci(&r);
                TrendPoint {
                    steps: h,
                    regret_mean: m,
                    regret_ci: ci,
                    regret_over_t34: m / (h as f64).powf(0.75),
                    regret_over_t: m / h as f64,
                }
            })
            .collect();
        algorithms.push(AlgorithmRegret {
            algorithm: alg.clone(),
            cost_mean,
            cost_ci,
            oracle_cost_mean: mean_ci(&oracle_totals).0,
            regret_mean,
            regret_ci,
            regret_per_seed: per_seed,
            trend,
        });
    }
    Ok(RegretReport {
        comparator: COMPARATOR,
        horizon: record.config.horizon,
        cost_from,
        oracle_memory: oracles.first().map_or(0, |o| o.class.memory),
        oracle: record
            .seeds
            .iter()
            .zip(oracles)
            .map(|(s, o)| OracleSeedSummary {
                seed: s.seed,
                disturbance_hash: o.disturbance_hash.clone(),
                objective: o.objective,
                objective_at_zero: o.objective_at_zero,
                iterations: o.log.iterations,
                gradient_norm: o.log.gradient_norm,
                converged: o.log.converged,
                warning: o.warning.clone(),
            })
            .collect(),
        algorithms,
    })
}
