//! Built-in experiment grids.

use super::config::{DisturbanceSpec, ExperimentConfig, NoiseKind, OutputSettings, SystemSpec};
use crate::bco::Schedule;
use crate::error::{Error, Result};
use crate::lds::CostKind;
use crate::policies::GpcSchedule;

pub const GRID_NAMES: [&str; 3] = ["paper-known-dynamics", "paper-unknown-dynamics", "toy"];

fn base(name: &str, system: &str, noise: NoiseKind, cost: CostKind, horizon: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        system: SystemSpec::Preset(system.into()),
        cost,
        horizon,
        disturbance: DisturbanceSpec { kind: noise, ..DisturbanceSpec::default() },
        output: OutputSettings::default(),
        ..ExperimentConfig::default()
    }
}

/// BPC step constant per noise family (larger steps pay off when the
/// disturbance is predictable).
fn eta_scale(system: &str, noise: NoiseKind) -> f64 {
    match (system, noise) {
        ("sparse-5x3", _) => 0.3,
        (_, NoiseKind::Sinusoidal) => 2.0,
        (_, NoiseKind::RandomWalk) => 1.0,
        _ => 0.3,
    }
}

fn known(name: &str, system: &str, noise: NoiseKind, cost: CostKind) -> ExperimentConfig {
    let mut cfg = base(name, system, noise, cost, 1000);
    cfg.algorithms = vec!["lqr".into(), "gpc".into(), "bpc".into()];
    cfg.bpc.eta_scale = eta_scale(system, noise);
    cfg
}

fn unknown(name: &str, noise: NoiseKind, method: &str) -> ExperimentConfig {
    let mut cfg = base(name, "scaled-double-integrator", noise, CostKind::Quadratic, 6000);
    cfg.algorithms = ["lqr", "gpc", "bpc"].iter().map(|b| format!("{b}-sysid-{method}")).collect();
    cfg.sysid.explore_steps = Some(5000);
    cfg.bpc.eta_scale = eta_scale("scaled-double-integrator", noise);
    cfg
}

/// The cells of a named grid, in a fixed order.
pub fn grid(name: &str) -> Result<Vec<ExperimentConfig>> {
    use CostKind::*;
    use NoiseKind::*;
    let cells = match name {
        "paper-known-dynamics" => {
            let mut fixed = known("sanity-check-fixed", "double-integrator", Gaussian, Quadratic);
            fixed.bpc.schedule = Schedule::Fixed;
            fixed.gpc.schedule = GpcSchedule::Fixed;
            vec![
                fixed,
                known("sanity-check-decaying", "double-integrator", Gaussian, Quadratic),
                known("sinusoidal-quadratic", "double-integrator", Sinusoidal, Quadratic),
                known("sinusoidal-l1", "double-integrator", Sinusoidal, L1),
                known("random-walk-quadratic", "double-integrator", RandomWalk, Quadratic),
                known("random-walk-l1", "double-integrator", RandomWalk, L1),
                known("sparse-sinusoidal-linf", "sparse-5x3", Sinusoidal, Linf),
                known("sparse-sinusoidal-relu", "sparse-5x3", Sinusoidal, Relu),
            ]
        }
        "paper-unknown-dynamics" => {
            let mut cells = Vec::new();
            for method in ["moments", "lsq"] {
                for (label, noise) in [("sanity-check", Gaussian), ("sinusoidal", Sinusoidal), ("random-walk", RandomWalk)] {
                    cells.push(unknown(&format!("unknown-{label}-{method}"), noise, method));
                }
            }
            cells
        }
        "toy" => {
            let mk = |name: &str, noise: NoiseKind, cost: CostKind| {
                let mut cfg = base(name, "toy-1d", noise, cost, 200);
                cfg.runs = 4;
                cfg.algorithms = vec!["lqr".into(), "gpc".into(), "bpc".into()];
                cfg.oracle.enabled = true;
                cfg
            };
            let mut id = mk("toy-sysid", Gaussian, Quadratic);
            id.horizon = 400;
            id.algorithms = vec!["lqr-sysid-moments".into(), "bpc-sysid-lsq".into()];
            id.sysid.explore_steps = Some(200);
            id.oracle.enabled = false;
            vec![mk("toy-gaussian", Gaussian, Quadratic), mk("toy-sinusoidal", Sinusoidal, L1), id]
        }
        other => {
            return Err(Error::Config(format!(
                "unknown grid '{other}' (available: {})",
                GRID_NAMES.join(", ")
            )))
        }
    };
    Ok(cells)
}

/// Looks a single cell up by name across every grid.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    for g in GRID_NAMES {
        if let Some(c) = grid(g)?.into_iter().find(|c| c.name == name) {
            return Ok(c);
        }
    }
    Err(Error::Config(format!("unknown preset '{name}'")))
}
