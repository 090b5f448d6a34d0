use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::lds::LinearSystem;
use crate::rng::{self, Stream};
use crate::sysid::{estimate_moments, explore, least_squares_id, recover, IdentificationReport, SysIdConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedIdentification {
    pub seed: u64,
    pub reports: Vec<IdentificationReport>,
    pub a_moments: Vec<Vec<f64>>,
    pub b_moments: Vec<Vec<f64>>,
    pub a_lsq: Vec<Vec<f64>>,
    pub b_lsq: Vec<Vec<f64>>,
}

/// Identification only: explores for `T_0` steps on each seed's disturbance
/// stream and fits both estimators. The exploration is the same one an
/// explore-then-commit controller of that seed would run.
pub fn run_identification(cfg: &ExperimentConfig) -> Result<Vec<SeedIdentification>> {
    cfg.validate()?;
    let sys = cfg.system.build()?;
    let s = &cfg.sysid;
    let (n, m) = (sys.state_dim(), sys.input_dim());
    let gain = s.gain(m, n)?;
    let t0 = s.explore_steps_for(cfg.horizon);
    let k = match s.controllability_index {
        Some(k) => k,
        None => LinearSystem::new(sys.a() - sys.b() * &gain, sys.b().clone())?
            .controllability_index()
            .ok_or_else(|| Error::Controllability("closed loop (A - BK, B) is not controllable".into()))?,
    };
    let id_cfg = SysIdConfig { explore_steps: t0, explore_gain: gain.clone(), k };
    let generator = cfg.disturbance.generator(n)?;
    cfg.seed_list()
        .par_iter()
        .map(|&seed| {
            let wrap = |e: Error| e.in_run("sysid", seed, t0);
            let w = generator
                .generate(cfg.horizon.max(t0), &mut rng::stream(seed, Stream::Disturbance))
                .map_err(wrap)?;
            let (traj, xis) = explore(&sys, &id_cfg, &w, cfg.cost, &mut rng::stream(seed, Stream::Exploration))
                .map_err(wrap)?;
            let moments = recover(&estimate_moments(&traj.states, &xis, k).map_err(wrap)?, &gain).map_err(wrap)?;
            let lsq = least_squares_id(&traj).map_err(wrap)?;
            let rows = |mat: &nalgebra::DMatrix<f64>| {
                (0..mat.nrows()).map(|r| mat.row(r).iter().copied().collect()).collect()
            };
            Ok(SeedIdentification {
                seed,
                reports: vec![moments.report(t0, Some(k), Some(&sys)), lsq.report(t0, None, Some(&sys))],
                a_moments: rows(&moments.a),
                b_moments: rows(&moments.b),
                a_lsq: rows(&lsq.a),
                b_lsq: rows(&lsq.b),
            })
        })
        .collect()
}
