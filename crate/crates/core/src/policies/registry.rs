//! Name-keyed controller factories.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::bpc::{BpcConfig, BpcController};
use super::controller::Controller;
use super::gpc::{GpcConfig, GpcController};
use super::lqr::{lqr_gain, LqrController};
use super::settings::ControllerSettings;
use crate::bco::BcoConfig;
use crate::error::{Error, Result};
use crate::lds::{CostKind, LinearSystem};
use crate::rng::{self, Stream};
use crate::sysid::{ExploreThenCommit, IdMethod};

/// Everything a factory may use to build a controller for one run.
#[derive(Debug, Clone)]
pub struct ControllerContext {
    /// Dynamics the controller is told about (the truth for known systems).
    pub nominal: LinearSystem,
    pub cost: CostKind,
    /// Number of steps `T`; the controller acts at `t = 0..=T`.
    pub horizon: usize,
    pub settings: ControllerSettings,
    /// Loss bound resolved by the caller; overrides `settings.bpc.loss_bound`.
    pub loss_bound: Option<f64>,
    pub seed: u64,
}

pub type ControllerFactory = Arc<dyn Fn(&ControllerContext) -> Result<Box<dyn Controller>> + Send + Sync>;

#[derive(Clone, Default)]
pub struct ControllerRegistry {
    factories: BTreeMap<String, ControllerFactory>,
}

impl std::fmt::Debug for ControllerRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

/// Stable per-name stream id so each algorithm draws its own randomness.
pub fn controller_stream(name: &str) -> Stream {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    Stream::Controller(h & 0xffff_ffff)
}

impl ControllerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `lqr`, `gpc`, `bpc`, and `<base>-sysid-moments` / `<base>-sysid-lsq`
    /// for each of them.
    pub fn with_builtins() -> Self {
        let mut reg = Self::new();
        reg.register("lqr", Arc::new(build_lqr));
        reg.register("gpc", Arc::new(build_gpc));
        reg.register("bpc", Arc::new(build_bpc));
        for base in ["lqr", "gpc", "bpc"] {
            let inner = reg.factories[base].clone();
            for method in [IdMethod::Moments, IdMethod::LeastSquares] {
                let name = format!("{base}-sysid-{}", method.tag());
                let inner = inner.clone();
                let label = name.clone();
                reg.register(
                    &name,
                    Arc::new(move |ctx: &ControllerContext| {
                        Ok(Box::new(ExploreThenCommit::new(&label, ctx, method, inner.clone())?)
                            as Box<dyn Controller>)
                    }),
                );
            }
        }
        reg
    }

    /// Adds or replaces a factory.
    pub fn register(&mut self, name: &str, factory: ControllerFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn create(&self, name: &str, ctx: &ControllerContext) -> Result<Box<dyn Controller>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown algorithm '{name}' (registered: {})",
                self.names().join(", ")
            ))
        })?;
        factory(ctx)
    }
}

fn nominal_gain(ctx: &ControllerContext) -> Result<nalgebra::DMatrix<f64>> {
    Ok(lqr_gain(ctx.nominal.a(), ctx.nominal.b())?.gain)
}

fn build_lqr(ctx: &ControllerContext) -> Result<Box<dyn Controller>> {
    Ok(Box::new(LqrController::new(nominal_gain(ctx)?)))
}

fn build_gpc(ctx: &ControllerContext) -> Result<Box<dyn Controller>> {
    let s = &ctx.settings;
    let cfg = GpcConfig {
        learning_rate: s.gpc.learning_rate,
        schedule: s.gpc.schedule,
        class: s.dac.class(ctx.horizon, ctx.nominal.kappa_b())?,
    };
    Ok(Box::new(GpcController::new(&ctx.nominal, nominal_gain(ctx)?, ctx.cost, cfg)?))
}

/// The optimizer configuration a BPC built from `ctx` will use.
pub fn bpc_config(ctx: &ControllerContext) -> Result<BpcConfig> {
    let s = &ctx.settings;
    let class = s.dac.class(ctx.horizon, ctx.nominal.kappa_b())?;
    let bco = BcoConfig {
        horizon: ctx.horizon,
        memory: class.memory,
        delta: s.bpc.delta,
        delta_scale: s.bpc.delta_scale,
        eta_scale: s.bpc.eta_scale,
        schedule: s.bpc.schedule,
        lipschitz: s.bpc.lipschitz,
        smoothness: s.bpc.smoothness,
        loss_bound: ctx.loss_bound.or(s.bpc.loss_bound).unwrap_or(1.0).max(1.0),
    };
    Ok(BpcConfig { bco, class })
}

fn build_bpc(ctx: &ControllerContext) -> Result<Box<dyn Controller>> {
    let cfg = bpc_config(ctx)?;
    let rng = rng::stream(ctx.seed, controller_stream("bpc"));
    Ok(Box::new(BpcController::new(&ctx.nominal, nominal_gain(ctx)?, cfg, rng)?))
}
