//! Hyperparameters shared by the controller factories.

use serde::{Deserialize, Serialize};

use super::dac::DacClassParams;
use super::gpc::GpcSchedule;
use crate::bco::Schedule;
use crate::error::{Error, Result};
use crate::sysid::SysIdSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DacSettings {
    pub kappa: f64,
    pub gamma: f64,
    /// Defaults to the operator norm of the nominal `B`.
    pub kappa_b: Option<f64>,
    /// Fixed memory `H`; defaults to `max(1, ceil(memory_scale * ln T))`.
    pub memory: Option<usize>,
    pub memory_scale: f64,
}

impl Default for DacSettings {
    fn default() -> Self {
        Self { kappa: 1.5, gamma: 0.1, kappa_b: None, memory: None, memory_scale: 1.0 }
    }
}

impl DacSettings {
    pub fn memory_for(&self, horizon: usize) -> usize {
        self.memory.unwrap_or_else(|| {
            ((self.memory_scale * (horizon.max(2) as f64).ln()).ceil() as usize).max(1)
        })
    }

    pub fn class(&self, horizon: usize, nominal_kappa_b: f64) -> Result<DacClassParams> {
        let params = DacClassParams {
            kappa: self.kappa,
            gamma: self.gamma,
            kappa_b: self.kappa_b.unwrap_or(nominal_kappa_b),
            memory: self.memory_for(horizon),
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpcSettings {
    pub eta_scale: f64,
    pub delta_scale: f64,
    /// Explicit perturbation constant, overriding the horizon-based default.
    pub delta: Option<f64>,
    pub schedule: Schedule,
    pub lipschitz: f64,
    pub smoothness: f64,
    /// Cost bound used to rescale bandit feedback; estimated when absent.
    pub loss_bound: Option<f64>,
    /// Length of the dry run that estimates the loss bound.
    pub warmup: usize,
}

impl Default for BpcSettings {
    fn default() -> Self {
        Self {
            eta_scale: 1.0,
            delta_scale: 1.0,
            delta: None,
            schedule: Schedule::Decaying,
            lipschitz: 1.0,
            smoothness: 1.0,
            loss_bound: None,
            warmup: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpcSettings {
    pub learning_rate: f64,
    pub schedule: GpcSchedule,
}

impl Default for GpcSettings {
    fn default() -> Self {
        Self { learning_rate: 0.01, schedule: GpcSchedule::Decaying }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSettings {
    pub dac: DacSettings,
    pub bpc: BpcSettings,
    pub gpc: GpcSettings,
    pub sysid: SysIdSettings,
}

impl ControllerSettings {
    pub fn validate(&self) -> Result<()> {
        let b = &self.bpc;
        for (name, v) in [
            ("bpc.eta_scale", b.eta_scale),
            ("bpc.delta_scale", b.delta_scale),
            ("bpc.lipschitz", b.lipschitz),
            ("gpc.learning_rate", self.gpc.learning_rate),
            ("dac.memory_scale", self.dac.memory_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(lb) = b.loss_bound {
            if !(lb.is_finite() && lb > 0.0) {
                return Err(Error::Config(format!("bpc.loss_bound must be positive, got {lb}")));
            }
        }
        if self.dac.memory == Some(0) {
            return Err(Error::Config("dac.memory must be >= 1".into()));
        }
        self.sysid.validate()
    }
}
