//! Bandit perturbation controller: a DAC whose tensor is trained by the
//! delayed one-point optimizer from scalar costs alone.

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use super::controller::{Controller, PolicySnapshot, StepFeedback};
use super::dac::{DacClassParams, DacTensor, DisturbanceHistory};
use crate::bco::{BcoConfig, BcoOptimizer, DecisionSet};
use crate::error::{Error, Result};
use crate::lds::LinearSystem;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct BpcConfig {
    /// Optimizer settings; `bco.memory` is the DAC memory `H`.
    pub bco: BcoConfig,
    pub class: DacClassParams,
}

/// Optimizer coordinates are the tensor divided by `scale`, chosen so every
/// factor ball of the class has radius at least one.
#[derive(Debug, Clone)]
pub struct BpcController {
    gain: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    class: DacClassParams,
    scale: f64,
    optimizer: BcoOptimizer,
    played: DacTensor,
    history: DisturbanceHistory,
    pending: Option<usize>,
}

impl BpcController {
    pub fn new(nominal: &LinearSystem, gain: DMatrix<f64>, cfg: BpcConfig, rng: Rng) -> Result<Self> {
        cfg.class.validate()?;
        if cfg.class.memory != cfg.bco.memory {
            return Err(Error::Config(format!(
                "DAC memory {} differs from optimizer memory {}",
                cfg.class.memory, cfg.bco.memory
            )));
        }
        let (n, m) = (nominal.state_dim(), nominal.input_dim());
        if gain.shape() != (m, n) {
            return Err(Error::Shape(format!("K must be {m}x{n}, got {:?}", gain.shape())));
        }
        let set = Self::decision_set_for(&cfg.class, m, n)?;
        let scale = Self::coordinate_scale(&cfg.class);
        let memory = cfg.class.memory;
        let optimizer = BcoOptimizer::new(set, cfg.bco, DVector::zeros(memory * m * n), rng)?;
        let played = DacTensor::from_flat(memory, m, n, optimizer.played().as_slice())?.scaled(scale);
        Ok(Self {
            gain,
            a: nominal.a().clone(),
            b: nominal.b().clone(),
            class: cfg.class,
            scale,
            optimizer,
            played,
            history: DisturbanceHistory::new(memory),
            pending: None,
        })
    }

    /// `min(1, min_i r_i)`.
    pub fn coordinate_scale(class: &DacClassParams) -> f64 {
        class.radii().into_iter().fold(1.0, f64::min)
    }

    /// The class in optimizer coordinates.
    pub fn decision_set_for(class: &DacClassParams, m: usize, n: usize) -> Result<DecisionSet> {
        DecisionSet::spectral_product(class.factors(m, n, Self::coordinate_scale(class)))
    }

    pub fn optimizer(&self) -> &BcoOptimizer {
        &self.optimizer
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn class(&self) -> &DacClassParams {
        &self.class
    }

    /// Perturbed tensor used for the next action, in original units.
    pub fn played_tensor(&self) -> &DacTensor {
        &self.played
    }

    /// Center tensor `M_t`, in original units.
    pub fn center_tensor(&self) -> DacTensor {
        DacTensor::from_flat(
            self.class.memory,
            self.gain.nrows(),
            self.gain.ncols(),
            self.optimizer.center().as_slice(),
        )
        .expect("optimizer dimension matches the tensor")
        .scaled(self.scale)
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }
}

impl Controller for BpcController {
    fn name(&self) -> &str {
        "bpc"
    }

    fn act(&mut self, t: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
        if self.pending.is_some() || t != self.optimizer.time() {
            return Err(Error::State(format!(
                "act(t={t}) out of phase; expected t={} after observe",
                self.optimizer.time()
            )));
        }
        let u = super::dac::dac_action(&self.gain, &self.played, x, &self.history)?;
        self.pending = Some(t);
        Ok(u)
    }

    fn observe(&mut self, fb: &StepFeedback<'_>) -> Result<()> {
        if self.pending != Some(fb.t) {
            return Err(Error::State(format!("observe(t={}) without a matching act", fb.t)));
        }
        let w = fb.state_residual(&self.a, &self.b);
        self.history.push(w);
        self.optimizer.step(fb.cost)?;
        self.played = DacTensor::from_flat(
            self.class.memory,
            self.gain.nrows(),
            self.gain.ncols(),
            self.optimizer.played().as_slice(),
        )?
        .scaled(self.scale);
        self.pending = None;
        Ok(())
    }

    fn last_disturbance(&self) -> Option<&DVector<f64>> {
        self.history.last()
    }

    fn snapshot(&self) -> PolicySnapshot {
        let cfg = self.optimizer.config();
        PolicySnapshot::new("bpc", &self.gain, Some(&self.center_tensor())).with_params(json!({
            "memory": cfg.memory,
            "delta": self.optimizer.delta(),
            "eta_scale": cfg.eta_scale,
            "delta_scale": cfg.delta_scale,
            "schedule": cfg.schedule,
            "loss_bound": cfg.loss_bound,
            "coordinate_scale": self.scale,
            "kappa": self.class.kappa,
            "gamma": self.class.gamma,
            "kappa_b": self.class.kappa_b,
        }))
    }
}

impl StepFeedback<'_> {
    /// The disturbance implied by the nominal dynamics, unless overridden.
    pub(crate) fn state_residual(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
        match self.recorded_disturbance {
            Some(w) => w.clone(),
            None => self.next_state - a * self.state - b * self.input,
        }
    }
}
