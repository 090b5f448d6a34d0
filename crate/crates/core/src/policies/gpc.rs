//! Full-information gradient perturbation controller (baseline).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::controller::{Controller, PolicySnapshot, StepFeedback};
use super::dac::{dac_action, project_dac_class, DacClassParams, DacTensor, DisturbanceHistory, Rollout};
use crate::error::{Error, Result};
use crate::lds::{CostKind, LinearSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GpcSchedule {
    /// `eta / sqrt(t + 1)`.
    #[default]
    Decaying,
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpcConfig {
    pub learning_rate: f64,
    pub schedule: GpcSchedule,
    pub class: DacClassParams,
}

/// Trains the DAC tensor by projected gradient steps on the counterfactual
/// loss `c(x_t(M), u_t(M))`, obtained by replaying the last `H - 1` steps from
/// the observed `x_{t-H+1}` under the constant tensor `M`.
#[derive(Debug, Clone)]
pub struct GpcController {
    gain: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    cost: CostKind,
    cfg: GpcConfig,
    tensor: DacTensor,
    history: DisturbanceHistory,
    disturbances: Vec<DVector<f64>>,
    states: Vec<DVector<f64>>,
    pending: Option<usize>,
}

impl GpcController {
    pub fn new(nominal: &LinearSystem, gain: DMatrix<f64>, cost: CostKind, cfg: GpcConfig) -> Result<Self> {
        cfg.class.validate()?;
        if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
            return Err(Error::Config("GPC learning rate must be positive".into()));
        }
        let (n, m) = (nominal.state_dim(), nominal.input_dim());
        if gain.shape() != (m, n) {
            return Err(Error::Shape(format!("K must be {m}x{n}, got {:?}", gain.shape())));
        }
        let memory = cfg.class.memory;
        Ok(Self {
            gain,
            a: nominal.a().clone(),
            b: nominal.b().clone(),
            cost,
            tensor: DacTensor::zeros(memory, m, n),
            history: DisturbanceHistory::new(memory),
            disturbances: Vec::new(),
            states: Vec::new(),
            pending: None,
            cfg,
        })
    }

    pub fn tensor(&self) -> &DacTensor {
        &self.tensor
    }

    fn rate(&self, t: usize) -> f64 {
        match self.cfg.schedule {
            GpcSchedule::Decaying => self.cfg.learning_rate / ((t + 1) as f64).sqrt(),
            GpcSchedule::Fixed => self.cfg.learning_rate,
        }
    }

    /// Counterfactual loss at time `t` for tensor `m` and its gradient.
    pub fn surrogate(&self, tensor: &DacTensor, t: usize) -> Result<(f64, DVector<f64>)> {
        let start = t.saturating_sub(self.cfg.class.memory - 1);
        let rollout = Rollout {
            a: &self.a,
            b: &self.b,
            gain: &self.gain,
            tensor,
            disturbances: &self.disturbances,
            cost: self.cost,
        };
        let v = rollout.run(&self.states[start], start, t, t, true)?;
        Ok((v.cost, v.gradient.expect("gradient requested")))
    }
}

impl Controller for GpcController {
    fn name(&self) -> &str {
        "gpc"
    }

    fn act(&mut self, t: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
        if self.pending.is_some() || t != self.states.len() {
            return Err(Error::State(format!("act(t={t}) out of phase")));
        }
        let u = dac_action(&self.gain, &self.tensor, x, &self.history)?;
        self.states.push(x.clone());
        self.pending = Some(t);
        Ok(u)
    }

    fn observe(&mut self, fb: &StepFeedback<'_>) -> Result<()> {
        if self.pending != Some(fb.t) {
            return Err(Error::State(format!("observe(t={}) without a matching act", fb.t)));
        }
        let w = fb.state_residual(&self.a, &self.b);
        self.disturbances.push(w.clone());
        self.history.push(w);
        let (_, grad) = self.surrogate(&self.tensor, fb.t)?;
        let memory = self.tensor.memory();
        let (m, n) = (self.tensor.rows(), self.tensor.cols());
        let step = self.tensor.flatten() - grad * self.rate(fb.t);
        let stepped = DacTensor::from_flat(memory, m, n, step.as_slice())?;
        self.tensor = project_dac_class(&self.cfg.class, 0.0, &stepped)?;
        self.pending = None;
        Ok(())
    }

    fn last_disturbance(&self) -> Option<&DVector<f64>> {
        self.history.last()
    }

    fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot::new("gpc", &self.gain, Some(&self.tensor)).with_params(json!({
            "memory": self.cfg.class.memory,
            "learning_rate": self.cfg.learning_rate,
            "schedule": self.cfg.schedule,
            "kappa": self.cfg.class.kappa,
            "gamma": self.cfg.class.gamma,
            "kappa_b": self.cfg.class.kappa_b,
        }))
    }
}
