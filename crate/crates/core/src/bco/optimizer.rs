//! Delayed one-point gradient descent for losses with memory.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::sets::{ConvexSet, DecisionSet, MinkowskiSubset};
use super::sphere::sample_unit_sphere;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Learning-rate schedule shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// `eta_t ~ t^{-3/4}`.
    #[default]
    Decaying,
    /// Constant rate equal to the decaying rate evaluated at the horizon.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcoConfig {
    /// Horizon `T`.
    pub horizon: usize,
    /// Memory length `H >= 1`.
    pub memory: usize,
    /// Exploration radius; `None` selects `c_delta * T^{-1/4} D^{1/3} G^{-1/3}`.
    pub delta: Option<f64>,
    pub delta_scale: f64,
    pub eta_scale: f64,
    pub schedule: Schedule,
    /// Lipschitz bound `G` of the losses.
    pub lipschitz: f64,
    /// Smoothness bound. Only reported, never used by the update.
    pub smoothness: f64,
    /// Loss bound; losses are divided by it before the estimator when > 1.
    pub loss_bound: f64,
}

impl BcoConfig {
    pub fn new(horizon: usize, memory: usize) -> Self {
        Self {
            horizon,
            memory,
            delta: None,
            delta_scale: 1.0,
            eta_scale: 1.0,
            schedule: Schedule::Decaying,
            lipschitz: 1.0,
            smoothness: 1.0,
            loss_bound: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if self.memory == 0 {
            return Err(Error::Config("memory H must be >= 1".into()));
        }
        for (name, v) in [
            ("delta_scale", self.delta_scale),
            ("eta_scale", self.eta_scale),
            ("lipschitz", self.lipschitz),
            ("loss_bound", self.loss_bound),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Resolves the perturbation constant for a set of the given diameter.
    pub fn resolve_delta(&self, diameter: f64) -> Result<f64> {
        let delta = self.delta.unwrap_or_else(|| {
            self.delta_scale
                * (self.horizon as f64).powf(-0.25)
                * diameter.cbrt()
                * self.lipschitz.powf(-1.0 / 3.0)
        });
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!(
                "perturbation constant delta = {delta} must lie in (0, 1); lower delta_scale"
            )));
        }
        Ok(delta)
    }

    /// `eta_t = c_eta t^{-3/4} H^{-3/2} d^{-1} D^{2/3} G^{-2/3}`, with `t` floored at 1.
    pub fn learning_rate(&self, t: usize, dim: usize, diameter: f64) -> f64 {
        let t = match self.schedule {
            Schedule::Decaying => t.max(1),
            Schedule::Fixed => self.horizon.max(1),
        } as f64;
        self.eta_scale
            * t.powf(-0.75)
            * (self.memory as f64).powf(-1.5)
            / dim as f64
            * diameter.powf(2.0 / 3.0)
            * self.lipschitz.powf(-2.0 / 3.0)
    }
}

/// `(d / delta) * loss * sum(u_window)`.
pub fn gradient_estimate(
    dim: usize,
    delta: f64,
    loss_value: f64,
    u_window: &[&DVector<f64>],
) -> Result<DVector<f64>> {
    let first = u_window
        .first()
        .ok_or_else(|| Error::State("gradient estimate needs a non-empty window".into()))?;
    let mut sum = DVector::zeros(first.len());
    for u in u_window {
        sum += *u;
    }
    Ok(sum * (dim as f64 / delta * loss_value))
}

/// State of the delayed one-point optimizer.
///
/// Time is 0-indexed: `played()` is `y_t`, and `step` consumes the loss of the
/// window `y_{t-H+1..=t}`. Losses before `t = H` produce a zero estimate, and the
/// update at time `t` uses the estimate stored at `t - H + 1`.
#[derive(Debug, Clone)]
pub struct BcoOptimizer {
    cfg: BcoConfig,
    set: DecisionSet,
    shrunk: MinkowskiSubset,
    delta: f64,
    center: DVector<f64>,
    played: DVector<f64>,
    /// `u_{t-H+1..=t}`, oldest first.
    directions: VecDeque<DVector<f64>>,
    /// `g_{t-H+1..=t}`, oldest first.
    estimates: VecDeque<DVector<f64>>,
    last_applied: DVector<f64>,
    t: usize,
    rng: Rng,
}

impl BcoOptimizer {
    pub fn new(
        set: DecisionSet,
        cfg: BcoConfig,
        initial: DVector<f64>,
        mut rng: Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let dim = set.dim();
        if initial.len() != dim {
            return Err(Error::Shape(format!(
                "initial point has {} coordinates, set has {dim}",
                initial.len()
            )));
        }
        let delta = cfg.resolve_delta(set.diameter())?;
        let shrunk = set.shrink(delta)?;
        if !shrunk.contains(&initial, 1e-12) {
            return Err(Error::State(
                "initial point lies outside the shrunk decision set".into(),
            ));
        }
        let u = sample_unit_sphere(&mut rng, dim)?;
        let played = &initial + &u * delta;
        let mut directions = VecDeque::with_capacity(cfg.memory);
        directions.push_back(u);
        Ok(Self {
            estimates: VecDeque::with_capacity(cfg.memory),
            last_applied: DVector::zeros(dim),
            cfg,
            set,
            shrunk,
            delta,
            center: initial,
            played,
            directions,
            t: 0,
            rng,
        })
    }

    pub fn config(&self) -> &BcoConfig {
        &self.cfg
    }

    pub fn set(&self) -> &DecisionSet {
        &self.set
    }

    pub fn shrunk_set(&self) -> &MinkowskiSubset {
        &self.shrunk
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn time(&self) -> usize {
        self.t
    }

    /// Center point `x_t`.
    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    /// Played point `y_t = x_t + delta u_t`.
    pub fn played(&self) -> &DVector<f64> {
        &self.played
    }

    /// Current sphere direction `u_t`.
    pub fn direction(&self) -> &DVector<f64> {
        self.directions.back().expect("direction buffer is never empty")
    }

    /// Most recently stored estimate `g_t` (zero before the first step).
    pub fn last_estimate(&self) -> Option<&DVector<f64>> {
        self.estimates.back()
    }

    /// Estimate used by the most recent center update, `g_{t-H+1}`.
    pub fn last_applied(&self) -> &DVector<f64> {
        &self.last_applied
    }

    pub fn learning_rate(&self, t: usize) -> f64 {
        self.cfg.learning_rate(t, self.dim(), self.set.diameter())
    }

    /// Consumes the loss of the current window and advances to `y_{t+1}`.
    pub fn step(&mut self, observed_loss: f64) -> Result<&DVector<f64>> {
        if !observed_loss.is_finite() {
            return Err(Error::NumericInput(format!(
                "observed loss {observed_loss} at t={}",
                self.t
            )));
        }
        let memory = self.cfg.memory;
        let dim = self.dim();
        let scaled = if self.cfg.loss_bound > 1.0 {
            observed_loss / self.cfg.loss_bound
        } else {
            observed_loss
        };

        let g_t = if self.t >= memory {
            let window: Vec<&DVector<f64>> = self.directions.iter().collect();
            gradient_estimate(dim, self.delta, scaled, &window)?
        } else {
            DVector::zeros(dim)
        };
        if self.estimates.len() == memory {
            self.estimates.pop_front();
        }
        self.estimates.push_back(g_t);

        // g_{t-H+1}; negative indices are zero.
        let delayed = if self.estimates.len() == memory {
            self.estimates.front().cloned().expect("non-empty")
        } else {
            DVector::zeros(dim)
        };
        if delayed.iter().any(|v| *v != 0.0) {
            let eta = self.learning_rate(self.t);
            self.center = self.shrunk.project(&(&self.center - &delayed * eta))?;
        }
        self.last_applied = delayed;

        let u = sample_unit_sphere(&mut self.rng, dim)?;
        self.played = &self.center + &u * self.delta;
        if self.directions.len() == memory {
            self.directions.pop_front();
        }
        self.directions.push_back(u);
        self.t += 1;
        Ok(&self.played)
    }
}
