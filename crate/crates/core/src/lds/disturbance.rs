use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step size of the Gaussian random walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkStep {
    /// Increments `N(0, I / T)`.
    VarOneOverT,
    /// Increments `N(0, std^2 I)`.
    Std(f64),
}

impl WalkStep {
    pub fn std(self, horizon: usize) -> f64 {
        match self {
            WalkStep::VarOneOverT => (1.0 / horizon as f64).sqrt(),
            WalkStep::Std(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DisturbanceKind {
    /// i.i.d. `N(0, I)`.
    Gaussian,
    /// `sin(t / (20 pi))` on every coordinate.
    Sinusoidal,
    /// `w_0 = 0`, `w_{t+1} ~ N(w_t, step^2 I)`.
    RandomWalk { step: WalkStep },
    Zero,
    /// A recorded sequence, replayed verbatim (then clipped).
    Replay { sequence: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceGenerator {
    pub kind: DisturbanceKind,
    pub dim: usize,
    /// Multiplier applied to every sample before clipping.
    pub scale: f64,
    /// Norm bound `W`; samples above it are radially clipped.
    pub bound: Option<f64>,
}

pub const DEFAULT_DISTURBANCE_BOUND: f64 = 10.0;

impl DisturbanceGenerator {
    pub fn new(kind: DisturbanceKind, dim: usize) -> Self {
        Self {
            kind,
            dim,
            scale: 1.0,
            bound: Some(DEFAULT_DISTURBANCE_BOUND),
        }
    }

    /// Emits `w_0, ..., w_T` (`horizon + 1` vectors).
    pub fn generate<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> Result<Vec<DVector<f64>>> {
        if horizon == 0 {
            return Err(Error::Config("disturbance horizon must be >= 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidDimension("disturbance dimension must be >= 1".into()));
        }
        if let Some(w) = self.bound {
            if !(w > 0.0) {
                return Err(Error::Config(format!("disturbance bound {w} must be positive")));
            }
        }
        let n = self.dim;
        let len = horizon + 1;
        let mut out: Vec<DVector<f64>> = match &self.kind {
            DisturbanceKind::Gaussian => (0..len)
                .map(|_| DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)))
                .collect(),
            DisturbanceKind::Sinusoidal => (0..len)
                .map(|t| DVector::from_element(n, (t as f64 / (20.0 * PI)).sin()))
                .collect(),
            DisturbanceKind::RandomWalk { step } => {
                let std = step.std(horizon);
                let mut w = DVector::zeros(n);
                let mut seq = Vec::with_capacity(len);
                seq.push(w.clone());
                for _ in 1..len {
                    w += DVector::from_fn(n, |_, _| std * rng.sample::<f64, _>(StandardNormal));
                    seq.push(w.clone());
                }
                seq
            }
            DisturbanceKind::Zero => vec![DVector::zeros(n); len],
            DisturbanceKind::Replay { sequence } => {
                if sequence.len() < len {
                    return Err(Error::Config(format!(
                        "replay sequence has {} entries, need {len}",
                        sequence.len()
                    )));
                }
                sequence[..len]
                    .iter()
                    .map(|v| {
                        if v.len() != n {
                            return Err(Error::Shape(format!(
                                "replay entry has {} coordinates, expected {n}",
                                v.len()
                            )));
                        }
                        Ok(DVector::from_column_slice(v))
                    })
                    .collect::<Result<_>>()?
            }
        };
        for w in &mut out {
            if self.scale != 1.0 {
                *w *= self.scale;
            }
            if let Some(bound) = self.bound {
                let norm = w.norm();
                if norm > bound {
                    *w *= bound / norm;
                }
            }
        }
        Ok(out)
    }
}
