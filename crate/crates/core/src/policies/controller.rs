use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dac::{matrix_rows, DacTensor};
use crate::error::Result;

/// What a controller learns after acting at time `t`.
#[derive(Debug, Clone, Copy)]
pub struct StepFeedback<'a> {
    pub t: usize,
    pub state: &'a DVector<f64>,
    pub input: &'a DVector<f64>,
    /// Scalar cost `c_t(x_t, u_t)`; the only cost information bandit learners use.
    pub cost: f64,
    pub next_state: &'a DVector<f64>,
    /// Replaces the residual `x_{t+1} - A x_t - B u_t` as the recorded disturbance.
    pub recorded_disturbance: Option<&'a DVector<f64>>,
}

impl<'a> StepFeedback<'a> {
    pub fn new(
        t: usize,
        state: &'a DVector<f64>,
        input: &'a DVector<f64>,
        cost: f64,
        next_state: &'a DVector<f64>,
    ) -> Self {
        Self { t, state, input, cost, next_state, recorded_disturbance: None }
    }
}

/// An online controller interacting with one system for one run.
///
/// Each round calls [`Controller::act`] then [`Controller::observe`] with the
/// same `t`.
pub trait Controller: Send {
    fn name(&self) -> &str;

    fn act(&mut self, t: usize, x: &DVector<f64>) -> Result<DVector<f64>>;

    fn observe(&mut self, feedback: &StepFeedback<'_>) -> Result<()>;

    /// Disturbance estimate recorded by the last `observe`, if the controller keeps one.
    fn last_disturbance(&self) -> Option<&DVector<f64>> {
        None
    }

    fn snapshot(&self) -> PolicySnapshot;
}

/// JSON-serializable view of a controller's current policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySnapshot {
    pub algorithm: String,
    pub gain: Vec<Vec<f64>>,
    /// `tensor[i][r][c] = M^[i+1]_{rc}` when the policy is a DAC.
    pub tensor: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
}

impl PolicySnapshot {
    pub fn new(algorithm: &str, gain: &DMatrix<f64>, tensor: Option<&DacTensor>) -> Self {
        Self {
            algorithm: algorithm.to_string(),
            gain: matrix_rows(gain),
            tensor: tensor.map(DacTensor::to_nested),
            params: serde_json::Value::Null,
        }
    }

    pub fn with_params(mut self, params: serde_json::Value) -> Self {
        self.params = params;
        self
    }
}
