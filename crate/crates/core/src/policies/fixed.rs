use nalgebra::{DMatrix, DVector};

use super::controller::{Controller, PolicySnapshot, StepFeedback};
use super::dac::{DacPolicy, DisturbanceHistory};
use crate::error::Result;
use crate::lds::LinearSystem;

/// Plays one DAC policy for the whole run, recovering `w` from the nominal dynamics.
pub struct FixedDacController {
    label: String,
    policy: DacPolicy,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    history: DisturbanceHistory,
}

impl FixedDacController {
    pub fn new(label: &str, nominal: &LinearSystem, policy: DacPolicy) -> Self {
        let memory = policy.tensor.memory();
        Self {
            label: label.to_string(),
            policy,
            a: nominal.a().clone(),
            b: nominal.b().clone(),
            history: DisturbanceHistory::new(memory),
        }
    }
}

impl Controller for FixedDacController {
    fn name(&self) -> &str {
        &self.label
    }

    fn act(&mut self, _t: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.policy.action(x, &self.history)
    }

    fn observe(&mut self, fb: &StepFeedback<'_>) -> Result<()> {
        self.history.push(fb.state_residual(&self.a, &self.b));
        Ok(())
    }

    fn last_disturbance(&self) -> Option<&DVector<f64>> {
        self.history.last()
    }

    fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot::new(&self.label, &self.policy.gain, Some(&self.policy.tensor))
    }
}
