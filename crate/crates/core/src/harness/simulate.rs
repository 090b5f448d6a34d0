use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::lds::{CostKind, LinearSystem, Trajectory};
use crate::policies::{Controller, StepFeedback};
use crate::sysid::DIVERGENCE_LIMIT;

/// Closed loop from `x_0 = 0` over `t = 0..disturbances.len()`.
pub fn simulate(
    sys: &LinearSystem,
    controller: &mut dyn Controller,
    disturbances: &[DVector<f64>],
    cost: CostKind,
) -> Result<Trajectory> {
    simulate_at(sys, controller, disturbances, cost).map_err(|(_, e)| e)
}

pub(crate) fn simulate_at(
    sys: &LinearSystem,
    controller: &mut dyn Controller,
    disturbances: &[DVector<f64>],
    cost: CostKind,
) -> std::result::Result<Trajectory, (usize, Error)> {
    if disturbances.iter().any(|w| w.len() != sys.state_dim()) {
        return Err((0, Error::Shape("disturbance dimension differs from the state dimension".into())));
    }
    let mut traj = Trajectory::with_initial_state(DVector::zeros(sys.state_dim()));
    for (t, w) in disturbances.iter().enumerate() {
        let x = traj.states[t].clone();
        let u = controller.act(t, &x).map_err(|e| (t, e))?;
        if u.len() != sys.input_dim() {
            return Err((t, Error::Shape(format!("controller returned {} inputs, expected {}", u.len(), sys.input_dim()))));
        }
        let c = cost.eval(&x, &u);
        let next = sys.step(&x, &u, w).map_err(|e| (t, e))?;
        let norm = next.norm();
        if !(norm <= DIVERGENCE_LIMIT) {
            return Err((t, Error::Divergence { t, norm }));
        }
        controller.observe(&StepFeedback::new(t, &x, &u, c, &next)).map_err(|e| (t, e))?;
        traj.states.push(next);
        traj.inputs.push(u);
        traj.disturbances.push(w.clone());
        traj.costs.push(c);
    }
    Ok(traj)
}
