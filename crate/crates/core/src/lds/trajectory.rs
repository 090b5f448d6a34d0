use std::fmt::Write as _;

use nalgebra::DVector;

use super::system::LinearSystem;

/// Closed-loop record starting from `x_0 = 0`.
///
/// For `t = 0..=T` the entries `states[t]`, `inputs[t]`, `disturbances[t]` and
/// `costs[t]` belong to step `t`; `states` has one extra trailing entry,
/// `x_{T+1}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub disturbances: Vec<DVector<f64>>,
    pub costs: Vec<f64>,
}

impl Trajectory {
    pub fn with_initial_state(x0: DVector<f64>) -> Self {
        Self {
            states: vec![x0],
            ..Self::default()
        }
    }

    /// Number of recorded steps.
    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn total_cost(&self) -> f64 {
        self.costs.iter().sum()
    }

    /// `x_{t+1} - A x_t - B u_t` for every recorded step.
    pub fn recovered_disturbances(&self, sys: &LinearSystem) -> Vec<DVector<f64>> {
        (0..self.len())
            .map(|t| sys.residual(&self.states[t], &self.inputs[t], &self.states[t + 1]))
            .collect()
    }

    /// CSV with columns `t,cost,x_norm,u_norm,x0..,u0..,w0..`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |x| x.len());
        let m = self.inputs.first().map_or(0, |u| u.len());
        let mut out = String::from("t,cost,x_norm,u_norm");
        for (prefix, count) in [("x", n), ("u", m), ("w", n)] {
            for i in 0..count {
                write!(out, ",{prefix}{i}").unwrap();
            }
        }
        out.push('\n');
        for t in 0..self.len() {
            let (x, u, w) = (&self.states[t], &self.inputs[t], &self.disturbances[t]);
            write!(out, "{t},{},{},{}", self.costs[t], x.norm(), u.norm()).unwrap();
            for v in x.iter().chain(u.iter()).chain(w.iter()) {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}
