//! Explore-then-commit: identify the dynamics, then hand the estimates to a
//! known-system controller.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::moments::{estimate_moments, excitation, least_squares_id, recover, IdMethod, IdentifiedSystem, DIVERGENCE_LIMIT};
use crate::error::{Error, Result};
use crate::lds::{LinearSystem, Trajectory};
use crate::policies::{Controller, ControllerContext, ControllerFactory, PolicySnapshot, StepFeedback};
use crate::rng::{self, Rng, Stream};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SysIdSettings {
    /// `T_0`; defaults to `ceil(T^{2/3} ln T)`.
    pub explore_steps: Option<usize>,
    /// `k`; defaults to the controllability index of the nominal closed loop.
    pub controllability_index: Option<usize>,
    /// Rows of the exploration gain; defaults to zero.
    pub explore_gain: Option<Vec<Vec<f64>>>,
}

impl SysIdSettings {
    pub fn validate(&self) -> Result<()> {
        if self.explore_steps == Some(0) || self.controllability_index == Some(0) {
            return Err(Error::Config("sysid steps and index must be >= 1".into()));
        }
        Ok(())
    }

    pub fn explore_steps_for(&self, horizon: usize) -> usize {
        self.explore_steps.unwrap_or_else(|| default_explore_steps(horizon))
    }

    pub fn gain(&self, m: usize, n: usize) -> Result<DMatrix<f64>> {
        match &self.explore_gain {
            None => Ok(DMatrix::zeros(m, n)),
            Some(rows) => {
                if rows.len() != m || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config(format!("sysid.explore_gain must be {m}x{n}")));
                }
                Ok(DMatrix::from_row_iterator(m, n, rows.iter().flatten().copied()))
            }
        }
    }
}

/// `ceil(T^{2/3} ln T)`.
pub fn default_explore_steps(horizon: usize) -> usize {
    let t = horizon.max(2) as f64;
    (t.powf(2.0 / 3.0) * t.ln()).ceil() as usize
}

/// Phase 1 plays `u = -K x + xi`; from `t = T_0` on, a controller built by the
/// inner factory acts on the identified dynamics with its own clock `t - T_0`.
pub struct ExploreThenCommit {
    label: String,
    method: IdMethod,
    inner_factory: ControllerFactory,
    ctx: ControllerContext,
    explore_gain: DMatrix<f64>,
    explore_steps: usize,
    k: Option<usize>,
    rng: Rng,
    traj: Trajectory,
    xis: Vec<DVector<f64>>,
    max_cost: f64,
    identified: Option<IdentifiedSystem>,
    inner: Option<Box<dyn Controller>>,
}

impl ExploreThenCommit {
    pub fn new(label: &str, ctx: &ControllerContext, method: IdMethod, inner_factory: ControllerFactory) -> Result<Self> {
        let s = &ctx.settings.sysid;
        let (n, m) = (ctx.nominal.state_dim(), ctx.nominal.input_dim());
        let explore_gain = s.gain(m, n)?;
        let explore_steps = s.explore_steps_for(ctx.horizon);
        if explore_steps >= ctx.horizon {
            return Err(Error::Config(format!(
                "exploration budget {explore_steps} must be below the horizon {}",
                ctx.horizon
            )));
        }
        let k = match method {
            IdMethod::LeastSquares => None,
            IdMethod::Moments => {
                let k = match s.controllability_index {
                    Some(k) => k,
                    None => {
                        let closed = LinearSystem::new(
                            ctx.nominal.a() - ctx.nominal.b() * &explore_gain,
                            ctx.nominal.b().clone(),
                        )?;
                        closed.controllability_index().ok_or_else(|| {
                            Error::Controllability("closed loop (A - BK, B) is not controllable".into())
                        })?
                    }
                };
                if explore_steps <= k {
                    return Err(Error::Config(format!("need T0 > k, got T0 = {explore_steps}, k = {k}")));
                }
                Some(k)
            }
        };
        Ok(Self {
            label: label.to_string(),
            method,
            inner_factory,
            ctx: ctx.clone(),
            explore_gain,
            explore_steps,
            k,
            rng: rng::stream(ctx.seed, Stream::Exploration),
            traj: Trajectory::with_initial_state(DVector::zeros(n)),
            xis: Vec::with_capacity(explore_steps),
            max_cost: 0.0,
            identified: None,
            inner: None,
        })
    }

    pub fn explore_steps(&self) -> usize {
        self.explore_steps
    }

    pub fn identified(&self) -> Option<&IdentifiedSystem> {
        self.identified.as_ref()
    }

    pub fn inner(&self) -> Option<&dyn Controller> {
        self.inner.as_deref()
    }

    fn commit(&mut self) -> Result<()> {
        let id = match self.method {
            IdMethod::Moments => {
                let k = self.k.expect("moments method has k");
                let est = estimate_moments(&self.traj.states, &self.xis, k)?;
                recover(&est, &self.explore_gain)?
            }
            IdMethod::LeastSquares => least_squares_id(&self.traj)?,
        };
        let mut ctx = self.ctx.clone();
        ctx.nominal = id.to_system()?;
        ctx.horizon = self.ctx.horizon - self.explore_steps;
        if ctx.loss_bound.is_none() && ctx.settings.bpc.loss_bound.is_none() {
            ctx.loss_bound = Some(self.max_cost.max(1.0));
        }
        self.inner = Some((self.inner_factory)(&ctx)?);
        self.identified = Some(id);
        Ok(())
    }
}

impl Controller for ExploreThenCommit {
    fn name(&self) -> &str {
        &self.label
    }

    fn act(&mut self, t: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
        if t < self.explore_steps {
            if t != self.xis.len() {
                return Err(Error::State(format!("act(t={t}) out of phase during exploration")));
            }
            let xi = excitation(&mut self.rng, self.explore_gain.nrows());
            let u = -(&self.explore_gain * x) + &xi;
            self.xis.push(xi);
            self.traj.inputs.push(u.clone());
            return Ok(u);
        }
        if t == self.explore_steps && self.inner.is_none() {
            self.commit()?;
        }
        let inner = self
            .inner
            .as_mut()
            .ok_or_else(|| Error::State("commit phase reached without identification".into()))?;
        inner.act(t - self.explore_steps, x)
    }

    fn observe(&mut self, fb: &StepFeedback<'_>) -> Result<()> {
        if fb.t < self.explore_steps {
            let norm = fb.next_state.norm();
            if !(norm <= DIVERGENCE_LIMIT) {
                return Err(Error::Divergence { t: fb.t + 1, norm });
            }
            self.max_cost = self.max_cost.max(fb.cost);
            self.traj.costs.push(fb.cost);
            self.traj.states.push(fb.next_state.clone());
            return Ok(());
        }
        let inner = self
            .inner
            .as_mut()
            .ok_or_else(|| Error::State("observe before commit".into()))?;
        let mut local = *fb;
        local.t = fb.t - self.explore_steps;
        if fb.t == self.explore_steps {
            // first committed step records x_{T0+1} as the disturbance
            local.recorded_disturbance = Some(fb.next_state);
        }
        inner.observe(&local)
    }

    fn last_disturbance(&self) -> Option<&DVector<f64>> {
        self.inner.as_ref().and_then(|c| c.last_disturbance())
    }

    fn snapshot(&self) -> PolicySnapshot {
        let mut snap = match &self.inner {
            Some(c) => c.snapshot(),
            None => PolicySnapshot::new(&self.label, &self.explore_gain, None),
        };
        let report = self
            .identified
            .as_ref()
            .map(|id| id.report(self.explore_steps, self.k, Some(&self.ctx.nominal)));
        snap.algorithm = self.label.clone();
        snap.params = json!({ "inner": snap.params, "identification": report });
        snap
    }
}
