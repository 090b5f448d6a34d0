//! Identification from `±1` excitation by the method of moments.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lds::{hstack, CostKind, LinearSystem, Trajectory};

/// Largest state norm tolerated during exploration.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// Largest accepted condition number of `C_0 C_0^T`.
pub const MAX_CONDITION: f64 = 1e12;
const PINV_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SysIdConfig {
    /// Exploration budget `T_0`.
    pub explore_steps: usize,
    /// Stabilizing gain used while exploring, `m x n`.
    pub explore_gain: DMatrix<f64>,
    /// Controllability index `k`.
    pub k: usize,
}

impl SysIdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.explore_steps <= self.k {
            return Err(Error::Config(format!(
                "need T0 > k >= 1, got T0 = {}, k = {}",
                self.explore_steps, self.k
            )));
        }
        Ok(())
    }
}

/// `xi` with i.i.d. uniform `±1` entries.
pub fn excitation<R: Rng + ?Sized>(rng: &mut R, m: usize) -> DVector<f64> {
    DVector::from_fn(m, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
}

/// Runs `u_t = -K x_t + xi_t` for `t = 0..T_0` from `x_0 = 0`.
///
/// The trajectory holds `x_0..=x_{T_0}` and the excitation `xi_0..xi_{T_0 - 1}`.
pub fn explore<R: Rng + ?Sized>(
    sys: &LinearSystem,
    cfg: &SysIdConfig,
    disturbances: &[DVector<f64>],
    cost: CostKind,
    rng: &mut R,
) -> Result<(Trajectory, Vec<DVector<f64>>)> {
    cfg.validate()?;
    let (n, m) = (sys.state_dim(), sys.input_dim());
    if cfg.explore_gain.shape() != (m, n) {
        return Err(Error::Shape(format!("exploration gain must be {m}x{n}")));
    }
    if disturbances.len() < cfg.explore_steps {
        return Err(Error::InsufficientData(format!(
            "exploration needs {} disturbances, have {}",
            cfg.explore_steps,
            disturbances.len()
        )));
    }
    let mut traj = Trajectory::with_initial_state(DVector::zeros(n));
    let mut xis = Vec::with_capacity(cfg.explore_steps);
    for t in 0..cfg.explore_steps {
        let x = traj.states[t].clone();
        let xi = excitation(rng, m);
        let u = -(&cfg.explore_gain * &x) + &xi;
        let next = sys.step(&x, &u, &disturbances[t])?;
        let norm = next.norm();
        if !(norm <= DIVERGENCE_LIMIT) {
            return Err(Error::Divergence { t: t + 1, norm });
        }
        traj.costs.push(cost.eval(&x, &u));
        traj.inputs.push(u);
        traj.disturbances.push(disturbances[t].clone());
        traj.states.push(next);
        xis.push(xi);
    }
    Ok((traj, xis))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    /// `N_0, ..., N_k`, each `n x m`.
    pub n: Vec<DMatrix<f64>>,
    /// `[N_0 ... N_{k-1}]`.
    pub c0: DMatrix<f64>,
    /// `[N_1 ... N_k]`.
    pub c1: DMatrix<f64>,
}

impl MomentEstimates {
    pub fn from_moments(n: Vec<DMatrix<f64>>) -> Result<Self> {
        if n.len() < 2 {
            return Err(Error::Input("need at least N_0 and N_1".into()));
        }
        let k = n.len() - 1;
        Ok(Self {
            c0: hstack(&n[..k]),
            c1: hstack(&n[1..]),
            n,
        })
    }

    pub fn k(&self) -> usize {
        self.n.len() - 1
    }
}

/// `N_j = 1/(T_0 - k) sum_{t=0}^{T_0-k-1} x_{t+j+1} xi_t^T` for `j = 0..=k`.
pub fn estimate_moments(states: &[DVector<f64>], xis: &[DVector<f64>], k: usize) -> Result<MomentEstimates> {
    if k == 0 {
        return Err(Error::Input("controllability index must be >= 1".into()));
    }
    let explore_steps = xis.len();
    if explore_steps <= k {
        return Err(Error::InsufficientData(format!(
            "{explore_steps} excitation samples do not exceed k = {k}"
        )));
    }
    if states.len() < explore_steps + 1 {
        return Err(Error::Shape(format!(
            "{} states recorded, need {} for T0 = {explore_steps}",
            states.len(),
            explore_steps + 1
        )));
    }
    let (n, m) = (states[0].len(), xis[0].len());
    let count = explore_steps - k;
    let moments = (0..=k)
        .map(|j| {
            let mut acc = DMatrix::zeros(n, m);
            for t in 0..count {
                acc += &states[t + j + 1] * xis[t].transpose();
            }
            acc / count as f64
        })
        .collect();
    MomentEstimates::from_moments(moments)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdMethod {
    Moments,
    LeastSquares,
}

impl IdMethod {
    pub fn tag(self) -> &'static str {
        match self {
            IdMethod::Moments => "moments",
            IdMethod::LeastSquares => "lsq",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub method: IdMethod,
    /// Condition number of the matrix inverted during recovery.
    pub condition_number: f64,
    /// Moments: pseudo-inverse used. Least squares: regressors rank-deficient.
    pub fallback: bool,
}

impl IdentifiedSystem {
    pub fn to_system(&self) -> Result<LinearSystem> {
        LinearSystem::new(self.a.clone(), self.b.clone())
    }

    pub fn report(&self, explore_steps: usize, k: Option<usize>, truth: Option<&LinearSystem>) -> IdentificationReport {
        IdentificationReport {
            method: self.method,
            explore_steps,
            k,
            condition_number: self.condition_number,
            fallback: self.fallback,
            a_error: truth.map(|s| (&self.a - s.a()).norm()),
            b_error: truth.map(|s| (&self.b - s.b()).norm()),
        }
    }
}

/// JSON identification summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub method: IdMethod,
    pub explore_steps: usize,
    pub k: Option<usize>,
    pub condition_number: f64,
    pub fallback: bool,
    pub a_error: Option<f64>,
    pub b_error: Option<f64>,
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

/// `A = C_1 C_0^T (C_0 C_0^T)^{-1} + N_0 K`, `B = N_0`.
pub fn recover(moments: &MomentEstimates, explore_gain: &DMatrix<f64>) -> Result<IdentifiedSystem> {
    let n0 = &moments.n[0];
    if explore_gain.shape() != (n0.ncols(), n0.nrows()) {
        return Err(Error::Shape("exploration gain does not match the moments".into()));
    }
    let gram = &moments.c0 * moments.c0.transpose();
    let cond = condition_number(&gram);
    if !(cond < MAX_CONDITION) {
        return Err(Error::Controllability(format!(
            "C0 C0^T has condition number {cond:e}; increase k or T0"
        )));
    }
    let cross = &moments.c1 * moments.c0.transpose();
    let (closed_loop, fallback) = match gram.clone().cholesky() {
        // X gram = cross  <=>  gram X^T = cross^T (gram symmetric)
        Some(chol) => (chol.solve(&cross.transpose()).transpose(), false),
        None => {
            let pinv = gram
                .pseudo_inverse(PINV_TOLERANCE)
                .map_err(|e| Error::Controllability(e.to_string()))?;
            (cross * pinv, true)
        }
    };
    Ok(IdentifiedSystem {
        a: closed_loop + n0 * explore_gain,
        b: n0.clone(),
        method: IdMethod::Moments,
        condition_number: cond,
        fallback,
    })
}

pub const RIDGE: f64 = 1e-8;

/// Ridge-regularized regression of `x_{t+1}` on `[x_t; u_t]`.
pub fn least_squares_id(traj: &Trajectory) -> Result<IdentifiedSystem> {
    let steps = traj.inputs.len();
    if steps == 0 || traj.states.len() < steps + 1 {
        return Err(Error::InsufficientData("least squares needs recorded transitions".into()));
    }
    let (n, m) = (traj.states[0].len(), traj.inputs[0].len());
    let p = n + m;
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut cross = DMatrix::<f64>::zeros(n, p);
    for t in 0..steps {
        let z = DVector::from_iterator(p, traj.states[t].iter().chain(traj.inputs[t].iter()).copied());
        gram += &z * z.transpose();
        cross += &traj.states[t + 1] * z.transpose();
    }
    let eig_min = gram.clone().symmetric_eigen().eigenvalues.min();
    let fallback = steps < p || eig_min <= RIDGE;
    let regularized = &gram + DMatrix::identity(p, p) * RIDGE;
    let cond = condition_number(&regularized);
    let theta = regularized
        .cholesky()
        .ok_or_else(|| Error::Solver("regularized normal equations are not positive definite".into()))?
        .solve(&cross.transpose())
        .transpose();
    Ok(IdentifiedSystem {
        a: theta.columns(0, n).into_owned(),
        b: theta.columns(n, m).into_owned(),
        method: IdMethod::LeastSquares,
        condition_number: cond,
        fallback,
    })
}
