//! Best fixed DAC policy in hindsight.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lds::{CostKind, LinearSystem};
use crate::policies::{in_dac_class, project_dac_class, DacClassParams, DacTensor, Rollout};

/// SHA-256 over the dimensions and bit patterns of a disturbance sequence.
pub fn disturbance_hash(w: &[DVector<f64>]) -> String {
    let mut h = Sha256::new();
    h.update((w.len() as u64).to_le_bytes());
    h.update((w.first().map_or(0, |v| v.len()) as u64).to_le_bytes());
    for v in w {
        for x in v.iter() {
            h.update(x.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    pub max_iterations: usize,
    /// Stop once the projected-gradient norm drops below this.
    pub tolerance: f64,
    /// First step whose cost counts.
    pub cost_from: usize,
    /// Cross-check against an exhaustive lattice of this spacing when `d <= 3`.
    pub grid_step: Option<f64>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { max_iterations: 10_000, tolerance: 1e-6, cost_from: 0, grid_step: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleLog {
    pub iterations: usize,
    pub evaluations: usize,
    /// Norm of the final projected gradient (subgradient for non-smooth costs).
    pub gradient_norm: f64,
    pub converged: bool,
    pub grid_objective: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct HindsightOracleResult {
    pub tensor: DacTensor,
    pub objective: f64,
    pub objective_at_zero: f64,
    pub log: OracleLog,
    /// Set when the iteration cap was hit before the tolerance.
    pub warning: Option<String>,
    pub disturbance_hash: String,
    pub cost_from: usize,
    /// Per-step cost of replaying `tensor`, zero before `cost_from`.
    pub step_costs: Vec<f64>,
    pub class: DacClassParams,
}

struct Objective<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DMatrix<f64>,
    gain: &'a DMatrix<f64>,
    w: &'a [DVector<f64>],
    cost: CostKind,
    cost_from: usize,
    evaluations: usize,
}

impl Objective<'_> {
    fn eval(&mut self, m: &DacTensor, gradient: bool) -> Result<(f64, Option<DVector<f64>>)> {
        self.evaluations += 1;
        let r = Rollout { a: self.a, b: self.b, gain: self.gain, tensor: m, disturbances: self.w, cost: self.cost };
        let x0 = DVector::zeros(self.a.nrows());
        let v = r.run(&x0, 0, self.w.len() - 1, self.cost_from, gradient)?;
        Ok((v.cost, v.gradient))
    }
}

/// Minimizes `J_T(M | w)` over the DAC class starting from `M = 0`.
///
/// The quadratic cost is minimized exactly on its quadratic form (Newton
/// point when it is feasible, accelerated projected gradient otherwise);
/// other costs use projected subgradient steps and keep the best iterate.
pub fn best_dac_in_hindsight(
    sys: &LinearSystem,
    gain: &DMatrix<f64>,
    w: &[DVector<f64>],
    cost: CostKind,
    class: &DacClassParams,
    opts: &OracleOptions,
) -> Result<HindsightOracleResult> {
    class.validate()?;
    if w.is_empty() {
        return Err(Error::InsufficientData("oracle needs a recorded disturbance sequence".into()));
    }
    if !(opts.tolerance > 0.0) || opts.max_iterations == 0 {
        return Err(Error::Config("oracle tolerance and iteration cap must be positive".into()));
    }
    let (n, m) = (sys.state_dim(), sys.input_dim());
    let mut f = Objective { a: sys.a(), b: sys.b(), gain, w, cost, cost_from: opts.cost_from, evaluations: 0 };
    let zero = DacTensor::zeros(class.memory, m, n);
    let (f0, g0) = f.eval(&zero, true)?;
    let g0 = g0.expect("gradient requested");
    let project = |v: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(project_dac_class(class, 0.0, &DacTensor::from_flat(class.memory, m, n, v.as_slice())?)?.flatten())
    };

    let (best, _, iterations, grad_norm, converged) = if cost == CostKind::Quadratic {
        accelerated(&f, &project, class, m, n, zero.flatten(), opts)?
    } else {
        subgradient(&mut f, &project, class, m, n, zero.flatten(), f0, g0, opts)?
    };

    let mut tensor = DacTensor::from_flat(class.memory, m, n, best.as_slice())?;
    let mut objective = f.eval(&tensor, false)?.0;
    if objective > f0 {
        tensor = zero.clone();
        objective = f0;
    }
    debug_assert!(in_dac_class(class, 0.0, &tensor, 1e-9));
    let grid_objective = match opts.grid_step {
        Some(step) if tensor.dim() <= 3 => Some(grid_search(sys, gain, w, cost, class, step, opts.cost_from)?.1),
        _ => None,
    };
    let warning = (!converged).then(|| {
        format!("iteration cap {} reached with gradient norm {grad_norm:.3e}", opts.max_iterations)
    });
    if let Some(msg) = &warning {
        log::warn!("hindsight oracle: {msg}");
    }
    let step_costs = replay_costs(sys, gain, w, cost, &tensor, opts.cost_from)?;
    Ok(HindsightOracleResult {
        tensor,
        objective,
        objective_at_zero: f0,
        log: OracleLog { iterations, evaluations: f.evaluations, gradient_norm: grad_norm, converged, grid_objective },
        warning,
        disturbance_hash: disturbance_hash(w),
        cost_from: opts.cost_from,
        step_costs,
        class: class.clone(),
    })
}

type Projector<'p> = dyn Fn(&DVector<f64>) -> Result<DVector<f64>> + 'p;
type Outcome = (DVector<f64>, f64, usize, f64, bool);

/// `J(v) = v^T H v + 2 g^T v + c` for the quadratic cost, where `v` is the
/// flattened tensor.
struct QuadraticModel {
    h: DMatrix<f64>,
    g: DVector<f64>,
    c: f64,
}

impl QuadraticModel {
    fn build(f: &Objective<'_>, memory: usize) -> Self {
        let (n, m) = (f.a.nrows(), f.b.ncols());
        let d = memory * m * n;
        let mut h = DMatrix::<f64>::zeros(d, d);
        let mut g = DVector::<f64>::zeros(d);
        let mut c = 0.0;
        let mut x = DVector::<f64>::zeros(n);
        let mut jx = DMatrix::<f64>::zeros(n, d);
        for s in 0..f.w.len() {
            let u = -(f.gain * &x);
            let mut ju = -(f.gain * &jx);
            for i in 1..=memory.min(s) {
                let w = &f.w[s - i];
                let base = (i - 1) * m * n;
                for r in 0..m {
                    for col in 0..n {
                        ju[(r, base + r * n + col)] += w[col];
                    }
                }
            }
            if s >= f.cost_from {
                h += jx.tr_mul(&jx) + ju.tr_mul(&ju);
                g += jx.tr_mul(&x) + ju.tr_mul(&u);
                c += x.norm_squared() + u.norm_squared();
            }
            let xn = f.a * &x + f.b * &u + &f.w[s];
            jx = f.a * &jx + f.b * &ju;
            x = xn;
        }
        Self { h: (&h + h.transpose()) * 0.5, g, c }
    }

    fn value(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.h * v)) + 2.0 * self.g.dot(v) + self.c
    }

    fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        (&self.h * v + &self.g) * 2.0
    }
}

/// Accelerated projected gradient with restarts on the exact quadratic
/// model, after trying the unconstrained minimizer.
#[allow(clippy::too_many_arguments)]
fn accelerated(
    f: &Objective<'_>,
    project: &Projector<'_>,
    class: &DacClassParams,
    m: usize,
    n: usize,
    x0: DVector<f64>,
    opts: &OracleOptions,
) -> Result<Outcome> {
    let model = QuadraticModel::build(f, class.memory);
    let fixed_point = |v: &DVector<f64>, step: f64| -> Result<(DVector<f64>, f64)> {
        let next = project(&(v - model.gradient(v) * step))?;
        let norm = (&next - v).norm() / step;
        Ok((next, norm))
    };
    let lip = 2.0 * model.h.symmetric_eigenvalues().max().max(f64::MIN_POSITIVE);
    let step = 1.0 / lip;
    if let Some(chol) = model.h.clone().cholesky() {
        let newton = -chol.solve(&model.g);
        let t = DacTensor::from_flat(class.memory, m, n, newton.as_slice())?;
        if in_dac_class(class, 0.0, &t, 0.0) {
            let (_, norm) = fixed_point(&newton, step)?;
            if norm < opts.tolerance {
                return Ok((newton.clone(), model.value(&newton), 1, norm, true));
            }
        }
    }
    let mut x = x0.clone();
    let mut fx = model.value(&x);
    let mut y = x0;
    let mut theta = 1.0f64;
    let mut grad_map = f64::INFINITY;
    let mut stalled = 0;
    for k in 0..opts.max_iterations {
        let (x_new, _) = fixed_point(&y, step)?;
        let fx_new = model.value(&x_new);
        grad_map = fixed_point(&x_new, step)?.1;
        if grad_map < opts.tolerance {
            return Ok((x_new, fx_new, k + 1, grad_map, true));
        }
        if fx_new > fx {
            // Momentum overshot: restart from the last accepted point.
            theta = 1.0;
            y = x.clone();
            stalled += 1;
            if stalled > 2 {
                break;
            }
            continue;
        }
        stalled = 0;
        let theta_new = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        y = &x_new + (&x_new - &x) * ((theta - 1.0) / theta_new);
        x = x_new;
        fx = fx_new;
        theta = theta_new;
    }
    Ok((x, fx, opts.max_iterations, grad_map, false))
}

#[allow(clippy::too_many_arguments)]
fn subgradient(
    f: &mut Objective<'_>,
    project: &Projector<'_>,
    class: &DacClassParams,
    m: usize,
    n: usize,
    x0: DVector<f64>,
    f0: f64,
    g0: DVector<f64>,
    opts: &OracleOptions,
) -> Result<Outcome> {
    let h = class.memory;
    let radius: f64 = class.radii().iter().map(|r| r * r * m.min(n) as f64).sum::<f64>().sqrt();
    let mut x = x0.clone();
    let mut g = g0;
    let mut best = x0;
    let mut best_f = f0;
    let mut gnorm = g.norm();
    for k in 0..opts.max_iterations {
        if gnorm < opts.tolerance {
            return Ok((best, best_f, k, gnorm, true));
        }
        let step = radius / (gnorm * ((k + 1) as f64).sqrt());
        x = project(&(&x - &g * step))?;
        let (fx, gx) = f.eval(&DacTensor::from_flat(h, m, n, x.as_slice())?, true)?;
        g = gx.expect("gradient requested");
        gnorm = g.norm();
        if fx < best_f {
            best_f = fx;
            best = x.clone();
        }
    }
    Ok((best, best_f, opts.max_iterations, gnorm, false))
}

/// Per-step cost of the fixed policy `tensor`, zero before `cost_from`.
pub fn replay_costs(
    sys: &LinearSystem,
    gain: &DMatrix<f64>,
    w: &[DVector<f64>],
    cost: CostKind,
    tensor: &DacTensor,
    cost_from: usize,
) -> Result<Vec<f64>> {
    let r = Rollout { a: sys.a(), b: sys.b(), gain, tensor, disturbances: w, cost };
    r.step_costs(&DVector::zeros(sys.state_dim()), 0, w.len() - 1, cost_from)
}

/// Exhaustive search over a grid of spacing at most `step` covering `[-r_i, r_i]`
/// in every coordinate, restricted to the class.
pub fn grid_search(
    sys: &LinearSystem,
    gain: &DMatrix<f64>,
    w: &[DVector<f64>],
    cost: CostKind,
    class: &DacClassParams,
    step: f64,
    cost_from: usize,
) -> Result<(DacTensor, f64)> {
    let (n, m) = (sys.state_dim(), sys.input_dim());
    let d = class.memory * m * n;
    if d > 3 {
        return Err(Error::InvalidDimension(format!("grid search is limited to d <= 3, got {d}")));
    }
    if !(step > 0.0) {
        return Err(Error::Config("grid step must be positive".into()));
    }
    // per-coordinate grid over [-r, r], endpoints included, spacing <= step
    let radii = class.radii();
    let points: Vec<usize> = (0..d).map(|j| (2.0 * radii[j / (m * n)] / step).ceil() as usize + 1).collect();
    let coord = |j: usize, i: usize| {
        let r = radii[j / (m * n)];
        -r + 2.0 * r * i as f64 / (points[j] - 1) as f64
    };
    let mut idx = vec![0usize; d];
    let mut best: Option<(DacTensor, f64)> = None;
    let mut f = Objective { a: sys.a(), b: sys.b(), gain, w, cost, cost_from, evaluations: 0 };
    loop {
        let v: Vec<f64> = idx.iter().enumerate().map(|(j, &i)| coord(j, i)).collect();
        let t = DacTensor::from_flat(class.memory, m, n, &v)?;
        if in_dac_class(class, 0.0, &t, 1e-12) {
            let (c, _) = f.eval(&t, false)?;
            if best.as_ref().map_or(true, |(_, b)| c < *b) {
                best = Some((t, c));
            }
        }
        let mut j = 0;
        loop {
            if j == d {
                return best.ok_or_else(|| Error::Solver("empty grid".into()));
            }
            idx[j] += 1;
            if idx[j] < points[j] {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}
