//! Infinite-horizon discrete LQR via Riccati fixed-point iteration.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::controller::{Controller, PolicySnapshot, StepFeedback};
use super::dac::matrix_rows;
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100_000;
const TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LqrSolution {
    pub p: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub iterations: usize,
    /// Frobenius norm of `P - riccati(P)`.
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LqrReport {
    pub gain: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub residual: f64,
    pub iterations: usize,
    pub closed_loop_spectral_radius: f64,
}

impl LqrSolution {
    pub fn report(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> LqrReport {
        LqrReport {
            gain: matrix_rows(&self.gain),
            p: matrix_rows(&self.p),
            residual: self.residual,
            iterations: self.iterations,
            closed_loop_spectral_radius: spectral_radius(&(a - b * &self.gain)),
        }
    }
}

/// `Q + A'PA - A'PB (R + B'PB)^{-1} B'PA` and the matching gain.
fn riccati_map(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let bt_p = b.transpose() * p;
    let s = r + &bt_p * b;
    let gain = s
        .cholesky()
        .ok_or_else(|| Error::Solver("R + B'PB lost positive definiteness".into()))?
        .solve(&(&bt_p * a));
    let at_p = a.transpose() * p;
    let next = q + &at_p * a - &at_p * b * &gain;
    // symmetrize to stop round-off drift
    Ok(((&next + next.transpose()) * 0.5, gain))
}

/// Solves the discrete algebraic Riccati equation from `P_0 = Q`.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<LqrSolution> {
    let (n, m) = (a.nrows(), b.ncols());
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::Shape("inconsistent Riccati dimensions".into()));
    }
    if r.clone().cholesky().is_none() {
        return Err(Error::Input("R must be symmetric positive definite".into()));
    }
    let mut p = q.clone();
    for iteration in 1..=MAX_ITERATIONS {
        let (next, _) = riccati_map(a, b, q, r, &p)?;
        let diff = (&next - &p).norm();
        if !diff.is_finite() {
            return Err(Error::Solver(format!(
                "Riccati iteration diverged after {iteration} steps (is (A, B) stabilizable?)"
            )));
        }
        p = next;
        if diff <= TOLERANCE * p.norm().max(1.0) {
            let (fixed, gain) = riccati_map(a, b, q, r, &p)?;
            let residual = (&fixed - &p).norm();
            return Ok(LqrSolution {
                p,
                gain,
                q: q.clone(),
                r: r.clone(),
                iterations: iteration,
                residual,
            });
        }
    }
    Err(Error::Solver(format!(
        "Riccati iteration did not converge in {MAX_ITERATIONS} steps"
    )))
}

/// LQR with `Q = I`, `R = I`.
pub fn lqr_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<LqrSolution> {
    let (n, m) = (a.nrows(), b.ncols());
    solve_dare(a, b, &DMatrix::identity(n, n), &DMatrix::identity(m, m))
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Static feedback `u = -K x`.
#[derive(Debug, Clone)]
pub struct LqrController {
    gain: DMatrix<f64>,
}

impl LqrController {
    pub fn new(gain: DMatrix<f64>) -> Self {
        Self { gain }
    }
}

impl Controller for LqrController {
    fn name(&self) -> &str {
        "lqr"
    }

    fn act(&mut self, _t: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.gain.ncols() {
            return Err(Error::Shape(format!(
                "state has {} coordinates, K expects {}",
                x.len(),
                self.gain.ncols()
            )));
        }
        Ok(-(&self.gain * x))
    }

    fn observe(&mut self, _feedback: &StepFeedback<'_>) -> Result<()> {
        Ok(())
    }

    fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot::new("lqr", &self.gain, None)
    }
}
