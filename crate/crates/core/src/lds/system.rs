use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bco::spectral_norm;
use crate::error::{Error, Result};

/// `x_{t+1} = A x_t + B u_t + w_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    kappa_a: f64,
    kappa_b: f64,
}

impl LinearSystem {
    /// Builds a system whose norm bounds are the exact operator norms.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let (ka, kb) = (spectral_norm(&a), spectral_norm(&b));
        Self::with_bounds(a, b, ka, kb)
    }

    pub fn with_bounds(a: DMatrix<f64>, b: DMatrix<f64>, kappa_a: f64, kappa_b: f64) -> Result<Self> {
        if a.nrows() == 0 || a.nrows() != a.ncols() {
            return Err(Error::Shape(format!("A must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != a.nrows() || b.ncols() == 0 {
            return Err(Error::Shape(format!(
                "B must be {}xm, got {}x{}",
                a.nrows(),
                b.nrows(),
                b.ncols()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericInput("dynamics contain non-finite entries".into()));
        }
        let tol = 1e-12;
        let (na, nb) = (spectral_norm(&a), spectral_norm(&b));
        if na > kappa_a * (1.0 + tol) + tol || nb > kappa_b * (1.0 + tol) + tol {
            return Err(Error::Input(format!(
                "norm bounds violated: |A| = {na} (bound {kappa_a}), |B| = {nb} (bound {kappa_b})"
            )));
        }
        Ok(Self { a, b, kappa_a, kappa_b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn kappa_a(&self) -> f64 {
        self.kappa_a
    }

    pub fn kappa_b(&self) -> f64 {
        self.kappa_b
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.state_dim();
        if x.len() != n || w.len() != n || u.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "step expects x,w in R^{n} and u in R^{}, got {}, {}, {}",
                self.input_dim(),
                x.len(),
                w.len(),
                u.len()
            )));
        }
        Ok(&self.a * x + &self.b * u + w)
    }

    /// `x_next - A x - B u`.
    pub fn residual(&self, x: &DVector<f64>, u: &DVector<f64>, x_next: &DVector<f64>) -> DVector<f64> {
        x_next - &self.a * x - &self.b * u
    }

    /// Smallest `k` with `[B, AB, ..., A^{k-1} B]` of full row rank, up to `n`.
    pub fn controllability_index(&self) -> Option<usize> {
        let n = self.state_dim();
        let mut blocks = Vec::new();
        let mut power = self.b.clone();
        for k in 1..=n {
            blocks.push(power.clone());
            let c = hstack(&blocks);
            if rank(&c, 1e-9) == n {
                return Some(k);
            }
            power = &self.a * power;
        }
        None
    }
}

pub(crate) fn hstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        out.view_mut((0, c0), (rows, b.ncols())).copy_from(b);
        c0 += b.ncols();
    }
    out
}

fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * max).count()
}

/// Named dynamics shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemPreset {
    /// `A = [[1,1],[0,1]], B = [0;1]`.
    DoubleIntegrator,
    /// Sparse 5-state / 3-input system.
    Sparse5x3,
    /// Double integrator with `A` scaled by 0.4 and `B` by 0.9 so both have
    /// nuclear norm below one.
    ScaledDoubleIntegrator,
    /// `A = 0.9, B = 1`.
    Toy1d,
}

impl SystemPreset {
    pub const ALL: [SystemPreset; 4] = [
        SystemPreset::DoubleIntegrator,
        SystemPreset::Sparse5x3,
        SystemPreset::ScaledDoubleIntegrator,
        SystemPreset::Toy1d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemPreset::DoubleIntegrator => "double-integrator",
            SystemPreset::Sparse5x3 => "sparse-5x3",
            SystemPreset::ScaledDoubleIntegrator => "scaled-double-integrator",
            SystemPreset::Toy1d => "toy-1d",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown system preset '{name}' (known: {})",
                    Self::ALL.map(|p| p.name()).join(", ")
                ))
            })
    }

    pub fn build(self) -> LinearSystem {
        let (a, b) = match self {
            SystemPreset::DoubleIntegrator => (
                DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
                DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            ),
            SystemPreset::Sparse5x3 => {
                let mut a = DMatrix::zeros(5, 5);
                a[(0, 0)] = 0.9;
                for i in 0..4 {
                    a[(i, i + 1)] = 0.5;
                }
                let mut b = DMatrix::zeros(5, 3);
                b[(0, 0)] = 1.0;
                b[(2, 1)] = 1.0;
                b[(4, 2)] = 1.0;
                (a, b)
            }
            SystemPreset::ScaledDoubleIntegrator => (
                DMatrix::from_row_slice(2, 2, &[0.4, 0.4, 0.0, 0.4]),
                DMatrix::from_row_slice(2, 1, &[0.0, 0.9]),
            ),
            SystemPreset::Toy1d => (
                DMatrix::from_element(1, 1, 0.9),
                DMatrix::from_element(1, 1, 1.0),
            ),
        };
        LinearSystem::new(a, b).expect("preset dynamics are well-formed")
    }
}
