//! Convex decision sets and their Minkowski shrinkage.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One matrix block of a product of operator-norm balls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFactor {
    pub rows: usize,
    pub cols: usize,
    pub radius: f64,
}

impl SpectralFactor {
    fn len(&self) -> usize {
        self.rows * self.cols
    }

    /// Largest Frobenius norm attainable inside the operator-norm ball.
    fn frobenius_radius(&self) -> f64 {
        self.radius * (self.rows.min(self.cols) as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SetShape {
    /// Origin-centered Euclidean ball.
    Ball { radius: f64 },
    /// Origin-symmetric box `|x_i| <= half_widths[i]`.
    Box { half_widths: Vec<f64> },
    /// Cartesian product of operator-norm balls over row-major matrix blocks.
    SpectralProduct { factors: Vec<SpectralFactor> },
}

/// A bounded convex set containing the origin-centered unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSet {
    dim: usize,
    shape: SetShape,
    diameter: f64,
}

/// Projection onto a convex set plus a membership test.
pub trait ConvexSet {
    fn dim(&self) -> usize;

    fn project(&self, p: &DVector<f64>) -> Result<DVector<f64>>;

    fn contains(&self, p: &DVector<f64>, tol: f64) -> bool;
}

impl DecisionSet {
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("ball dimension must be >= 1".into()));
        }
        if !radius.is_finite() || radius < 1.0 {
            return Err(Error::DecisionSet(format!(
                "ball radius {radius} does not contain the unit ball"
            )));
        }
        Ok(Self {
            dim,
            shape: SetShape::Ball { radius },
            diameter: 2.0 * radius,
        })
    }

    pub fn cube(half_widths: Vec<f64>) -> Result<Self> {
        if half_widths.is_empty() {
            return Err(Error::InvalidDimension("box dimension must be >= 1".into()));
        }
        if let Some(h) = half_widths.iter().find(|h| !h.is_finite() || **h < 1.0) {
            return Err(Error::DecisionSet(format!(
                "box half-width {h} does not contain the unit ball"
            )));
        }
        let diameter = 2.0 * half_widths.iter().map(|h| h * h).sum::<f64>().sqrt();
        Ok(Self {
            dim: half_widths.len(),
            shape: SetShape::Box { half_widths },
            diameter,
        })
    }

    pub fn spectral_product(factors: Vec<SpectralFactor>) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(|f| f.len() == 0) {
            return Err(Error::InvalidDimension(
                "spectral product needs non-empty factors".into(),
            ));
        }
        if let Some(f) = factors.iter().find(|f| !f.radius.is_finite() || f.radius < 1.0) {
            return Err(Error::DecisionSet(format!(
                "operator-norm radius {} does not contain the unit ball",
                f.radius
            )));
        }
        let dim = factors.iter().map(SpectralFactor::len).sum();
        let diameter = 2.0
            * factors
                .iter()
                .map(|f| f.frobenius_radius().powi(2))
                .sum::<f64>()
                .sqrt();
        Ok(Self {
            dim,
            shape: SetShape::SpectralProduct { factors },
            diameter,
        })
    }

    pub fn shape(&self) -> &SetShape {
        &self.shape
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// The shrunk set `{x in K : x / (1 - delta) in K}`.
    pub fn shrink(&self, delta: f64) -> Result<MinkowskiSubset> {
        MinkowskiSubset::new(self.clone(), delta)
    }

    fn project_scaled(&self, p: &DVector<f64>, scale: f64) -> Result<DVector<f64>> {
        check_input(self.dim, p)?;
        Ok(match &self.shape {
            SetShape::Ball { radius } => {
                let r = radius * scale;
                let norm = p.norm();
                if norm <= r {
                    p.clone()
                } else {
                    p * (r / norm)
                }
            }
            SetShape::Box { half_widths } => DVector::from_iterator(
                self.dim,
                p.iter()
                    .zip(half_widths)
                    .map(|(v, h)| v.clamp(-h * scale, h * scale)),
            ),
            SetShape::SpectralProduct { factors } => {
                let mut out = p.clone();
                let mut offset = 0;
                for f in factors {
                    let block = block_matrix(p, offset, f.rows, f.cols);
                    if let Some(clipped) = clip_singular_values(&block, f.radius * scale) {
                        write_block(&mut out, offset, &clipped);
                    }
                    offset += f.len();
                }
                out
            }
        })
    }

    fn contains_scaled(&self, p: &DVector<f64>, scale: f64, tol: f64) -> bool {
        if p.len() != self.dim || p.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.shape {
            SetShape::Ball { radius } => p.norm() <= radius * scale + tol,
            SetShape::Box { half_widths } => p
                .iter()
                .zip(half_widths)
                .all(|(v, h)| v.abs() <= h * scale + tol),
            SetShape::SpectralProduct { factors } => {
                let mut offset = 0;
                factors.iter().all(|f| {
                    let block = block_matrix(p, offset, f.rows, f.cols);
                    offset += f.len();
                    spectral_norm(&block) <= f.radius * scale + tol
                })
            }
        }
    }
}

impl ConvexSet for DecisionSet {
    fn dim(&self) -> usize {
        self.dim
    }

    fn project(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        self.project_scaled(p, 1.0)
    }

    fn contains(&self, p: &DVector<f64>, tol: f64) -> bool {
        self.contains_scaled(p, 1.0, tol)
    }
}

/// `K_delta`: the parent set scaled by `1 - delta`.
///
/// Exact for the supported shapes because all of them are origin-symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiSubset {
    parent: DecisionSet,
    delta: f64,
}

impl MinkowskiSubset {
    pub fn new(parent: DecisionSet, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Input(format!("shrink factor {delta} not in (0, 1)")));
        }
        Ok(Self { parent, delta })
    }

    pub fn parent(&self) -> &DecisionSet {
        &self.parent
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl ConvexSet for MinkowskiSubset {
    fn dim(&self) -> usize {
        self.parent.dim
    }

    fn project(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        self.parent.project_scaled(p, 1.0 - self.delta)
    }

    fn contains(&self, p: &DVector<f64>, tol: f64) -> bool {
        self.parent.contains_scaled(p, 1.0 - self.delta, tol)
    }
}

fn check_input(dim: usize, p: &DVector<f64>) -> Result<()> {
    if p.len() != dim {
        return Err(Error::Shape(format!(
            "point has {} coordinates, set has {dim}",
            p.len()
        )));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericInput("projection input is not finite".into()));
    }
    Ok(())
}

fn block_matrix(p: &DVector<f64>, offset: usize, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, &p.as_slice()[offset..offset + rows * cols])
}

fn write_block(out: &mut DVector<f64>, offset: usize, m: &DMatrix<f64>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out[offset + r * m.ncols() + c] = m[(r, c)];
        }
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.singular_values().max()
}

/// Frobenius-nearest matrix with every singular value at most `radius`.
///
/// Returns `None` when `m` is already inside the ball.
pub fn clip_singular_values(m: &DMatrix<f64>, radius: f64) -> Option<DMatrix<f64>> {
    if m.nrows() == 1 || m.ncols() == 1 {
        let norm = m.norm();
        return (norm > radius).then(|| m * (radius / norm));
    }
    let svd = m.clone().svd(true, true);
    if svd.singular_values.max() <= radius {
        return None;
    }
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let clipped = DMatrix::from_diagonal(&svd.singular_values.map(|s| s.min(radius)));
    Some(u * clipped * v_t)
}

/// Operator-norm projection of a full matrix, for callers outside the flat API.
pub fn project_spectral_ball(m: &DMatrix<f64>, radius: f64) -> DMatrix<f64> {
    clip_singular_values(m, radius).unwrap_or_else(|| m.clone())
}
