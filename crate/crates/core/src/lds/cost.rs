use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convex, nonnegative per-step costs `c(x, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    /// `|x|^2 + |u|^2`.
    Quadratic,
    /// `|x|_1 + |u|_1`.
    L1,
    /// `|x|_inf + |u|_inf`.
    Linf,
    /// `|max(0, x)|_1 + |max(0, u)|_1`.
    Relu,
}

impl CostKind {
    pub const ALL: [CostKind; 4] = [CostKind::Quadratic, CostKind::L1, CostKind::Linf, CostKind::Relu];

    pub fn name(self) -> &'static str {
        match self {
            CostKind::Quadratic => "quadratic",
            CostKind::L1 => "l1",
            CostKind::Linf => "linf",
            CostKind::Relu => "relu",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown cost kind '{name}'")))
    }

    pub fn is_smooth(self) -> bool {
        self == CostKind::Quadratic
    }

    pub fn eval(self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.part(x) + self.part(u)
    }

    fn part(self, v: &DVector<f64>) -> f64 {
        match self {
            CostKind::Quadratic => v.norm_squared(),
            CostKind::L1 => v.lp_norm(1),
            CostKind::Linf => v.amax(),
            CostKind::Relu => v.iter().map(|e| e.max(0.0)).sum(),
        }
    }

    /// A fixed element of the subdifferential with respect to `(x, u)`.
    ///
    /// Kinks resolve deterministically: `sign(0) = 0`, the ReLU derivative at
    /// 0 is 0, and the `linf` argmax tie goes to the lowest index.
    pub fn subgradient(self, x: &DVector<f64>, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (self.part_grad(x), self.part_grad(u))
    }

    fn part_grad(self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            CostKind::Quadratic => v * 2.0,
            CostKind::L1 => v.map(sign),
            CostKind::Relu => v.map(|e| if e > 0.0 { 1.0 } else { 0.0 }),
            CostKind::Linf => {
                let mut g = DVector::zeros(v.len());
                let mut best = 0usize;
                for i in 1..v.len() {
                    if v[i].abs() > v[best].abs() {
                        best = i;
                    }
                }
                if !v.is_empty() {
                    g[best] = sign(v[best]);
                }
                g
            }
        }
    }
}

fn sign(e: f64) -> f64 {
    if e > 0.0 {
        1.0
    } else if e < 0.0 {
        -1.0
    } else {
        0.0
    }
}
