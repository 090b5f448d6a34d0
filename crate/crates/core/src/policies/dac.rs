//! Disturbance-action policies `u_t = -K x_t + sum_{i=1}^{H} M^[i] w_{t-i}`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bco::{project_spectral_ball, spectral_norm, SpectralFactor};
use crate::error::{Error, Result};
use crate::lds::CostKind;

/// Parameters of the class `{M : |M^[i]| <= kappa^3 kappa_B (1 - gamma)^i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DacClassParams {
    pub kappa: f64,
    pub gamma: f64,
    pub kappa_b: f64,
    pub memory: usize,
}

impl DacClassParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa_b > 0.0) {
            return Err(Error::Config("kappa and kappa_B must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma = {} not in (0, 1)", self.gamma)));
        }
        if self.memory == 0 {
            return Err(Error::Config("DAC memory must be >= 1".into()));
        }
        Ok(())
    }

    /// Operator-norm radii `r_1, ..., r_H`.
    pub fn radii(&self) -> Vec<f64> {
        let base = self.kappa.powi(3) * self.kappa_b;
        (1..=self.memory)
            .map(|i| base * (1.0 - self.gamma).powi(i as i32))
            .collect()
    }

    /// Factor layout of the flattened class, with radii divided by `scale`.
    pub fn factors(&self, rows: usize, cols: usize, scale: f64) -> Vec<SpectralFactor> {
        self.radii()
            .into_iter()
            .map(|r| SpectralFactor { rows, cols, radius: r / scale })
            .collect()
    }
}

/// `H` matrices of shape `m x n`, flattened matrix by matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DacTensor {
    mats: Vec<DMatrix<f64>>,
}

impl DacTensor {
    pub fn zeros(memory: usize, m: usize, n: usize) -> Self {
        Self { mats: vec![DMatrix::zeros(m, n); memory] }
    }

    pub fn from_matrices(mats: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| Error::Shape("DAC tensor needs at least one matrix".into()))?;
        let shape = first.shape();
        if mats.iter().any(|m| m.shape() != shape) {
            return Err(Error::Shape("DAC matrices must share one shape".into()));
        }
        Ok(Self { mats })
    }

    pub fn from_flat(memory: usize, m: usize, n: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != memory * m * n {
            return Err(Error::Shape(format!(
                "flat tensor has {} entries, expected {}",
                flat.len(),
                memory * m * n
            )));
        }
        let mats = flat
            .chunks(m * n)
            .map(|c| DMatrix::from_row_slice(m, n, c))
            .collect();
        Ok(Self { mats })
    }

    pub fn flatten(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for mat in &self.mats {
            for r in 0..mat.nrows() {
                for c in 0..mat.ncols() {
                    out.push(mat[(r, c)]);
                }
            }
        }
        DVector::from_vec(out)
    }

    pub fn memory(&self) -> usize {
        self.mats.len()
    }

    pub fn rows(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.mats[0].ncols()
    }

    pub fn dim(&self) -> usize {
        self.memory() * self.rows() * self.cols()
    }

    /// `M^[i]` for `i = 1..=H`.
    pub fn get(&self, i: usize) -> &DMatrix<f64> {
        &self.mats[i - 1]
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.mats
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { mats: self.mats.iter().map(|m| m * s).collect() }
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        self.mats.iter().map(matrix_rows).collect()
    }

    /// `sum_i M^[i] w_{t-i}` where `history[i-1] = w_{t-i}`; missing entries are zero.
    pub fn apply(&self, history: &DisturbanceHistory) -> Result<DVector<f64>> {
        let mut u = DVector::zeros(self.rows());
        for (i, w) in history.recent().iter().take(self.memory()).enumerate() {
            if w.len() != self.cols() {
                return Err(Error::Shape(format!(
                    "disturbance has {} coordinates, DAC expects {}",
                    w.len(),
                    self.cols()
                )));
            }
            u += &self.mats[i] * w;
        }
        Ok(u)
    }
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

/// The most recent disturbances, newest first.
#[derive(Debug, Clone, Default)]
pub struct DisturbanceHistory {
    recent: VecDeque<DVector<f64>>,
    capacity: usize,
}

impl DisturbanceHistory {
    pub fn new(capacity: usize) -> Self {
        Self { recent: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, w: DVector<f64>) {
        if self.recent.len() == self.capacity {
            self.recent.pop_back();
        }
        self.recent.push_front(w);
    }

    /// `recent()[i - 1] = w_{t-i}`.
    pub fn recent(&self) -> &VecDeque<DVector<f64>> {
        &self.recent
    }

    pub fn last(&self) -> Option<&DVector<f64>> {
        self.recent.front()
    }
}

/// A fixed disturbance-action controller.
#[derive(Debug, Clone, PartialEq)]
pub struct DacPolicy {
    pub gain: DMatrix<f64>,
    pub tensor: DacTensor,
}

impl DacPolicy {
    pub fn new(gain: DMatrix<f64>, tensor: DacTensor) -> Result<Self> {
        if gain.nrows() != tensor.rows() || gain.ncols() != tensor.cols() {
            return Err(Error::Shape(format!(
                "K is {}x{} but M matrices are {}x{}",
                gain.nrows(),
                gain.ncols(),
                tensor.rows(),
                tensor.cols()
            )));
        }
        Ok(Self { gain, tensor })
    }

    pub fn action(&self, x: &DVector<f64>, history: &DisturbanceHistory) -> Result<DVector<f64>> {
        dac_action(&self.gain, &self.tensor, x, history)
    }
}

/// `-K x + sum_{i=1}^{H} M^[i] w_{t-i}`.
pub fn dac_action(
    gain: &DMatrix<f64>,
    tensor: &DacTensor,
    x: &DVector<f64>,
    history: &DisturbanceHistory,
) -> Result<DVector<f64>> {
    if x.len() != gain.ncols() {
        return Err(Error::Shape(format!(
            "state has {} coordinates, K expects {}",
            x.len(),
            gain.ncols()
        )));
    }
    Ok(tensor.apply(history)? - gain * x)
}

/// Projects each `M^[i]` onto the operator-norm ball of radius `(1 - delta) r_i`.
pub fn project_dac_class(params: &DacClassParams, delta: f64, tensor: &DacTensor) -> Result<DacTensor> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Input(format!("shrink {delta} not in [0, 1)")));
    }
    if tensor.memory() != params.memory {
        return Err(Error::Shape(format!(
            "tensor has {} matrices, class has memory {}",
            tensor.memory(),
            params.memory
        )));
    }
    let mats = tensor
        .matrices()
        .iter()
        .zip(params.radii())
        .map(|(m, r)| project_spectral_ball(m, (1.0 - delta) * r))
        .collect();
    Ok(DacTensor { mats })
}

/// True when every `|M^[i]| <= (1 - delta) r_i + tol`.
pub fn in_dac_class(params: &DacClassParams, delta: f64, tensor: &DacTensor, tol: f64) -> bool {
    tensor.memory() == params.memory
        && tensor
            .matrices()
            .iter()
            .zip(params.radii())
            .all(|(m, r)| spectral_norm(m) <= (1.0 - delta) * r + tol)
}

/// Inputs of a fixed-policy replay.
pub struct Rollout<'a> {
    pub a: &'a DMatrix<f64>,
    pub b: &'a DMatrix<f64>,
    pub gain: &'a DMatrix<f64>,
    pub tensor: &'a DacTensor,
    /// Disturbances indexed by absolute time; negative times read as zero.
    pub disturbances: &'a [DVector<f64>],
    pub cost: CostKind,
}

#[derive(Debug, Clone)]
pub struct RolloutValue {
    pub cost: f64,
    pub gradient: Option<DVector<f64>>,
}

impl Rollout<'_> {
    fn w(&self, tau: isize) -> Option<&DVector<f64>> {
        (tau >= 0).then(|| &self.disturbances[tau as usize])
    }

    /// Replays `x_{start} = x_start`, acting at `start..=end`, and sums the
    /// cost of steps `cost_from..=end`. With `gradient`, also returns the
    /// derivative of that sum with respect to the flattened tensor (a
    /// subgradient for non-smooth costs).
    pub fn run(
        &self,
        x_start: &DVector<f64>,
        start: usize,
        end: usize,
        cost_from: usize,
        gradient: bool,
    ) -> Result<RolloutValue> {
        self.run_inner(x_start, start, end, cost_from, gradient, None)
    }

    /// Like [`Rollout::run`] without gradients, also returning each counted
    /// step's cost (zero before `cost_from`).
    pub fn step_costs(&self, x_start: &DVector<f64>, start: usize, end: usize, cost_from: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; end + 1 - start.min(end + 1)];
        self.run_inner(x_start, start, end, cost_from, false, Some(&mut out))?;
        Ok(out)
    }

    fn run_inner(
        &self,
        x_start: &DVector<f64>,
        start: usize,
        end: usize,
        cost_from: usize,
        gradient: bool,
        mut record: Option<&mut Vec<f64>>,
    ) -> Result<RolloutValue> {
        if end >= self.disturbances.len() {
            return Err(Error::InsufficientData(format!(
                "rollout to t={end} needs {} disturbances, have {}",
                end + 1,
                self.disturbances.len()
            )));
        }
        let (n, m) = (self.a.nrows(), self.b.ncols());
        let memory = self.tensor.memory();
        let d = self.tensor.dim();
        let mut x = x_start.clone();
        let mut jx = DMatrix::<f64>::zeros(n, if gradient { d } else { 0 });
        let mut total = 0.0;
        let mut grad = DVector::<f64>::zeros(if gradient { d } else { 0 });
        for s in start..=end {
            let mut u = -(self.gain * &x);
            let mut ju = if gradient { -(self.gain * &jx) } else { DMatrix::zeros(m, 0) };
            for i in 1..=memory {
                if let Some(w) = self.w(s as isize - i as isize) {
                    u += self.tensor.get(i) * w;
                    if gradient {
                        let base = (i - 1) * m * n;
                        for r in 0..m {
                            for c in 0..n {
                                ju[(r, base + r * n + c)] += w[c];
                            }
                        }
                    }
                }
            }
            if s >= cost_from {
                let c = self.cost.eval(&x, &u);
                total += c;
                if let Some(rec) = record.as_deref_mut() {
                    rec[s - start] = c;
                }
                if gradient {
                    let (gx, gu) = self.cost.subgradient(&x, &u);
                    grad += jx.tr_mul(&gx) + ju.tr_mul(&gu);
                }
            }
            if s < end {
                x = self.a * &x + self.b * &u + &self.disturbances[s];
                if gradient {
                    jx = self.a * &jx + self.b * &ju;
                }
            }
        }
        Ok(RolloutValue { cost: total, gradient: gradient.then_some(grad) })
    }
}

/// `J_T(M | w)`: total cost of the fixed policy from `x_0 = 0`.
pub fn counterfactual_dac_cost(
    tensor: &DacTensor,
    gain: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    disturbances: &[DVector<f64>],
    cost: CostKind,
) -> Result<f64> {
    if disturbances.is_empty() {
        return Err(Error::InsufficientData("empty disturbance sequence".into()));
    }
    let rollout = Rollout { a, b, gain, tensor, disturbances, cost };
    let x0 = DVector::zeros(a.nrows());
    Ok(rollout.run(&x0, 0, disturbances.len() - 1, 0, false)?.cost)
}
