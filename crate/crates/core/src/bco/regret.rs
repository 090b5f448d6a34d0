use nalgebra::DVector;

use super::optimizer::BcoOptimizer;
use crate::error::{Error, Result};

/// A loss with memory `f_t(x_{t-H+1}, ..., x_t)` evaluated on a window, oldest first.
///
/// Full-information access is only for benchmarks and regret accounting; the
/// optimizer itself only ever sees the scalar value.
pub trait MemoryLoss {
    fn eval(&self, t: usize, window: &[&DVector<f64>]) -> f64;
}

impl<F> MemoryLoss for F
where
    F: Fn(usize, &[&DVector<f64>]) -> f64,
{
    fn eval(&self, t: usize, window: &[&DVector<f64>]) -> f64 {
        self(t, window)
    }
}

/// Record of a bandit run against a [`MemoryLoss`].
#[derive(Debug, Clone, Default)]
pub struct BcoTrace {
    pub played: Vec<DVector<f64>>,
    pub centers: Vec<DVector<f64>>,
    /// `losses[t]` is `f_t` on the played window; zero for `t < H`.
    pub losses: Vec<f64>,
}

/// Plays `horizon + 1` rounds (`t = 0..=horizon`), feeding back only scalars.
pub fn play<L: MemoryLoss + ?Sized>(
    opt: &mut BcoOptimizer,
    loss: &L,
    horizon: usize,
) -> Result<BcoTrace> {
    let memory = opt.config().memory;
    let mut trace = BcoTrace::default();
    for t in 0..=horizon {
        trace.played.push(opt.played().clone());
        trace.centers.push(opt.center().clone());
        let value = if t >= memory {
            let window: Vec<&DVector<f64>> = trace.played[t + 1 - memory..=t].iter().collect();
            loss.eval(t, &window)
        } else {
            0.0
        };
        trace.losses.push(value);
        opt.step(value)?;
    }
    Ok(trace)
}

/// `sum_{t=H}^{T} f_t(y_{t-H+1..=t}) - sum_{t=H}^{T} f_t(x_ref, ..., x_ref)`.
pub fn regret_vs_fixed_point<L: MemoryLoss + ?Sized>(
    played: &[DVector<f64>],
    loss: &L,
    x_ref: &DVector<f64>,
    memory: usize,
) -> Result<f64> {
    if memory == 0 {
        return Err(Error::Input("memory must be >= 1".into()));
    }
    if played.len() < memory {
        return Err(Error::InsufficientData(format!(
            "trace of length {} is shorter than the memory {memory}",
            played.len()
        )));
    }
    let constant: Vec<&DVector<f64>> = vec![x_ref; memory];
    let mut regret = 0.0;
    for t in memory..played.len() {
        let window: Vec<&DVector<f64>> = played[t + 1 - memory..=t].iter().collect();
        regret += loss.eval(t, &window) - loss.eval(t, &constant);
    }
    Ok(regret)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(_: usize, w: &[&DVector<f64>]) -> f64 {
        w.iter().map(|x| x.norm_squared()).sum()
    }

    #[test]
    fn constant_sequence_has_zero_regret() {
        let x = DVector::from_vec(vec![0.3, -0.2]);
        let played = vec![x.clone(); 10];
        assert_eq!(regret_vs_fixed_point(&played, &quadratic, &x, 3).unwrap(), 0.0);
    }

    #[test]
    fn constant_loss_has_zero_regret() {
        let played: Vec<_> = (0..10).map(|i| DVector::from_element(2, i as f64)).collect();
        let one = |_: usize, _: &[&DVector<f64>]| 1.0;
        let r = regret_vs_fixed_point(&played, &one, &DVector::zeros(2), 2).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn short_trace_is_rejected() {
        let played = vec![DVector::zeros(2); 2];
        assert!(matches!(
            regret_vs_fixed_point(&played, &quadratic, &DVector::zeros(2), 3),
            Err(Error::InsufficientData(_))
        ));
    }
}
