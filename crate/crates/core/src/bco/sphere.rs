use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Uniform sample from the unit sphere in `d` dimensions (normalized Gaussian).
pub fn sample_unit_sphere<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<DVector<f64>> {
    if d == 0 {
        return Err(Error::InvalidDimension("sphere dimension must be >= 1".into()));
    }
    loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > f64::MIN_POSITIVE {
            return Ok(v / norm);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn one_dimensional_samples_are_signs() {
        let mut rng = seeded(3);
        for _ in 0..100 {
            let u = sample_unit_sphere(&mut rng, 1).unwrap();
            assert!(u[0] == 1.0 || u[0] == -1.0);
        }
    }

    #[test]
    fn samples_have_unit_norm() {
        let mut rng = seeded(11);
        for d in [2, 3, 7, 40] {
            for _ in 0..200 {
                let u = sample_unit_sphere(&mut rng, d).unwrap();
                assert!((u.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(matches!(
            sample_unit_sphere(&mut seeded(0), 0),
            Err(Error::InvalidDimension(_))
        ));
    }
}
