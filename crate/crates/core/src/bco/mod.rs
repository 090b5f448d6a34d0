//! Bandit convex optimization with memory.
//!
//! The learner sees only the scalar loss of the last `H` played points. Each
//! round it plays `y_t = x_t + delta u_t` with `u_t` uniform on the unit
//! sphere, forms the one-point estimate `(d / delta) f_t sum(u_{t-H+1..=t})`,
//! and applies it `H - 1` rounds late so that the estimate is independent of
//! the directions still inside the window.

mod optimizer;
mod regret;
mod sets;
mod sphere;

pub use optimizer::{gradient_estimate, BcoConfig, BcoOptimizer, Schedule};
pub use regret::{play, regret_vs_fixed_point, BcoTrace, MemoryLoss};
pub use sets::{
    clip_singular_values, project_spectral_ball, spectral_norm, ConvexSet, DecisionSet,
    MinkowskiSubset, SetShape, SpectralFactor,
};
pub use sphere::sample_unit_sphere;
