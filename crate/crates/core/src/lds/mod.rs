//! Linear dynamical systems, disturbance generators and costs.

mod cost;
mod disturbance;
mod system;
mod trajectory;

pub use cost::CostKind;
pub use disturbance::{DisturbanceGenerator, DisturbanceKind, WalkStep, DEFAULT_DISTURBANCE_BOUND};
pub use system::{LinearSystem, SystemPreset};
pub(crate) use system::hstack;
pub use trajectory::Trajectory;
