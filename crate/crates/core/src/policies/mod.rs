//! Controllers for linear dynamical systems.

mod bpc;
mod controller;
mod dac;
mod fixed;
mod gpc;
mod lqr;
mod registry;
mod settings;

pub use bpc::{BpcConfig, BpcController};
pub use controller::{Controller, PolicySnapshot, StepFeedback};
pub use dac::{
    counterfactual_dac_cost, dac_action, in_dac_class, project_dac_class, DacClassParams, DacPolicy,
    DacTensor, DisturbanceHistory, Rollout, RolloutValue,
};
pub use fixed::FixedDacController;
pub use gpc::{GpcConfig, GpcController, GpcSchedule};
pub use lqr::{lqr_gain, solve_dare, spectral_radius, LqrController, LqrReport, LqrSolution};
pub use registry::{bpc_config, controller_stream, ControllerContext, ControllerFactory, ControllerRegistry};
pub use settings::{BpcSettings, ControllerSettings, DacSettings, GpcSettings};
