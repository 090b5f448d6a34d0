//! Identification of unknown dynamics.

mod commit;
mod moments;

pub use commit::{default_explore_steps, ExploreThenCommit, SysIdSettings};
pub use moments::{
    estimate_moments, excitation, explore, least_squares_id, recover, IdMethod, IdentificationReport,
    IdentifiedSystem, MomentEstimates, SysIdConfig, DIVERGENCE_LIMIT, MAX_CONDITION, RIDGE,
};
