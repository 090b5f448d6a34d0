//! Experiment orchestration: seeded repetitions, confidence intervals,
//! hindsight regret and result files.

mod config;
mod export;
mod identify;
mod oracle;
mod presets;
mod regret;
mod run;
mod simulate;
mod stats;

pub use config::{DisturbanceSpec, ExperimentConfig, NoiseKind, OracleSettings, OutputSettings, SystemSpec};
pub use export::{plot_svg, policies_json, results_json, summary_csv, write_atomic, write_outputs};
pub use identify::{run_identification, SeedIdentification};
pub use oracle::{
    best_dac_in_hindsight, disturbance_hash, grid_search, replay_costs, HindsightOracleResult, OracleLog,
    OracleOptions,
};
pub use presets::{grid, preset, GRID_NAMES};
pub use regret::{horizon_ladder, regret_report, AlgorithmRegret, OracleSeedSummary, RegretReport, TrendPoint, COMPARATOR};
pub use run::{
    estimate_loss_bound, oracle_class, run_experiment, run_experiment_with, AlgorithmRun, Progress, RunRecord,
    SeedRun,
};
pub use simulate::simulate;
pub use stats::{mean_ci, running_average, CostSummary};
