//! Simulation laboratory for Bayesian adaptive experimental design on
//! discrete grids.
//!
//! The crate estimates two-parameter response models by maintaining a
//! posterior over a parameter grid, choosing each trial's design either
//! greedily (maximizing one-trial mutual information) or by exact multi-trial
//! backward induction, and measuring what the extra lookahead buys: per-trial
//! parameter MSE, cumulative information gain, and the per-design
//! decomposition of the two-trial objective with its utility-difference
//! statistics.
//!
//! Module map:
//! - [`grid`]: axes, parameter/design grids, grid distributions.
//! - [`models`]: the three response models and the likelihood tensor.
//! - [`strategy`]: utilities, posterior updates, exact lookahead solving.
//! - [`diagnostics`]: lookahead-vs-greedy decomposition and the brute-force
//!   policy oracle.
//! - [`sim`]: replication campaigns and metric aggregation.
//! - [`config`]: declarative TOML configs and bundled presets.
//! - [`report`]: CSV emission and run manifests.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod models;
pub mod report;
pub mod sim;
pub mod strategy;

pub use config::{all_presets, emit_config, parse_config, preset, ExperimentConfig, ModelKind};
pub use diagnostics::{
    brute_force_policy_oracle, oracle_battery, random_binary_instance, two_trial_decomposition,
    utility_difference, utility_stats, Decomposition, UtilityStats, ORACLE_POLICY_LIMIT,
};
pub use error::{Error, Result};
pub use grid::{range_width, AxisSpec, DesignGrid, GridDistribution, ParameterGrid};
pub use models::{standard_normal_cdf, LikelihoodTensor, ResponseModel, ResponseSpace};
pub use report::{comparison_csv, curves_csv, metrics_csv, write_text, Conventions, RunManifest};
pub use sim::{
    compare_strategies, simulate_response, Campaign, CurveSnapshot, DiagnosticsRow,
    DiagnosticsSpec, MetricsTable, ReplicationOutcome, RunPlan, StrategyRun, TrialMetrics,
    TrialRecord,
};
pub use strategy::{
    bayes_update, bellman_solve, bellman_solve_with_budget, mutual_information, myopic_design,
    policy_walk, predictive_pmf, step_ahead_design, utility_curve, HorizonSpec, PolicyTree,
    Strategy, DEFAULT_NODE_BUDGET,
};
