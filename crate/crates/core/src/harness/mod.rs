//! Experiment orchestration: config, train/eval loops, metric files and
//! cross-seed agent comparison.

mod config;
mod metrics;
mod runner;

pub use config::{ExperimentConfig, OutputFormat, RunConfig};
pub use metrics::{
    fmt_sig, write_episode_csv, write_tti_csv, EpisodeRow, MetricsRow, Phase, PhaseSummary, EPISODE_HEADER, TTI_HEADER,
};
pub use runner::{
    compare_agents, config_hash, git_style_hash, run_experiment, run_experiment_from, simulate, write_tables,
    ComparisonRow, Manifest, RunArtifacts, RunOutcome, Stat, DEFAULT_COMPARE_SEEDS, MANIFEST_VERSION, RNG_DESCRIPTION,
};
