use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, AgentKind};
use crate::env::EnvConfig;
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Training episodes.
    pub episodes: usize,
    /// Frozen-policy episodes after training.
    pub eval_episodes: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            episodes: 100,
            eval_episodes: 20,
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            format: OutputFormat::Csv,
        }
    }
}

/// Everything a run needs; the JSON form is the config file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    /// Small world used for agent comparisons: 2500 m square, two fire
    /// areas of four UEs, 50-TTI episodes, 60 training + 20 eval episodes.
    pub fn toy(kind: AgentKind) -> Self {
        let mut cfg = ExperimentConfig::default();
        let sc = &mut cfg.env.scenario;
        sc.grid.extent_x = 2500.0;
        sc.grid.extent_y = 2500.0;
        sc.max_areas = 2;
        sc.ues_per_area = 4;
        sc.initial_fires = 1;
        sc.lambda_a = 0.05;
        sc.bs_start = [1250.0, 1250.0];
        cfg.env.ttis_per_episode = 50;
        cfg.agent.kind = kind;
        cfg.run.episodes = 60;
        cfg.run.eval_episodes = 20;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        if self.run.episodes == 0 && self.run.eval_episodes == 0 {
            return Err(SimError::config("run.episodes", "nothing to run: episodes and eval_episodes are both 0"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn train_ttis(&self) -> u64 {
        (self.run.episodes * self.env.ttis_per_episode) as u64
    }
}
