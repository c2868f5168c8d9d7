use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{error, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, OutputFormat};
use super::metrics::{nan_from_null, write_episode_csv, write_tti_csv, EpisodeRow, MetricsRow, Phase, PhaseSummary};
use crate::agents::{build_agent, Agent, AgentCheckpoint, AgentKind, Experience, Mode};
use crate::env::Env;
use crate::error::{Result, SimError};
use crate::rng::episode_seed;

pub const MANIFEST_VERSION: u32 = 1;
pub const RNG_DESCRIPTION: &str = "ChaCha8 (rand_chacha), one stream per concern: fires=1, fading=2, exploration=3, \
init=4, minibatch=5; episode env seed = splitmix64(run_seed ^ splitmix64(episode))";

/// In-memory result of a run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub tti_rows: Vec<MetricsRow>,
    pub episode_rows: Vec<EpisodeRow>,
    pub checkpoint: AgentCheckpoint,
    pub train: PhaseSummary,
    pub eval: PhaseSummary,
    /// Set when the run stopped early; the rows cover what ran.
    pub error: Option<String>,
}

/// Trains for `run.episodes`, then evaluates for `run.eval_episodes` with
/// exploration off. `restore` seeds the agent from a checkpoint first.
pub fn simulate(cfg: &ExperimentConfig, restore: Option<&AgentCheckpoint>) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut env = Env::new(cfg.env.clone())?;
    let mut agent = build_agent(&cfg.agent, &env, cfg.train_ttis(), cfg.run.seed)?;
    if let Some(ck) = restore {
        agent.restore(ck)?;
    }
    let mut tti_rows = Vec::with_capacity((cfg.run.episodes + cfg.run.eval_episodes) * cfg.env.ttis_per_episode);
    let mut episode_rows = Vec::with_capacity(cfg.run.episodes + cfg.run.eval_episodes);
    let phases = (0..cfg.run.episodes)
        .map(|e| (Phase::Train, e))
        .chain((cfg.run.episodes..cfg.run.episodes + cfg.run.eval_episodes).map(|e| (Phase::Eval, e)));
    let mut failure = None;
    for (phase, episode) in phases {
        let start = tti_rows.len();
        let res = run_episode(&mut env, agent.as_mut(), phase, episode, cfg.run.seed, &mut tti_rows);
        if let Some(row) = EpisodeRow::summarize(&tti_rows[start..]) {
            episode_rows.push(row);
        }
        if let Err(e) = res {
            error!("run stopped in {} episode {episode}: {e}", phase.name());
            failure = Some(e);
            break;
        }
    }
    let max_areas = cfg.env.scenario.max_areas;
    let split = tti_rows.iter().position(|r| r.phase == Phase::Eval).unwrap_or(tti_rows.len());
    Ok(RunOutcome {
        train: PhaseSummary::from_rows(&tti_rows[..split], max_areas),
        eval: PhaseSummary::from_rows(&tti_rows[split..], max_areas),
        checkpoint: agent.checkpoint(),
        error: failure.map(|e| e.to_string()),
        tti_rows,
        episode_rows,
    })
}

fn run_episode(env: &mut Env, agent: &mut dyn Agent, phase: Phase, episode: usize, run_seed: u64, rows: &mut Vec<MetricsRow>) -> Result<()> {
    let mut state = env.reset(episode_seed(run_seed, episode as u64));
    let mode = match phase {
        Phase::Train => Mode::Train,
        Phase::Eval => Mode::Eval,
    };
    loop {
        let tti = env.tti();
        let action = agent.act(env, mode)?;
        let out = env.step(&action)?;
        rows.push(MetricsRow::from_step(phase, episode, tti, out.reward, &out.metrics));
        if phase == Phase::Train {
            agent.learn(&Experience {
                state: &state,
                action: &action,
                reward: out.reward,
                next_state: &out.next_state,
                terminal: false,
            })?;
        }
        state = out.next_state;
        if out.done {
            return Ok(());
        }
    }
}

/// Paths written by [`run_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub ttis: PathBuf,
    pub episodes: PathBuf,
    pub manifest: PathBuf,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub crate_version: String,
    /// Git blob hash (SHA-256 object format) of the compact config JSON.
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub rng: String,
    pub wall_time_s: f64,
    pub train: PhaseSummary,
    pub eval: PhaseSummary,
    pub outputs: RunArtifacts,
}

/// `sha256("blob <len>\0" + bytes)`, hex.
pub fn git_style_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    Ok(git_style_hash(&serde_json::to_vec(cfg)?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| SimError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::flush(&mut w).map_err(|e| SimError::io(path, e))
}

/// Writes the per-TTI and per-episode tables in the configured format.
pub fn write_tables(outcome: &RunOutcome, dir: &Path, format: OutputFormat) -> Result<(PathBuf, PathBuf)> {
    match format {
        OutputFormat::Csv => {
            let (t, e) = (dir.join("ttis.csv"), dir.join("episodes.csv"));
            write_tti_csv(&outcome.tti_rows, create(&t)?)?;
            write_episode_csv(&outcome.episode_rows, create(&e)?)?;
            Ok((t, e))
        }
        OutputFormat::Json => {
            let (t, e) = (dir.join("ttis.json"), dir.join("episodes.json"));
            write_json(&t, &outcome.tti_rows)?;
            write_json(&e, &outcome.episode_rows)?;
            Ok((t, e))
        }
    }
}

/// Runs `cfg` and writes tables, checkpoint and manifest into
/// `run.output_dir`. A diverged run still writes what it has, with the error
/// in the manifest, and then returns the error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    run_experiment_from(cfg, None)
}

pub fn run_experiment_from(cfg: &ExperimentConfig, restore: Option<&AgentCheckpoint>) -> Result<RunArtifacts> {
    let started = Instant::now();
    let outcome = simulate(cfg, restore)?;
    let dir = &cfg.run.output_dir;
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let (ttis, episodes) = write_tables(&outcome, dir, cfg.run.format)?;
    let checkpoint = dir.join("checkpoint.json");
    write_json(&checkpoint, &outcome.checkpoint)?;
    let artifacts = RunArtifacts {
        ttis,
        episodes,
        manifest: dir.join("manifest.json"),
        checkpoint,
    };
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        status: if outcome.error.is_some() { "error" } else { "ok" }.to_string(),
        error: outcome.error.clone(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(cfg)?,
        config: cfg.clone(),
        rng: RNG_DESCRIPTION.to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
        train: outcome.train,
        eval: outcome.eval,
        outputs: artifacts.clone(),
    };
    write_json(&artifacts.manifest, &manifest)?;
    info!(
        "{} run seed {} finished in {:.1}s: eval QoE {:.4}",
        cfg.agent.kind,
        cfg.run.seed,
        manifest.wall_time_s,
        outcome.eval.qoe
    );
    match outcome.error {
        Some(e) => Err(SimError::Divergence(format!("{e} (partial outputs in {})", dir.display()))),
        None => Ok(artifacts),
    }
}

/// One compared configuration's eval-phase statistics across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub agent: AgentKind,
    pub seeds: Vec<u64>,
    pub qoe: Stat,
    pub delay_s: Stat,
    pub smoothness_penalty: Stat,
    pub min_resolution_index: Stat,
    pub mean_power_dbm: Stat,
    pub mean_power_dbm_all_areas: Stat,
    /// Eval summary of every seed, in `seeds` order.
    pub per_seed: Vec<PhaseSummary>,
}

/// Mean and sample standard deviation across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    #[serde(deserialize_with = "nan_from_null")]
    pub mean: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub std: f64,
    pub n: usize,
}

impl Stat {
    /// NaN entries (metric undefined for that seed) are skipped.
    pub fn of(values: &[f64]) -> Stat {
        let v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        let n = v.len();
        if n == 0 {
            return Stat { mean: f64::NAN, std: f64::NAN, n };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, std, n }
    }

    pub fn std_error(&self) -> f64 {
        self.std / (self.n as f64).sqrt()
    }
}

pub const DEFAULT_COMPARE_SEEDS: u64 = 5;

/// Runs every config under every seed (in parallel) and tabulates the
/// eval phase. Configs must agree on everything but the agent; with `out`,
/// each run also writes its own directory `<out>/<label>/seed_<seed>`.
pub fn compare_agents(configs: &[(String, ExperimentConfig)], seeds: &[u64], out: Option<&Path>) -> Result<Vec<ComparisonRow>> {
    let Some((_, first)) = configs.first() else {
        return Ok(Vec::new());
    };
    for (label, cfg) in configs {
        if cfg.env != first.env || cfg.run.episodes != first.run.episodes || cfg.run.eval_episodes != first.run.eval_episodes {
            return Err(SimError::config(
                "compare",
                format!("config {label:?} differs from {:?} in more than the agent", configs[0].0),
            ));
        }
    }
    if seeds.is_empty() {
        return Err(SimError::config("compare.seeds", "need at least one seed"));
    }
    let jobs: Vec<(usize, u64)> = (0..configs.len()).flat_map(|c| seeds.iter().map(move |&s| (c, s))).collect();
    let results: Vec<Result<PhaseSummary>> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let (label, base) = &configs[c];
            let mut cfg = base.clone();
            cfg.run.seed = seed;
            match out {
                Some(root) => {
                    cfg.run.output_dir = root.join(label).join(format!("seed_{seed}"));
                    run_experiment(&cfg)?;
                    let text = fs::read_to_string(cfg.run.output_dir.join("manifest.json"))
                        .map_err(|e| SimError::io(cfg.run.output_dir.join("manifest.json"), e))?;
                    let manifest: Manifest = serde_json::from_str(&text)?;
                    Ok(manifest.eval)
                }
                None => {
                    let outcome = simulate(&cfg, None)?;
                    match outcome.error {
                        Some(e) => Err(SimError::Divergence(format!("{label} seed {seed}: {e}"))),
                        None => Ok(outcome.eval),
                    }
                }
            }
        })
        .collect();
    let mut summaries = Vec::with_capacity(results.len());
    for r in results {
        summaries.push(r?);
    }
    Ok(configs
        .iter()
        .enumerate()
        .map(|(c, (label, cfg))| {
            let per_seed: Vec<PhaseSummary> = summaries[c * seeds.len()..(c + 1) * seeds.len()].to_vec();
            let col = |f: fn(&PhaseSummary) -> f64| Stat::of(&per_seed.iter().map(f).collect::<Vec<_>>());
            ComparisonRow {
                label: label.clone(),
                agent: cfg.agent.kind,
                seeds: seeds.to_vec(),
                qoe: col(|s| s.qoe),
                delay_s: col(|s| s.delay_s),
                smoothness_penalty: col(|s| s.smoothness_penalty),
                min_resolution_index: col(|s| s.min_resolution_index),
                mean_power_dbm: col(|s| s.mean_power_dbm),
                mean_power_dbm_all_areas: col(|s| s.mean_power_dbm_all_areas),
                per_seed,
            }
        })
        .collect())
}
