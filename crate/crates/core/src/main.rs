use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::error;

use u2usim::agents::{AgentCheckpoint, AgentKind};
use u2usim::harness::{
    compare_agents, fmt_sig, run_experiment, run_experiment_from, ComparisonRow, ExperimentConfig, OutputFormat,
    DEFAULT_COMPARE_SEEDS,
};
use u2usim::{Result, SimError};

#[derive(Parser)]
#[command(name = "u2usim", version, about = "UAV-to-UAV video streaming simulator with learning agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentArg {
    Greedy,
    Tabular,
    Dqn,
    Ac,
}

impl From<AgentArg> for AgentKind {
    fn from(a: AgentArg) -> Self {
        match a {
            AgentArg::Greedy => AgentKind::Greedy,
            AgentArg::Tabular => AgentKind::Tabular,
            AgentArg::Dqn => AgentKind::Dqn,
            AgentArg::Ac => AgentKind::Ac,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct Common {
    /// JSON experiment config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the small two-area comparison world instead of the defaults.
    #[arg(long, conflicts_with = "config")]
    toy: bool,
    #[arg(long, value_enum)]
    agent: Option<AgentArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Training episodes.
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent, then evaluate it with exploration off.
    Train(Common),
    /// Evaluate a trained checkpoint without further learning.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train and evaluate several agents over several seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated agents.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "greedy,dqn,ac")]
        agents: Vec<AgentArg>,
        /// Number of seeds, counting up from --seed.
        #[arg(long, default_value_t = DEFAULT_COMPARE_SEEDS)]
        seeds: u64,
    },
}

fn build_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match (&c.config, c.toy) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, true) => ExperimentConfig::toy(AgentKind::Ac),
        (None, false) => ExperimentConfig::default(),
    };
    if let Some(a) = c.agent {
        cfg.agent.kind = a.into();
    }
    if let Some(s) = c.seed {
        cfg.run.seed = s;
    }
    if let Some(e) = c.episodes {
        cfg.run.episodes = e;
    }
    if let Some(e) = c.eval_episodes {
        cfg.run.eval_episodes = e;
    }
    if let Some(o) = &c.out {
        cfg.run.output_dir = o.clone();
    }
    if let Some(f) = c.format {
        cfg.run.format = match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_checkpoint(path: &Path) -> Result<AgentCheckpoint> {
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_comparison(rows: &[ComparisonRow], dir: &Path, format: OutputFormat) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    match format {
        OutputFormat::Json => {
            let path = dir.join("comparison.json");
            let text = serde_json::to_string_pretty(rows)?;
            fs::write(&path, text).map_err(|e| SimError::io(&path, e))?;
            Ok(path)
        }
        OutputFormat::Csv => {
            let path = dir.join("comparison.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record([
                "agent",
                "seeds",
                "qoe_mean",
                "qoe_std",
                "delay_s_mean",
                "delay_s_std",
                "smoothness_mean",
                "smoothness_std",
                "min_resolution_mean",
                "min_resolution_std",
                "power_dbm_mean",
                "power_dbm_std",
                "power_dbm_all_areas_mean",
                "power_dbm_all_areas_std",
            ])?;
            for r in rows {
                let mut rec = vec![r.label.clone(), r.seeds.len().to_string()];
                for s in [r.qoe, r.delay_s, r.smoothness_penalty, r.min_resolution_index, r.mean_power_dbm, r.mean_power_dbm_all_areas] {
                    rec.push(fmt_sig(s.mean));
                    rec.push(fmt_sig(s.std));
                }
                w.write_record(rec)?;
            }
            w.flush().map_err(|e| SimError::io(&path, e))?;
            Ok(path)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            let cfg = build_config(&common)?;
            let a = run_experiment(&cfg)?;
            println!("wrote {}, {}, {}, {}", a.ttis.display(), a.episodes.display(), a.checkpoint.display(), a.manifest.display());
        }
        Command::Eval { common, checkpoint } => {
            let mut cfg = build_config(&common)?;
            let ck = load_checkpoint(&checkpoint)?;
            cfg.agent.kind = ck.agent;
            cfg.run.episodes = 0;
            let a = run_experiment_from(&cfg, Some(&ck))?;
            println!("wrote {}, {}, {}", a.ttis.display(), a.episodes.display(), a.manifest.display());
        }
        Command::Compare { common, agents, seeds } => {
            let base = build_config(&common)?;
            let configs: Vec<(String, ExperimentConfig)> = agents
                .into_iter()
                .map(|a| {
                    let mut c = base.clone();
                    c.agent.kind = a.into();
                    (c.agent.kind.to_string(), c)
                })
                .collect();
            let seed_list: Vec<u64> = (0..seeds).map(|i| base.run.seed + i).collect();
            let out = base.run.output_dir.clone();
            let rows = compare_agents(&configs, &seed_list, Some(&out))?;
            println!("{:<8} {:>12} {:>10} {:>12} {:>10} {:>10}", "agent", "qoe", "qoe_std", "delay_s", "min_res", "power");
            for r in &rows {
                println!(
                    "{:<8} {:>12.5} {:>10.5} {:>12.6} {:>10.3} {:>10.3}",
                    r.label, r.qoe.mean, r.qoe.std, r.delay_s.mean, r.min_resolution_index.mean, r.mean_power_dbm.mean
                );
            }
            let path = write_comparison(&rows, &out, base.run.format)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("U2USIM_LOG", "info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
