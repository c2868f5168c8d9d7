//! Decision policies behind one observe/act/learn interface.
//!
//! All learners work on the factorized action space: one value block or
//! softmax head per sub-action, laid out as in [`HeadLayout`]. Heads of
//! areas that are not burning yet are masked out of action selection and
//! updates.

mod ac;
mod dqn;
mod explore;
mod greedy;
mod tabular;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ac::{sample_categorical, AcLearner, AcParams, AcStats, CriticKind, TdForm};
pub use dqn::{DqnLearner, DqnParams};
pub use explore::{epsilon_greedy, head_offsets, EpsilonSchedule};
pub use greedy::{coordinate_ascent, greedy_act};
pub use tabular::{tabular_key, QTable, TabularKey};

use crate::env::{Env, HeadLayout, JointAction, StateVector};
use crate::error::{Result, SimError};
use crate::nn::{Mlp, MlpCheckpoint, Transition};
use crate::rng::{stream, SimRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Greedy,
    Tabular,
    Dqn,
    Ac,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [AgentKind::Greedy, AgentKind::Tabular, AgentKind::Dqn, AgentKind::Ac];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Greedy => "greedy",
            AgentKind::Tabular => "tabular",
            AgentKind::Dqn => "dqn",
            AgentKind::Ac => "ac",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SimError::config("agent", format!("unknown agent {s:?}; expected greedy, tabular, dqn or ac")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TabularParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_fraction: f64,
    /// Lattice steps per table cell along each axis.
    pub cell_stride: i64,
}

impl Default for TabularParams {
    fn default() -> Self {
        TabularParams {
            alpha: 0.01,
            gamma: 0.8,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay_fraction: 0.8,
            cell_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub dqn: DqnParams,
    pub ac: AcParams,
    pub tabular: TabularParams,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            kind: AgentKind::Ac,
            dqn: DqnParams::default(),
            ac: AcParams::default(),
            tabular: TabularParams::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            AgentKind::Greedy => Ok(()),
            AgentKind::Dqn => self.dqn.validate(),
            AgentKind::Ac => self.ac.validate(),
            AgentKind::Tabular => {
                let t = &self.tabular;
                if !(t.alpha > 0.0 && t.alpha <= 1.0) {
                    return Err(SimError::config("agent.tabular.alpha", "must lie in (0, 1]"));
                }
                if !(0.0..1.0).contains(&t.gamma) {
                    return Err(SimError::config("agent.tabular.gamma", "must lie in [0, 1)"));
                }
                if t.cell_stride < 1 {
                    return Err(SimError::config("agent.tabular.cell_stride", "must be >= 1"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    /// Exploration off: argmax heads.
    Eval,
}

/// One environment step as seen by a learner.
#[derive(Debug, Clone)]
pub struct Experience<'a> {
    pub state: &'a StateVector,
    pub action: &'a JointAction,
    pub reward: f64,
    pub next_state: &'a StateVector,
    /// Genuine termination; episodes cut by the time limit bootstrap.
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LearnStats {
    pub loss: Option<f64>,
    pub td_error: Option<f64>,
    pub epsilon: Option<f64>,
}

/// Serialized agent parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub agent: AgentKind,
    #[serde(default)]
    pub nets: BTreeMap<String, MlpCheckpoint>,
    /// Tabular rows as `(key, flat per-head values)`, sorted by key.
    #[serde(default)]
    pub table: Vec<(Vec<i64>, Vec<f64>)>,
}

pub trait Agent: Send {
    fn kind(&self) -> AgentKind;

    fn act(&mut self, env: &Env, mode: Mode) -> Result<JointAction>;

    /// Called once per training step with the transition the last `act`
    /// produced.
    fn learn(&mut self, exp: &Experience<'_>) -> Result<LearnStats>;

    fn checkpoint(&self) -> AgentCheckpoint;

    fn restore(&mut self, ck: &AgentCheckpoint) -> Result<()>;
}

/// Builds an agent for `env`. `train_ttis` sizes the exploration schedules.
pub fn build_agent(cfg: &AgentConfig, env: &Env, train_ttis: u64, seed: u64) -> Result<Box<dyn Agent>> {
    cfg.validate()?;
    let layout = *env.layout();
    Ok(match cfg.kind {
        AgentKind::Greedy => Box::new(GreedyAgent),
        AgentKind::Tabular => Box::new(TabularAgent::new(layout, env, cfg.tabular.clone(), train_ttis, seed)?),
        AgentKind::Dqn => Box::new(DqnAgent::new(layout, cfg.dqn.clone(), train_ttis, seed)?),
        AgentKind::Ac => Box::new(AcAgent::new(layout, cfg.ac.clone(), seed)?),
    })
}

fn active_areas(env: &Env) -> usize {
    env.active_areas()
}

fn head_transition(layout: &HeadLayout, exp: &Experience<'_>) -> Transition {
    Transition {
        state: exp.state.0.clone(),
        actions: exp.action.to_head_choices(layout),
        active: layout.active_mask(exp.state),
        reward: exp.reward,
        next_state: exp.next_state.0.clone(),
        terminal: exp.terminal,
    }
}

fn wrong_checkpoint(expected: AgentKind, ck: &AgentCheckpoint) -> SimError {
    SimError::config("checkpoint.agent", format!("checkpoint is for {}, not {}", ck.agent, expected))
}

fn net_from(ck: &AgentCheckpoint, name: &str) -> Result<Mlp> {
    let net = ck
        .nets
        .get(name)
        .ok_or_else(|| SimError::config("checkpoint.nets", format!("missing network {name:?}")))?;
    Mlp::from_checkpoint(net.clone())
}

/// Myopic coordinate ascent; keeps no state.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyAgent;

impl Agent for GreedyAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Greedy
    }

    fn act(&mut self, env: &Env, _mode: Mode) -> Result<JointAction> {
        greedy_act(env)
    }

    fn learn(&mut self, _exp: &Experience<'_>) -> Result<LearnStats> {
        Ok(LearnStats::default())
    }

    fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            agent: AgentKind::Greedy,
            nets: BTreeMap::new(),
            table: Vec::new(),
        }
    }

    fn restore(&mut self, ck: &AgentCheckpoint) -> Result<()> {
        if ck.agent != AgentKind::Greedy {
            return Err(wrong_checkpoint(AgentKind::Greedy, ck));
        }
        Ok(())
    }
}

pub struct DqnAgent {
    layout: HeadLayout,
    learner: DqnLearner,
    schedule: EpsilonSchedule,
    train_steps: u64,
}

impl DqnAgent {
    pub fn new(layout: HeadLayout, params: DqnParams, train_ttis: u64, seed: u64) -> Result<Self> {
        let schedule = EpsilonSchedule::over(params.epsilon_start, params.epsilon_end, params.epsilon_decay_fraction, train_ttis);
        Ok(DqnAgent {
            learner: DqnLearner::new(layout.state_len(), layout.head_sizes(), params, seed)?,
            layout,
            schedule,
            train_steps: 0,
        })
    }

    pub fn learner(&self) -> &DqnLearner {
        &self.learner
    }

    pub fn epsilon(&self) -> f64 {
        self.schedule.value(self.train_steps)
    }
}

impl Agent for DqnAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Dqn
    }

    fn act(&mut self, env: &Env, mode: Mode) -> Result<JointAction> {
        let state = env.state();
        let mask = self.layout.active_mask(&state);
        let eps = match mode {
            Mode::Train => self.epsilon(),
            Mode::Eval => 0.0,
        };
        let choices = self.learner.select(&state.0, &mask, eps)?;
        JointAction::from_head_choices(&self.layout, active_areas(env), &choices)
    }

    fn learn(&mut self, exp: &Experience<'_>) -> Result<LearnStats> {
        let eps = self.epsilon();
        self.train_steps += 1;
        let loss = self.learner.observe(head_transition(&self.layout, exp))?;
        Ok(LearnStats {
            loss,
            td_error: None,
            epsilon: Some(eps),
        })
    }

    fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            agent: AgentKind::Dqn,
            nets: BTreeMap::from([
                ("online".to_string(), self.learner.online().to_checkpoint()),
                ("target".to_string(), self.learner.target().to_checkpoint()),
            ]),
            table: Vec::new(),
        }
    }

    fn restore(&mut self, ck: &AgentCheckpoint) -> Result<()> {
        if ck.agent != AgentKind::Dqn {
            return Err(wrong_checkpoint(AgentKind::Dqn, ck));
        }
        self.learner.set_networks(net_from(ck, "online")?, net_from(ck, "target")?)
    }
}

pub struct AcAgent {
    layout: HeadLayout,
    learner: AcLearner,
}

impl AcAgent {
    pub fn new(layout: HeadLayout, params: AcParams, seed: u64) -> Result<Self> {
        Ok(AcAgent {
            learner: AcLearner::new(layout.state_len(), layout.head_sizes(), params, seed)?,
            layout,
        })
    }

    pub fn learner(&self) -> &AcLearner {
        &self.learner
    }
}

impl Agent for AcAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Ac
    }

    fn act(&mut self, env: &Env, mode: Mode) -> Result<JointAction> {
        let state = env.state();
        let mask = self.layout.active_mask(&state);
        let choices = self.learner.select(&state.0, &mask, mode == Mode::Eval)?;
        JointAction::from_head_choices(&self.layout, active_areas(env), &choices)
    }

    fn learn(&mut self, exp: &Experience<'_>) -> Result<LearnStats> {
        let t = head_transition(&self.layout, exp);
        let stats = self
            .learner
            .learn(&t.state, &t.actions, &t.active, t.reward, &t.next_state, t.terminal)?;
        Ok(LearnStats {
            loss: Some(stats.actor_loss),
            td_error: Some(stats.td_error),
            epsilon: None,
        })
    }

    fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            agent: AgentKind::Ac,
            nets: BTreeMap::from([
                ("actor".to_string(), self.learner.actor().to_checkpoint()),
                ("critic".to_string(), self.learner.critic().to_checkpoint()),
            ]),
            table: Vec::new(),
        }
    }

    fn restore(&mut self, ck: &AgentCheckpoint) -> Result<()> {
        if ck.agent != AgentKind::Ac {
            return Err(wrong_checkpoint(AgentKind::Ac, ck));
        }
        self.learner.set_networks(net_from(ck, "actor")?, net_from(ck, "critic")?)
    }
}

/// Q-learning over discretized states; single-area scenarios only.
pub struct TabularAgent {
    layout: HeadLayout,
    grid: crate::scenario::GridWorld,
    params: TabularParams,
    table: QTable<TabularKey>,
    schedule: EpsilonSchedule,
    train_steps: u64,
    rng: SimRng,
}

impl TabularAgent {
    pub fn new(layout: HeadLayout, env: &Env, params: TabularParams, train_ttis: u64, seed: u64) -> Result<Self> {
        if layout.max_areas != 1 {
            return Err(SimError::Unsupported(format!(
                "tabular Q-learning needs max_areas = 1 (got {}); use dqn or ac",
                layout.max_areas
            )));
        }
        Ok(TabularAgent {
            grid: env.config().scenario.grid.clone(),
            table: QTable::new(layout.head_sizes(), params.alpha, params.gamma),
            schedule: EpsilonSchedule::over(params.epsilon_start, params.epsilon_end, params.epsilon_decay_fraction, train_ttis),
            layout,
            params,
            train_steps: 0,
            rng: stream(seed, Stream::Exploration),
        })
    }

    pub fn table(&self) -> &QTable<TabularKey> {
        &self.table
    }

    fn key(&self, state: &StateVector) -> TabularKey {
        tabular_key(&self.layout, &self.grid, state, self.params.cell_stride)
    }
}

impl Agent for TabularAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Tabular
    }

    fn act(&mut self, env: &Env, mode: Mode) -> Result<JointAction> {
        let state = env.state();
        let mask = self.layout.active_mask(&state);
        let eps = match mode {
            Mode::Train => self.schedule.value(self.train_steps),
            Mode::Eval => 0.0,
        };
        let choices = self.table.act(&self.key(&state), &mask, eps, &mut self.rng);
        JointAction::from_head_choices(&self.layout, active_areas(env), &choices)
    }

    fn learn(&mut self, exp: &Experience<'_>) -> Result<LearnStats> {
        let eps = self.schedule.value(self.train_steps);
        self.train_steps += 1;
        let t = head_transition(&self.layout, exp);
        let (s, s_next) = (self.key(exp.state), self.key(exp.next_state));
        self.table.update(&s, &t.actions, &t.active, t.reward, &s_next, t.terminal);
        Ok(LearnStats {
            loss: None,
            td_error: None,
            epsilon: Some(eps),
        })
    }

    fn checkpoint(&self) -> AgentCheckpoint {
        let mut table: Vec<(Vec<i64>, Vec<f64>)> = self.table.entries().map(|(k, v)| (k.0.clone(), v.clone())).collect();
        table.sort_by(|a, b| a.0.cmp(&b.0));
        AgentCheckpoint {
            agent: AgentKind::Tabular,
            nets: BTreeMap::new(),
            table,
        }
    }

    fn restore(&mut self, ck: &AgentCheckpoint) -> Result<()> {
        if ck.agent != AgentKind::Tabular {
            return Err(wrong_checkpoint(AgentKind::Tabular, ck));
        }
        let width: usize = self.layout.head_sizes().iter().sum();
        let mut table = QTable::new(self.layout.head_sizes(), self.params.alpha, self.params.gamma);
        for (key, row) in &ck.table {
            if row.len() != width {
                return Err(SimError::config("checkpoint.table", "row width does not match the head layout"));
            }
            table.insert_row(TabularKey(key.clone()), row.clone());
        }
        self.table = table;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvConfig;

    fn toy_env() -> Env {
        let mut cfg = EnvConfig::default();
        cfg.scenario.max_areas = 1;
        cfg.scenario.ues_per_area = 1;
        cfg.scenario.lambda_a = 0.0;
        cfg.ttis_per_episode = 10;
        let mut env = Env::new(cfg).unwrap();
        env.reset(3);
        env
    }

    #[test]
    fn agent_names_round_trip() {
        for k in AgentKind::ALL {
            assert_eq!(k.name().parse::<AgentKind>().unwrap(), k);
        }
        assert!("ppo".parse::<AgentKind>().is_err());
    }

    #[test]
    fn tabular_refuses_multi_area() {
        let env = Env::new(EnvConfig::default()).unwrap();
        let cfg = AgentConfig {
            kind: AgentKind::Tabular,
            ..Default::default()
        };
        assert!(matches!(build_agent(&cfg, &env, 100, 0), Err(SimError::Unsupported(_))));
    }

    #[test]
    fn every_agent_runs_and_checkpoints() {
        for kind in AgentKind::ALL {
            let mut env = toy_env();
            let cfg = AgentConfig {
                kind,
                dqn: DqnParams {
                    hidden: vec![8],
                    batch_size: 4,
                    ..Default::default()
                },
                ac: AcParams {
                    actor_hidden: vec![8],
                    critic_hidden: vec![8],
                    ..Default::default()
                },
                ..Default::default()
            };
            let mut agent = build_agent(&cfg, &env, 10, 1).unwrap();
            let mut done = false;
            while !done {
                let s = env.state();
                let a = agent.act(&env, Mode::Train).unwrap();
                let out = env.step(&a).unwrap();
                agent
                    .learn(&Experience {
                        state: &s,
                        action: &a,
                        reward: out.reward,
                        next_state: &out.next_state,
                        terminal: false,
                    })
                    .unwrap();
                done = out.done;
            }
            let ck = agent.checkpoint();
            let json = serde_json::to_string(&ck).unwrap();
            let back: AgentCheckpoint = serde_json::from_str(&json).unwrap();
            let mut fresh = build_agent(&cfg, &env, 10, 99).unwrap();
            fresh.restore(&back).unwrap();
            assert_eq!(fresh.checkpoint(), ck, "{kind}");
            env.reset(3);
            assert_eq!(fresh.act(&env, Mode::Eval).unwrap(), agent.act(&env, Mode::Eval).unwrap());
        }
    }

    #[test]
    fn greedy_is_stateless() {
        let env = toy_env();
        let mut a = GreedyAgent;
        let first = a.act(&env, Mode::Train).unwrap();
        assert_eq!(a.act(&env, Mode::Eval).unwrap(), first);
        assert_eq!(greedy_act(&env).unwrap(), first);
    }
}
