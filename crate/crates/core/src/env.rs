//! The decision process: reset/step over scenario, channel and QoE.
//!
//! The joint action (BS move, UE moves, per-area resolution, per-UE power) is
//! factorized into independent sub-actions ("heads"). Heads and state slots
//! are laid out for the maximum number of areas so network shapes stay fixed;
//! slots of areas that have not caught fire yet are zero in the state and
//! absent from the action.
//!
//! One TTI runs, in order: fire arrivals, moves (clamped to legal poses),
//! fading draws and link budgets, frame times and QoE, reward, clock advance.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::channel::{link_budgets, ChannelParams, LinkBudget, RicianFading, UplinkTx};
use crate::error::{Result, SimError};
use crate::rng::{stream, SimRng, Stream};
use crate::scenario::{
    apply_move, evacuate_base_station, flying_regions, min_flying_height, place_fire, safety_ok, spawn_fires,
    FireArea, FlyingRegion, GridWorld, Move, MoveBounds, ScenarioConfig, UavPose,
};
use crate::video_qoe::{frame_tx_time, qoe_reward, quality, slot_delay, QoeBreakdown, QoeWeights, ResolutionLadder};

/// Scale applied to the previous QoE before squashing it into the state.
const QOE_STATE_SCALE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub scenario: ScenarioConfig,
    pub channel: ChannelParams,
    pub qoe: QoeWeights,
    pub ladder: ResolutionLadder,
    /// Selectable maximum UE transmit powers, dBm, ascending.
    pub power_levels_dbm: Vec<f64>,
    pub ttis_per_episode: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            scenario: ScenarioConfig::default(),
            channel: ChannelParams::default(),
            qoe: QoeWeights::default(),
            ladder: ResolutionLadder::default(),
            power_levels_dbm: vec![23.0, 25.0, 30.0],
            ttis_per_episode: 100,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.channel.validate()?;
        self.qoe.validate()?;
        self.ladder.validate()?;
        if self.power_levels_dbm.is_empty() {
            return Err(SimError::config("power_levels_dbm", "must not be empty"));
        }
        if self.power_levels_dbm.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SimError::config("power_levels_dbm", "must strictly increase"));
        }
        if self.ttis_per_episode == 0 {
            return Err(SimError::config("ttis_per_episode", "must be >= 1"));
        }
        Ok(())
    }
}

/// Which decision a head controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubActionKind {
    BsMove,
    UeMove { slot: usize },
    Resolution { area: usize },
    Power { slot: usize },
}

/// Fixed head order and state layout for a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadLayout {
    pub max_areas: usize,
    pub ues_per_area: usize,
    pub n_resolutions: usize,
    pub n_power_levels: usize,
}

impl HeadLayout {
    pub fn from_config(cfg: &EnvConfig) -> Self {
        HeadLayout {
            max_areas: cfg.scenario.max_areas,
            ues_per_area: cfg.scenario.ues_per_area,
            n_resolutions: cfg.ladder.len(),
            n_power_levels: cfg.power_levels_dbm.len(),
        }
    }

    pub fn ue_slots(&self) -> usize {
        self.max_areas * self.ues_per_area
    }

    /// Every head in order: BS move, UE moves, area resolutions, UE powers.
    pub fn heads(&self) -> Vec<(SubActionKind, usize)> {
        let slots = self.ue_slots();
        let mut heads = Vec::with_capacity(1 + 2 * slots + self.max_areas);
        heads.push((SubActionKind::BsMove, Move::COUNT));
        heads.extend((0..slots).map(|slot| (SubActionKind::UeMove { slot }, Move::COUNT)));
        heads.extend((0..self.max_areas).map(|area| (SubActionKind::Resolution { area }, self.n_resolutions)));
        heads.extend((0..slots).map(|slot| (SubActionKind::Power { slot }, self.n_power_levels)));
        heads
    }

    pub fn head_sizes(&self) -> Vec<usize> {
        self.heads().into_iter().map(|(_, n)| n).collect()
    }

    pub fn num_heads(&self) -> usize {
        1 + 2 * self.ue_slots() + self.max_areas
    }

    pub fn total_outputs(&self) -> usize {
        Move::COUNT * (1 + self.ue_slots()) + self.n_resolutions * self.max_areas + self.n_power_levels * self.ue_slots()
    }

    pub fn state_len(&self) -> usize {
        3 + 3 * self.ue_slots() + self.max_areas + self.ue_slots() + 1
    }

    fn res_offset(&self) -> usize {
        3 + 3 * self.ue_slots()
    }

    fn power_offset(&self) -> usize {
        self.res_offset() + self.max_areas
    }

    /// Number of active areas encoded in a state (active slots are a prefix).
    pub fn active_areas(&self, state: &StateVector) -> usize {
        let off = self.res_offset();
        let threshold = 0.5 / self.n_resolutions as f64;
        (0..self.max_areas).take_while(|&a| state.0[off + a] > threshold).count()
    }

    pub fn head_is_active(&self, kind: SubActionKind, active_areas: usize) -> bool {
        let active_ues = active_areas * self.ues_per_area;
        match kind {
            SubActionKind::BsMove => true,
            SubActionKind::UeMove { slot } | SubActionKind::Power { slot } => slot < active_ues,
            SubActionKind::Resolution { area } => area < active_areas,
        }
    }

    pub fn active_mask(&self, state: &StateVector) -> Vec<bool> {
        let areas = self.active_areas(state);
        self.heads().into_iter().map(|(kind, _)| self.head_is_active(kind, areas)).collect()
    }

    /// The decision dimensions available in `state`, with their domain sizes.
    pub fn enumerate(&self, state: &StateVector) -> Vec<(SubActionKind, usize)> {
        let areas = self.active_areas(state);
        self.heads()
            .into_iter()
            .filter(|&(kind, _)| self.head_is_active(kind, areas))
            .collect()
    }
}

/// The normalized MDP state. All entries lie in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Poses and selections recovered from a [`StateVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedState {
    pub bs: UavPose,
    pub ues: Vec<Option<UavPose>>,
    pub resolutions: Vec<Option<usize>>,
    pub power_levels: Vec<Option<usize>>,
}

fn normalize(v: f64, extent: f64) -> f64 {
    (2.0 * v / extent - 1.0).clamp(-1.0, 1.0)
}

fn denormalize(v: f64, extent: f64, step: f64) -> f64 {
    ((v + 1.0) * 0.5 * extent / step).round() * step
}

fn encode_level(index: usize, count: usize) -> f64 {
    (index + 1) as f64 / count as f64
}

fn decode_level(v: f64, count: usize) -> Option<usize> {
    let i = (v * count as f64).round() as i64 - 1;
    (i >= 0).then_some(i as usize)
}

pub fn decode_state(layout: &HeadLayout, grid: &GridWorld, state: &StateVector) -> DecodedState {
    let s = &state.0;
    let pose_at = |i: usize| {
        UavPose::new(
            denormalize(s[i], grid.extent_x, grid.step_x),
            denormalize(s[i + 1], grid.extent_y, grid.step_y),
            denormalize(s[i + 2], grid.extent_z, grid.step_z),
        )
    };
    let areas = layout.active_areas(state);
    let active_ues = areas * layout.ues_per_area;
    let slots = layout.ue_slots();
    DecodedState {
        bs: pose_at(0),
        ues: (0..slots).map(|k| (k < active_ues).then(|| pose_at(3 + 3 * k))).collect(),
        resolutions: (0..layout.max_areas)
            .map(|a| if a < areas { decode_level(s[layout.res_offset() + a], layout.n_resolutions) } else { None })
            .collect(),
        power_levels: (0..slots)
            .map(|k| if k < active_ues { decode_level(s[layout.power_offset() + k], layout.n_power_levels) } else { None })
            .collect(),
    }
}

/// One decision per active head.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction {
    pub bs_move: Move,
    /// One per active UE, in slot order.
    pub ue_moves: Vec<Move>,
    /// One ladder index per active area.
    pub area_resolutions: Vec<usize>,
    /// One index into the power levels per active UE.
    pub ue_power_levels: Vec<usize>,
}

impl JointAction {
    /// Builds an action from per-head choices over the full head layout;
    /// entries of inactive heads are ignored.
    pub fn from_head_choices(layout: &HeadLayout, active_areas: usize, choices: &[usize]) -> Result<JointAction> {
        let heads = layout.heads();
        if choices.len() != heads.len() {
            return Err(SimError::Contract(format!("{} head choices for {} heads", choices.len(), heads.len())));
        }
        let mut action = JointAction {
            bs_move: Move::Hover,
            ue_moves: Vec::new(),
            area_resolutions: Vec::new(),
            ue_power_levels: Vec::new(),
        };
        for (&(kind, size), &choice) in heads.iter().zip(choices) {
            if !layout.head_is_active(kind, active_areas) {
                continue;
            }
            if choice >= size {
                return Err(SimError::Contract(format!("choice {choice} out of range for {kind:?} ({size})")));
            }
            match kind {
                SubActionKind::BsMove => action.bs_move = Move::ALL[choice],
                SubActionKind::UeMove { .. } => action.ue_moves.push(Move::ALL[choice]),
                SubActionKind::Resolution { .. } => action.area_resolutions.push(choice),
                SubActionKind::Power { .. } => action.ue_power_levels.push(choice),
            }
        }
        Ok(action)
    }

    /// Per-head choices over the full layout; inactive heads get 0.
    pub fn to_head_choices(&self, layout: &HeadLayout) -> Vec<usize> {
        layout
            .heads()
            .into_iter()
            .map(|(kind, _)| match kind {
                SubActionKind::BsMove => self.bs_move.index(),
                SubActionKind::UeMove { slot } => self.ue_moves.get(slot).map_or(0, |m| m.index()),
                SubActionKind::Resolution { area } => self.area_resolutions.get(area).copied().unwrap_or(0),
                SubActionKind::Power { slot } => self.ue_power_levels.get(slot).copied().unwrap_or(0),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub qoe: f64,
    pub delay_s: f64,
    pub smoothness_penalty: f64,
    pub mean_quality: f64,
    pub quality_now: Vec<f64>,
    pub quality_prev: Vec<f64>,
    pub rates_bps: Vec<f64>,
    /// Transmit power after fractional power control, dBm.
    pub tx_power_dbm: Vec<f64>,
    /// Selected maximum power level, dBm.
    pub power_level_dbm: Vec<f64>,
    pub area_resolutions: Vec<usize>,
    pub active_ues: usize,
    pub active_areas: usize,
    pub clamped_moves: usize,
    pub new_fires: usize,
}

impl StepMetrics {
    /// Reward rebuilt from the exported per-UE qualities and delay.
    pub fn recompute_reward(&self, w: &QoeWeights, ues_per_area: usize) -> f64 {
        let pairs: Vec<(f64, f64)> = self.quality_now.iter().copied().zip(self.quality_prev.iter().copied()).collect();
        qoe_reward(&pairs, self.delay_s, w, self.active_areas, ues_per_area).reward
    }

    pub fn mean_power_level_dbm(&self) -> f64 {
        mean(&self.power_level_dbm)
    }

    pub fn mean_rate_bps(&self) -> f64 {
        mean(&self.rates_bps)
    }

    pub fn min_resolution_index(&self) -> Option<usize> {
        self.area_resolutions.iter().copied().min()
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: StateVector,
    pub reward: f64,
    pub metrics: StepMetrics,
    pub done: bool,
}

/// Result of evaluating one TTI for a fixed action and fading realization.
#[derive(Debug, Clone)]
struct Resolved {
    bs: UavPose,
    ues: Vec<UavPose>,
    budgets: Vec<LinkBudget>,
    quality_now: Vec<f64>,
    quality_prev: Vec<f64>,
    breakdown: QoeBreakdown,
    clamped: usize,
}

pub struct Env {
    cfg: EnvConfig,
    layout: HeadLayout,
    fading: RicianFading,
    fires: Vec<FireArea>,
    /// One region per UE slot, slot order.
    regions: Vec<FlyingRegion>,
    bs: UavPose,
    ues: Vec<UavPose>,
    resolutions: Vec<usize>,
    power_levels: Vec<usize>,
    prev_quality: Vec<Option<f64>>,
    prev_qoe: f64,
    tti: usize,
    next_fire_id: u32,
    fire_rng: SimRng,
    fading_rng: SimRng,
}

impl Env {
    pub fn new(cfg: EnvConfig) -> Result<Env> {
        cfg.validate()?;
        let layout = HeadLayout::from_config(&cfg);
        let fading = RicianFading::new(cfg.channel.rice_kappa)?;
        let [x, y] = cfg.scenario.bs_start;
        let mut env = Env {
            layout,
            fading,
            fires: Vec::new(),
            regions: Vec::new(),
            bs: UavPose::new(x, y, cfg.scenario.grid.step_z),
            ues: Vec::new(),
            resolutions: Vec::new(),
            power_levels: Vec::new(),
            prev_quality: Vec::new(),
            prev_qoe: 0.0,
            tti: 0,
            next_fire_id: 0,
            fire_rng: stream(0, Stream::Fires),
            fading_rng: stream(0, Stream::Fading),
            cfg,
        };
        env.reset(0);
        Ok(env)
    }

    /// Starts a new episode: BS at its start position just above the tallest
    /// fire, `initial_fires` fires placed, their UEs at region centers, lowest
    /// resolution and power everywhere.
    pub fn reset(&mut self, seed: u64) -> StateVector {
        let mut rng = stream(seed, Stream::Fires);
        let sc = &self.cfg.scenario;
        let mut fires = Vec::with_capacity(sc.initial_fires);
        for _ in 0..sc.initial_fires {
            match place_fire(sc, &fires, Some(sc.bs_start), fires.len() as u32, 0, &mut rng) {
                Some(f) => fires.push(f),
                None => warn!("initial fire could not be placed"),
            }
        }
        self.begin(seed, fires, rng).expect("sampled initial fires are valid")
    }

    /// Like [`Env::reset`] but with caller-chosen initial fires.
    pub fn reset_with_fires(&mut self, seed: u64, fires: Vec<FireArea>) -> Result<StateVector> {
        self.begin(seed, fires, stream(seed, Stream::Fires))
    }

    fn begin(&mut self, seed: u64, fires: Vec<FireArea>, fire_rng: SimRng) -> Result<StateVector> {
        let sc = &self.cfg.scenario;
        if fires.len() > sc.max_areas {
            return Err(SimError::config("fires", format!("{} fires exceed max_areas {}", fires.len(), sc.max_areas)));
        }
        self.fire_rng = fire_rng;
        self.fading_rng = stream(seed, Stream::Fading);
        self.fires.clear();
        self.regions.clear();
        self.ues.clear();
        self.resolutions.clear();
        self.power_levels.clear();
        self.prev_quality.clear();
        self.prev_qoe = 0.0;
        self.tti = 0;
        self.next_fire_id = fires.iter().map(|f| f.id + 1).max().unwrap_or(0);

        let [x, y] = sc.bs_start;
        let floor = min_flying_height(&fires);
        let step_z = sc.grid.step_z;
        let h = ((floor / step_z + 1e-9).floor() + 1.0) * step_z;
        let start = UavPose::new(x, y, h);
        self.bs = evacuate_base_station(start, &sc.grid, &fires, sc.safety_distance, sc.h_max)
            .ok_or_else(|| SimError::config("fires", "no legal base-station position"))?;
        for fire in fires {
            self.activate(fire)?;
        }
        debug_assert!(self.constraints_hold());
        Ok(self.encode_state())
    }

    fn activate(&mut self, fire: FireArea) -> Result<()> {
        let sc = &self.cfg.scenario;
        let regions = flying_regions(&fire, sc.ues_per_area, sc.safety_distance, sc.region_length, sc.h_max)?;
        for region in regions {
            self.ues.push(region.center_on_lattice(&sc.grid));
            self.regions.push(region);
            self.power_levels.push(0);
            self.prev_quality.push(None);
        }
        self.resolutions.push(0);
        self.fires.push(fire);
        Ok(())
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &HeadLayout {
        &self.layout
    }

    pub fn fires(&self) -> &[FireArea] {
        &self.fires
    }

    pub fn regions(&self) -> &[FlyingRegion] {
        &self.regions
    }

    pub fn bs(&self) -> UavPose {
        self.bs
    }

    pub fn ues(&self) -> &[UavPose] {
        &self.ues
    }

    pub fn resolutions(&self) -> &[usize] {
        &self.resolutions
    }

    pub fn power_levels(&self) -> &[usize] {
        &self.power_levels
    }

    pub fn active_areas(&self) -> usize {
        self.fires.len()
    }

    pub fn active_ues(&self) -> usize {
        self.ues.len()
    }

    pub fn tti(&self) -> usize {
        self.tti
    }

    pub fn is_done(&self) -> bool {
        self.tti >= self.cfg.ttis_per_episode
    }

    pub fn state(&self) -> StateVector {
        self.encode_state()
    }

    pub fn enumerate_subactions(&self) -> Vec<(SubActionKind, usize)> {
        self.layout.enumerate(&self.encode_state())
    }

    /// The do-nothing action: everyone hovers, selections unchanged.
    pub fn hold_action(&self) -> JointAction {
        JointAction {
            bs_move: Move::Hover,
            ue_moves: vec![Move::Hover; self.ues.len()],
            area_resolutions: self.resolutions.clone(),
            ue_power_levels: self.power_levels.clone(),
        }
    }

    pub fn encode_state(&self) -> StateVector {
        let g = &self.cfg.scenario.grid;
        let mut s = vec![0.0; self.layout.state_len()];
        let put = |s: &mut Vec<f64>, i: usize, p: &UavPose| {
            s[i] = normalize(p.x, g.extent_x);
            s[i + 1] = normalize(p.y, g.extent_y);
            s[i + 2] = normalize(p.h, g.extent_z);
        };
        put(&mut s, 0, &self.bs);
        for (k, ue) in self.ues.iter().enumerate() {
            put(&mut s, 3 + 3 * k, ue);
        }
        let ro = self.layout.res_offset();
        for (a, &r) in self.resolutions.iter().enumerate() {
            s[ro + a] = encode_level(r, self.layout.n_resolutions);
        }
        let po = self.layout.power_offset();
        for (k, &p) in self.power_levels.iter().enumerate() {
            s[po + k] = encode_level(p, self.layout.n_power_levels);
        }
        let last = s.len() - 1;
        s[last] = (self.prev_qoe / QOE_STATE_SCALE).tanh();
        StateVector(s)
    }

    fn check_action(&self, action: &JointAction) -> Result<()> {
        let n = self.ues.len();
        if action.ue_moves.len() != n || action.ue_power_levels.len() != n {
            return Err(SimError::Contract(format!(
                "action sized for {} UE moves / {} powers, {} UEs active",
                action.ue_moves.len(),
                action.ue_power_levels.len(),
                n
            )));
        }
        if action.area_resolutions.len() != self.fires.len() {
            return Err(SimError::Contract(format!(
                "action has {} resolutions, {} areas active",
                action.area_resolutions.len(),
                self.fires.len()
            )));
        }
        if let Some(r) = action.area_resolutions.iter().find(|&&r| r >= self.layout.n_resolutions) {
            return Err(SimError::Contract(format!("resolution index {r} out of range")));
        }
        if let Some(p) = action.ue_power_levels.iter().find(|&&p| p >= self.layout.n_power_levels) {
            return Err(SimError::Contract(format!("power index {p} out of range")));
        }
        Ok(())
    }

    fn resolve(&self, action: &JointAction, fading_db: &[f64]) -> Result<Resolved> {
        let sc = &self.cfg.scenario;
        let grid = &sc.grid;
        let mut clamped = 0;
        let bs_out = apply_move(
            self.bs,
            action.bs_move,
            grid,
            MoveBounds::BaseStation {
                fires: &self.fires,
                r_s: sc.safety_distance,
                h_max: sc.h_max,
            },
        );
        clamped += usize::from(bs_out.clamped);
        let mut ues: Vec<UavPose> = Vec::with_capacity(self.ues.len());
        for ((pose, mv), region) in self.ues.iter().zip(&action.ue_moves).zip(&self.regions) {
            let out = apply_move(*pose, *mv, grid, MoveBounds::Region(region));
            clamped += usize::from(out.clamped);
            ues.push(out.pose);
        }
        if sc.same_altitude {
            for area in ues.chunks_mut(sc.ues_per_area) {
                let h = area[0].h;
                area.iter_mut().for_each(|p| p.h = h);
            }
        }
        let tx: Vec<UplinkTx> = ues
            .iter()
            .zip(&action.ue_power_levels)
            .map(|(pose, &level)| UplinkTx {
                pose: *pose,
                p_max_dbm: self.cfg.power_levels_dbm[level],
            })
            .collect();
        let budgets = link_budgets(&bs_out.pose, &tx, fading_db, &self.cfg.channel, sc.min_link_distance)?;

        let k = sc.ues_per_area;
        let mut quality_now = Vec::with_capacity(budgets.len());
        let mut times = Vec::with_capacity(budgets.len());
        for (slot, b) in budgets.iter().enumerate() {
            let res = action.area_resolutions[slot / k];
            quality_now.push(quality(&self.cfg.ladder, res, b.rate_bps)?);
            times.push(frame_tx_time(&self.cfg.ladder, res, b.rate_bps, &self.cfg.qoe)?);
        }
        let quality_prev: Vec<f64> = quality_now
            .iter()
            .zip(&self.prev_quality)
            .map(|(&now, prev)| prev.unwrap_or(now))
            .collect();
        let delay = slot_delay(&times, &self.cfg.qoe);
        let pairs: Vec<(f64, f64)> = quality_now.iter().copied().zip(quality_prev.iter().copied()).collect();
        let breakdown = qoe_reward(&pairs, delay, &self.cfg.qoe, self.fires.len(), k);
        Ok(Resolved {
            bs: bs_out.pose,
            ues,
            budgets,
            quality_now,
            quality_prev,
            breakdown,
            clamped,
        })
    }

    /// Immediate reward `action` would earn this TTI with every fading draw
    /// pinned to 0 dB and no fire arrivals. Leaves the environment untouched.
    pub fn preview_reward(&self, action: &JointAction) -> Result<f64> {
        self.check_action(action)?;
        let zeros = vec![0.0; self.ues.len()];
        Ok(self.resolve(action, &zeros)?.breakdown.reward)
    }

    /// Advances one TTI.
    pub fn step(&mut self, action: &JointAction) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(SimError::Contract("step called on a finished episode".into()));
        }
        self.check_action(action)?;

        // (1) arrivals
        let sc = self.cfg.scenario.clone();
        let born = spawn_fires(&sc, &self.fires, self.tti as u64, &mut self.next_fire_id, &mut self.fire_rng);
        let mut new_fires = 0;
        for fire in born {
            let mut trial = self.fires.clone();
            trial.push(fire.clone());
            match evacuate_base_station(self.bs, &sc.grid, &trial, sc.safety_distance, sc.h_max) {
                Some(bs) => {
                    if bs != self.bs {
                        debug!("tti {}: BS relocated from {:?} to {:?} by fire {}", self.tti, self.bs, bs, fire.id);
                    }
                    self.bs = bs;
                    self.activate(fire)?;
                    new_fires += 1;
                }
                None => warn!("tti {}: fire {} leaves no legal BS position; discarded", self.tti, fire.id),
            }
        }
        let mut full = action.clone();
        let n = self.ues.len();
        full.ue_moves.resize(n, Move::Hover);
        full.ue_power_levels.resize(n, 0);
        full.area_resolutions.resize(self.fires.len(), 0);

        // (2)-(5) moves, fading, budgets, QoE
        let fading_db: Vec<f64> = (0..n).map(|_| self.fading.sample(&mut self.fading_rng).fading_db).collect();
        let r = self.resolve(&full, &fading_db)?;

        // commit
        self.bs = r.bs;
        self.ues = r.ues;
        self.resolutions = full.area_resolutions.clone();
        self.power_levels = full.ue_power_levels.clone();
        self.prev_quality = r.quality_now.iter().map(|&q| Some(q)).collect();
        self.prev_qoe = r.breakdown.reward;
        self.tti += 1;
        debug_assert!(self.constraints_hold(), "pose constraints violated at tti {}", self.tti);

        let metrics = StepMetrics {
            qoe: r.breakdown.reward,
            delay_s: r.breakdown.delay_s,
            smoothness_penalty: r.breakdown.smoothness_penalty,
            mean_quality: r.breakdown.mean_quality,
            quality_now: r.quality_now,
            quality_prev: r.quality_prev,
            rates_bps: r.budgets.iter().map(|b| b.rate_bps).collect(),
            tx_power_dbm: r.budgets.iter().map(|b| b.p_tx_dbm).collect(),
            power_level_dbm: full.ue_power_levels.iter().map(|&l| self.cfg.power_levels_dbm[l]).collect(),
            area_resolutions: full.area_resolutions,
            active_ues: n,
            active_areas: self.fires.len(),
            clamped_moves: r.clamped,
            new_fires,
        };
        Ok(StepOutcome {
            next_state: self.encode_state(),
            reward: r.breakdown.reward,
            metrics,
            done: self.is_done(),
        })
    }

    /// Region membership for every UE and the BS safety/height band.
    pub fn constraints_hold(&self) -> bool {
        let sc = &self.cfg.scenario;
        let grid_ok = sc.grid.contains(&self.bs) && self.ues.iter().all(|u| sc.grid.contains(u));
        let regions_ok = self.ues.iter().zip(&self.regions).all(|(u, r)| r.contains(u));
        grid_ok && regions_ok && safety_ok(&self.bs, &self.fires, sc.safety_distance, sc.h_max)
    }
}
