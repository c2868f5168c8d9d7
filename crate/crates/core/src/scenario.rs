//! Grid world, fire arrivals, flying regions and move legality.
//!
//! Positions live on the lattice spanned by the grid steps (integer multiples
//! of `step_x`, `step_y`, `step_z`). Moves are single axis-aligned steps; a
//! move that would leave the legal set is absorbed and the pose stays put.

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::rng::SimRng;

const TOL: f64 = 1e-9;
const PLACEMENT_ATTEMPTS: usize = 1000;

/// Number of flying-region templates around one fire (north, west, south, east).
pub const REGIONS_PER_FIRE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridWorld {
    pub extent_x: f64,
    pub extent_y: f64,
    pub extent_z: f64,
    pub step_x: f64,
    pub step_y: f64,
    pub step_z: f64,
}

impl Default for GridWorld {
    fn default() -> Self {
        GridWorld {
            extent_x: 5000.0,
            extent_y: 5000.0,
            extent_z: 100.0,
            step_x: 50.0,
            step_y: 50.0,
            step_z: 5.0,
        }
    }
}

impl GridWorld {
    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("x", self.extent_x, self.step_x),
            ("y", self.extent_y, self.step_y),
            ("z", self.extent_z, self.step_z),
        ];
        for (axis, extent, step) in axes {
            if !(extent > 0.0 && extent.is_finite()) {
                return Err(SimError::config(format!("grid.extent_{axis}"), "must be > 0"));
            }
            if !(step > 0.0 && step.is_finite()) {
                return Err(SimError::config(format!("grid.step_{axis}"), "must be > 0"));
            }
            let cells = extent / step;
            if (cells - cells.round()).abs() > TOL * cells.max(1.0) {
                return Err(SimError::config(
                    format!("grid.step_{axis}"),
                    format!("step {step} does not divide extent {extent}"),
                ));
            }
        }
        Ok(())
    }

    /// Total number of grid cells (W).
    pub fn cells(&self) -> u64 {
        let n = |e: f64, s: f64| (e / s).round() as u64;
        n(self.extent_x, self.step_x) * n(self.extent_y, self.step_y) * n(self.extent_z, self.step_z)
    }

    pub fn contains(&self, p: &UavPose) -> bool {
        p.x >= -TOL
            && p.x <= self.extent_x + TOL
            && p.y >= -TOL
            && p.y <= self.extent_y + TOL
            && p.h >= -TOL
            && p.h <= self.extent_z + TOL
    }

    /// Integer lattice coordinates of a pose.
    pub fn lattice_index(&self, p: &UavPose) -> [i64; 3] {
        [
            (p.x / self.step_x).round() as i64,
            (p.y / self.step_y).round() as i64,
            (p.h / self.step_z).round() as i64,
        ]
    }

    fn step_of(&self, mv: Move) -> [f64; 3] {
        match mv {
            Move::Hover => [0.0, 0.0, 0.0],
            Move::PosX => [self.step_x, 0.0, 0.0],
            Move::NegX => [-self.step_x, 0.0, 0.0],
            Move::PosY => [0.0, self.step_y, 0.0],
            Move::NegY => [0.0, -self.step_y, 0.0],
            Move::PosZ => [0.0, 0.0, self.step_z],
            Move::NegZ => [0.0, 0.0, -self.step_z],
        }
    }
}

/// Lattice value in `[lo, hi]` closest to `target`, if the interval holds one.
fn lattice_within(lo: f64, hi: f64, step: f64, target: f64) -> Option<f64> {
    let first = (lo / step - TOL).ceil() as i64;
    let last = (hi / step + TOL).floor() as i64;
    if first > last {
        return None;
    }
    let idx = ((target / step).round() as i64).clamp(first, last);
    Some(idx as f64 * step)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavPose {
    pub x: f64,
    pub y: f64,
    pub h: f64,
}

impl UavPose {
    pub const fn new(x: f64, y: f64, h: f64) -> Self {
        UavPose { x, y, h }
    }

    pub fn horizontal_distance(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FireArea {
    pub id: u32,
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    pub height: f64,
    pub arrival_slot: u64,
}

impl FireArea {
    fn overlaps(&self, other: &FireArea, r_s: f64) -> bool {
        let d = (self.center_x - other.center_x).hypot(self.center_y - other.center_y);
        d <= self.radius + other.radius + 2.0 * r_s
    }
}

/// Axis-aligned box a UAV-UE may occupy while filming one fire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlyingRegion {
    pub fire_id: u32,
    /// 1 = north, 2 = west, 3 = south, 4 = east.
    pub ue_index: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl FlyingRegion {
    pub fn contains(&self, p: &UavPose) -> bool {
        p.x >= self.x_min - TOL
            && p.x <= self.x_max + TOL
            && p.y >= self.y_min - TOL
            && p.y <= self.y_max + TOL
            && p.h >= self.h_min - TOL
            && p.h <= self.h_max + TOL
    }

    pub fn is_empty(&self) -> bool {
        self.x_min > self.x_max || self.y_min > self.y_max || self.h_min > self.h_max
    }

    /// The lattice point closest to the box center (the UE's arrival point).
    pub fn center_on_lattice(&self, grid: &GridWorld) -> UavPose {
        let cx = 0.5 * (self.x_min + self.x_max);
        let cy = 0.5 * (self.y_min + self.y_max);
        let ch = 0.5 * (self.h_min + self.h_max);
        UavPose {
            x: lattice_within(self.x_min, self.x_max, grid.step_x, cx).unwrap_or(cx),
            y: lattice_within(self.y_min, self.y_max, grid.step_y, cy).unwrap_or(cy),
            h: lattice_within(self.h_min, self.h_max, grid.step_z, ch).unwrap_or(ch),
        }
    }
}

/// The `k`-th flying region (1-based) around `fire`.
///
/// With `a = r_i + r_s` and `b = a + l`, region 1 is the strip north of the
/// fire, 2 west, 3 south and 4 east. Heights span `[h_i, h_max]`.
pub fn flying_region(fire: &FireArea, k: usize, r_s: f64, l: f64, h_max: f64) -> Result<FlyingRegion> {
    if !(r_s > 0.0) {
        return Err(SimError::config("scenario.safety_distance", "must be > 0"));
    }
    if !(l > 0.0) {
        return Err(SimError::config("scenario.region_length", "must be > 0"));
    }
    let a = fire.radius + r_s;
    let b = a + l;
    let (x0, y0) = (fire.center_x, fire.center_y);
    let (x_min, x_max, y_min, y_max) = match k {
        1 => (x0 - a, x0 + a, y0 + a, y0 + b),
        2 => (x0 - b, x0 - a, y0 - a, y0 + a),
        3 => (x0 - a, x0 + a, y0 - b, y0 - a),
        4 => (x0 + a, x0 + b, y0 - a, y0 + a),
        _ => {
            return Err(SimError::Unsupported(format!(
                "flying region index {k}; only the four templates 1..=4 exist"
            )))
        }
    };
    Ok(FlyingRegion {
        fire_id: fire.id,
        ue_index: k,
        x_min,
        x_max,
        y_min,
        y_max,
        h_min: fire.height,
        h_max,
    })
}

/// The regions of the first `ues_per_area` templates around one fire.
///
/// The full panorama uses all four; smaller counts exist for toy worlds.
pub fn flying_regions(fire: &FireArea, ues_per_area: usize, r_s: f64, l: f64, h_max: f64) -> Result<Vec<FlyingRegion>> {
    if ues_per_area == 0 || ues_per_area > REGIONS_PER_FIRE {
        return Err(SimError::Unsupported(format!(
            "{ues_per_area} UEs per area; the region templates define at most {REGIONS_PER_FIRE}"
        )));
    }
    (1..=ues_per_area)
        .map(|k| flying_region(fire, k, r_s, l, h_max))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    Hover,
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

impl Move {
    pub const ALL: [Move; 7] = [
        Move::Hover,
        Move::PosX,
        Move::NegX,
        Move::PosY,
        Move::NegY,
        Move::PosZ,
        Move::NegZ,
    ];
    pub const COUNT: usize = 7;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Move> {
        Move::ALL.get(i).copied()
    }
}

/// The legal set a move is checked against (always intersected with the grid).
#[derive(Debug, Clone, Copy)]
pub enum MoveBounds<'a> {
    /// A UAV-UE confined to its flying region.
    Region(&'a FlyingRegion),
    /// The UAV-BS, subject to the fire safety and height constraints.
    BaseStation { fires: &'a [FireArea], r_s: f64, h_max: f64 },
    /// Anywhere in the grid.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveOutcome {
    pub pose: UavPose,
    pub clamped: bool,
}

pub fn apply_move(pose: UavPose, mv: Move, grid: &GridWorld, bounds: MoveBounds<'_>) -> MoveOutcome {
    if mv == Move::Hover {
        return MoveOutcome { pose, clamped: false };
    }
    let [dx, dy, dz] = grid.step_of(mv);
    let next = UavPose::new(pose.x + dx, pose.y + dy, pose.h + dz);
    let legal = grid.contains(&next)
        && match bounds {
            MoveBounds::Region(region) => region.contains(&next),
            MoveBounds::BaseStation { fires, r_s, h_max } => safety_ok(&next, fires, r_s, h_max),
            MoveBounds::Grid => true,
        };
    if legal {
        MoveOutcome { pose: next, clamped: false }
    } else {
        MoveOutcome { pose, clamped: true }
    }
}

/// BS safety and height constraints: strictly outside every fire's safety
/// disk, strictly above the tallest fire, and not above `h_max`.
pub fn safety_ok(bs: &UavPose, fires: &[FireArea], r_s: f64, h_max: f64) -> bool {
    if bs.h > h_max + TOL {
        return false;
    }
    fires.iter().all(|f| {
        bs.horizontal_distance(f.center_x, f.center_y) > f.radius + r_s && bs.h > f.height
    })
}

/// Tallest active fire, or 0 with no fires.
pub fn min_flying_height(fires: &[FireArea]) -> f64 {
    fires.iter().map(|f| f.height).fold(0.0, f64::max)
}

/// Moves the BS to the nearest legal lattice point after a fire arrival made
/// its current pose illegal. Returns `None` when no legal point exists.
pub fn evacuate_base_station(bs: UavPose, grid: &GridWorld, fires: &[FireArea], r_s: f64, h_max: f64) -> Option<UavPose> {
    if safety_ok(&bs, fires, r_s, h_max) {
        return Some(bs);
    }
    let floor = min_flying_height(fires);
    let h = if bs.h > floor {
        bs.h
    } else {
        (((floor / grid.step_z) + TOL).floor() + 1.0) * grid.step_z
    };
    if h > h_max + TOL || h > grid.extent_z + TOL {
        return None;
    }
    let lifted = UavPose::new(bs.x, bs.y, h);
    if safety_ok(&lifted, fires, r_s, h_max) {
        return Some(lifted);
    }
    // Search lattice rings outward until no farther ring can beat the best
    // point found; ties keep the first point in scan order.
    let nx = (grid.extent_x / grid.step_x).round() as i64;
    let ny = (grid.extent_y / grid.step_y).round() as i64;
    let [ix, iy, _] = grid.lattice_index(&lifted);
    let min_step = grid.step_x.min(grid.step_y);
    let mut best: Option<(f64, UavPose)> = None;
    for ring in 1..=nx.max(ny) {
        if let Some((bd, _)) = best {
            if ring as f64 * min_step > bd + TOL {
                break;
            }
        }
        for dx in -ring..=ring {
            for dy in -ring..=ring {
                if dx.abs() != ring && dy.abs() != ring {
                    continue;
                }
                let (cx, cy) = (ix + dx, iy + dy);
                if cx < 0 || cy < 0 || cx > nx || cy > ny {
                    continue;
                }
                let cand = UavPose::new(cx as f64 * grid.step_x, cy as f64 * grid.step_y, h);
                if !safety_ok(&cand, fires, r_s, h_max) {
                    continue;
                }
                let d = cand.horizontal_distance(lifted.x, lifted.y);
                if best.map_or(true, |(bd, _)| d < bd - TOL) {
                    best = Some((d, cand));
                }
            }
        }
    }
    best.map(|(_, pose)| pose)
}

/// Scenario parameters. Defaults follow the 5 km x 5 km x 100 m setup with
/// five fire areas watched by four UEs each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub grid: GridWorld,
    /// Poisson fire arrivals per TTI.
    pub lambda_a: f64,
    pub max_areas: usize,
    pub ues_per_area: usize,
    /// Fires placed at reset (not Poisson-drawn).
    pub initial_fires: usize,
    pub fire_radius: f64,
    /// r_s: clearance between a fire and anything flying.
    pub safety_distance: f64,
    /// l: depth of a flying region.
    pub region_length: f64,
    pub h_max: f64,
    /// Log-normal fire height: mean and sd of the underlying normal.
    pub fire_height_mu: f64,
    pub fire_height_sigma: f64,
    pub bs_start: [f64; 2],
    /// Force all UEs of an area to share the first UE's altitude.
    pub same_altitude: bool,
    /// Floor applied to link distances so coincident UAVs stay finite.
    pub min_link_distance: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            grid: GridWorld::default(),
            lambda_a: 0.05,
            max_areas: 5,
            ues_per_area: 4,
            initial_fires: 1,
            fire_radius: 250.0,
            safety_distance: 50.0,
            region_length: 200.0,
            h_max: 100.0,
            fire_height_mu: 3.0,
            fire_height_sigma: 0.5,
            bs_start: [1250.0, 1250.0],
            same_altitude: false,
            min_link_distance: 1.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.lambda_a >= 0.0 && self.lambda_a.is_finite()) {
            return Err(SimError::config("scenario.lambda_a", "must be >= 0"));
        }
        if self.ues_per_area == 0 || self.ues_per_area > REGIONS_PER_FIRE {
            return Err(SimError::Unsupported(format!(
                "scenario.ues_per_area = {}; between 1 and {REGIONS_PER_FIRE} supported",
                self.ues_per_area
            )));
        }
        if self.initial_fires > self.max_areas {
            return Err(SimError::config("scenario.initial_fires", "exceeds max_areas"));
        }
        if !(self.fire_radius > 0.0) {
            return Err(SimError::config("scenario.fire_radius", "must be > 0"));
        }
        if !(self.safety_distance > 0.0) {
            return Err(SimError::config("scenario.safety_distance", "must be > 0"));
        }
        if !(self.region_length > 0.0) {
            return Err(SimError::config("scenario.region_length", "must be > 0"));
        }
        if !(self.h_max > 6.0 && self.h_max <= self.grid.extent_z + TOL) {
            return Err(SimError::config("scenario.h_max", "must lie in (6, grid.extent_z]"));
        }
        if !(self.fire_height_sigma >= 0.0 && self.fire_height_mu.is_finite()) {
            return Err(SimError::config("scenario.fire_height_sigma", "must be >= 0"));
        }
        if !(self.min_link_distance > 0.0) {
            return Err(SimError::config("scenario.min_link_distance", "must be > 0"));
        }
        let [bx, by] = self.bs_start;
        if !(0.0..=self.grid.extent_x).contains(&bx) || !(0.0..=self.grid.extent_y).contains(&by) {
            return Err(SimError::config("scenario.bs_start", "outside the grid"));
        }
        if self.max_areas > 0 && self.center_lattice_range().is_none() {
            return Err(SimError::config(
                "scenario.grid",
                "world too small to hold a fire with its flying regions",
            ));
        }
        Ok(())
    }

    /// Half-width of the square occupied by a fire plus its regions (b).
    pub fn footprint(&self) -> f64 {
        self.fire_radius + self.safety_distance + self.region_length
    }

    fn center_lattice_range(&self) -> Option<([i64; 2], [i64; 2])> {
        let b = self.footprint();
        let g = &self.grid;
        let rx = [((b / g.step_x) - TOL).ceil() as i64, (((g.extent_x - b) / g.step_x) + TOL).floor() as i64];
        let ry = [((b / g.step_y) - TOL).ceil() as i64, (((g.extent_y - b) / g.step_y) + TOL).floor() as i64];
        (rx[0] <= rx[1] && ry[0] <= ry[1]).then_some((rx, ry))
    }

    fn draw_height<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let hi = self.h_max - 5.0;
        let h = if self.fire_height_sigma == 0.0 {
            self.fire_height_mu.exp()
        } else {
            LogNormal::new(self.fire_height_mu, self.fire_height_sigma)
                .expect("validated log-normal parameters")
                .sample(rng)
        };
        h.clamp(1.0, hi)
    }
}

/// Rejection-samples one non-overlapping fire on the lattice.
///
/// With `keep_clear`, the fire's safety disk must also leave that point
/// outside (used for the BS start position at reset).
pub fn place_fire(
    cfg: &ScenarioConfig,
    existing: &[FireArea],
    keep_clear: Option<[f64; 2]>,
    id: u32,
    slot: u64,
    rng: &mut SimRng,
) -> Option<FireArea> {
    let (rx, ry) = cfg.center_lattice_range()?;
    for _ in 0..PLACEMENT_ATTEMPTS {
        let ix = rng.random_range(rx[0]..=rx[1]);
        let iy = rng.random_range(ry[0]..=ry[1]);
        let mut fire = FireArea {
            id,
            center_x: ix as f64 * cfg.grid.step_x,
            center_y: iy as f64 * cfg.grid.step_y,
            radius: cfg.fire_radius,
            height: 0.0,
            arrival_slot: slot,
        };
        if existing.iter().any(|f| f.overlaps(&fire, cfg.safety_distance)) {
            continue;
        }
        if let Some([x, y]) = keep_clear {
            if (fire.center_x - x).hypot(fire.center_y - y) <= fire.radius + cfg.safety_distance {
                continue;
            }
        }
        fire.height = cfg.draw_height(rng);
        return Some(fire);
    }
    warn!("fire placement failed after {PLACEMENT_ATTEMPTS} attempts in slot {slot}; fire discarded");
    None
}

/// New fires arriving in `slot`: a Poisson(`lambda_a`) count truncated so at
/// most `max_areas` fires are active.
pub fn spawn_fires(cfg: &ScenarioConfig, active: &[FireArea], slot: u64, next_id: &mut u32, rng: &mut SimRng) -> Vec<FireArea> {
    if cfg.lambda_a <= 0.0 || active.len() >= cfg.max_areas {
        return Vec::new();
    }
    let drawn = Poisson::new(cfg.lambda_a)
        .expect("validated arrival rate")
        .sample(rng) as usize;
    let count = drawn.min(cfg.max_areas - active.len());
    let mut all: Vec<FireArea> = active.to_vec();
    let mut born = Vec::with_capacity(count);
    for _ in 0..count {
        if let Some(fire) = place_fire(cfg, &all, None, *next_id, slot, rng) {
            *next_id += 1;
            all.push(fire.clone());
            born.push(fire);
        }
    }
    born
}
