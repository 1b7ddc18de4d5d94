//! Discrete-time multi-UAV coverage and uplink simulator.
//!
//! Grid convention: cell `(row, col)` with row 0 on the north edge; moving
//! north decreases the row index. Cell centers sit at
//! `((col + 0.5) L, (row + 0.5) L)` in ground coordinates.
//!
//! A slot runs in a fixed order:
//! 1. [`World::begin_slot`] draws every UAV-user channel and associates
//!    users using pre-move positions.
//! 2. [`World::act`] per alive UAV in ascending id: move (or stay when
//!    blocked) and capture the cell underneath.
//! 3. [`World::end_slot`] uploads queued data, charges propulsion energy,
//!    moves users and advances the slot counter.

pub mod channel;
pub mod mobility;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, SuccessMode};
use crate::error::{Error, Result};
use crate::rng::{stream, Rng, Stream};

pub use channel::{achievable_rate, channel_gain, ChannelGain};
pub use mobility::{advance_user, step_user_mobility, UserState};

pub const ACTION_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    North,
    South,
    East,
    West,
}

impl Action {
    pub const ALL: [Action; ACTION_COUNT] = [Action::North, Action::South, Action::East, Action::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    /// (row, col) offset.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Action::North => (-1, 0),
            Action::South => (1, 0),
            Action::East => (0, 1),
            Action::West => (0, -1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Neighbor in direction `a`, or `None` when it leaves an `h` x `w` grid.
    pub fn neighbor(self, a: Action, h: usize, w: usize) -> Option<Cell> {
        let (dr, dc) = a.delta();
        let row = self.row.checked_add_signed(dr)?;
        let col = self.col.checked_add_signed(dc)?;
        (row < h && col < w).then_some(Cell { row, col })
    }
}

/// Binary image-acquisition matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageGrid {
    h: usize,
    w: usize,
    cells: Vec<u8>,
    covered: usize,
}

impl CoverageGrid {
    pub fn new(h: usize, w: usize) -> Self {
        Self {
            h,
            w,
            cells: vec![0; h * w],
            covered: 0,
        }
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn get(&self, cell: Cell) -> u8 {
        self.cells[cell.row * self.w + cell.col]
    }

    /// Value at signed coordinates; cells outside the grid read as covered.
    pub fn get_or_covered(&self, row: isize, col: isize) -> u8 {
        if row < 0 || col < 0 || row as usize >= self.h || col as usize >= self.w {
            1
        } else {
            self.cells[row as usize * self.w + col as usize]
        }
    }

    /// Mark `cell` captured; returns 1 if it was not captured before.
    pub fn capture(&mut self, cell: Cell) -> u8 {
        let slot = &mut self.cells[cell.row * self.w + cell.col];
        if *slot == 0 {
            *slot = 1;
            self.covered += 1;
            1
        } else {
            0
        }
    }

    pub fn covered_count(&self) -> usize {
        self.covered
    }

    pub fn ratio(&self) -> f64 {
        self.covered as f64 / self.cells.len() as f64
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn matrix_sum(&self) -> usize {
        self.cells.iter().map(|&c| c as usize).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub cell: Cell,
    pub energy_used: f64,
    pub alive: bool,
}

impl UavState {
    pub fn position(&self, cfg: &ScenarioConfig) -> (f64, f64) {
        cell_center(self.cell, cfg)
    }
}

pub fn cell_center(cell: Cell, cfg: &ScenarioConfig) -> (f64, f64) {
    (
        (cell.col as f64 + 0.5) * cfg.cell_side,
        (cell.row as f64 + 0.5) * cfg.cell_side,
    )
}

/// A served user on one of a UAV's subchannels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub user: usize,
    pub gain: ChannelGain,
    /// bit/s
    pub rate: f64,
}

/// Per-UAV served users, each list sorted by ascending user id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    pub per_uav: Vec<Vec<Link>>,
}

impl Association {
    pub fn empty(uavs: usize) -> Self {
        Self {
            per_uav: vec![Vec::new(); uavs],
        }
    }

    pub fn served_count(&self) -> usize {
        self.per_uav.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.served_count() == 0
    }

    /// QoS threshold, per-UAV subchannel cap and single-UAV-per-user rules.
    pub fn audit(&self, cfg: &ScenarioConfig, users: usize) -> Result<()> {
        let mut seen = vec![false; users];
        for (m, links) in self.per_uav.iter().enumerate() {
            if links.len() > cfg.subchannels {
                return Err(Error::Invariant(format!(
                    "UAV {m} serves {} users on {} subchannels",
                    links.len(),
                    cfg.subchannels
                )));
            }
            for l in links {
                if l.gain.amplitude() < cfg.gain_threshold {
                    return Err(Error::Invariant(format!(
                        "QoS violated: user {} on UAV {m} has |h| = {:e} < {:e}",
                        l.user,
                        l.gain.amplitude(),
                        cfg.gain_threshold
                    )));
                }
                if std::mem::replace(&mut seen[l.user], true) {
                    return Err(Error::Invariant(format!("user {} served twice", l.user)));
                }
            }
        }
        Ok(())
    }
}

/// Channel power gains for every (UAV, user) pair in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    users: usize,
    gains: Vec<ChannelGain>,
}

impl ChannelMatrix {
    pub fn from_powers(uavs: usize, users: usize, powers: &[f64]) -> Self {
        assert_eq!(powers.len(), uavs * users);
        Self {
            users,
            gains: powers.iter().map(|&power| ChannelGain { power }).collect(),
        }
    }

    pub fn get(&self, uav: usize, user: usize) -> ChannelGain {
        self.gains[uav * self.users + user]
    }
}

/// Best-gain greedy association.
///
/// Each user with a non-empty queue is offered to the alive UAV with the
/// largest gain among those meeting the QoS threshold (ties to the lower UAV
/// id). Each UAV keeps at most `subchannels` offers, preferring larger gains
/// and then lower user ids. Rejected users stay unserved this slot.
pub fn associate(
    cfg: &ScenarioConfig,
    uavs: &[UavState],
    users: &[UserState],
    channels: &ChannelMatrix,
) -> Association {
    let mut offers: Vec<Vec<(usize, ChannelGain)>> = vec![Vec::new(); uavs.len()];
    for (n, user) in users.iter().enumerate() {
        if user.queue <= 0.0 {
            continue;
        }
        let mut best: Option<(usize, ChannelGain)> = None;
        for (m, uav) in uavs.iter().enumerate() {
            if !uav.alive {
                continue;
            }
            let g = channels.get(m, n);
            if g.amplitude() < cfg.gain_threshold {
                continue;
            }
            if best.map_or(true, |(_, b)| g.power > b.power) {
                best = Some((m, g));
            }
        }
        if let Some((m, g)) = best {
            offers[m].push((n, g));
        }
    }
    let per_uav = offers
        .into_iter()
        .map(|mut list| {
            list.sort_by(|a, b| b.1.power.total_cmp(&a.1.power).then(a.0.cmp(&b.0)));
            list.truncate(cfg.subchannels);
            list.sort_by_key(|(n, _)| *n);
            list.into_iter()
                .map(|(user, gain)| Link {
                    user,
                    gain,
                    rate: achievable_rate(gain.power, cfg),
                })
                .collect()
        })
        .collect();
    Association { per_uav }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Success,
    EnergyExhausted,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::Running
    }
}

/// Result of one UAV's move within a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveOutcome {
    pub applied: bool,
    pub newly_covered: u8,
}

/// One line of the per-slot JSON-lines trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotTrace {
    pub t: usize,
    pub cells: Vec<[usize; 2]>,
    pub coverage: f64,
    pub comm: f64,
    pub energies: Vec<f64>,
}

/// Complete environment snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    cfg: ScenarioConfig,
    pub t: usize,
    pub coverage: CoverageGrid,
    pub uavs: Vec<UavState>,
    pub users: Vec<UserState>,
    initial_demand: f64,
    mobility_rng: Rng,
    channel_rng: Rng,
}

impl World {
    /// UAVs fill distinct cells row-major from (0, 0); users are placed
    /// uniformly at random with mean speed and heading and a full queue.
    /// No cell is captured until the first slot.
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.rng_seed;
        let mut placement = stream(seed, Stream::Placement, 0);
        let slot_energy = cfg.slot_energy();
        let uavs = (0..cfg.uav_count)
            .map(|m| UavState {
                cell: Cell::new(m / cfg.grid_w, m % cfg.grid_w),
                energy_used: 0.0,
                alive: slot_energy <= cfg.energy_budget,
            })
            .collect();
        let (w, h) = (cfg.area_width(), cfg.area_height());
        let users: Vec<UserState> = (0..cfg.user_count)
            .map(|_| UserState {
                x: placement.gen::<f64>() * w,
                y: placement.gen::<f64>() * h,
                speed: cfg.mean_speed,
                heading: cfg.mean_heading,
                queue: cfg.init_demand,
            })
            .collect();
        let initial_demand = users.iter().map(|u| u.queue).sum();
        Ok(Self {
            cfg: cfg.clone(),
            t: 0,
            coverage: CoverageGrid::new(cfg.grid_h, cfg.grid_w),
            uavs,
            users,
            initial_demand,
            mobility_rng: stream(seed, Stream::Mobility, 0),
            channel_rng: stream(seed, Stream::Channel, 0),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn initial_demand(&self) -> f64 {
        self.initial_demand
    }

    pub fn remaining_demand(&self) -> f64 {
        self.users.iter().map(|u| u.queue).sum()
    }

    /// `C(t)`.
    pub fn coverage_ratio(&self) -> f64 {
        self.coverage.ratio()
    }

    /// `R(t)`; 1 when there was never any demand.
    pub fn comm_ratio(&self) -> f64 {
        if self.initial_demand <= 0.0 {
            return 1.0;
        }
        (1.0 - self.remaining_demand() / self.initial_demand).clamp(0.0, 1.0)
    }

    pub fn completion_ratios(&self) -> (f64, f64) {
        (self.coverage_ratio(), self.comm_ratio())
    }

    pub fn status(&self) -> Status {
        let (c, r) = self.completion_ratios();
        let done = match self.cfg.success_mode {
            SuccessMode::Thresholds => {
                c >= self.cfg.coverage_threshold && r >= self.cfg.comm_threshold
            }
            SuccessMode::Full => {
                self.coverage.covered_count() == self.cfg.cell_count()
                    && self.remaining_demand() <= 0.0
            }
        };
        if done {
            Status::Success
        } else if self.uavs.iter().all(|u| !u.alive) {
            Status::EnergyExhausted
        } else {
            Status::Running
        }
    }

    /// Fresh fading for every pair, drawn in (UAV, user) order.
    pub fn draw_channels(&mut self) -> ChannelMatrix {
        let mut gains = Vec::with_capacity(self.uavs.len() * self.users.len());
        for uav in &self.uavs {
            let p = uav.position(&self.cfg);
            for user in &self.users {
                gains.push(channel_gain(&self.cfg, p, (user.x, user.y), &mut self.channel_rng));
            }
        }
        ChannelMatrix {
            users: self.users.len(),
            gains,
        }
    }

    /// Draw channels and associate users for the coming slot.
    pub fn begin_slot(&mut self) -> Association {
        let channels = self.draw_channels();
        associate(&self.cfg, &self.uavs, &self.users, &channels)
    }

    /// Cells reachable from UAV `m`'s current cell without leaving the grid.
    pub fn action_mask(&self, m: usize) -> [bool; ACTION_COUNT] {
        let cell = self.uavs[m].cell;
        Action::ALL.map(|a| cell.neighbor(a, self.cfg.grid_h, self.cfg.grid_w).is_some())
    }

    /// Move UAV `m` one cell. Blocked (the UAV hovers) when the target is off
    /// the grid or held by another alive UAV; UAVs earlier in the slot order
    /// already sit on their new cells, so the first mover wins.
    pub fn apply_uav_move(&mut self, m: usize, action: Action) -> bool {
        if !self.uavs[m].alive {
            return false;
        }
        let Some(target) = self.uavs[m].cell.neighbor(action, self.cfg.grid_h, self.cfg.grid_w) else {
            return false;
        };
        let occupied = self
            .uavs
            .iter()
            .enumerate()
            .any(|(o, u)| o != m && u.alive && u.cell == target);
        if occupied {
            return false;
        }
        self.uavs[m].cell = target;
        true
    }

    /// Photograph the cell under UAV `m`.
    pub fn capture_cell(&mut self, m: usize) -> u8 {
        if !self.uavs[m].alive {
            return 0;
        }
        self.coverage.capture(self.uavs[m].cell)
    }

    /// Move then capture.
    pub fn act(&mut self, m: usize, action: Action) -> MoveOutcome {
        let applied = self.apply_uav_move(m, action);
        let newly_covered = self.capture_cell(m);
        MoveOutcome {
            applied,
            newly_covered,
        }
    }

    /// Drain served queues for `comm_time`; returns bits actually uploaded.
    pub fn serve_users(&mut self, assoc: &Association) -> f64 {
        let mut uploaded = 0.0;
        for (m, links) in assoc.per_uav.iter().enumerate() {
            if !self.uavs[m].alive {
                continue;
            }
            for l in links {
                let q = &mut self.users[l.user].queue;
                let sent = (l.rate * self.cfg.comm_time).min(*q);
                *q -= sent;
                uploaded += sent;
            }
        }
        uploaded
    }

    /// Charge one slot of propulsion; a UAV lands once another slot would
    /// exceed its budget.
    pub fn consume_energy(&mut self) {
        let e = self.cfg.slot_energy();
        let budget = self.cfg.energy_budget;
        for u in self.uavs.iter_mut().filter(|u| u.alive) {
            u.energy_used += e;
            if u.energy_used + e > budget {
                u.alive = false;
            }
        }
    }

    pub fn move_users(&mut self) {
        for u in self.users.iter_mut() {
            *u = step_user_mobility(u, &self.cfg, &mut self.mobility_rng);
        }
    }

    /// Serve, charge energy, move users, advance `t`. Returns uploaded bits.
    pub fn end_slot(&mut self, assoc: &Association) -> f64 {
        let uploaded = self.serve_users(assoc);
        self.consume_energy();
        self.move_users();
        self.t += 1;
        uploaded
    }

    /// Run a whole slot, asking `policy` for each alive UAV's action in id
    /// order. The policy sees the world as already updated by earlier UAVs.
    pub fn step_with(
        &mut self,
        mut policy: impl FnMut(&World, &Association, usize) -> Action,
    ) -> (Association, Vec<Option<MoveOutcome>>, f64) {
        let assoc = self.begin_slot();
        let mut outcomes = Vec::with_capacity(self.uavs.len());
        for m in 0..self.uavs.len() {
            if self.uavs[m].alive {
                let a = policy(self, &assoc, m);
                outcomes.push(Some(self.act(m, a)));
            } else {
                outcomes.push(None);
            }
        }
        let uploaded = self.end_slot(&assoc);
        (assoc, outcomes, uploaded)
    }

    /// Random-policy helper used by validation: uniform over in-grid moves.
    pub fn random_action(&self, m: usize, rng: &mut Rng) -> Action {
        let mask = self.action_mask(m);
        let legal: Vec<usize> = (0..ACTION_COUNT).filter(|&a| mask[a]).collect();
        Action::ALL[legal[rng.gen_range(0..legal.len())]]
    }

    /// Energy budget, collision freedom, coverage bookkeeping and queue
    /// bounds.
    pub fn audit(&self) -> Result<()> {
        for (m, u) in self.uavs.iter().enumerate() {
            if u.energy_used > self.cfg.energy_budget {
                return Err(Error::Invariant(format!(
                    "UAV {m} used {} J over budget {} J",
                    u.energy_used, self.cfg.energy_budget
                )));
            }
            if u.cell.row >= self.cfg.grid_h || u.cell.col >= self.cfg.grid_w {
                return Err(Error::Invariant(format!("UAV {m} left the grid")));
            }
        }
        for (i, a) in self.uavs.iter().enumerate() {
            for (j, b) in self.uavs.iter().enumerate().skip(i + 1) {
                if a.alive && b.alive && a.cell == b.cell {
                    return Err(Error::Invariant(format!(
                        "UAVs {i} and {j} share cell {:?}",
                        a.cell
                    )));
                }
            }
        }
        if self.coverage.covered_count() != self.coverage.matrix_sum() {
            return Err(Error::Invariant("coverage count out of sync".into()));
        }
        if let Some(n) = self.users.iter().position(|u| !(u.queue >= 0.0)) {
            return Err(Error::Invariant(format!("user {n} has a negative queue")));
        }
        Ok(())
    }

    pub fn trace(&self) -> SlotTrace {
        let (coverage, comm) = self.completion_ratios();
        SlotTrace {
            t: self.t,
            cells: self.uavs.iter().map(|u| [u.cell.row, u.cell.col]).collect(),
            coverage,
            comm,
            energies: self.uavs.iter().map(|u| u.energy_used).collect(),
        }
    }
}

/// Per-objective shaping rewards between consecutive snapshots.
pub fn step_rewards(prev: (f64, f64), next: (f64, f64)) -> (f64, f64) {
    (next.0 - prev.0, next.1 - prev.1)
}
