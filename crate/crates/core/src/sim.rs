//! Shared simulation runtime: agent lifecycle, synchronous ticks, coverage
//! bookkeeping, invariant monitoring, events and metrics.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{ApfConfig, IsdaConfig, LatticeConfig};
use crate::visibility::FovCache;
use crate::world::{
    analyze, bfs_distance_field, Cell, CellMask, DistanceField, GridWorld, WorldAnalysis,
};

/// A world together with its analysis and field-of-view cache. Shared
/// read-only by every run on that world.
pub struct WorldContext {
    analysis: WorldAnalysis,
    fov: FovCache,
}

impl WorldContext {
    pub fn new(world: GridWorld) -> Self {
        WorldContext {
            analysis: analyze(&world),
            fov: FovCache::new(world),
        }
    }

    pub fn world(&self) -> &GridWorld {
        self.fov.world()
    }

    pub fn analysis(&self) -> &WorldAnalysis {
        &self.analysis
    }

    pub fn fov(&self) -> &FovCache {
        &self.fov
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Cadence,
    Dadence,
    Square,
    Triangle,
    Apf,
    Isda,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Cadence,
        Algorithm::Dadence,
        Algorithm::Square,
        Algorithm::Triangle,
        Algorithm::Apf,
        Algorithm::Isda,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cadence => "cadence",
            Algorithm::Dadence => "dadence",
            Algorithm::Square => "square",
            Algorithm::Triangle => "triangle",
            Algorithm::Apf => "apf",
            Algorithm::Isda => "isda",
        }
    }

    /// How this algorithm's agents observe the world.
    pub fn policy(self) -> ObservationPolicy {
        match self {
            Algorithm::Cadence => ObservationPolicy {
                observers: Observers::Settled,
                knowledge: Knowledge::Instantaneous,
            },
            Algorithm::Dadence => ObservationPolicy {
                observers: Observers::All,
                knowledge: Knowledge::Instantaneous,
            },
            Algorithm::Square | Algorithm::Triangle | Algorithm::Isda => ObservationPolicy {
                observers: Observers::Settled,
                knowledge: Knowledge::Accumulated,
            },
            Algorithm::Apf => ObservationPolicy {
                observers: Observers::All,
                knowledge: Knowledge::Accumulated,
            },
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

/// Which agents contribute to the known region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observers {
    /// Terminal agents only.
    Settled,
    /// Every agent in the world.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knowledge {
    /// Known region is exactly what observers see right now.
    Instantaneous,
    /// Known region is everything ever seen.
    Accumulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservationPolicy {
    pub observers: Observers,
    pub knowledge: Knowledge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InvariantMode {
    /// Stop the run at the first violation.
    Assert,
    /// Log violations and keep going.
    Record,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_max: usize,
    pub t_max: u64,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub invariant_mode: InvariantMode,
    pub deployment: Cell,
    pub record_events: bool,
    pub measure_time: bool,
    /// Check visibility-graph connectivity after every tick.
    pub monitor_connectivity: bool,
    pub apf: ApfConfig,
    pub lattice: LatticeConfig,
    pub isda: IsdaConfig,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, deployment: Cell, n_max: usize, t_max: u64) -> Self {
        RunConfig {
            n_max,
            t_max,
            seed: 0,
            algorithm,
            invariant_mode: InvariantMode::Record,
            deployment,
            record_events: false,
            measure_time: false,
            // pure repulsion makes no connectivity promise; losses are
            // counted once at the end instead
            monitor_connectivity: algorithm != Algorithm::Apf,
            apf: ApfConfig::default(),
            lattice: LatticeConfig::for_algorithm(algorithm),
            isda: IsdaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentStatus {
    Active,
    Terminal,
    Deallocated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Agent {
    pub id: usize,
    pub cell: Cell,
    pub status: AgentStatus,
}

impl Agent {
    pub fn is_live(&self) -> bool {
        self.status != AgentStatus::Deallocated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Start,
    Spawn,
    Assign,
    Target,
    Move,
    Arrive,
    Depart,
    Deallocate,
    Violation,
    Tick,
    Halt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub step: u64,
    pub kind: EventKind,
    pub agent: Option<usize>,
    pub cell: Option<Cell>,
    /// Return-path length of a deallocated agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub len: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algo: Option<Algorithm>,
}

impl Event {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("events serialise")
    }
}

/// Writes events as JSON lines.
pub fn events_to_jsonl(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_json());
        out.push('\n');
    }
    out
}

pub fn events_from_jsonl(text: &str) -> Result<Vec<Event>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Disconnected,
    CoverageLost,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub step: u64,
    pub kind: ViolationKind,
    pub cell: Option<Cell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("deployment cell is occupied")]
    DeploymentOccupied,
    #[error("agent budget exhausted")]
    AgentBudgetExhausted,
    #[error("step budget exhausted")]
    TimeBudgetExhausted,
    #[error("conflicting moves by agents {0:?}")]
    CollisionConflict(Vec<usize>),
    #[error("agent {0} is not terminal")]
    NotTerminal(usize),
    #[error("agent {0} is not active")]
    NotActive(usize),
    #[error("invariant violated at step {step}: {kind:?}")]
    InvariantViolated { step: u64, kind: ViolationKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Violation,
    Error,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Violation => "violation",
            RunStatus::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub coverage_pct: f64,
    pub covered_cells: usize,
    pub free_cells: usize,
    pub steps: u64,
    /// Agents left in the world plus the deployment pseudo-agent.
    pub final_agents: usize,
    /// Peak concurrent agents plus the deployment pseudo-agent.
    pub max_agents: usize,
    pub lost_agents: usize,
    pub spawned_total: usize,
    pub violations: usize,
    pub status: RunStatus,
    pub wall_ms: u64,
}

impl RunMetrics {
    pub fn fully_covered(&self) -> bool {
        self.covered_cells == self.free_cells
    }
}

/// Moves and status changes applied together in one tick.
#[derive(Debug, Clone, Default)]
pub struct TickPlan {
    /// Agent and destination; each destination is a free 4-neighbour.
    pub moves: Vec<(usize, Cell)>,
    /// Agents that become terminal after moving.
    pub arrivals: Vec<usize>,
    /// Terminal agents that become active again.
    pub departures: Vec<usize>,
}

const NONE: u32 = u32::MAX;

/// Per-run mutable state.
pub struct SimState<'a> {
    ctx: &'a WorldContext,
    policy: ObservationPolicy,
    mode: InvariantMode,
    monitor: bool,
    algorithm: Algorithm,
    deployment: Cell,
    n_max: usize,
    t_max: u64,
    agents: Vec<Agent>,
    occupancy: Vec<u32>,
    counts: Vec<u32>,
    known: CellMask,
    known_version: u64,
    known_log: Vec<u32>,
    known_removals: u64,
    zeroed: Vec<usize>,
    step: u64,
    live: usize,
    max_concurrent: usize,
    record_events: bool,
    events: Vec<Event>,
    violations: Vec<Violation>,
    home: DistanceField,
    observers_connected: Option<bool>,
    started: Option<Instant>,
}

impl<'a> SimState<'a> {
    pub fn new(ctx: &'a WorldContext, config: &RunConfig) -> Self {
        let world = ctx.world();
        assert!(world.is_free(config.deployment), "deployment must be free");
        let home = bfs_distance_field(world, &world.free_mask(), config.deployment);
        let mut s = SimState {
            ctx,
            policy: config.algorithm.policy(),
            mode: config.invariant_mode,
            monitor: config.monitor_connectivity,
            algorithm: config.algorithm,
            deployment: config.deployment,
            n_max: config.n_max,
            t_max: config.t_max,
            agents: Vec::new(),
            occupancy: vec![NONE; world.cell_count()],
            counts: vec![0; world.cell_count()],
            known: world.empty_mask(),
            known_version: 0,
            known_log: Vec::new(),
            known_removals: 0,
            zeroed: Vec::new(),
            step: 0,
            live: 0,
            max_concurrent: 0,
            record_events: config.record_events,
            events: Vec::new(),
            violations: Vec::new(),
            home,
            observers_connected: None,
            started: config.measure_time.then(Instant::now),
        };
        s.add_view(config.deployment);
        s.log(
            EventKind::Start,
            None,
            Some(config.deployment),
            None,
            Some(config.algorithm),
        );
        s
    }

    pub fn ctx(&self) -> &'a WorldContext {
        self.ctx
    }

    pub fn world(&self) -> &'a GridWorld {
        self.ctx.world()
    }

    pub fn fov(&self) -> &'a FovCache {
        self.ctx.fov()
    }

    pub fn deployment(&self) -> Cell {
        self.deployment
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn t_max(&self) -> u64 {
        self.t_max
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agent(&self, id: usize) -> &Agent {
        &self.agents[id]
    }

    pub fn live_count(&self) -> usize {
        self.live
    }

    pub fn max_concurrent(&self) -> usize {
        self.max_concurrent
    }

    pub fn known(&self) -> &CellMask {
        &self.known
    }

    /// Changes whenever the known region changes.
    pub fn known_version(&self) -> u64 {
        self.known_version
    }

    /// Cells in the order they became known (including ones later lost).
    pub fn known_log(&self) -> &[u32] {
        &self.known_log
    }

    /// Number of times a cell dropped out of the known region.
    pub fn known_removals(&self) -> u64 {
        self.known_removals
    }

    pub fn fully_known(&self) -> bool {
        self.known.len() == self.world().free_count()
    }

    /// Number of observers currently seeing the cell at `index`.
    pub fn coverage_count(&self, index: usize) -> u32 {
        self.counts[index]
    }

    pub fn occupant(&self, c: Cell) -> Option<usize> {
        if !self.world().in_bounds(c) {
            return None;
        }
        match self.occupancy[self.world().index(c)] {
            NONE => None,
            id => Some(id as usize),
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn live_agents(&self) -> impl Iterator<Item = &Agent> {
        self.agents.iter().filter(|a| a.is_live())
    }

    pub fn log(
        &mut self,
        kind: EventKind,
        agent: Option<usize>,
        cell: Option<Cell>,
        len: Option<u32>,
        algo: Option<Algorithm>,
    ) {
        if self.record_events {
            self.events.push(Event {
                step: self.step,
                kind,
                agent,
                cell,
                len,
                algo,
            });
        }
    }

    fn is_observer(&self, a: &Agent) -> bool {
        match a.status {
            AgentStatus::Terminal => true,
            AgentStatus::Active => self.policy.observers == Observers::All,
            AgentStatus::Deallocated => false,
        }
    }

    fn add_view(&mut self, c: Cell) {
        let fov = self.ctx.fov().fov_of(c);
        for &i in fov {
            let i = i as usize;
            self.counts[i] += 1;
            if self.known.insert(i) {
                self.known_version += 1;
                self.known_log.push(i as u32);
            }
        }
    }

    fn remove_view(&mut self, c: Cell) {
        let fov = self.ctx.fov().fov_of(c);
        for &i in fov {
            let i = i as usize;
            self.counts[i] -= 1;
            if self.counts[i] == 0 {
                self.zeroed.push(i);
            }
        }
    }

    /// Drops cells nobody sees any more from an instantaneous known region
    /// and returns the first cell that was lost, if any.
    fn settle_known(&mut self) -> Option<Cell> {
        let mut lost = None;
        let zeroed = std::mem::take(&mut self.zeroed);
        for &i in &zeroed {
            if self.counts[i] == 0
                && self.policy.knowledge == Knowledge::Instantaneous
                && self.known.remove(i)
            {
                self.known_version += 1;
                self.known_removals += 1;
                if lost.is_none() {
                    lost = Some(self.world().cell(i));
                }
            }
        }
        self.zeroed = zeroed;
        self.zeroed.clear();
        lost
    }

    pub fn spawn(&mut self) -> Result<usize, SimError> {
        if self.step >= self.t_max {
            return Err(SimError::TimeBudgetExhausted);
        }
        if self.live >= self.n_max {
            return Err(SimError::AgentBudgetExhausted);
        }
        if self.occupant(self.deployment).is_some() {
            return Err(SimError::DeploymentOccupied);
        }
        let id = self.agents.len();
        let agent = Agent {
            id,
            cell: self.deployment,
            status: AgentStatus::Active,
        };
        self.agents.push(agent);
        let di = self.world().index(self.deployment);
        self.occupancy[di] = id as u32;
        if self.is_observer(&agent) {
            self.add_view(agent.cell);
        }
        self.live += 1;
        self.max_concurrent = self.max_concurrent.max(self.live);
        self.observers_connected = None;
        self.log(
            EventKind::Spawn,
            Some(id),
            Some(self.deployment),
            None,
            None,
        );
        Ok(id)
    }

    /// Checks a plan against the collision rules without applying it.
    pub fn validate_plan(&self, plan: &TickPlan) -> Result<(), SimError> {
        let world = self.world();
        let mut moving = vec![false; self.agents.len()];
        let mut bad = Vec::new();
        for &(id, to) in &plan.moves {
            let a = &self.agents[id];
            if !a.is_live() || !a.cell.is_adjacent(to) || !world.is_free(to) || moving[id] {
                bad.push(id);
            }
            moving[id] = true;
        }
        let mut dest: Vec<(usize, usize)> = plan
            .moves
            .iter()
            .map(|&(id, to)| (world.index(to), id))
            .collect();
        dest.sort_unstable();
        for w in dest.windows(2) {
            if w[0].0 == w[1].0 {
                bad.extend([w[0].1, w[1].1]);
            }
        }
        for &(id, to) in &plan.moves {
            if let Some(other) = self.occupant(to) {
                // a standing occupant or a swap
                if !moving[other]
                    || plan
                        .moves
                        .iter()
                        .any(|&(o, t)| o == other && t == self.agents[id].cell)
                {
                    bad.extend([id, other]);
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            bad.sort_unstable();
            bad.dedup();
            Err(SimError::CollisionConflict(bad))
        }
    }

    /// Applies one synchronous step.
    pub fn tick(&mut self, plan: &TickPlan) -> Result<(), SimError> {
        self.validate_plan(plan)?;
        for &id in &plan.departures {
            if self.agents[id].status != AgentStatus::Terminal {
                return Err(SimError::NotTerminal(id));
            }
        }
        for &id in &plan.arrivals {
            if !self.agents[id].is_live() {
                return Err(SimError::NotActive(id));
            }
        }
        let world = self.world();
        let mut touched: Vec<usize> = plan.moves.iter().map(|m| m.0).collect();
        touched.extend(&plan.arrivals);
        touched.extend(&plan.departures);
        touched.sort_unstable();
        touched.dedup();

        for &id in &touched {
            let a = self.agents[id];
            if self.is_observer(&a) {
                self.remove_view(a.cell);
            }
        }
        for &(id, _) in &plan.moves {
            let i = world.index(self.agents[id].cell);
            if self.occupancy[i] == id as u32 {
                self.occupancy[i] = NONE;
            }
        }
        self.step += 1;
        for &(id, to) in &plan.moves {
            self.agents[id].cell = to;
            self.occupancy[world.index(to)] = id as u32;
            self.log(EventKind::Move, Some(id), Some(to), None, None);
        }
        for &id in &plan.departures {
            self.agents[id].status = AgentStatus::Active;
            let c = self.agents[id].cell;
            self.log(EventKind::Depart, Some(id), Some(c), None, None);
        }
        for &id in &plan.arrivals {
            self.agents[id].status = AgentStatus::Terminal;
            let c = self.agents[id].cell;
            self.log(EventKind::Arrive, Some(id), Some(c), None, None);
        }
        let mut observers_changed = false;
        for &id in &touched {
            let a = self.agents[id];
            if self.is_observer(&a) {
                self.add_view(a.cell);
                observers_changed = true;
            }
        }
        if observers_changed || plan.departures.len() + plan.arrivals.len() > 0 {
            self.observers_connected = None;
        }
        let lost = self.settle_known();
        self.log(EventKind::Tick, None, None, None, None);
        if let Some(c) = lost {
            self.violation(ViolationKind::CoverageLost, Some(c))?;
        }
        if self.monitor {
            self.check_connectivity()?;
        }
        Ok(())
    }

    /// Advances the clock without moving anyone.
    pub fn idle(&mut self) -> Result<(), SimError> {
        self.tick(&TickPlan::default())
    }

    fn violation(&mut self, kind: ViolationKind, cell: Option<Cell>) -> Result<(), SimError> {
        self.violations.push(Violation {
            step: self.step,
            kind,
            cell,
        });
        self.log(EventKind::Violation, None, cell, None, None);
        match self.mode {
            InvariantMode::Assert => Err(SimError::InvariantViolated {
                step: self.step,
                kind,
            }),
            InvariantMode::Record => Ok(()),
        }
    }

    /// Evaluates the connectivity invariant for the current members.
    pub fn check_connectivity(&mut self) -> Result<(), SimError> {
        if !self.members_connected() {
            return self.violation(ViolationKind::Disconnected, None);
        }
        Ok(())
    }

    /// Whether the visibility graph over live agents and the deployment cell is connected.
    pub fn members_connected(&mut self) -> bool {
        // Fast path: observers plus the deployment cell form a connected
        // graph and every other agent stands in a cell some observer sees.
        let observers_ok = match self.observers_connected {
            Some(v) => v,
            None => {
                let v = self.component_from_deployment(true).1;
                self.observers_connected = Some(v);
                v
            }
        };
        if observers_ok {
            let world = self.world();
            let all_seen = self
                .agents
                .iter()
                .filter(|a| a.is_live() && !self.is_observer(a))
                .all(|a| self.counts[world.index(a.cell)] > 0);
            if all_seen {
                return true;
            }
        }
        self.component_from_deployment(false).1
    }

    /// Agents reachable from the deployment cell in the visibility graph;
    /// the flag tells whether every considered agent was reached.
    fn component_from_deployment(&self, observers_only: bool) -> (Vec<bool>, bool) {
        let world = self.world();
        let fov = self.ctx.fov();
        let considered = |a: &Agent| a.is_live() && (!observers_only || self.is_observer(a));
        let total = self.agents.iter().filter(|a| considered(a)).count();
        let mut reached = vec![false; self.agents.len()];
        let mut count = 0;
        let mut stack = vec![self.deployment];
        while let Some(c) = stack.pop() {
            if count == total {
                break;
            }
            for &i in fov.fov_of(c) {
                let id = self.occupancy[i as usize];
                if id != NONE && !reached[id as usize] && considered(&self.agents[id as usize]) {
                    reached[id as usize] = true;
                    count += 1;
                    stack.push(world.cell(i as usize));
                }
            }
        }
        (reached, count == total)
    }

    /// Live agents split into those connected to the deployment cell and the rest.
    pub fn connected_split(&self) -> (Vec<usize>, Vec<usize>) {
        let (reached, _) = self.component_from_deployment(false);
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for a in self.agents.iter().filter(|a| a.is_live()) {
            if reached[a.id] {
                inside.push(a.id);
            } else {
                outside.push(a.id);
            }
        }
        (inside, outside)
    }

    /// Shortest-path length from `c` back to the deployment cell.
    pub fn return_length(&self, c: Cell) -> u32 {
        self.home.get(self.world(), c).unwrap_or(u32::MAX)
    }

    /// Removes a terminal agent; returns the length of its walk home.
    pub fn deallocate_agent(&mut self, id: usize) -> Result<u32, SimError> {
        if self.agents[id].status != AgentStatus::Terminal {
            return Err(SimError::NotTerminal(id));
        }
        Ok(self.remove_agent(id))
    }

    /// Removes an active agent that has nothing left to do.
    pub fn recall_agent(&mut self, id: usize) -> Result<u32, SimError> {
        if self.agents[id].status != AgentStatus::Active {
            return Err(SimError::NotActive(id));
        }
        Ok(self.remove_agent(id))
    }

    fn remove_agent(&mut self, id: usize) -> u32 {
        let a = self.agents[id];
        if self.is_observer(&a) {
            self.remove_view(a.cell);
            self.observers_connected = None;
        }
        let i = self.world().index(a.cell);
        if self.occupancy[i] == id as u32 {
            self.occupancy[i] = NONE;
        }
        self.agents[id].status = AgentStatus::Deallocated;
        self.live -= 1;
        self.settle_known();
        let len = self.return_length(a.cell);
        self.log(
            EventKind::Deallocate,
            Some(id),
            Some(a.cell),
            Some(len),
            None,
        );
        len
    }

    /// Marks every active agent terminal where it stands, without using a tick.
    pub fn settle_all(&mut self) {
        for id in 0..self.agents.len() {
            let a = self.agents[id];
            if a.status != AgentStatus::Active {
                continue;
            }
            if self.is_observer(&a) {
                self.remove_view(a.cell);
            }
            self.agents[id].status = AgentStatus::Terminal;
            self.add_view(a.cell);
            self.log(EventKind::Arrive, Some(id), Some(a.cell), None, None);
        }
        self.observers_connected = None;
        self.zeroed.clear();
    }

    /// Records a violation for every live agent cut off from the
    /// deployment cell and returns their ids.
    pub fn flag_lost_agents(&mut self) -> Vec<usize> {
        let (_, outside) = self.connected_split();
        for &id in &outside {
            let c = self.agents[id].cell;
            self.violations.push(Violation {
                step: self.step,
                kind: ViolationKind::Disconnected,
                cell: Some(c),
            });
            self.log(EventKind::Violation, Some(id), Some(c), None, None);
        }
        outside
    }

    pub fn halt(&mut self) {
        self.log(EventKind::Halt, None, None, None, None);
    }

    pub fn finalize(&self) -> RunMetrics {
        let world = self.world();
        let (inside, outside) = self.connected_split();
        let mut sources: Vec<Cell> = inside.iter().map(|&id| self.agents[id].cell).collect();
        sources.push(self.deployment);
        let covered = self.ctx.fov().fov(&sources).len();
        let free = world.free_count();
        let status = if self.mode == InvariantMode::Assert && !self.violations.is_empty() {
            RunStatus::Violation
        } else {
            RunStatus::Ok
        };
        RunMetrics {
            coverage_pct: covered as f64 * 100.0 / free as f64,
            covered_cells: covered,
            free_cells: free,
            steps: self.step,
            final_agents: self.live + 1,
            max_agents: self.max_concurrent + 1,
            lost_agents: outside.len(),
            spawned_total: self.agents.len(),
            violations: self.violations.len(),
            status,
            wall_ms: self.started.map_or(0, |t| t.elapsed().as_millis() as u64),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }
}

/// Result of one complete run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub events: Vec<Event>,
    pub violations: Vec<Violation>,
    /// Set when the run stopped on an error other than a recorded violation.
    pub error: Option<SimError>,
}

impl RunOutput {
    /// Runs `body` on a fresh state and collects metrics, whatever way the
    /// body ends.
    pub fn execute(
        ctx: &WorldContext,
        config: &RunConfig,
        body: impl FnOnce(&mut SimState) -> Result<(), SimError>,
    ) -> RunOutput {
        let mut state = SimState::new(ctx, config);
        let result = body(&mut state);
        state.halt();
        let mut metrics = state.finalize();
        let error = match result {
            Ok(()) => None,
            Err(SimError::InvariantViolated { .. }) => None,
            Err(e) => {
                metrics.status = RunStatus::Error;
                Some(e)
            }
        };
        RunOutput {
            metrics,
            events: state.take_events(),
            violations: state.violations,
            error,
        }
    }
}

/// Runs the configured algorithm on a world.
pub fn run_algorithm(ctx: &WorldContext, config: &RunConfig) -> RunOutput {
    match config.algorithm {
        Algorithm::Cadence => crate::cadence::cadence_run(ctx, config),
        Algorithm::Dadence => crate::dadence::dadence_run(ctx, config),
        Algorithm::Square | Algorithm::Triangle => crate::baselines::lattice_run(ctx, config),
        Algorithm::Apf => crate::baselines::apf_run(ctx, config),
        Algorithm::Isda => crate::baselines::isda_run(ctx, config),
    }
}
