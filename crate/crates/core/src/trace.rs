//! Replaying recorded events into frames and drawing them.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::sim::{AgentStatus, Algorithm, Event, EventKind, Knowledge, Observers, WorldContext};
use crate::world::{Cell, CellMask, GridWorld};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("trace has no start event")]
    NoStart,
    #[error("trace ends at step {last}, step {wanted} was requested")]
    StepOutOfRange { wanted: u64, last: u64 },
    #[error("event at step {0} refers to an unknown agent")]
    UnknownAgent(u64),
    #[error("trace cell {0} is not free in this world")]
    CellNotFree(Cell),
}

/// Everything visible at the end of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub step: u64,
    pub deployment: Cell,
    /// Live agents by id.
    pub agents: BTreeMap<usize, (Cell, AgentStatus)>,
    pub known: CellMask,
    pub targets: Vec<Cell>,
}

struct Replay<'a> {
    ctx: &'a WorldContext,
    observers: Observers,
    knowledge: Knowledge,
    frame: Frame,
    goals: BTreeMap<usize, Cell>,
    shared_target: Option<Cell>,
}

impl Replay<'_> {
    fn observes(&self, status: AgentStatus) -> bool {
        match status {
            AgentStatus::Terminal => true,
            AgentStatus::Active => self.observers == Observers::All,
            AgentStatus::Deallocated => false,
        }
    }

    fn look(&mut self, c: Cell) {
        for &i in self.ctx.fov().fov_of(c) {
            self.frame.known.insert(i as usize);
        }
    }

    fn rebuild_known(&mut self) {
        let mut sources: Vec<Cell> = self
            .frame
            .agents
            .values()
            .filter(|(_, s)| self.observes(*s))
            .map(|(c, _)| *c)
            .collect();
        sources.push(self.frame.deployment);
        self.frame.known = self.ctx.fov().fov(&sources);
    }

    fn apply(&mut self, e: &Event) -> Result<(), TraceError> {
        let world = self.ctx.world();
        if let Some(c) = e.cell {
            if !world.is_free(c) {
                return Err(TraceError::CellNotFree(c));
            }
        }
        let unknown = || TraceError::UnknownAgent(e.step);
        match e.kind {
            EventKind::Spawn => {
                let (id, c) = (e.agent.ok_or_else(unknown)?, e.cell.ok_or_else(unknown)?);
                self.frame.agents.insert(id, (c, AgentStatus::Active));
                if self.observes(AgentStatus::Active) {
                    self.look(c);
                }
            }
            EventKind::Move | EventKind::Arrive | EventKind::Depart => {
                let id = e.agent.ok_or_else(unknown)?;
                let entry = self.frame.agents.get_mut(&id).ok_or_else(unknown)?;
                if let Some(c) = e.cell {
                    entry.0 = c;
                }
                match e.kind {
                    EventKind::Arrive => {
                        entry.1 = AgentStatus::Terminal;
                        self.goals.remove(&id);
                    }
                    EventKind::Depart => entry.1 = AgentStatus::Active,
                    _ => {}
                }
                let (c, s) = *entry;
                if self.observes(s) {
                    self.look(c);
                }
                if self.knowledge == Knowledge::Instantaneous {
                    self.rebuild_known();
                }
            }
            EventKind::Deallocate => {
                let id = e.agent.ok_or_else(unknown)?;
                self.frame.agents.remove(&id).ok_or_else(unknown)?;
                self.goals.remove(&id);
                if self.knowledge == Knowledge::Instantaneous {
                    self.rebuild_known();
                }
            }
            EventKind::Target | EventKind::Assign => match (e.agent, e.cell) {
                (Some(id), Some(c)) => {
                    self.goals.insert(id, c);
                }
                (None, c) => self.shared_target = c,
                _ => {}
            },
            EventKind::Start | EventKind::Violation | EventKind::Tick | EventKind::Halt => {}
        }
        Ok(())
    }
}

/// Replays `events` up to and including step `at`.
pub fn frame_at(ctx: &WorldContext, events: &[Event], at: u64) -> Result<Frame, TraceError> {
    let start = events
        .iter()
        .find(|e| e.kind == EventKind::Start)
        .ok_or(TraceError::NoStart)?;
    let deployment = start.cell.ok_or(TraceError::NoStart)?;
    if !ctx.world().is_free(deployment) {
        return Err(TraceError::CellNotFree(deployment));
    }
    let last = events.iter().map(|e| e.step).max().unwrap_or(0);
    if at > last {
        return Err(TraceError::StepOutOfRange { wanted: at, last });
    }
    let policy = start.algo.unwrap_or(Algorithm::Cadence).policy();
    let mut replay = Replay {
        ctx,
        observers: policy.observers,
        knowledge: policy.knowledge,
        frame: Frame {
            step: at,
            deployment,
            agents: BTreeMap::new(),
            known: ctx.world().empty_mask(),
            targets: Vec::new(),
        },
        goals: BTreeMap::new(),
        shared_target: None,
    };
    replay.look(deployment);
    for e in events.iter().take_while(|e| e.step <= at) {
        replay.apply(e)?;
    }
    let mut targets: Vec<Cell> = replay
        .goals
        .values()
        .copied()
        .chain(replay.shared_target)
        .collect();
    targets.sort_by_key(|c| ctx.world().index(*c));
    targets.dedup();
    replay.frame.targets = targets;
    Ok(replay.frame)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    Blocked,
    Unknown,
    Known,
    Target,
    Deployment,
    Agent,
}

fn marks(world: &GridWorld, frame: &Frame) -> Vec<Mark> {
    let mut out: Vec<Mark> = (0..world.cell_count())
        .map(
            |i| match (world.is_free_index(i), frame.known.contains(i)) {
                (false, _) => Mark::Blocked,
                (true, false) => Mark::Unknown,
                (true, true) => Mark::Known,
            },
        )
        .collect();
    for t in &frame.targets {
        out[world.index(*t)] = Mark::Target;
    }
    out[world.index(frame.deployment)] = Mark::Deployment;
    for (c, _) in frame.agents.values() {
        out[world.index(*c)] = Mark::Agent;
    }
    out
}

/// Text frame, top row first: `#` blocked, `.` known, space unknown,
/// `A` agent, `D` deployment cell, `*` target.
pub fn render_ascii(world: &GridWorld, frame: &Frame) -> String {
    let m = marks(world, frame);
    let mut out = String::with_capacity((world.width() + 1) * world.height());
    for y in (0..world.height()).rev() {
        for x in 0..world.width() {
            out.push(match m[world.index(Cell::new(x as i32, y as i32))] {
                Mark::Blocked => '#',
                Mark::Unknown => ' ',
                Mark::Known => '.',
                Mark::Target => '*',
                Mark::Deployment => 'D',
                Mark::Agent => 'A',
            });
        }
        out.push('\n');
    }
    out
}

/// Binary PPM with `scale` pixels per cell side.
pub fn render_ppm(world: &GridWorld, frame: &Frame, scale: usize) -> Vec<u8> {
    let scale = scale.max(1);
    let m = marks(world, frame);
    let (w, h) = (world.width() * scale, world.height() * scale);
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    for py in 0..h {
        let y = world.height() - 1 - py / scale;
        for px in 0..w {
            let rgb: [u8; 3] = match m[world.index(Cell::new((px / scale) as i32, y as i32))] {
                Mark::Blocked => [40, 40, 40],
                Mark::Unknown => [150, 150, 150],
                Mark::Known => [245, 245, 235],
                Mark::Target => [230, 160, 20],
                Mark::Deployment => [30, 110, 220],
                Mark::Agent => [210, 40, 40],
            };
            out.extend_from_slice(&rgb);
        }
    }
    out
}
