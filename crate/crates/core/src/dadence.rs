//! Decentralised border-seeking deployment. Agents head for a shared
//! border target, new agents jump the queue at the deployment cell, and
//! moves that would break coverage or connectivity are withdrawn, with the
//! offending edge dropped from that agent's own movement graph.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::dealloc::deallocate_unnecessary;
use crate::nav::KnownField;
use crate::sim::{EventKind, RunConfig, RunOutput, SimError, SimState, TickPlan, WorldContext};
use crate::visibility::FovCache;
use crate::world::{border, Cell, CellMask, GridWorld};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DadenceError {
    #[error("the known region has no border")]
    NoBorder,
    #[error("no agent in the queue can step closer to the target")]
    NoCloserFreeChain,
}

/// Border cell with the smallest summed distance (over known cells) to all
/// members; ties prefer higher rows, then lower columns.
pub fn select_target(
    world: &GridWorld,
    known: &CellMask,
    members: &[Cell],
) -> Result<Cell, DadenceError> {
    let candidates = border(world, known);
    if candidates.is_empty() {
        return Err(DadenceError::NoBorder);
    }
    let mut weight = vec![0u32; world.cell_count()];
    for m in members {
        weight[world.index(*m)] += 1;
    }
    // grid distance never beats the walking distance, so candidates are
    // tried in order of that lower bound until it exceeds the best sum
    let manhattan = |x: Cell| {
        members
            .iter()
            .map(|m| (x.x.abs_diff(m.x) + x.y.abs_diff(m.y)) as u64)
            .sum::<u64>()
    };
    let mut ordered: Vec<(u64, Cell)> = candidates.into_iter().map(|c| (manhattan(c), c)).collect();
    ordered.sort_by_key(|(lb, c)| (*lb, c.tie_key()));
    let total = members.len() as u64;
    let mut best: Option<(u64, Cell)> = None;
    let mut dist = vec![u32::MAX; world.cell_count()];
    let mut touched = Vec::new();
    for (lb, x) in ordered {
        let bound = match best {
            None => u64::MAX,
            Some((sum, _)) if lb > sum => break,
            Some((sum, b)) if x.tie_key() < b.tie_key() => sum + 1,
            Some((sum, _)) => sum,
        };
        if let Some(sum) = summed_distance(
            world,
            known,
            x,
            &weight,
            total,
            bound,
            &mut dist,
            &mut touched,
        ) {
            if sum < bound {
                best = Some((sum, x));
            }
        }
    }
    best.map(|b| b.1).ok_or(DadenceError::NoBorder)
}

/// BFS from `x` adding up member distances; gives up once the sum cannot
/// get below `bound`. Returns None when abandoned or some member is
/// unreachable.
#[allow(clippy::too_many_arguments)]
fn summed_distance(
    world: &GridWorld,
    known: &CellMask,
    x: Cell,
    weight: &[u32],
    total: u64,
    bound: u64,
    dist: &mut [u32],
    touched: &mut Vec<usize>,
) -> Option<u64> {
    for &i in touched.iter() {
        dist[i] = u32::MAX;
    }
    touched.clear();
    let s = world.index(x);
    dist[s] = 0;
    touched.push(s);
    let mut queue = VecDeque::from([s]);
    let mut sum = 0u64;
    let mut found = 0u64;
    let mut result = None;
    while let Some(i) = queue.pop_front() {
        let d = dist[i] as u64;
        if sum + (total - found) * d >= bound && found < total {
            break;
        }
        if weight[i] > 0 {
            sum += d * weight[i] as u64;
            found += weight[i] as u64;
            if found == total {
                result = Some(sum);
                break;
            }
        }
        for n in world.cell(i).neighbors4() {
            if world.in_bounds(n) {
                let j = world.index(n);
                if known.contains(j) && dist[j] == u32::MAX {
                    dist[j] = dist[i] + 1;
                    touched.push(j);
                    queue.push_back(j);
                }
            }
        }
    }
    if total == 0 {
        return Some(0);
    }
    result.filter(|s| *s < bound)
}

/// Steps one cell closer to the target along `field`, in N, E, S, W order,
/// preferring empty cells.
fn closer_steps(state: &SimState, field: &KnownField, c: Cell) -> Vec<Cell> {
    let world = state.world();
    let Some(d) = field.at(world.index(c)) else {
        return Vec::new();
    };
    let mut steps: Vec<Cell> = c
        .neighbors4()
        .into_iter()
        .filter(|n| world.in_bounds(*n) && d > 0 && field.at(world.index(*n)) == Some(d - 1))
        .collect();
    steps.sort_by_key(|n| state.occupant(*n).is_some());
    steps
}

/// Shifts the agent on the deployment cell toward the target, pushing
/// every agent in its way one cell further, all in one tick.
pub fn queue_jump(
    state: &SimState,
    field: &KnownField,
) -> Result<Vec<(usize, Cell)>, DadenceError> {
    let mut cur = state.deployment();
    let mut agent = state.occupant(cur).ok_or(DadenceError::NoCloserFreeChain)?;
    let mut shifts = Vec::new();
    loop {
        let next = *closer_steps(state, field, cur)
            .first()
            .ok_or(DadenceError::NoCloserFreeChain)?;
        shifts.push((agent, next));
        match state.occupant(next) {
            None => return Ok(shifts),
            Some(o) => {
                agent = o;
                cur = next;
            }
        }
    }
}

/// Per-agent removed edges of the movement graph.
#[derive(Debug, Clone, Default)]
pub struct PrunedEdges {
    edges: Vec<BTreeSet<(Cell, Cell)>>,
}

impl PrunedEdges {
    pub fn prune(&mut self, agent: usize, from: Cell, to: Cell) {
        if self.edges.len() <= agent {
            self.edges.resize(agent + 1, BTreeSet::new());
        }
        self.edges[agent].insert((from, to));
    }

    pub fn is_pruned(&self, agent: usize, from: Cell, to: Cell) -> bool {
        self.edges
            .get(agent)
            .is_some_and(|e| e.contains(&(from, to)))
    }

    pub fn reset(&mut self) {
        self.edges.iter_mut().for_each(BTreeSet::clear);
    }

    pub fn count(&self) -> usize {
        self.edges.iter().map(BTreeSet::len).sum()
    }
}

/// Each live agent's closer neighbours over unpruned edges, in order of
/// preference. Agents with nothing to offer are left out.
pub fn declare_options(
    state: &SimState,
    field: &KnownField,
    pruned: &PrunedEdges,
) -> Vec<(usize, Vec<Cell>)> {
    state
        .live_agents()
        .map(|a| {
            let steps: Vec<Cell> = closer_steps(state, field, a.cell)
                .into_iter()
                .filter(|n| !pruned.is_pruned(a.id, a.cell, *n))
                .collect();
            (a.id, steps)
        })
        .filter(|(_, steps)| !steps.is_empty())
        .collect()
}

/// Each live agent's intended step: the first closer neighbour whose edge
/// it has not pruned.
pub fn declare_moves(
    state: &SimState,
    field: &KnownField,
    pruned: &PrunedEdges,
) -> Vec<(usize, Cell)> {
    declare_options(state, field, pruned)
        .into_iter()
        .map(|(id, steps)| (id, steps[0]))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Resolution {
    pub moves: Vec<(usize, Cell)>,
    /// Agents left without a collision-free step; they just wait.
    pub waiting: Vec<usize>,
    /// Moves withdrawn for coverage or connectivity; the edge gets pruned.
    pub reverted: Vec<(usize, Cell, Cell)>,
}

/// Withdraws declared moves until the remaining ones collide with nothing,
/// keep every known cell in view and keep the visibility graph connected.
pub fn resolve_conflicts(state: &SimState, declared: &[(usize, Cell)]) -> Resolution {
    let options: Vec<(usize, Vec<Cell>)> = declared.iter().map(|&(id, c)| (id, vec![c])).collect();
    resolve_ranked(state, &options, |_| 0)
}

/// As [`resolve_conflicts`], but an agent that loses its cell to a
/// collision falls back on its next option before waiting, and among
/// movers equally to blame the one furthest from the target along `field`
/// is withdrawn first.
pub fn resolve_options(
    state: &SimState,
    field: &KnownField,
    declared: &[(usize, Vec<Cell>)],
) -> Resolution {
    let world = state.world();
    resolve_ranked(state, declared, |id| {
        field
            .at(world.index(state.agent(id).cell))
            .unwrap_or(u32::MAX)
    })
}

fn resolve_ranked(
    state: &SimState,
    declared: &[(usize, Vec<Cell>)],
    behind: impl Fn(usize) -> u32,
) -> Resolution {
    let world = state.world();
    let fov = state.fov();
    let mut res = Resolution::default();
    let mut candidates: Vec<(usize, Vec<Cell>, usize)> =
        declared.iter().map(|(id, o)| (*id, o.clone(), 0)).collect();
    candidates.sort_unstable_by_key(|o| o.0);
    let mut delta = vec![0i32; world.cell_count()];
    // collisions are settled afresh after every withdrawal, since a cell
    // given up by a withdrawn mover may be taken by someone else
    loop {
        let mut options = candidates.clone();
        let mut waiting = Vec::new();
        let moves = settle_collisions(state, &mut options, &mut waiting);
        let culprit = coverage_culprit(state, fov, &moves, &behind, &mut delta)
            .or_else(|| connectivity_culprit(state, fov, world, &moves));
        match culprit {
            Some(id) => {
                let (_, steps, pick) = options
                    .iter()
                    .find(|o| o.0 == id)
                    .expect("culprit is a mover")
                    .clone();
                candidates.retain(|o| o.0 != id);
                res.reverted.push((id, state.agent(id).cell, steps[pick]));
            }
            None => {
                res.moves = moves;
                res.waiting = waiting;
                return res;
            }
        }
    }
}

/// Lower ids keep contested cells; an agent whose cell is contested, whose
/// target's occupant stays, or who would swap (the higher id yields) moves
/// on to its next option. Agents out of options wait. Repeats until stable
/// and returns the chosen moves.
fn settle_collisions(
    state: &SimState,
    options: &mut Vec<(usize, Vec<Cell>, usize)>,
    waiting: &mut Vec<usize>,
) -> Vec<(usize, Cell)> {
    loop {
        let moves: Vec<(usize, Cell)> = options
            .iter()
            .map(|(id, steps, pick)| (*id, steps[*pick]))
            .collect();
        let mut yield_ids = BTreeSet::new();
        for (k, &(id, to)) in moves.iter().enumerate() {
            if moves[..k].iter().any(|m| m.1 == to) {
                yield_ids.insert(id);
                continue;
            }
            if let Some(o) = state.occupant(to) {
                match moves.iter().find(|m| m.0 == o) {
                    None => {
                        yield_ids.insert(id);
                    }
                    Some(&(_, back)) if back == state.agent(id).cell => {
                        yield_ids.insert(id.max(o));
                    }
                    _ => {}
                }
            }
        }
        if yield_ids.is_empty() {
            return moves;
        }
        for o in options.iter_mut().filter(|o| yield_ids.contains(&o.0)) {
            o.2 += 1;
        }
        options.retain(|o| {
            let out = o.2 >= o.1.len();
            if out {
                waiting.push(o.0);
            }
            !out
        });
    }
}

/// A mover whose departure leaves some known cell unseen. Movers whose old
/// cell another mover steps into hand their view on, so the tail of a
/// moving queue is blamed before its head; after that the mover furthest
/// behind is blamed, then the lowest id.
fn coverage_culprit(
    state: &SimState,
    fov: &FovCache,
    moves: &[(usize, Cell)],
    behind: impl Fn(usize) -> u32,
    delta: &mut [i32],
) -> Option<usize> {
    for &(id, to) in moves {
        for &i in fov.fov_of(state.agent(id).cell) {
            delta[i as usize] -= 1;
        }
        for &i in fov.fov_of(to) {
            delta[i as usize] += 1;
        }
    }
    let lost = |i: usize| {
        state.known().contains(i) && state.coverage_count(i) as i64 + i64::from(delta[i]) <= 0
    };
    let implicated: Vec<usize> = moves
        .iter()
        .map(|m| m.0)
        .filter(|&id| {
            fov.fov_of(state.agent(id).cell)
                .iter()
                .any(|&i| lost(i as usize))
        })
        .collect();
    for &(id, to) in moves {
        for &i in fov
            .fov_of(state.agent(id).cell)
            .iter()
            .chain(fov.fov_of(to))
        {
            delta[i as usize] = 0;
        }
    }
    let backfilled = |id: usize| moves.iter().any(|m| m.1 == state.agent(id).cell);
    implicated
        .into_iter()
        .min_by_key(|&id| (backfilled(id), std::cmp::Reverse(behind(id)), id))
}

/// After the moves, a mover implicated in a disconnection. A mover whose
/// old cell would bridge the cut comes first, then one that ends up cut
/// off or whose old cell saw an agent that ends up cut off, then the
/// lowest-id mover.
fn connectivity_culprit(
    state: &SimState,
    fov: &FovCache,
    world: &GridWorld,
    moves: &[(usize, Cell)],
) -> Option<usize> {
    if moves.is_empty() {
        return None;
    }
    let mut cell_of: Vec<Cell> = state.agents().iter().map(|a| a.cell).collect();
    for &(id, to) in moves {
        cell_of[id] = to;
    }
    let mut occupant = vec![u32::MAX; world.cell_count()];
    let live: Vec<usize> = state.live_agents().map(|a| a.id).collect();
    for &id in &live {
        occupant[world.index(cell_of[id])] = id as u32;
    }
    let mut reached = vec![false; state.agents().len()];
    let mut count = 0;
    let mut stack = vec![state.deployment()];
    while let Some(c) = stack.pop() {
        for &i in fov.fov_of(c) {
            let o = occupant[i as usize];
            if o != u32::MAX && !reached[o as usize] {
                reached[o as usize] = true;
                count += 1;
                stack.push(cell_of[o as usize]);
            }
        }
    }
    if count == live.len() {
        return None;
    }
    let cut: Vec<usize> = live.iter().copied().filter(|&id| !reached[id]).collect();
    let sees_cut = |id: usize| {
        cut.iter()
            .any(|&u| u != id && fov.sees(state.agent(id).cell, cell_of[u]))
    };
    let sees_reached = |id: usize| {
        let old = state.agent(id).cell;
        fov.sees(old, state.deployment())
            || live
                .iter()
                .any(|&u| u != id && reached[u] && fov.sees(old, cell_of[u]))
    };
    let movers = || moves.iter().map(|m| m.0);
    movers()
        .find(|&id| (sees_cut(id) || !reached[id]) && sees_reached(id))
        .or_else(|| movers().find(|&id| !reached[id] || sees_cut(id)))
        .or(Some(moves[0].0))
}

/// Shared planner state.
#[derive(Debug, Clone, Default)]
pub struct DadenceShared {
    pub target: Option<Cell>,
    pub stall: u32,
    pub t_h: u32,
    pub pruned: PrunedEdges,
}

/// Stall threshold: mean distance from the agents to the target, rounded
/// up, at least one.
fn stall_threshold(state: &SimState, field: &KnownField) -> u32 {
    let ds: Vec<u64> = state
        .live_agents()
        .filter_map(|a| field.at(state.world().index(a.cell)))
        .map(u64::from)
        .collect();
    if ds.is_empty() {
        return 1;
    }
    (ds.iter().sum::<u64>().div_ceil(ds.len() as u64) as u32).max(1)
}

pub fn dadence_run(ctx: &WorldContext, config: &RunConfig) -> RunOutput {
    RunOutput::execute(ctx, config, |state| dadence_body(state).map(|_| ()))
}

fn dadence_body(state: &mut SimState) -> Result<DadenceShared, SimError> {
    let x_d = state.deployment();
    let mut shared = DadenceShared::default();
    let mut field: Option<KnownField> = None;
    let mut idle_resets = 0;
    loop {
        if state.step() >= state.t_max() {
            break;
        }
        let on_border = |s: &SimState, c: Cell| {
            c.neighbors4()
                .iter()
                .any(|n| s.world().is_free(*n) && !s.known().contains(s.world().index(*n)))
        };
        let retarget = match shared.target {
            None => true,
            Some(t) => !on_border(state, t),
        };
        if retarget {
            let mut members: Vec<Cell> = state.live_agents().map(|a| a.cell).collect();
            members.push(x_d);
            match select_target(state.world(), state.known(), &members) {
                Ok(t) => {
                    shared.target = Some(t);
                    shared.pruned.reset();
                    field = Some(KnownField::new(state, t));
                    state.log(EventKind::Target, None, Some(t), None, None);
                }
                Err(_) => break,
            }
        }
        let f = field.as_mut().expect("target set");
        f.refresh(state);

        let known_before = state.known().len();
        let mut moves = None;
        if state.occupant(x_d).is_some() {
            moves = queue_jump(state, f).ok();
        }
        let moves = match moves {
            Some(m) => m,
            None => {
                let declared = declare_options(state, f, &shared.pruned);
                let res = resolve_options(state, f, &declared);
                for &(id, from, to) in &res.reverted {
                    shared.pruned.prune(id, from, to);
                }
                res.moves
            }
        };
        let moved = moves.len();
        state.tick(&TickPlan {
            moves,
            ..Default::default()
        })?;

        if state.known().len() > known_before {
            shared.stall = 0;
        } else {
            shared.stall += 1;
        }
        f.refresh(state);
        shared.t_h = stall_threshold(state, f);
        if moved > 0 {
            idle_resets = 0;
        }
        if moved == 0 || shared.stall >= shared.t_h {
            let can_spawn = state.occupant(x_d).is_none()
                && state.live_count() < state.n_max()
                && state.step() < state.t_max();
            if can_spawn {
                state.spawn()?;
                shared.stall = 0;
            } else if moved == 0 {
                // without a spawn the only change left is reinstating edges,
                // and once that has been tried nothing else will happen
                if shared.pruned.count() == 0 || idle_resets > 0 {
                    break;
                }
                idle_resets += 1;
            }
            shared.pruned.reset();
        }
    }
    state.settle_all();
    deallocate_unnecessary(state)?;
    Ok(shared)
}
