//! Greedy removal of agents whose presence adds neither coverage nor a
//! needed link in the visibility graph.

use crate::sim::{AgentStatus, SimError, SimState};
use crate::visibility::FovCache;
use crate::world::Cell;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeallocReport {
    /// Indices into the input, in removal order.
    pub removed: Vec<usize>,
    pub kept: Vec<usize>,
    pub passes: usize,
}

/// Repeatedly removes the first agent (in input order) whose removal keeps
/// the covered set and the connectivity of the visibility graph over the
/// remaining agents plus `x_d`, restarting the scan after each removal.
pub fn greedy_deallocate(cache: &FovCache, agents: &[Cell], x_d: Cell) -> DeallocReport {
    let world = cache.world();
    let mut counts = vec![0u32; world.cell_count()];
    for &c in agents.iter().chain(std::iter::once(&x_d)) {
        for &i in cache.fov_of(c) {
            counts[i as usize] += 1;
        }
    }
    let mut occupant = vec![u32::MAX; world.cell_count()];
    for (k, &c) in agents.iter().enumerate() {
        occupant[world.index(c)] = k as u32;
    }
    let mut alive = vec![true; agents.len()];
    let mut report = DeallocReport::default();
    loop {
        report.passes += 1;
        let pick = (0..agents.len()).find(|&k| {
            alive[k]
                && cache
                    .fov_of(agents[k])
                    .iter()
                    .all(|&i| counts[i as usize] >= 2)
                && connected_without(cache, x_d, agents.len() - 1 - report.removed.len(), |i| {
                    match occupant[i] {
                        u32::MAX => false,
                        o => o as usize != k && alive[o as usize],
                    }
                })
        });
        let Some(k) = pick else { break };
        alive[k] = false;
        occupant[world.index(agents[k])] = u32::MAX;
        for &i in cache.fov_of(agents[k]) {
            counts[i as usize] -= 1;
        }
        report.removed.push(k);
    }
    report.kept = (0..agents.len()).filter(|&k| alive[k]).collect();
    report
}

/// Whether every member (cells for which `member` holds) is reachable from
/// `x_d` through mutual visibility. `total` is the number of members.
fn connected_without(
    cache: &FovCache,
    x_d: Cell,
    total: usize,
    member: impl Fn(usize) -> bool,
) -> bool {
    let world = cache.world();
    let mut seen = vec![false; world.cell_count()];
    let mut stack = vec![x_d];
    let mut reached = 0;
    while let Some(c) = stack.pop() {
        if reached == total {
            break;
        }
        for &i in cache.fov_of(c) {
            let i = i as usize;
            if !seen[i] && member(i) {
                seen[i] = true;
                reached += 1;
                stack.push(world.cell(i));
            }
        }
    }
    reached == total
}

/// Runs the greedy pass over the terminal agents of a live simulation.
/// Active agents are never removed and never count as links, since they
/// are about to move. Returns the ids removed.
pub fn deallocate_unnecessary(state: &mut SimState) -> Result<Vec<usize>, SimError> {
    let mut removed = Vec::new();
    loop {
        let pick = removable(state);
        match pick {
            Some(id) => {
                state.deallocate_agent(id)?;
                removed.push(id);
            }
            None => return Ok(removed),
        }
    }
}

fn removable(state: &SimState) -> Option<usize> {
    let cache = state.fov();
    let world = state.world();
    let settled = |o: usize| state.agent(o).status == AgentStatus::Terminal;
    let spare = |id: usize| {
        cache
            .fov_of(state.agent(id).cell)
            .iter()
            .all(|&i| state.coverage_count(i as usize) >= 2)
    };
    let terminals: Vec<usize> = state
        .agents()
        .iter()
        .filter(|a| a.status == AgentStatus::Terminal)
        .map(|a| a.id)
        .collect();
    let mut candidates = terminals.iter().copied().filter(|&id| spare(id)).peekable();
    candidates.peek()?;

    // node 0 is x_d, node k + 1 is terminals[k]
    let mut node_of = vec![u32::MAX; state.agents().len()];
    for (k, &id) in terminals.iter().enumerate() {
        node_of[id] = k as u32 + 1;
    }
    let cells: Vec<Cell> = std::iter::once(state.deployment())
        .chain(terminals.iter().map(|&id| state.agent(id).cell))
        .collect();
    let mut adj: Vec<Vec<u32>> = cells
        .iter()
        .enumerate()
        .map(|(v, &c)| {
            cache
                .fov_of(c)
                .iter()
                .filter_map(|&i| {
                    state
                        .occupant(world.cell(i as usize))
                        .filter(|&o| settled(o))
                })
                .map(|o| node_of[o])
                .filter(|&u| u as usize != v)
                .collect()
        })
        .collect();
    // x_d holds no agent of its own, so its links are mirrored by hand
    for k in 0..adj[0].len() {
        let u = adj[0][k] as usize;
        adj[u].push(0);
    }
    let (reached, cut) = cut_vertices(&adj);
    let unreached: Vec<usize> = (1..cells.len()).filter(|&v| !reached[v]).collect();
    match unreached.as_slice() {
        [] => candidates.find(|&id| !cut[node_of[id] as usize]),
        // only dropping the one stray agent can leave the rest connected
        [v] => candidates.find(|&id| node_of[id] as usize == *v),
        _ => None,
    }
}

/// Nodes reachable from node 0, and which of them are cut vertices of
/// that component.
fn cut_vertices(adj: &[Vec<u32>]) -> (Vec<bool>, Vec<bool>) {
    let n = adj.len();
    let mut order = vec![u32::MAX; n];
    let mut low = vec![0u32; n];
    let mut cut = vec![false; n];
    let mut next = 0u32;
    let mut root_children = 0;
    // (node, parent, next edge)
    let mut stack: Vec<(usize, usize, usize)> = vec![(0, usize::MAX, 0)];
    order[0] = 0;
    low[0] = 0;
    next += 1;
    while let Some(top) = stack.last_mut() {
        let (v, parent, e) = *top;
        if e < adj[v].len() {
            top.2 += 1;
            let u = adj[v][e] as usize;
            if order[u] == u32::MAX {
                order[u] = next;
                low[u] = next;
                next += 1;
                if v == 0 {
                    root_children += 1;
                }
                stack.push((u, v, 0));
            } else if u != parent {
                low[v] = low[v].min(order[u]);
            }
        } else {
            stack.pop();
            if parent != usize::MAX {
                low[parent] = low[parent].min(low[v]);
                if parent != 0 && low[v] >= order[parent] {
                    cut[parent] = true;
                }
            }
        }
    }
    cut[0] = root_children > 1;
    (order.iter().map(|&o| o != u32::MAX).collect(), cut)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dungeon::{generate, DungeonParams};
    use crate::sim::{Algorithm, InvariantMode, RunConfig, TickPlan, WorldContext};
    use crate::world::{bfs_distance_field, validate_world, OccupancyGrid};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cache(rows: &[&str], d: Cell) -> FovCache {
        FovCache::new(validate_world(OccupancyGrid::from_rows(rows).unwrap(), d).unwrap())
    }

    #[test]
    fn nothing_to_remove() {
        let c = cache(&["...", "..."], Cell::new(0, 0));
        let r = greedy_deallocate(&c, &[], Cell::new(0, 0));
        assert_eq!((r.removed.len(), r.kept.len(), r.passes), (0, 0, 1));
    }

    // S-shaped corridor world: x_d bottom-left, rows 0, 2 and 4 joined at
    // alternating ends
    const S: [&str; 5] = [".....", "####.", ".....", ".####", "....."];

    #[test]
    fn one_of_four_removed() {
        let c = cache(&S, Cell::new(0, 0));
        // (0,2) links row 2 to x_d, (4,2) links the top arm, (4,4) covers
        // row 4; (2,2) only repeats what its neighbours on row 2 see
        let agents = [
            Cell::new(0, 2),
            Cell::new(2, 2),
            Cell::new(4, 2),
            Cell::new(4, 4),
        ];
        let r = greedy_deallocate(&c, &agents, Cell::new(0, 0));
        assert_eq!(r.removed, vec![1]);
        assert_eq!(r.kept, vec![0, 2, 3]);
        let all: Vec<Cell> = agents.iter().copied().chain([Cell::new(0, 0)]).collect();
        let kept: Vec<Cell> = r
            .kept
            .iter()
            .map(|&k| agents[k])
            .chain([Cell::new(0, 0)])
            .collect();
        assert_eq!(c.fov(&kept).as_slice(), c.fov(&all).as_slice());
        let again = greedy_deallocate(&c, &kept[..3], Cell::new(0, 0));
        assert!(again.removed.is_empty());
    }

    #[test]
    fn disjoint_wings_are_both_needed() {
        let c = cache(&S, Cell::new(0, 2));
        let agents = [Cell::new(0, 0), Cell::new(4, 2)];
        let r = greedy_deallocate(&c, &agents, Cell::new(0, 2));
        assert!(r.removed.is_empty());
        assert_eq!(r.kept, vec![0, 1]);
    }

    fn walk_in(state: &mut SimState, goal: Cell) {
        let world = state.world();
        let mut open = world.free_mask();
        for a in state.live_agents() {
            open.remove(world.index(a.cell));
        }
        if state.occupant(state.deployment()).is_some() || !open.contains(world.index(goal)) {
            return;
        }
        let field = bfs_distance_field(world, &open, goal);
        let Some(mut d) = field.get(world, state.deployment()) else {
            return;
        };
        let id = state.spawn().unwrap();
        let mut at = state.deployment();
        while d > 0 {
            at = at
                .neighbors4()
                .into_iter()
                .find(|n| field.get(world, *n) == Some(d - 1))
                .unwrap();
            state
                .tick(&TickPlan {
                    moves: vec![(id, at)],
                    ..Default::default()
                })
                .unwrap();
            d -= 1;
        }
    }

    #[test]
    fn live_pass_matches_offline_greedy_pass() {
        let mut removed_any = false;
        for seed in 0..4 {
            let world = generate(&DungeonParams::benchmark(50, seed).unwrap()).unwrap();
            let free: Vec<Cell> = (0..world.cell_count())
                .filter(|&i| world.is_free_index(i))
                .map(|i| world.cell(i))
                .collect();
            let ctx = WorldContext::new(world);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x_d = *free.choose(&mut rng).unwrap();
            let mut cfg = RunConfig::new(Algorithm::Cadence, x_d, 200, 100_000);
            cfg.invariant_mode = InvariantMode::Record;
            let mut state = SimState::new(&ctx, &cfg);
            for _ in 0..60 {
                walk_in(&mut state, *free.choose(&mut rng).unwrap());
            }
            state.settle_all();
            let ids: Vec<usize> = state.live_agents().map(|a| a.id).collect();
            let cells: Vec<Cell> = ids.iter().map(|&id| state.agent(id).cell).collect();
            let offline = greedy_deallocate(ctx.fov(), &cells, x_d);
            let expected: Vec<usize> = offline.removed.iter().map(|&k| ids[k]).collect();
            assert_eq!(
                deallocate_unnecessary(&mut state).unwrap(),
                expected,
                "seed {seed}"
            );
            removed_any |= !expected.is_empty();
        }
        assert!(removed_any);
    }
}
