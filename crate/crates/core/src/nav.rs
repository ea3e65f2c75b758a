//! Shortest-path travel over known cells for agents heading to fixed goals.
//!
//! Each tick every travelling agent steps to a neighbour one cell closer to
//! its goal. Lower ids claim contested cells first, agents may follow one
//! another in a queue, and two rules keep narrow corridors from jamming:
//! agents meeting head-on trade goals, and an agent blocked by a settled
//! agent takes over that agent's post while the settled agent moves on.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use crate::sim::{AgentStatus, SimError, SimState, TickPlan};
use crate::world::Cell;

const INF: u32 = u32::MAX;

/// Distances to one goal over the known region, refreshed incrementally
/// as the region grows.
pub struct KnownField {
    goal: Cell,
    dist: Vec<u32>,
    log_len: usize,
    removals: u64,
}

impl KnownField {
    pub fn new(state: &SimState, goal: Cell) -> KnownField {
        let world = state.world();
        let known = state.known();
        let mut dist = vec![INF; world.cell_count()];
        let g = world.index(goal);
        if known.contains(g) {
            dist[g] = 0;
            let mut queue = VecDeque::from([g]);
            while let Some(i) = queue.pop_front() {
                let d = dist[i] + 1;
                for n in world.cell(i).neighbors4() {
                    if world.in_bounds(n) {
                        let j = world.index(n);
                        if known.contains(j) && dist[j] == INF {
                            dist[j] = d;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        KnownField {
            goal,
            dist,
            log_len: state.known_log().len(),
            removals: state.known_removals(),
        }
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    /// Brings the field up to date with the current known region.
    pub fn refresh(&mut self, state: &SimState) {
        let log = state.known_log();
        if self.removals != state.known_removals()
            || self.dist[state.world().index(self.goal)] == INF
        {
            *self = KnownField::new(state, self.goal);
            return;
        }
        if self.log_len == log.len() {
            return;
        }
        let world = state.world();
        let known = state.known();
        let mut heap = BinaryHeap::new();
        for &i in &log[self.log_len..] {
            let i = i as usize;
            let best = world
                .cell(i)
                .neighbors4()
                .iter()
                .filter(|n| world.in_bounds(**n))
                .map(|n| self.dist[world.index(*n)])
                .filter(|d| *d != INF)
                .min();
            if let Some(b) = best {
                if b + 1 < self.dist[i] {
                    self.dist[i] = b + 1;
                    heap.push(Reverse((b + 1, i)));
                }
            }
        }
        while let Some(Reverse((d, i))) = heap.pop() {
            if d > self.dist[i] {
                continue;
            }
            for n in world.cell(i).neighbors4() {
                if world.in_bounds(n) {
                    let j = world.index(n);
                    if known.contains(j) && d + 1 < self.dist[j] {
                        self.dist[j] = d + 1;
                        heap.push(Reverse((d + 1, j)));
                    }
                }
            }
        }
        self.log_len = log.len();
    }

    /// Distance at a cell index, as of the last refresh.
    pub fn at(&self, index: usize) -> Option<u32> {
        match self.dist[index] {
            INF => None,
            d => Some(d),
        }
    }
}

/// What happened during one navigation tick.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NavOutcome {
    pub moved: usize,
    /// Goals reached this tick.
    pub reached: Vec<Cell>,
    pub handovers: usize,
}

#[derive(Default)]
pub struct Navigator {
    goals: BTreeMap<usize, Cell>,
    fields: BTreeMap<Cell, KnownField>,
}

impl Navigator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn assign(&mut self, agent: usize, goal: Cell) {
        self.goals.insert(agent, goal);
    }

    pub fn goal(&self, agent: usize) -> Option<Cell> {
        self.goals.get(&agent).copied()
    }

    pub fn travellers(&self) -> impl Iterator<Item = (usize, Cell)> + '_ {
        self.goals.iter().map(|(a, g)| (*a, *g))
    }

    pub fn is_idle(&self) -> bool {
        self.goals.is_empty()
    }

    /// Drops a travelling agent's goal (for example when it is recalled).
    pub fn forget(&mut self, agent: usize) {
        self.goals.remove(&agent);
        self.prune_fields();
    }

    fn prune_fields(&mut self) {
        let live: std::collections::BTreeSet<Cell> = self.goals.values().copied().collect();
        self.fields.retain(|g, _| live.contains(g));
    }

    /// Distance from `c` to `goal` over known cells.
    pub fn distance(&mut self, state: &SimState, c: Cell, goal: Cell) -> Option<u32> {
        let f = self.field(state, goal);
        match f.dist[state.world().index(c)] {
            INF => None,
            d => Some(d),
        }
    }

    fn field(&mut self, state: &SimState, goal: Cell) -> &KnownField {
        let f = self
            .fields
            .entry(goal)
            .or_insert_with(|| KnownField::new(state, goal));
        f.refresh(state);
        f
    }

    /// Neighbours of `c` one step closer to `goal`, in N, E, S, W order.
    fn closer(&mut self, state: &SimState, c: Cell, goal: Cell) -> Vec<Cell> {
        let world = state.world();
        let f = self.field(state, goal);
        let d = f.dist[world.index(c)];
        if d == INF || d == 0 {
            return Vec::new();
        }
        c.neighbors4()
            .into_iter()
            .filter(|n| world.in_bounds(*n) && f.dist[world.index(*n)] == d - 1)
            .collect()
    }

    /// Preferred next cell: empty, else behind a travelling
    /// agent, else onto a settled agent's post.
    fn choose(&mut self, state: &SimState, agent: usize) -> Option<Cell> {
        let a = state.agent(agent);
        let goal = self.goals[&agent];
        let options = self.closer(state, a.cell, goal);
        let free = |c: &Cell| state.occupant(*c).is_none();
        if let Some(c) = options.iter().find(|c| free(c)) {
            return Some(*c);
        }
        let travelling = |c: &Cell| {
            state
                .occupant(*c)
                .is_some_and(|o| self.goals.contains_key(&o))
        };
        if let Some(c) = options.iter().find(|c| travelling(c)) {
            return Some(*c);
        }
        options.into_iter().find(|c| {
            state
                .occupant(*c)
                .is_some_and(|o| state.agent(o).status == AgentStatus::Terminal)
        })
    }

    /// Plans and applies one tick for every travelling agent.
    pub fn step(&mut self, state: &mut SimState) -> Result<NavOutcome, SimError> {
        let mut outcome = NavOutcome::default();
        let ids: Vec<usize> = self.goals.keys().copied().collect();
        let mut arrivals = Vec::new();

        let mut desired: BTreeMap<usize, Cell> = BTreeMap::new();
        for &id in &ids {
            if state.agent(id).cell == self.goals[&id] {
                arrivals.push(id);
                outcome.reached.push(self.goals[&id]);
            } else if let Some(c) = self.choose(state, id) {
                desired.insert(id, c);
            }
        }

        // Head-on meetings: trade goals, then re-plan both.
        let mut traded = Vec::new();
        for (&a, &ca) in desired.iter() {
            if let Some(b) = state.occupant(ca) {
                if b > a && desired.get(&b) == Some(&state.agent(a).cell) {
                    traded.push((a, b));
                }
            }
        }
        for &(a, b) in &traded {
            let ga = self.goals[&a];
            let gb = self.goals[&b];
            self.goals.insert(a, gb);
            self.goals.insert(b, ga);
            for id in [a, b] {
                desired.remove(&id);
                if state.agent(id).cell == self.goals[&id] {
                    arrivals.push(id);
                    outcome.reached.push(self.goals[&id]);
                } else if let Some(c) = self.choose(state, id) {
                    desired.insert(id, c);
                }
            }
        }

        // Contested cells go to the lowest id.
        let mut claims: BTreeMap<Cell, usize> = BTreeMap::new();
        desired.retain(|&id, c| match claims.get(c) {
            Some(_) => false,
            None => {
                claims.insert(*c, id);
                true
            }
        });

        // Handovers: a traveller blocked by a settled agent takes its post,
        // the settled agents ahead shift one cell along the route and the
        // last of them carries on to the traveller's goal.
        let mut chain_moves: BTreeMap<usize, Cell> = BTreeMap::new();
        let mut new_goals: Vec<(usize, Cell)> = Vec::new();
        let mut departures = Vec::new();
        for (id, c1) in desired.clone() {
            let Some(t1) = state.occupant(c1) else {
                continue;
            };
            if state.agent(t1).status != AgentStatus::Terminal {
                continue;
            }
            let goal = self.goals[&id];
            match self.relay_chain(state, t1, c1, goal, &claims, &chain_moves) {
                Some(chain) => {
                    outcome.handovers += 1;
                    for w in chain.windows(2) {
                        chain_moves.insert(w[0].0, w[1].1);
                        claims.insert(w[1].1, w[0].0);
                    }
                    let (last, _) = chain[chain.len() - 2];
                    let (_, end) = chain[chain.len() - 1];
                    if end == goal {
                        outcome.reached.push(goal);
                    } else {
                        departures.push(last);
                        new_goals.push((last, goal));
                    }
                    arrivals.push(id);
                    self.goals.remove(&id);
                }
                None => {
                    desired.remove(&id);
                }
            }
        }

        let mut verdict: BTreeMap<usize, bool> = BTreeMap::new();
        for &id in desired.keys() {
            feasible(id, state, &desired, &chain_moves, &claims, &mut verdict);
        }

        let mut plan = TickPlan::default();
        for (&id, &to) in desired.iter() {
            if verdict[&id] {
                plan.moves.push((id, to));
                if self.goals.get(&id) == Some(&to) {
                    arrivals.push(id);
                    outcome.reached.push(to);
                }
            }
        }
        plan.moves
            .extend(chain_moves.iter().map(|(&id, &to)| (id, to)));
        plan.moves.sort_unstable();
        arrivals.sort_unstable();
        arrivals.dedup();
        plan.arrivals = arrivals;
        plan.departures = departures;
        outcome.moved = plan.moves.len();

        state.tick(&plan)?;

        for id in &plan.arrivals {
            self.goals.remove(id);
        }
        self.goals.extend(new_goals);
        self.prune_fields();
        Ok(outcome)
    }

    /// Settled agents from `c1` onward along the route to `goal`, ending in
    /// a free unclaimed cell. Entries are (agent, cell); the last entry has
    /// no agent.
    fn relay_chain(
        &mut self,
        state: &SimState,
        t1: usize,
        c1: Cell,
        goal: Cell,
        claims: &BTreeMap<Cell, usize>,
        chain_moves: &BTreeMap<usize, Cell>,
    ) -> Option<Vec<(usize, Cell)>> {
        if chain_moves.contains_key(&t1) {
            return None;
        }
        let mut chain = vec![(t1, c1)];
        let mut cur = c1;
        loop {
            let options = self.closer(state, cur, goal);
            if let Some(&next) = options
                .iter()
                .find(|c| state.occupant(**c).is_none() && !claims.contains_key(c))
            {
                chain.push((usize::MAX, next));
                return Some(chain);
            }
            let next = options.into_iter().find(|c| {
                state.occupant(*c).is_some_and(|o| {
                    state.agent(o).status == AgentStatus::Terminal
                        && !chain_moves.contains_key(&o)
                        && !claims.contains_key(c)
                })
            })?;
            chain.push((state.occupant(next).unwrap(), next));
            cur = next;
        }
    }
}

/// A plain move is feasible if this agent holds the claim on its cell and
/// the cell is empty or being vacated by a feasible mover that is not
/// coming the other way. Cycles are treated as infeasible.
fn feasible(
    id: usize,
    state: &SimState,
    desired: &BTreeMap<usize, Cell>,
    chain_moves: &BTreeMap<usize, Cell>,
    claims: &BTreeMap<Cell, usize>,
    verdict: &mut BTreeMap<usize, bool>,
) -> bool {
    if chain_moves.contains_key(&id) {
        return true;
    }
    if let Some(v) = verdict.get(&id) {
        return *v;
    }
    let Some(&to) = desired.get(&id) else {
        return false;
    };
    verdict.insert(id, false);
    let ok = claims.get(&to) == Some(&id)
        && match state.occupant(to) {
            None => true,
            Some(o) => {
                let leaving = chain_moves.get(&o).or_else(|| desired.get(&o)).copied();
                leaving.is_some()
                    && leaving != Some(state.agent(id).cell)
                    && feasible(o, state, desired, chain_moves, claims, verdict)
            }
        };
    verdict.insert(id, ok);
    ok
}
