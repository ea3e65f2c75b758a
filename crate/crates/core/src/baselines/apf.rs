use super::ApfConfig;
use crate::dealloc::greedy_deallocate;
use crate::sim::{AgentStatus, RunConfig, RunOutput, SimError, SimState, TickPlan, WorldContext};
use crate::world::{Cell, GridWorld};

/// Precomputed obstacle forces and potentials plus the neighbourhood
/// offsets inside the sensing radius.
pub struct ApfField {
    config: ApfConfig,
    offsets: Vec<(i32, i32, f64)>,
    potential: Vec<f64>,
    force: Vec<(f64, f64)>,
}

impl ApfField {
    pub fn new(world: &GridWorld, config: ApfConfig) -> Self {
        let r = config.sense_radius as i32;
        let mut offsets = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = dx * dx + dy * dy;
                if d2 > 0 && d2 <= r * r {
                    offsets.push((dx, dy, (d2 as f64).sqrt()));
                }
            }
        }
        let mut potential = vec![0.0; world.cell_count()];
        let mut force = vec![(0.0, 0.0); world.cell_count()];
        for i in 0..world.cell_count() {
            if !world.is_free_index(i) {
                continue;
            }
            let c = world.cell(i);
            for &(dx, dy, d) in &offsets {
                if !world.is_free(Cell::new(c.x + dx, c.y + dy)) {
                    potential[i] += config.k_o / d;
                    let m = config.k_o / (d * d * d);
                    force[i].0 -= m * dx as f64;
                    force[i].1 -= m * dy as f64;
                }
            }
        }
        ApfField {
            config,
            offsets,
            potential,
            force,
        }
    }

    /// Agent terms at `c`, ignoring agent `me`. The deployment cell acts as
    /// one more repelling agent.
    fn agent_terms(&self, state: &SimState, c: Cell, me: usize) -> (f64, (f64, f64)) {
        let mut u = 0.0;
        let mut f = (0.0, 0.0);
        let x_d = state.deployment();
        let r2 = (self.config.sense_radius * self.config.sense_radius) as i32;
        let mut add = |dx: i32, dy: i32, d: f64| {
            u += self.config.k_a / d;
            let m = self.config.k_a / (d * d * d);
            f.0 -= m * dx as f64;
            f.1 -= m * dy as f64;
        };
        for &(dx, dy, d) in &self.offsets {
            if let Some(o) = state.occupant(Cell::new(c.x + dx, c.y + dy)) {
                if o != me {
                    add(dx, dy, d);
                }
            }
        }
        let (dx, dy) = (x_d.x - c.x, x_d.y - c.y);
        let d2 = dx * dx + dy * dy;
        if d2 > 0 && d2 <= r2 {
            add(dx, dy, (d2 as f64).sqrt());
        }
        (u, f)
    }

    fn potential(&self, state: &SimState, c: Cell, me: usize) -> f64 {
        self.potential[state.world().index(c)] + self.agent_terms(state, c, me).0
    }

    fn force(&self, state: &SimState, c: Cell, me: usize) -> (f64, f64) {
        let (fx, fy) = self.force[state.world().index(c)];
        let (_, (ax, ay)) = self.agent_terms(state, c, me);
        (fx + ax, fy + ay)
    }

    /// The neighbour agent `me` would step to, if any. The deployment cell
    /// is never entered, and an agent standing on it leaves for the
    /// neighbour of least potential whatever the force.
    fn next_cell(&self, state: &SimState, me: usize, claimed: &[Cell]) -> Option<Cell> {
        let p = state.agent(me).cell;
        let x_d = state.deployment();
        let open = |n: Cell| {
            state.world().is_free(n)
                && n != x_d
                && state.occupant(n).is_none()
                && !claimed.contains(&n)
        };
        if p == x_d {
            let mut best: Option<(f64, Cell)> = None;
            for n in p.neighbors4().into_iter().filter(|n| open(*n)) {
                let u = self.potential(state, n, me);
                if best.is_none_or(|(b, _)| u < b) {
                    best = Some((u, n));
                }
            }
            return best.map(|b| b.1);
        }
        let f = self.force(state, p, me);
        if f.0.hypot(f.1) < self.config.move_threshold {
            return None;
        }
        let mut best: Option<(f64, Cell)> = None;
        for n in p.neighbors4() {
            if !open(n) {
                continue;
            }
            let dot = (n.x - p.x) as f64 * f.0 + (n.y - p.y) as f64 * f.1;
            if best.is_none_or(|(b, _)| dot > b) {
                best = Some((dot, n));
            }
        }
        let (_, n) = best?;
        (self.potential(state, n, me) < self.potential(state, p, me)).then_some(n)
    }
}

/// Potential felt at `c` by agent `me` given everyone's current position.
pub fn potential_at(field: &ApfField, state: &SimState, c: Cell, me: usize) -> f64 {
    field.potential(state, c, me)
}

/// Agents that may move this tick; everyone else is known to be stuck
/// until something changes nearby.
struct Swarm {
    field: ApfField,
    awake: Vec<bool>,
}

impl Swarm {
    fn plan(&mut self, state: &SimState) -> TickPlan {
        self.awake.resize(state.agents().len(), true);
        let mut plan = TickPlan::default();
        let mut claimed = Vec::new();
        for a in state.live_agents() {
            if !self.awake[a.id] {
                continue;
            }
            match self.field.next_cell(state, a.id, &claimed) {
                Some(n) => {
                    claimed.push(n);
                    plan.moves.push((a.id, n));
                }
                None => self.awake[a.id] = false,
            }
        }
        plan
    }

    /// Wakes every agent within reach of a change at `c`.
    fn disturb(&mut self, state: &SimState, c: Cell) {
        self.awake.resize(state.agents().len(), true);
        let r = self.field.config.sense_radius as i32 + 1;
        for dy in -r..=r {
            for dx in -r..=r {
                if let Some(o) = state.occupant(Cell::new(c.x + dx, c.y + dy)) {
                    self.awake[o] = true;
                }
            }
        }
    }
}

/// Repulsive-field deployment. Agents drift apart until every one is at
/// rest, then a new agent is spawned; the run ends when all are at rest and
/// no spawn is possible. Agents cut off from the deployment cell are
/// reported lost; the rest are thinned by deallocation.
pub fn apf_run(ctx: &WorldContext, config: &RunConfig) -> RunOutput {
    RunOutput::execute(ctx, config, |state| apf_body(state, config.apf))
}

fn apf_body(state: &mut SimState, apf: ApfConfig) -> Result<(), SimError> {
    let mut swarm = Swarm {
        field: ApfField::new(state.world(), apf),
        awake: Vec::new(),
    };
    let x_d = state.deployment();
    while state.step() < state.t_max() {
        let plan = swarm.plan(state);
        if plan.moves.is_empty() {
            if state.occupant(x_d).is_some() || state.live_count() >= state.n_max() {
                break;
            }
            state.spawn()?;
            swarm.disturb(state, x_d);
        }
        let from: Vec<Cell> = plan
            .moves
            .iter()
            .map(|&(id, _)| state.agent(id).cell)
            .collect();
        state.tick(&plan)?;
        for (k, &(_, to)) in plan.moves.iter().enumerate() {
            swarm.disturb(state, from[k]);
            swarm.disturb(state, to);
        }
    }
    finish(state)
}

/// Flags lost agents, then deallocates redundant agents among the rest.
fn finish(state: &mut SimState) -> Result<(), SimError> {
    state.flag_lost_agents();
    let (inside, _) = state.connected_split();
    let cells: Vec<Cell> = inside.iter().map(|&id| state.agent(id).cell).collect();
    let report = greedy_deallocate(state.fov(), &cells, state.deployment());
    for k in report.removed {
        let id = inside[k];
        match state.agent(id).status {
            AgentStatus::Active => state.recall_agent(id)?,
            _ => state.deallocate_agent(id)?,
        };
    }
    Ok(())
}
