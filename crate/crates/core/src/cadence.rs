//! Centralised deployment onto valid corners: each observed, unclaimed
//! valid corner gets one agent, spawned one per tick and walked there over
//! known cells.

use std::collections::{BTreeMap, BTreeSet};

use crate::dealloc::deallocate_unnecessary;
use crate::nav::{KnownField, Navigator};
use crate::sim::{AgentStatus, EventKind, RunConfig, RunOutput, SimError, SimState, WorldContext};
use crate::world::Cell;

/// Ticks without any movement or spawn before the run gives up.
const STALL_LIMIT: u32 = 200;

/// Whether the placement loop continues, given the observed valid corner
/// cells `s`, the cells where agents have arrived `a` and the assigned
/// targets `t`.
pub fn cadence_step_condition(
    s: &BTreeSet<Cell>,
    a: &BTreeSet<Cell>,
    t: &BTreeSet<Cell>,
    x_d: Cell,
) -> bool {
    let with = |set: &BTreeSet<Cell>| -> BTreeSet<Cell> {
        let mut out = set.clone();
        out.insert(x_d);
        out
    };
    let settled = s == a && a == t;
    let settled_with_home = *s == with(a) && with(a) == with(t);
    !settled && !settled_with_home
}

/// Planner state: which corner cells are targeted and which are reached.
#[derive(Debug, Default)]
pub struct CadenceState {
    /// Target cell to the agent sent there.
    pub assignments: BTreeMap<Cell, usize>,
    pub arrived: BTreeSet<Cell>,
    pub observed: BTreeSet<Cell>,
}

impl CadenceState {
    pub fn targets(&self) -> BTreeSet<Cell> {
        self.assignments.keys().copied().collect()
    }
}

pub fn cadence_run(ctx: &WorldContext, config: &RunConfig) -> RunOutput {
    RunOutput::execute(ctx, config, |state| cadence_body(state).map(|_| ()))
}

fn cadence_body(state: &mut SimState) -> Result<CadenceState, SimError> {
    let ctx = state.ctx();
    let valid = ctx.analysis().valid_agent_cells(ctx.world());
    let x_d = state.deployment();
    let mut plan = CadenceState::default();
    let mut nav = Navigator::new();
    let mut home = KnownField::new(state, x_d);
    let mut stalled = 0;
    loop {
        let known = state.known();
        plan.observed = valid
            .iter()
            .copied()
            .filter(|c| known.contains(ctx.world().index(*c)))
            .collect();
        if !cadence_step_condition(&plan.observed, &plan.arrived, &plan.targets(), x_d) {
            break;
        }
        if state.step() >= state.t_max() {
            break;
        }
        let mut spawned = false;
        if state.occupant(x_d).is_none() && state.live_count() < state.n_max() {
            home.refresh(state);
            let next = plan
                .observed
                .iter()
                .filter(|c| **c != x_d && !plan.assignments.contains_key(c))
                .filter_map(|c| home.at(ctx.world().index(*c)).map(|d| (d, c.tie_key(), *c)))
                .min();
            if let Some((_, _, target)) = next {
                let id = state.spawn()?;
                state.log(EventKind::Target, Some(id), Some(target), None, None);
                plan.assignments.insert(target, id);
                nav.assign(id, target);
                spawned = true;
            }
        }
        if nav.is_idle() {
            // nothing can be sent and nobody is travelling
            break;
        }
        let out = nav.step(state)?;
        plan.arrived.extend(out.reached.iter().copied());
        if !out.reached.is_empty() || out.handovers > 0 {
            deallocate_unnecessary(state)?;
        }
        if out.moved == 0 && !spawned {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    let travelling: Vec<usize> = state
        .live_agents()
        .filter(|a| a.status == AgentStatus::Active)
        .map(|a| a.id)
        .collect();
    for id in travelling {
        state.recall_agent(id)?;
    }
    deallocate_unnecessary(state)?;
    Ok(plan)
}
