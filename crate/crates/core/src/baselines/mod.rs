//! Comparison deployments: square and triangular lattices, artificial
//! potential fields and random border-point selection.

mod apf;
mod isda;
mod lattice;

pub use apf::{apf_run, potential_at, ApfField};
pub use isda::isda_run;
pub use lattice::{is_lattice_site, lattice_run, square_lattice_run, triangle_lattice_run};

use serde::{Deserialize, Serialize};

use crate::dealloc::deallocate_unnecessary;
use crate::nav::Navigator;
use crate::sim::{AgentStatus, Algorithm, EventKind, SimError, SimState};
use crate::world::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApfConfig {
    /// Obstacle repulsion gain.
    pub k_o: f64,
    /// Agent repulsion gain.
    pub k_a: f64,
    /// Cells within this Euclidean distance push an agent.
    pub sense_radius: usize,
    /// Agents feeling a weaker net force stay put.
    pub move_threshold: f64,
}

impl Default for ApfConfig {
    fn default() -> Self {
        ApfConfig {
            k_o: 1.0,
            k_a: 1.0,
            sense_radius: 5,
            move_threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeShape {
    Square,
    Triangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub shape: LatticeShape,
    /// Distance between neighbouring sites, in cells.
    pub spacing: usize,
    /// Agents allowed to travel at the same time.
    pub max_in_flight: usize,
}

impl LatticeConfig {
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Triangle => LatticeConfig {
                shape: LatticeShape::Triangle,
                spacing: 2,
                max_in_flight: LATTICE_IN_FLIGHT,
            },
            _ => LatticeConfig {
                shape: LatticeShape::Square,
                spacing: 1,
                max_in_flight: LATTICE_IN_FLIGHT,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsdaConfig {
    pub max_in_flight: usize,
}

impl Default for IsdaConfig {
    fn default() -> Self {
        IsdaConfig {
            max_in_flight: DEFAULT_IN_FLIGHT,
        }
    }
}

/// ISDA moves one agent at a time.
pub const DEFAULT_IN_FLIGHT: usize = 1;

/// Lattice agents travel in small groups.
pub const LATTICE_IN_FLIGHT: usize = 8;

/// Ticks without any movement or spawn before an incremental run gives up.
const STALL_LIMIT: u32 = 200;

/// Shared driver for deployments that send agents one by one to chosen
/// cells: at most one spawn per tick, at most `max_in_flight` travellers,
/// deallocation after every arrival. Stops when `done` holds, when no
/// further target is offered, or when budgets run out.
fn incremental_run(
    state: &mut SimState,
    max_in_flight: usize,
    mut done: impl FnMut(&SimState) -> bool,
    mut pick: impl FnMut(&SimState, &Navigator) -> Option<Cell>,
) -> Result<(), SimError> {
    let mut nav = Navigator::new();
    let mut stalled = 0;
    let x_d = state.deployment();
    loop {
        if done(state) || state.step() >= state.t_max() {
            break;
        }
        let in_flight = nav.travellers().count();
        let mut spawned = false;
        if in_flight < max_in_flight.max(1)
            && state.occupant(x_d).is_none()
            && state.live_count() < state.n_max()
        {
            if let Some(goal) = pick(state, &nav) {
                let id = state.spawn()?;
                state.log(EventKind::Assign, Some(id), Some(goal), None, None);
                nav.assign(id, goal);
                spawned = true;
            }
        }
        if nav.is_idle() {
            break;
        }
        let out = nav.step(state)?;
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
    recall_travellers(state, &mut nav)
}

/// Removes agents still on their way somewhere.
fn recall_travellers(state: &mut SimState, nav: &mut Navigator) -> Result<(), SimError> {
    let active: Vec<usize> = state
        .live_agents()
        .filter(|a| a.status == AgentStatus::Active)
        .map(|a| a.id)
        .collect();
    for id in active {
        nav.forget(id);
        state.recall_agent(id)?;
    }
    Ok(())
}
