use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{incremental_run, LatticeConfig, LatticeShape};
use crate::nav::KnownField;
use crate::sim::{Algorithm, RunConfig, RunOutput, SimError, SimState, WorldContext};
use crate::world::Cell;

/// Lattice anchored at `origin`. Triangular lattices shift every other row
/// by half the spacing (rounded down).
pub fn is_lattice_site(config: &LatticeConfig, origin: Cell, c: Cell) -> bool {
    let r = config.spacing.max(1) as i32;
    let dy = c.y - origin.y;
    if dy.rem_euclid(r) != 0 {
        return false;
    }
    let offset = match config.shape {
        LatticeShape::Square => 0,
        LatticeShape::Triangle if (dy / r).rem_euclid(2) == 1 => r / 2,
        LatticeShape::Triangle => 0,
    };
    (c.x - origin.x - offset).rem_euclid(r) == 0
}

type SiteKey = Reverse<(u32, Reverse<i32>, i32, usize)>;

/// Known lattice sites handed out nearest-first from the deployment cell.
struct SiteQueue {
    config: LatticeConfig,
    home: KnownField,
    cursor: usize,
    heap: BinaryHeap<SiteKey>,
    deferred: Vec<usize>,
    claimed: Vec<bool>,
}

impl SiteQueue {
    fn new(state: &SimState, config: LatticeConfig) -> Self {
        let world = state.world();
        let mut claimed = vec![false; world.cell_count()];
        claimed[world.index(state.deployment())] = true;
        SiteQueue {
            config,
            home: KnownField::new(state, state.deployment()),
            cursor: 0,
            heap: BinaryHeap::new(),
            deferred: Vec::new(),
            claimed,
        }
    }

    fn push(&mut self, state: &SimState, i: usize) {
        match self.home.at(i) {
            Some(d) => {
                let c = state.world().cell(i);
                let (ty, x) = c.tie_key();
                self.heap.push(Reverse((d, ty, x, i)));
            }
            None => self.deferred.push(i),
        }
    }

    fn next(&mut self, state: &SimState) -> Option<Cell> {
        let log = state.known_log();
        if self.cursor < log.len() {
            self.home.refresh(state);
            for &i in &log[self.cursor..] {
                let i = i as usize;
                if !self.claimed[i]
                    && is_lattice_site(&self.config, state.deployment(), state.world().cell(i))
                {
                    self.push(state, i);
                }
            }
            self.cursor = log.len();
            for i in std::mem::take(&mut self.deferred) {
                self.push(state, i);
            }
        }
        while let Some(Reverse((d, _, _, i))) = self.heap.pop() {
            if self.claimed[i] {
                continue;
            }
            if self.home.at(i) != Some(d) {
                self.push(state, i);
                continue;
            }
            self.claimed[i] = true;
            return Some(state.world().cell(i));
        }
        None
    }
}

/// Fills lattice sites breadth-first from the deployment cell until the
/// world is fully known or no site or budget is left.
pub fn lattice_run(ctx: &WorldContext, config: &RunConfig) -> RunOutput {
    RunOutput::execute(ctx, config, |state| lattice_body(state, config.lattice))
}

fn lattice_body(state: &mut SimState, lattice: LatticeConfig) -> Result<(), SimError> {
    let mut sites = SiteQueue::new(state, lattice);
    incremental_run(
        state,
        lattice.max_in_flight,
        |s| s.fully_known(),
        |s, _| sites.next(s),
    )
}

pub fn square_lattice_run(ctx: &WorldContext, config: &RunConfig) -> RunOutput {
    let mut config = config.clone();
    config.algorithm = Algorithm::Square;
    config.lattice.shape = LatticeShape::Square;
    lattice_run(ctx, &config)
}

pub fn triangle_lattice_run(ctx: &WorldContext, config: &RunConfig) -> RunOutput {
    let mut config = config.clone();
    config.algorithm = Algorithm::Triangle;
    config.lattice.shape = LatticeShape::Triangle;
    lattice_run(ctx, &config)
}
