//! Shared fixtures for the kernel benchmarks.

use gallery_core::bench::deployment_for;
use gallery_core::dungeon::{generate, DungeonParams};
use gallery_core::{Cell, GridWorld};

/// Benchmark dungeon of the given size with its deployment cell picked by `seed`.
pub fn dungeon(size: usize, seed: u64) -> GridWorld {
    let world = generate(&DungeonParams::benchmark(size, seed).expect("benchmark size"))
        .expect("generator succeeds");
    let d = deployment_for(&world, seed);
    world.with_deployment(d).expect("free deployment cell")
}

/// Every `stride`-th free cell, in index order.
pub fn sample_cells(world: &GridWorld, stride: usize) -> Vec<Cell> {
    world.free_cells().step_by(stride.max(1)).collect()
}
