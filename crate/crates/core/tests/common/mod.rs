#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;

use gallery_core::dungeon::repair_diagonals;
use gallery_core::visibility::FovCache;
use gallery_core::world::{validate_world, OccupancyGrid};
use gallery_core::{Cell, GridWorld};

/// Random valid world: scattered blocked cells, diagonals repaired, only
/// the largest free component kept, deployment on a random free cell.
pub fn random_world(rng: &mut impl Rng, width: usize, height: usize, blocked: f64) -> GridWorld {
    loop {
        let mut grid = OccupancyGrid::new(width, height, true);
        for y in 0..height as i32 {
            for x in 0..width as i32 {
                if rng.gen_bool(blocked) {
                    grid.set(Cell::new(x, y), false);
                }
            }
        }
        for _ in 0..8 {
            repair_diagonals(&mut grid);
            let (labels, count) = grid.free_components();
            if count <= 1 {
                break;
            }
            let mut sizes = vec![0usize; count];
            for &l in labels.iter().filter(|l| **l != u32::MAX) {
                sizes[l as usize] += 1;
            }
            let keep = (0..count)
                .max_by_key(|&k| (sizes[k], std::cmp::Reverse(k)))
                .unwrap() as u32;
            for (i, &l) in labels.iter().enumerate() {
                if l != u32::MAX && l != keep {
                    grid.set(Cell::new((i % width) as i32, (i / width) as i32), false);
                }
            }
        }
        let free: Vec<Cell> = (0..height as i32)
            .flat_map(|y| (0..width as i32).map(move |x| Cell::new(x, y)))
            .filter(|c| grid.is_free(*c))
            .collect();
        let Some(&d) = free.choose(rng) else { continue };
        if let Ok(world) = validate_world(grid, d) {
            return world;
        }
    }
}

/// Up to `k` distinct agent cells, each seeing an earlier agent or `x_d`.
pub fn connected_agents(cache: &FovCache, rng: &mut impl Rng, k: usize) -> Vec<Cell> {
    let world = cache.world();
    let x_d = world.deployment_point();
    let mut members = vec![x_d];
    for _ in 0..k {
        let from = *members.choose(rng).unwrap();
        let options: Vec<Cell> = cache
            .fov_of(from)
            .iter()
            .map(|&i| world.cell(i as usize))
            .filter(|c| !members.contains(c))
            .collect();
        if let Some(&c) = options.choose(rng) {
            members.push(c);
        }
    }
    members.remove(0);
    members
}
