//! Seeded dungeon generator: rooms joined by L-shaped corridors, with
//! rectangular obstacles inside the rooms.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::world::{validate_world, Cell, GridWorld, OccupancyGrid};

pub const SIZE_CLASSES: [usize; 3] = [50, 100, 250];
const MAX_ATTEMPTS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DungeonError {
    #[error("no valid dungeon after {0} attempts")]
    GenerationFailed(u64),
    #[error("{0} is not a benchmark size class")]
    UnknownSizeClass(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DungeonParams {
    pub size: usize,
    pub room_count: RangeInclusive<usize>,
    pub room_size: RangeInclusive<usize>,
    pub corridor_width: RangeInclusive<usize>,
    pub obstacle_count: RangeInclusive<usize>,
    pub obstacle_size: RangeInclusive<usize>,
    pub seed: u64,
}

impl DungeonParams {
    /// Default parameters for one of the benchmark sizes.
    pub fn benchmark(size: usize, seed: u64) -> Result<Self, DungeonError> {
        let (rooms, room_size) = match size {
            50 => (5..=8, 6..=13),
            100 => (10..=16, 7..=18),
            250 => (30..=48, 8..=26),
            other => return Err(DungeonError::UnknownSizeClass(other)),
        };
        Ok(DungeonParams {
            size,
            room_count: rooms,
            room_size,
            corridor_width: 1..=3,
            obstacle_count: 0..=3,
            obstacle_size: 1..=3,
            seed,
        })
    }

    fn check(&self) -> Result<(), DungeonError> {
        let ranges = [
            &self.room_count,
            &self.room_size,
            &self.corridor_width,
            &self.obstacle_count,
            &self.obstacle_size,
        ];
        if ranges.iter().any(|r| r.is_empty()) {
            return Err(DungeonError::InvalidParams("empty range"));
        }
        if self.size == 0 || *self.room_size.start() == 0 || *self.room_size.end() > self.size {
            return Err(DungeonError::InvalidParams("room size must fit the grid"));
        }
        if *self.room_count.end() == 0
            || *self.corridor_width.start() == 0
            || *self.obstacle_size.start() == 0
        {
            return Err(DungeonError::InvalidParams("zero-sized range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Room {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
}

impl Room {
    fn center(&self) -> (usize, usize) {
        (self.x + self.w / 2, self.y + self.h / 2)
    }

    /// Overlap test with a one-cell gap kept between rooms.
    fn conflicts(&self, o: &Room) -> bool {
        self.x < o.x + o.w + 1
            && o.x < self.x + self.w + 1
            && self.y < o.y + o.h + 1
            && o.y < self.y + self.h + 1
    }
}

fn fill(grid: &mut OccupancyGrid, x0: usize, y0: usize, x1: usize, y1: usize, free: bool) {
    let (xa, xb) = (x0.min(x1), x0.max(x1).min(grid.width - 1));
    let (ya, yb) = (y0.min(y1), y0.max(y1).min(grid.height - 1));
    for y in ya..=yb {
        for x in xa..=xb {
            grid.free[y * grid.width + x] = free;
        }
    }
}

fn layout(p: &DungeonParams, rng: &mut ChaCha8Rng) -> OccupancyGrid {
    let n = p.size;
    let mut grid = OccupancyGrid::new(n, n, false);

    let target = rng.gen_range(p.room_count.clone());
    let mut rooms: Vec<Room> = Vec::with_capacity(target);
    let mut tries = 0;
    while rooms.len() < target && tries < target * 50 {
        tries += 1;
        let w = rng.gen_range(p.room_size.clone());
        let h = rng.gen_range(p.room_size.clone());
        let room = Room {
            x: rng.gen_range(0..=n - w),
            y: rng.gen_range(0..=n - h),
            w,
            h,
        };
        if rooms.iter().all(|r| !r.conflicts(&room)) {
            rooms.push(room);
        }
    }
    for r in &rooms {
        fill(&mut grid, r.x, r.y, r.x + r.w - 1, r.y + r.h - 1, true);
    }

    for pair in rooms.windows(2) {
        let (ax, ay) = pair[0].center();
        let (bx, by) = pair[1].center();
        let width = rng.gen_range(p.corridor_width.clone());
        let d = width - 1;
        if rng.gen_bool(0.5) {
            fill(&mut grid, ax, ay, bx + d, ay + d, true);
            fill(&mut grid, bx, ay, bx + d, by, true);
        } else {
            fill(&mut grid, ax, ay, ax + d, by + d, true);
            fill(&mut grid, ax, by, bx, by + d, true);
        }
    }

    for r in &rooms {
        let count = rng.gen_range(p.obstacle_count.clone());
        for _ in 0..count {
            let w = rng.gen_range(p.obstacle_size.clone());
            let h = rng.gen_range(p.obstacle_size.clone());
            // keep a free ring between obstacle and room wall
            if w + 2 > r.w || h + 2 > r.h {
                continue;
            }
            let x = rng.gen_range(r.x + 1..=r.x + r.w - w - 1);
            let y = rng.gen_range(r.y + 1..=r.y + r.h - h - 1);
            fill(&mut grid, x, y, x + w - 1, y + h - 1, false);
        }
    }
    grid
}

/// Opens blocked cells until no 2x2 block has free cells touching only diagonally.
pub fn repair_diagonals(grid: &mut OccupancyGrid) {
    while let Some((px, py)) = grid.first_forbidden_diagonal() {
        let block = [
            Cell::new(px - 1, py - 1),
            Cell::new(px - 1, py),
            Cell::new(px, py - 1),
            Cell::new(px, py),
        ];
        let first = block
            .into_iter()
            .find(|c| !grid.is_free(*c))
            .expect("forbidden block has blocked cells");
        grid.set(first, true);
    }
}

/// Generates a valid dungeon; the deployment cell is the first free cell in index order.
pub fn generate(params: &DungeonParams) -> Result<GridWorld, DungeonError> {
    params.check()?;
    for attempt in 0..MAX_ATTEMPTS {
        let sub_seed = params
            .seed
            .wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed);
        let mut grid = layout(params, &mut rng);
        repair_diagonals(&mut grid);
        let Some(first) = grid.free.iter().position(|f| *f) else {
            continue;
        };
        let deployment = Cell::new((first % grid.width) as i32, (first / grid.width) as i32);
        if let Ok(world) = validate_world(grid, deployment) {
            return Ok(world);
        }
    }
    Err(DungeonError::GenerationFailed(MAX_ATTEMPTS))
}

/// File name used when writing a generated world.
pub fn file_name(size: usize, seed: u64) -> String {
    format!("d{size}_{seed}.world")
}
