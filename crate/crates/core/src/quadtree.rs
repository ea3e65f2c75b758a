//! Quadtree node count as a measure of world complexity.

use crate::world::GridWorld;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadTree {
    /// Side of the padded power-of-two square.
    pub side: usize,
    pub node_count: u64,
    pub max_depth: u32,
}

/// Prefix sums of free cells over the padded square (padding is blocked).
struct FreeSums {
    side: usize,
    sums: Vec<u32>,
}

impl FreeSums {
    fn new(free: impl Fn(usize, usize) -> bool, side: usize) -> Self {
        let n = side + 1;
        let mut sums = vec![0u32; n * n];
        for y in 0..side {
            for x in 0..side {
                sums[(y + 1) * n + x + 1] =
                    free(x, y) as u32 + sums[y * n + x + 1] + sums[(y + 1) * n + x]
                        - sums[y * n + x];
            }
        }
        FreeSums { side, sums }
    }

    fn count(&self, x: usize, y: usize, s: usize) -> u32 {
        let n = self.side + 1;
        self.sums[(y + s) * n + x + s] + self.sums[y * n + x]
            - self.sums[y * n + x + s]
            - self.sums[(y + s) * n + x]
    }
}

fn count_nodes(
    sums: &FreeSums,
    x: usize,
    y: usize,
    s: usize,
    depth: u32,
    max_depth: &mut u32,
) -> u64 {
    *max_depth = (*max_depth).max(depth);
    let free = sums.count(x, y, s) as usize;
    if s == 1 || free == 0 || free == s * s {
        return 1;
    }
    let h = s / 2;
    1 + count_nodes(sums, x, y, h, depth + 1, max_depth)
        + count_nodes(sums, x + h, y, h, depth + 1, max_depth)
        + count_nodes(sums, x, y + h, h, depth + 1, max_depth)
        + count_nodes(sums, x + h, y + h, h, depth + 1, max_depth)
}

/// Decomposes an occupancy predicate over a `width x height` grid.
pub fn decompose_grid(
    width: usize,
    height: usize,
    free: impl Fn(usize, usize) -> bool,
) -> QuadTree {
    let side = width.max(height).max(1).next_power_of_two();
    let sums = FreeSums::new(|x, y| x < width && y < height && free(x, y), side);
    let mut max_depth = 0;
    let node_count = count_nodes(&sums, 0, 0, side, 0, &mut max_depth);
    QuadTree {
        side,
        node_count,
        max_depth,
    }
}

pub fn decompose(world: &GridWorld) -> QuadTree {
    decompose_grid(world.width(), world.height(), |x, y| {
        world.is_free_index(y * world.width() + x)
    })
}

/// Complexity bucket: one rank per thousand nodes.
pub fn rank(node_count: u64) -> u64 {
    node_count / 1000
}
