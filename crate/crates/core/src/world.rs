//! Occupancy-grid world model.
//!
//! Cells are unit squares centred on integer coordinates, `y` grows upward and
//! row 0 is the bottom row. Everything outside the grid is treated as one
//! infinite blocked frame. A [`GridWorld`] can only be obtained through
//! [`validate_world`], so every instance has a single 4-connected free region,
//! no see-through diagonals, and a free deployment cell.

use std::cmp::Reverse;
use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A grid cell, addressed by column `x` and row `y` (row 0 at the bottom).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    /// 4-neighbours in N, E, S, W order.
    pub fn neighbors4(self) -> [Cell; 4] {
        [
            Cell::new(self.x, self.y + 1),
            Cell::new(self.x + 1, self.y),
            Cell::new(self.x, self.y - 1),
            Cell::new(self.x - 1, self.y),
        ]
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    pub fn is_adjacent(self, other: Cell) -> bool {
        self.manhattan(other) == 1
    }

    /// Sort key for the deterministic tie-break used throughout the crate:
    /// larger `y` first, then smaller `x`.
    pub fn tie_key(self) -> (Reverse<i32>, i32) {
        (Reverse(self.y), self.x)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("grid must be at least 1x1")]
    Empty,
    #[error("forbidden diagonal at lattice point ({px}, {py})")]
    ForbiddenDiagonal { px: i32, py: i32 },
    #[error("free space splits into {0} components")]
    DisconnectedFreeSpace(usize),
    #[error("deployment cell {0} is not a free cell")]
    DeploymentBlocked(Cell),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Raw occupancy before validation. `free[y * width + x]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyGrid {
    pub width: usize,
    pub height: usize,
    pub free: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, fill_free: bool) -> Self {
        OccupancyGrid {
            width,
            height,
            free: vec![fill_free; width * height],
        }
    }

    /// Builds a grid from text rows listed top row first (`.` free, `#` blocked).
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self, WorldError> {
        let height = rows.len();
        let width = rows
            .first()
            .map(|r| r.as_ref().chars().count())
            .unwrap_or(0);
        let mut grid = OccupancyGrid::new(width, height, false);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.chars().count() != width {
                return Err(WorldError::Parse {
                    line: i + 1,
                    msg: format!("expected {width} columns, found {}", row.chars().count()),
                });
            }
            let y = height - 1 - i;
            for (x, ch) in row.chars().enumerate() {
                grid.free[y * width + x] = match ch {
                    '.' => true,
                    '#' => false,
                    other => {
                        return Err(WorldError::Parse {
                            line: i + 1,
                            msg: format!("unexpected character {other:?}"),
                        })
                    }
                };
            }
        }
        Ok(grid)
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.free[c.y as usize * self.width + c.x as usize]
    }

    pub fn set(&mut self, c: Cell, free: bool) {
        if self.in_bounds(c) {
            self.free[c.y as usize * self.width + c.x as usize] = free;
        }
    }

    /// First lattice point (row-major from the bottom) whose 2x2 block holds
    /// exactly two free cells that only touch diagonally.
    pub fn first_forbidden_diagonal(&self) -> Option<(i32, i32)> {
        for py in 1..self.height as i32 {
            for px in 1..self.width as i32 {
                if self.is_forbidden_diagonal(px, py) {
                    return Some((px, py));
                }
            }
        }
        None
    }

    pub fn is_forbidden_diagonal(&self, px: i32, py: i32) -> bool {
        let sw = self.is_free(Cell::new(px - 1, py - 1));
        let se = self.is_free(Cell::new(px, py - 1));
        let nw = self.is_free(Cell::new(px - 1, py));
        let ne = self.is_free(Cell::new(px, py));
        (sw && ne && !se && !nw) || (se && nw && !sw && !ne)
    }

    /// Labels 4-connected free components; returns (labels, component count).
    pub fn free_components(&self) -> (Vec<u32>, usize) {
        let mut label = vec![u32::MAX; self.free.len()];
        let mut count = 0usize;
        let mut queue = VecDeque::new();
        for start in 0..self.free.len() {
            if !self.free[start] || label[start] != u32::MAX {
                continue;
            }
            label[start] = count as u32;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                let c = Cell::new((i % self.width) as i32, (i / self.width) as i32);
                for n in c.neighbors4() {
                    if self.is_free(n) {
                        let j = n.y as usize * self.width + n.x as usize;
                        if label[j] == u32::MAX {
                            label[j] = count as u32;
                            queue.push_back(j);
                        }
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }
}

/// A validated world. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridWorld {
    grid: OccupancyGrid,
    deployment: Cell,
    free_count: usize,
}

/// Checks the world invariants and wraps the grid.
pub fn validate_world(grid: OccupancyGrid, deployment: Cell) -> Result<GridWorld, WorldError> {
    if grid.width == 0 || grid.height == 0 {
        return Err(WorldError::Empty);
    }
    if let Some((px, py)) = grid.first_forbidden_diagonal() {
        return Err(WorldError::ForbiddenDiagonal { px, py });
    }
    let (_, components) = grid.free_components();
    if components > 1 {
        return Err(WorldError::DisconnectedFreeSpace(components));
    }
    if !grid.is_free(deployment) {
        return Err(WorldError::DeploymentBlocked(deployment));
    }
    let free_count = grid.free.iter().filter(|f| **f).count();
    Ok(GridWorld {
        grid,
        deployment,
        free_count,
    })
}

impl GridWorld {
    /// Parses the text world format and validates it.
    pub fn parse(text: &str) -> Result<GridWorld, WorldError> {
        let mut lines = text.split('\n');
        let header = lines.next().unwrap_or("");
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 4 {
            return Err(WorldError::Parse {
                line: 1,
                msg: "expected `width height dx dy`".into(),
            });
        }
        let mut nums = [0i64; 4];
        for (slot, f) in nums.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| WorldError::Parse {
                line: 1,
                msg: format!("bad integer {f:?}"),
            })?;
        }
        let (width, height) = (nums[0], nums[1]);
        if width < 1 || height < 1 {
            return Err(WorldError::Empty);
        }
        let rows: Vec<&str> = lines.by_ref().take(height as usize).collect();
        if rows.len() != height as usize {
            return Err(WorldError::Parse {
                line: rows.len() + 2,
                msg: "missing rows".into(),
            });
        }
        let rest: Vec<&str> = lines.collect();
        if rest.iter().any(|l| !l.is_empty()) {
            return Err(WorldError::Parse {
                line: height as usize + 2,
                msg: "trailing content".into(),
            });
        }
        let grid = OccupancyGrid::from_rows(&rows).map_err(|e| match e {
            WorldError::Parse { line, msg } => WorldError::Parse {
                line: line + 1,
                msg,
            },
            other => other,
        })?;
        if grid.width != width as usize {
            return Err(WorldError::Parse {
                line: 2,
                msg: format!("expected {width} columns"),
            });
        }
        validate_world(grid, Cell::new(nums[2] as i32, nums[3] as i32))
    }

    /// Serialises to the text world format (always newline-terminated).
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width() + 1) * (self.height() + 1) + 16);
        out.push_str(&format!(
            "{} {} {} {}\n",
            self.width(),
            self.height(),
            self.deployment.x,
            self.deployment.y
        ));
        for y in (0..self.height() as i32).rev() {
            for x in 0..self.width() as i32 {
                out.push(if self.is_free(Cell::new(x, y)) {
                    '.'
                } else {
                    '#'
                });
            }
            out.push('\n');
        }
        out
    }

    /// Same grid with another deployment cell.
    pub fn with_deployment(&self, deployment: Cell) -> Result<GridWorld, WorldError> {
        if !self.is_free(deployment) {
            return Err(WorldError::DeploymentBlocked(deployment));
        }
        Ok(GridWorld {
            grid: self.grid.clone(),
            deployment,
            free_count: self.free_count,
        })
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    pub fn cell_count(&self) -> usize {
        self.grid.free.len()
    }

    pub fn free_count(&self) -> usize {
        self.free_count
    }

    pub fn deployment_point(&self) -> Cell {
        self.deployment
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        self.grid.in_bounds(c)
    }

    #[inline]
    pub fn is_free(&self, c: Cell) -> bool {
        self.grid.is_free(c)
    }

    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        debug_assert!(self.in_bounds(c));
        c.y as usize * self.grid.width + c.x as usize
    }

    #[inline]
    pub fn cell(&self, index: usize) -> Cell {
        Cell::new(
            (index % self.grid.width) as i32,
            (index / self.grid.width) as i32,
        )
    }

    #[inline]
    pub fn is_free_index(&self, index: usize) -> bool {
        self.grid.free[index]
    }

    /// Free cells in index order (bottom row first).
    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.cell_count())
            .filter(|&i| self.grid.free[i])
            .map(|i| self.cell(i))
    }

    /// Free 4-neighbours of `c` in N, E, S, W order.
    pub fn square_graph_neighbors(&self, c: Cell) -> Vec<Cell> {
        c.neighbors4()
            .into_iter()
            .filter(|n| self.is_free(*n))
            .collect()
    }

    pub fn empty_mask(&self) -> CellMask {
        CellMask::new(self.cell_count())
    }

    pub fn free_mask(&self) -> CellMask {
        let mut m = self.empty_mask();
        for i in 0..self.cell_count() {
            if self.grid.free[i] {
                m.insert(i);
            }
        }
        m
    }
}

impl fmt::Display for GridWorld {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Dense set of cells indexed by [`GridWorld::index`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    bits: Vec<bool>,
    len: usize,
}

impl CellMask {
    pub fn new(cells: usize) -> Self {
        CellMask {
            bits: vec![false; cells],
            len: 0,
        }
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.bits[index]
    }

    /// Returns true if the cell was newly inserted.
    #[inline]
    pub fn insert(&mut self, index: usize) -> bool {
        if self.bits[index] {
            false
        } else {
            self.bits[index] = true;
            self.len += 1;
            true
        }
    }

    #[inline]
    pub fn remove(&mut self, index: usize) -> bool {
        if self.bits[index] {
            self.bits[index] = false;
            self.len -= 1;
            true
        } else {
            false
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.bits.len()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| i)
    }

    pub fn is_subset(&self, other: &CellMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ComponentKind {
    Outer,
    Hole,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockedComponent {
    pub kind: ComponentKind,
    pub cells: Vec<Cell>,
}

/// Partition of the in-grid blocked cells into 4-connected components.
#[derive(Debug, Clone)]
pub struct BlockedComponents {
    pub components: Vec<BlockedComponent>,
    label: Vec<u32>,
}

impl BlockedComponents {
    /// Component index of a blocked in-grid cell.
    pub fn component_of(&self, world: &GridWorld, c: Cell) -> Option<usize> {
        if !world.in_bounds(c) {
            return None;
        }
        match self.label[world.index(c)] {
            u32::MAX => None,
            l => Some(l as usize),
        }
    }

    pub fn hole_count(&self) -> usize {
        self.components
            .iter()
            .filter(|c| c.kind == ComponentKind::Hole)
            .count()
    }
}

/// Splits blocked cells into components and tags those touching the frame as outer.
pub fn find_holes(world: &GridWorld) -> BlockedComponents {
    let (w, h) = (world.width(), world.height());
    let mut label = vec![u32::MAX; world.cell_count()];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..world.cell_count() {
        if world.is_free_index(start) || label[start] != u32::MAX {
            continue;
        }
        let id = components.len() as u32;
        label[start] = id;
        queue.push_back(start);
        let mut cells = Vec::new();
        let mut touches_frame = false;
        while let Some(i) = queue.pop_front() {
            let c = world.cell(i);
            cells.push(c);
            if c.x == 0 || c.y == 0 || c.x as usize == w - 1 || c.y as usize == h - 1 {
                touches_frame = true;
            }
            for n in c.neighbors4() {
                if world.in_bounds(n) && !world.is_free(n) {
                    let j = world.index(n);
                    if label[j] == u32::MAX {
                        label[j] = id;
                        queue.push_back(j);
                    }
                }
            }
        }
        let kind = if touches_frame {
            ComponentKind::Outer
        } else {
            ComponentKind::Hole
        };
        components.push(BlockedComponent { kind, cells });
    }
    BlockedComponents { components, label }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CornerKind {
    Convex90,
    Reflex270,
}

/// The blocked structure a corner belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockedRef {
    /// The outer boundary (frame plus every component touching it).
    Outer,
    /// A hole, by component index in [`BlockedComponents::components`].
    Hole(usize),
}

/// A lattice point where the free-space boundary turns.
///
/// `(px, py)` is the point shared by cells `(px-1, py-1)`, `(px, py-1)`,
/// `(px-1, py)` and `(px, py)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CornerPoint {
    pub px: i32,
    pub py: i32,
    pub kind: CornerKind,
    pub blocked: BlockedRef,
    /// Free cell diagonally opposite the blocked cell; only for reflex corners.
    pub agent_cell: Option<Cell>,
    pub is_valid: bool,
}

#[derive(Debug, Clone)]
pub struct WorldAnalysis {
    pub n: i64,
    pub h: i64,
    pub corners: Vec<CornerPoint>,
    pub m_refl: i64,
    pub m_valid: i64,
    pub m_cgagp: i64,
    pub components: BlockedComponents,
}

impl WorldAnalysis {
    pub fn reflex_corners(&self) -> impl Iterator<Item = &CornerPoint> {
        self.corners
            .iter()
            .filter(|c| c.kind == CornerKind::Reflex270)
    }

    pub fn valid_corners(&self) -> impl Iterator<Item = &CornerPoint> {
        self.corners.iter().filter(|c| c.is_valid)
    }

    /// Distinct agent cells of valid corners, sorted by cell index order.
    /// Agent budget for a run: the connected-guard bound, never negative.
    pub fn agent_budget(&self) -> usize {
        self.m_cgagp.max(0) as usize
    }

    pub fn valid_agent_cells(&self, world: &GridWorld) -> Vec<Cell> {
        let mut cells: Vec<Cell> = self.valid_corners().filter_map(|c| c.agent_cell).collect();
        cells.sort_by_key(|c| world.index(*c));
        cells.dedup();
        cells
    }
}

/// Enumerates corner points and derives the corner/hole counts and agent bounds.
pub fn analyze(world: &GridWorld) -> WorldAnalysis {
    let components = find_holes(world);
    let blocked_ref = |c: Cell| -> BlockedRef {
        match components.component_of(world, c) {
            Some(id) if components.components[id].kind == ComponentKind::Hole => {
                BlockedRef::Hole(id)
            }
            _ => BlockedRef::Outer,
        }
    };

    let mut corners = Vec::new();
    for py in 0..=world.height() as i32 {
        for px in 0..=world.width() as i32 {
            // SW, SE, NW, NE
            let cells = [
                Cell::new(px - 1, py - 1),
                Cell::new(px, py - 1),
                Cell::new(px - 1, py),
                Cell::new(px, py),
            ];
            let free = cells.map(|c| world.is_free(c));
            let free_n = free.iter().filter(|f| **f).count();
            match free_n {
                1 => {
                    let blocked = cells
                        .iter()
                        .zip(free)
                        .find(|(_, f)| !*f)
                        .map(|(c, _)| *c)
                        .unwrap();
                    corners.push(CornerPoint {
                        px,
                        py,
                        kind: CornerKind::Convex90,
                        blocked: blocked_ref(blocked),
                        agent_cell: None,
                        is_valid: false,
                    });
                }
                3 => {
                    let k = free.iter().position(|f| !*f).unwrap();
                    corners.push(CornerPoint {
                        px,
                        py,
                        kind: CornerKind::Reflex270,
                        blocked: blocked_ref(cells[k]),
                        agent_cell: Some(cells[3 - k]),
                        is_valid: true,
                    });
                }
                _ => {}
            }
        }
    }

    // Exclude the top-left reflex corner of each hole: max py, then min px.
    let hole_count = components.components.len();
    let mut top_left: Vec<Option<usize>> = vec![None; hole_count];
    for (i, c) in corners.iter().enumerate() {
        if let (CornerKind::Reflex270, BlockedRef::Hole(id)) = (c.kind, c.blocked) {
            let better = match top_left[id] {
                None => true,
                Some(j) => {
                    let b = &corners[j];
                    c.py > b.py || (c.py == b.py && c.px < b.px)
                }
            };
            if better {
                top_left[id] = Some(i);
            }
        }
    }
    for i in top_left.into_iter().flatten() {
        corners[i].is_valid = false;
    }

    let n = corners.len() as i64;
    let h = components.hole_count() as i64;
    WorldAnalysis {
        n,
        h,
        corners,
        m_refl: (n + 4 * h - 4) / 2,
        m_valid: (n + 2 * h - 4) / 2,
        m_cgagp: (n + 2 * h - 4) / 2,
        components,
    }
}

/// Shortest-path lengths on the square graph restricted to a cell domain.
#[derive(Debug, Clone)]
pub struct DistanceField {
    dist: Vec<u32>,
}

impl DistanceField {
    pub const UNREACHABLE: u32 = u32::MAX;

    pub fn get(&self, world: &GridWorld, c: Cell) -> Option<u32> {
        if !world.in_bounds(c) {
            return None;
        }
        self.at(world.index(c))
    }

    #[inline]
    pub fn at(&self, index: usize) -> Option<u32> {
        match self.dist[index] {
            Self::UNREACHABLE => None,
            d => Some(d),
        }
    }

    pub fn raw(&self) -> &[u32] {
        &self.dist
    }
}

/// Breadth-first distances from `source` over the free cells in `domain`.
pub fn bfs_distance_field(world: &GridWorld, domain: &CellMask, source: Cell) -> DistanceField {
    let mut dist = vec![DistanceField::UNREACHABLE; world.cell_count()];
    if !world.in_bounds(source) || !domain.contains(world.index(source)) {
        return DistanceField { dist };
    }
    let mut queue = VecDeque::new();
    let s = world.index(source);
    dist[s] = 0;
    queue.push_back(s);
    while let Some(i) = queue.pop_front() {
        let d = dist[i] + 1;
        for n in world.cell(i).neighbors4() {
            if world.is_free(n) {
                let j = world.index(n);
                if domain.contains(j) && dist[j] == DistanceField::UNREACHABLE {
                    dist[j] = d;
                    queue.push_back(j);
                }
            }
        }
    }
    DistanceField { dist }
}

/// Known cells that have at least one free 4-neighbour outside `known`.
pub fn border(world: &GridWorld, known: &CellMask) -> Vec<Cell> {
    known
        .iter()
        .map(|i| world.cell(i))
        .filter(|c| {
            c.neighbors4()
                .iter()
                .any(|n| world.is_free(*n) && !known.contains(world.index(*n)))
        })
        .collect()
}
