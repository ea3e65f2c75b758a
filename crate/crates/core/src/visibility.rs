//! Line of sight, discrete field of view and visibility graphs.
//!
//! Geometry is exact: coordinates are integers in units of `1 / UNIT` cells,
//! so every segment test is decided with integer arithmetic and the results
//! are identical on every platform.
//!
//! Cell `x` sees cell `y` when a clear segment joins the centre of `x` to one
//! of five targets of `y` (its centre and its four corners pulled in by
//! `EPS`), or the same holds with the roles swapped.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::sync::OnceLock;

use crate::world::{Cell, CellMask, CornerPoint, GridWorld, WorldAnalysis};

/// Scaled units per cell side.
pub const UNIT: i64 = 14_000_000_000;
pub const HALF: i64 = UNIT / 2;
/// Inset of corner targets, 1e-9 of a cell.
pub const EPS: i64 = 14;
/// Offset of an inset corner from the cell centre along each axis.
pub const INSET: i64 = HALF - EPS;

/// A point in scaled coordinates; the centre of cell `(x, y)` is `(x * UNIT, y * UNIT)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Point {
    pub x: i64,
    pub y: i64,
}

impl Point {
    pub const fn new(x: i64, y: i64) -> Self {
        Point { x, y }
    }

    /// Point on the half-cell lattice: `(hx / 2, hy / 2)` in cell units.
    pub const fn from_halves(hx: i64, hy: i64) -> Self {
        Point {
            x: hx * HALF,
            y: hy * HALF,
        }
    }

    pub fn center(c: Cell) -> Self {
        Point {
            x: c.x as i64 * UNIT,
            y: c.y as i64 * UNIT,
        }
    }

    pub fn inset_corners(c: Cell) -> [Point; 4] {
        let p = Point::center(c);
        [
            Point::new(p.x - INSET, p.y - INSET),
            Point::new(p.x + INSET, p.y - INSET),
            Point::new(p.x - INSET, p.y + INSET),
            Point::new(p.x + INSET, p.y + INSET),
        ]
    }

    /// Centre followed by the four inset corners.
    pub fn targets(c: Cell) -> [Point; 5] {
        let [a, b, d, e] = Point::inset_corners(c);
        [Point::center(c), a, b, d, e]
    }

    /// `side * side` samples spanning the inset square, plus the centre.
    pub fn samples(c: Cell, side: i64) -> Vec<Point> {
        let p = Point::center(c);
        let step = 2 * INSET / (side - 1);
        let mut out = Vec::with_capacity((side * side + 1) as usize);
        out.push(p);
        for i in 0..side {
            for j in 0..side {
                out.push(Point::new(p.x - INSET + i * step, p.y - INSET + j * step));
            }
        }
        out
    }
}

/// Per-axis state of a grid walk in shifted coordinates, where cell `i`
/// spans `[i * UNIT, (i + 1) * UNIT]`.
#[derive(Clone, Copy)]
struct Axis {
    lo: i64,
    hi: i64,
    step: i64,
    next: i64,
    len: i64,
}

impl Axis {
    fn new(p: i64, d: i64) -> Axis {
        let q = p.div_euclid(UNIT);
        let r = p.rem_euclid(UNIT);
        match d.cmp(&0) {
            Ordering::Greater => Axis {
                lo: q,
                hi: q,
                step: 1,
                next: UNIT - r,
                len: d,
            },
            Ordering::Less => {
                let c = if r == 0 { q - 1 } else { q };
                Axis {
                    lo: c,
                    hi: c,
                    step: -1,
                    next: if r == 0 { UNIT } else { r },
                    len: -d,
                }
            }
            Ordering::Equal => {
                let lo = if r == 0 { q - 1 } else { q };
                Axis {
                    lo,
                    hi: q,
                    step: 0,
                    next: 0,
                    len: 0,
                }
            }
        }
    }

    #[inline]
    fn pending(&self) -> bool {
        self.step != 0 && self.next < self.len
    }

    #[inline]
    fn advance(&mut self) {
        self.lo += self.step;
        self.hi += self.step;
        self.next += UNIT;
    }
}

/// Walks the open segment `p -> q` (shifted coordinates) through the grid and
/// checks that every piece lies in a closed free square. With `first_column`
/// the walk stops at the first crossing of a vertical grid line.
fn walk<F: Fn(i64, i64) -> bool>(
    free: &F,
    pu: i64,
    pv: i64,
    qu: i64,
    qv: i64,
    first_column: bool,
) -> bool {
    let mut u = Axis::new(pu, qu - pu);
    let mut v = Axis::new(pv, qv - pv);
    if u.len == 0 && v.len == 0 {
        return true;
    }
    loop {
        let mut ok = false;
        'region: for c in u.lo..=u.hi {
            for r in v.lo..=v.hi {
                if free(c, r) {
                    ok = true;
                    break 'region;
                }
            }
        }
        if !ok {
            return false;
        }
        let (cu, cv) = match (u.pending(), v.pending()) {
            (false, false) => return true,
            (true, true) => {
                let a = u.next as i128 * v.len as i128;
                let b = v.next as i128 * u.len as i128;
                (a <= b, b <= a)
            }
            pair => pair,
        };
        if cu {
            if first_column {
                return true;
            }
            u.advance();
        }
        if cv {
            v.advance();
        }
    }
}

/// True iff every point of the open segment `pq` lies in a closed free cell.
pub fn segment_clear(world: &GridWorld, p: Point, q: Point) -> bool {
    let free = |c: i64, r: i64| world_free(world, c, r);
    walk(&free, p.x + HALF, p.y + HALF, q.x + HALF, q.y + HALF, false)
}

#[inline]
fn world_free(world: &GridWorld, c: i64, r: i64) -> bool {
    c >= 0
        && r >= 0
        && (c as usize) < world.width()
        && (r as usize) < world.height()
        && world.is_free_index(r as usize * world.width() + c as usize)
}

/// Whether some segment from the centre of `x` to a target of `y` is clear.
pub fn sees_one_way(world: &GridWorld, x: Cell, y: Cell) -> bool {
    let s = Point::center(x);
    Point::targets(y)
        .iter()
        .any(|t| segment_clear(world, s, *t))
}

/// Cell visibility evaluated directly from segments, without any caching.
pub fn sees_direct(world: &GridWorld, x: Cell, y: Cell) -> bool {
    x == y || sees_one_way(world, x, y) || sees_one_way(world, y, x)
}

/// Reference visibility that samples 65 points of the target cell instead of 5.
pub fn sees_sampled(world: &GridWorld, x: Cell, y: Cell) -> bool {
    let one_way = |a: Cell, b: Cell| {
        let s = Point::center(a);
        Point::samples(b, 8)
            .iter()
            .any(|t| segment_clear(world, s, *t))
    };
    x == y || one_way(x, y) || one_way(y, x)
}

/// Slope `num / den` with `den > 0`.
#[derive(Debug, Clone, Copy)]
struct Slope {
    num: i64,
    den: i64,
}

impl Slope {
    #[inline]
    fn cmp(self, o: Slope) -> Ordering {
        (self.num as i128 * o.den as i128).cmp(&(o.num as i128 * self.den as i128))
    }
    #[inline]
    fn lt(self, o: Slope) -> bool {
        self.cmp(o) == Ordering::Less
    }
    #[inline]
    fn le(self, o: Slope) -> bool {
        self.cmp(o) != Ordering::Greater
    }
}

/// One of four scan directions, expressed as a map from local (column, row)
/// coordinates, where columns grow away from the source, to world cells.
#[derive(Clone, Copy)]
enum Cone {
    East,
    West,
    North,
    South,
}

impl Cone {
    const ALL: [Cone; 4] = [Cone::East, Cone::West, Cone::North, Cone::South];

    #[inline]
    fn to_world(self, col: i64, row: i64) -> (i64, i64) {
        match self {
            Cone::East => (col, row),
            Cone::West => (-(col + 1), row),
            Cone::North => (row, col),
            Cone::South => (row, -(col + 1)),
        }
    }

    /// Shifted world point to local coordinates.
    #[inline]
    fn local(self, u: i64, v: i64) -> (i64, i64) {
        match self {
            Cone::East => (u, v),
            Cone::West => (-u, v),
            Cone::North => (v, u),
            Cone::South => (-v, u),
        }
    }

    /// Diagonals belong to the east and west cones.
    #[inline]
    fn inclusive(self) -> bool {
        matches!(self, Cone::East | Cone::West)
    }

    fn last_col(self, world: &GridWorld) -> i64 {
        match self {
            Cone::East => world.width() as i64 - 1,
            Cone::North => world.height() as i64 - 1,
            Cone::West | Cone::South => -1,
        }
    }
}

/// Which points of a candidate cell count as targets.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Targets {
    FiveTargets,
    CenterOnly,
}

struct Scan<'a> {
    world: &'a GridWorld,
    cone: Cone,
    sa: i64,
    sb: i64,
}

impl<'a> Scan<'a> {
    #[inline]
    fn free(&self, col: i64, row: i64) -> bool {
        let (x, y) = self.cone.to_world(col, row);
        world_free(self.world, x, y)
    }

    #[inline]
    fn in_cone(&self, da: i64, db: i64) -> bool {
        da > 0
            && if self.cone.inclusive() {
                db.abs() <= da
            } else {
                db.abs() < da
            }
    }

    /// Target points of local cell `(col, row)`; the inset set is symmetric
    /// so reflection maps it onto itself.
    fn target_points(col: i64, row: i64, targets: Targets) -> ([(i64, i64); 5], usize) {
        let ca = col * UNIT + HALF;
        let cb = row * UNIT + HALF;
        let pts = [
            (ca, cb),
            (ca - INSET, cb - INSET),
            (ca + INSET, cb - INSET),
            (ca - INSET, cb + INSET),
            (ca + INSET, cb + INSET),
        ];
        (
            pts,
            if targets == Targets::FiveTargets {
                5
            } else {
                1
            },
        )
    }

    fn blocked_span(&self, col: i64, row: i64) -> (Slope, Slope) {
        let mut lo: Option<Slope> = None;
        let mut hi: Option<Slope> = None;
        for a in [col * UNIT, (col + 1) * UNIT] {
            for b in [row * UNIT, (row + 1) * UNIT] {
                let s = Slope {
                    num: b - self.sb,
                    den: a - self.sa,
                };
                if lo.is_none_or(|l| s.lt(l)) {
                    lo = Some(s);
                }
                if hi.is_none_or(|h| h.lt(s)) {
                    hi = Some(s);
                }
            }
        }
        (lo.unwrap(), hi.unwrap())
    }

    fn occluded(shadows: &[(Slope, Slope)], s: Slope) -> bool {
        // first interval whose upper end exceeds s
        let i = shadows.partition_point(|(_, hi)| hi.le(s));
        i < shadows.len() && shadows[i].0.lt(s)
    }

    /// Row index containing `sb + slope * (a - sa)`, floored.
    fn row_at(&self, slope: Slope, a: i64) -> i64 {
        let num = self.sb as i128 * slope.den as i128 + slope.num as i128 * (a - self.sa) as i128;
        let den = slope.den as i128 * UNIT as i128;
        num.div_euclid(den) as i64
    }

    fn point_visible(&self, shadows: &[(Slope, Slope)], ta: i64, tb: i64, full: bool) -> bool {
        let da = ta - self.sa;
        let db = tb - self.sb;
        if !self.in_cone(da, db) {
            return false;
        }
        let free = |c: i64, r: i64| self.free(c, r);
        if full {
            return walk(&free, self.sa, self.sb, ta, tb, false);
        }
        !Self::occluded(shadows, Slope { num: db, den: da })
            && walk(&free, self.sa, self.sb, ta, tb, true)
            && walk(&free, ta, tb, self.sa, self.sb, true)
    }

    fn run(&self, targets: Targets, seen: &mut [bool], out: &mut Vec<u32>) {
        let width = self.world.width();
        let mut record = |col: i64, row: i64, seen: &mut [bool]| {
            let (x, y) = self.cone.to_world(col, row);
            let i = y as usize * width + x as usize;
            if !seen[i] {
                seen[i] = true;
                out.push(i as u32);
            }
        };
        let is_seen = |col: i64, row: i64, seen: &[bool]| {
            let (x, y) = self.cone.to_world(col, row);
            seen[y as usize * width + x as usize]
        };

        let cs = self.sa.div_euclid(UNIT);
        let rs = self.sb.div_euclid(UNIT);
        for row in rs - 1..=rs + 1 {
            if !self.free(cs, row) || is_seen(cs, row, seen) {
                continue;
            }
            let (pts, n) = Self::target_points(cs, row, targets);
            if pts[..n]
                .iter()
                .any(|&(ta, tb)| self.point_visible(&[], ta, tb, true))
            {
                record(cs, row, seen);
            }
        }

        let lower = Slope { num: -1, den: 1 };
        let upper = Slope { num: 1, den: 1 };
        let mut shadows: Vec<(Slope, Slope)> = Vec::new();
        let mut gaps: Vec<(Slope, Slope)> = Vec::new();
        let mut rows: Vec<(i64, i64)> = Vec::new();
        let mut fresh: Vec<(Slope, Slope)> = Vec::new();
        for col in cs + 1..=self.cone.last_col(self.world) {
            gaps.clear();
            let mut cur = lower;
            for &(lo, hi) in &shadows {
                if upper.lt(cur) {
                    break;
                }
                if cur.le(lo) {
                    gaps.push((cur, if upper.lt(lo) { upper } else { lo }));
                }
                if cur.lt(hi) {
                    cur = hi;
                }
            }
            if cur.le(upper) {
                gaps.push((cur, upper));
            }
            if gaps.is_empty() {
                break;
            }

            rows.clear();
            let (a0, a1) = (col * UNIT, (col + 1) * UNIT);
            for &(lo, hi) in &gaps {
                let r0 = self.row_at(lo, if lo.num >= 0 { a0 } else { a1 });
                let r1 = self.row_at(hi, if hi.num >= 0 { a1 } else { a0 });
                match rows.last_mut() {
                    Some(last) if r0 <= last.1 + 1 => last.1 = last.1.max(r1),
                    _ => rows.push((r0, r1)),
                }
            }

            fresh.clear();
            for &(r0, r1) in &rows {
                for row in r0..=r1 {
                    if !self.free(col, row) {
                        fresh.push(self.blocked_span(col, row));
                        continue;
                    }
                    if is_seen(col, row, seen) {
                        continue;
                    }
                    let (pts, n) = Self::target_points(col, row, targets);
                    if pts[..n]
                        .iter()
                        .any(|&(ta, tb)| self.point_visible(&shadows, ta, tb, false))
                    {
                        record(col, row, seen);
                    }
                }
            }

            if !fresh.is_empty() {
                shadows.extend_from_slice(&fresh);
                shadows.sort_by(|a, b| a.0.cmp(b.0));
                let mut merged: Vec<(Slope, Slope)> = Vec::with_capacity(shadows.len());
                for &(lo, hi) in &shadows {
                    match merged.last_mut() {
                        Some(last) if lo.lt(last.1) => {
                            if last.1.lt(hi) {
                                last.1 = hi;
                            }
                        }
                        _ => merged.push((lo, hi)),
                    }
                }
                shadows = merged;
            }
        }
    }
}

fn scan_from(
    world: &GridWorld,
    source: Point,
    targets: Targets,
    seen: &mut [bool],
    out: &mut Vec<u32>,
) {
    let (u, v) = (source.x + HALF, source.y + HALF);
    for cone in Cone::ALL {
        let (sa, sb) = cone.local(u, v);
        Scan {
            world,
            cone,
            sa,
            sb,
        }
        .run(targets, seen, out);
    }
}

/// Cells seen by `c`, as sorted cell indices. Includes `c`.
pub fn compute_fov(world: &GridWorld, c: Cell) -> Vec<u32> {
    let mut seen = vec![false; world.cell_count()];
    let mut out = Vec::new();
    let i = world.index(c);
    seen[i] = true;
    out.push(i as u32);
    scan_from(
        world,
        Point::center(c),
        Targets::FiveTargets,
        &mut seen,
        &mut out,
    );
    for p in Point::inset_corners(c) {
        scan_from(world, p, Targets::CenterOnly, &mut seen, &mut out);
    }
    out.sort_unstable();
    out
}

/// Memoised per-cell field of view for one world. Safe to share between threads.
pub struct FovCache {
    world: GridWorld,
    cells: Vec<OnceLock<Box<[u32]>>>,
}

impl FovCache {
    pub fn new(world: GridWorld) -> Self {
        let cells = (0..world.cell_count()).map(|_| OnceLock::new()).collect();
        FovCache { world, cells }
    }

    pub fn world(&self) -> &GridWorld {
        &self.world
    }

    /// Sorted indices of the cells seen by `c`.
    pub fn fov_of(&self, c: Cell) -> &[u32] {
        self.fov_at(self.world.index(c))
    }

    pub fn fov_at(&self, index: usize) -> &[u32] {
        self.cells[index]
            .get_or_init(|| compute_fov(&self.world, self.world.cell(index)).into_boxed_slice())
    }

    pub fn sees(&self, x: Cell, y: Cell) -> bool {
        self.fov_of(x)
            .binary_search(&(self.world.index(y) as u32))
            .is_ok()
    }

    /// Union of the fields of view of `sources`.
    pub fn fov(&self, sources: &[Cell]) -> CellMask {
        let mut m = self.world.empty_mask();
        for &s in sources {
            for &i in self.fov_of(s) {
                m.insert(i as usize);
            }
        }
        m
    }

    /// Number of cells whose field of view has been computed.
    pub fn cached_count(&self) -> usize {
        self.cells.iter().filter(|c| c.get().is_some()).count()
    }
}

/// Union of the fields of view of `sources`.
pub fn fov(cache: &FovCache, sources: &[Cell]) -> CellMask {
    cache.fov(sources)
}

/// Valid corners whose agent cell lies in the field of view of `sources`.
pub fn visible_valid_corners(
    cache: &FovCache,
    analysis: &WorldAnalysis,
    sources: &[Cell],
) -> Vec<CornerPoint> {
    let seen = cache.fov(sources);
    let world = cache.world();
    analysis
        .valid_corners()
        .filter(|c| c.agent_cell.is_some_and(|a| seen.contains(world.index(a))))
        .copied()
        .collect()
}

/// Undirected graph over cells joined by mutual visibility.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilityGraph {
    pub vertices: Vec<Cell>,
    pub adjacency: Vec<Vec<usize>>,
}

impl VisibilityGraph {
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].contains(&b)
    }

    /// Vertex indices reachable from `start`.
    pub fn component_of(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.vertices.len()];
        if start >= self.vertices.len() {
            return seen;
        }
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }
}

pub fn build_visibility_graph(cache: &FovCache, members: &[Cell]) -> VisibilityGraph {
    let n = members.len();
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if members[i] != members[j] && cache.sees(members[i], members[j]) {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    VisibilityGraph {
        vertices: members.to_vec(),
        adjacency,
    }
}

pub fn is_connected(g: &VisibilityGraph) -> bool {
    g.vertices.is_empty() || g.component_of(0).iter().all(|s| *s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{analyze, validate_world, OccupancyGrid};

    fn world(rows: &[&str]) -> GridWorld {
        let grid = OccupancyGrid::from_rows(rows).unwrap();
        let d = (0..grid.free.len()).find(|&i| grid.free[i]).unwrap();
        validate_world(
            grid.clone(),
            Cell::new((d % grid.width) as i32, (d / grid.width) as i32),
        )
        .unwrap()
    }

    fn l_world() -> GridWorld {
        world(&["...###", "...###", "...###", "......", "......", "......"])
    }

    #[test]
    fn degenerate_segment_is_clear() {
        let w = world(&["#."]);
        let p = Point::center(Cell::new(1, 0));
        assert!(segment_clear(&w, p, p));
    }

    #[test]
    fn segment_along_wall_edge_is_clear() {
        // bottom row free, top row blocked; run along their shared edge
        let w = world(&["####", "...."]);
        assert!(segment_clear(
            &w,
            Point::from_halves(0, 1),
            Point::from_halves(6, 1)
        ));
        // the same edge between two blocked rows is not
        let w = world(&["####", "####", "...."]);
        assert!(!segment_clear(
            &w,
            Point::from_halves(0, 3),
            Point::from_halves(6, 3)
        ));
    }

    #[test]
    fn segment_through_blocked_cell() {
        let w = world(&["...", ".#.", "..."]);
        assert!(!segment_clear(
            &w,
            Point::center(Cell::new(0, 1)),
            Point::center(Cell::new(2, 1))
        ));
        assert!(!segment_clear(
            &w,
            Point::center(Cell::new(0, 0)),
            Point::center(Cell::new(2, 2))
        ));
        assert!(segment_clear(
            &w,
            Point::center(Cell::new(0, 0)),
            Point::center(Cell::new(2, 0))
        ));
    }

    #[test]
    fn grazing_a_corner_is_clear() {
        // diagonal through the lattice point shared with a blocked cell
        let w = world(&["...", "#..", "..."]);
        assert!(segment_clear(
            &w,
            Point::center(Cell::new(0, 0)),
            Point::center(Cell::new(1, 1))
        ));
        assert!(segment_clear(
            &w,
            Point::from_halves(1, -1),
            Point::from_halves(1, 5)
        ));
        assert!(!segment_clear(
            &w,
            Point::center(Cell::new(0, 0)),
            Point::center(Cell::new(0, 2))
        ));
    }

    #[test]
    fn corridor_and_l_visibility() {
        let corridor = world(&["#######", ".......", "#######"]);
        assert!(sees_direct(&corridor, Cell::new(0, 1), Cell::new(6, 1)));
        let w = l_world();
        assert!(sees_direct(&w, Cell::new(0, 5), Cell::new(5, 0)));
        assert!(!sees_direct(&w, Cell::new(0, 5), Cell::new(5, 1)));
        assert!(!sees_sampled(&w, Cell::new(0, 5), Cell::new(5, 1)));
        assert!(sees_direct(&w, Cell::new(2, 2), Cell::new(0, 5)));
        assert!(sees_direct(&w, Cell::new(1, 1), Cell::new(1, 1)));
    }

    #[test]
    fn fov_examples() {
        let open = world(&["....."; 5]);
        let cache = FovCache::new(open.clone());
        assert_eq!(cache.fov(&[Cell::new(3, 1)]).len(), 25);
        assert!(cache.fov(&[]).is_empty());

        let w = l_world();
        let cache = FovCache::new(w.clone());
        assert_eq!(cache.fov(&[Cell::new(2, 2)]).len(), w.free_count());
    }

    #[test]
    fn fov_matches_direct_evaluation() {
        let worlds = [
            l_world(),
            world(&[
                ".......", ".......", "..###..", "..###..", "..###..", ".......", ".......",
            ]),
            world(&[
                "..#....", "..#.##.", ".......", "##.#...", "...#.#.", ".#.....",
            ]),
        ];
        for w in worlds {
            let cache = FovCache::new(w.clone());
            for x in w.free_cells() {
                for y in w.free_cells() {
                    assert_eq!(cache.sees(x, y), sees_direct(&w, x, y), "{x} -> {y}");
                }
            }
        }
    }

    #[test]
    fn valid_corner_visibility() {
        let open = world(&["....."; 5]);
        let cache = FovCache::new(open.clone());
        assert!(visible_valid_corners(&cache, &analyze(&open), &[Cell::new(0, 0)]).is_empty());

        let w = l_world();
        let cache = FovCache::new(w.clone());
        let a = analyze(&w);
        for c in w.free_cells() {
            assert_eq!(visible_valid_corners(&cache, &a, &[c]).len(), 1);
        }

        // pressed against the pillar's left face, the cells at its right
        // corners are out of sight
        let w = world(&[
            "..........",
            "..........",
            "....##....",
            "....##....",
            "....##....",
            "..........",
            "..........",
        ]);
        let cache = FovCache::new(w.clone());
        let a = analyze(&w);
        assert_eq!(a.m_valid, 3);
        let seen = visible_valid_corners(&cache, &a, &[Cell::new(3, 3)]);
        assert!(!seen.is_empty() && seen.len() < 3);
        for c in &seen {
            assert!(sees_direct(&w, Cell::new(3, 3), c.agent_cell.unwrap()));
        }
    }

    #[test]
    fn graph_examples() {
        let u = world(&["..#..", "..#..", "....."]);
        let cache = FovCache::new(u.clone());
        let g = build_visibility_graph(&cache, &[Cell::new(0, 2)]);
        assert_eq!((g.vertices.len(), g.edge_count()), (1, 0));

        let g = build_visibility_graph(&cache, &[Cell::new(0, 2), Cell::new(0, 0)]);
        assert_eq!(g.edge_count(), 1);

        let g =
            build_visibility_graph(&cache, &[Cell::new(0, 2), Cell::new(2, 0), Cell::new(4, 2)]);
        assert!(g.has_edge(0, 1) && g.has_edge(1, 2) && !g.has_edge(0, 2));
        assert!(is_connected(&g));

        let g = build_visibility_graph(&cache, &[Cell::new(0, 2), Cell::new(4, 2)]);
        assert!(!is_connected(&g));
        assert!(is_connected(&VisibilityGraph {
            vertices: vec![],
            adjacency: vec![]
        }));
    }
}
