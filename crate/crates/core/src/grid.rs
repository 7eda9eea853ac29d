//! Square-cell bookkeeping over the bounding box `[-1, 1]²`.
//!
//! Everything downstream — fixed-region detection, domain masks, brick
//! decompositions, witness arcs — is built from unions of axis-aligned
//! cells of one fixed [`Grid`]. Cell sets are stored as bitsets so the
//! heavy set algebra of the dynamics layer stays allocation-light and
//! deterministic (iteration order is always ascending cell index).

use crate::error::{Error, Result};
use crate::geom::Pt;

/// An `n × n` uniform grid of square cells covering `[-1, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n: u32,
}

/// One cell, addressed by column `ix` and row `iy`, both in `[0, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub ix: u32,
    pub iy: u32,
}

impl Grid {
    pub fn new(n: u32) -> Result<Grid> {
        if n < 2 {
            return Err(Error::Geometry(format!(
                "grid resolution must be at least 2, got {n}"
            )));
        }
        Ok(Grid { n })
    }

    /// Grid whose cell size is as close as possible to the request.
    pub fn from_cell_size(cell_size: f64) -> Result<Grid> {
        if !(cell_size > 0.0) || cell_size > 1.0 {
            return Err(Error::Geometry(format!(
                "cell size must lie in (0, 1], got {cell_size}"
            )));
        }
        Grid::new((2.0 / cell_size).round() as u32)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn cell_count(&self) -> usize {
        (self.n as usize) * (self.n as usize)
    }

    pub fn cell_size(&self) -> f64 {
        2.0 / self.n as f64
    }

    pub fn index(&self, c: Cell) -> usize {
        debug_assert!(c.ix < self.n && c.iy < self.n);
        (c.iy as usize) * (self.n as usize) + c.ix as usize
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        debug_assert!(index < self.cell_count());
        Cell {
            ix: (index % self.n as usize) as u32,
            iy: (index / self.n as usize) as u32,
        }
    }

    /// Cell containing the point, if the point lies in `[-1, 1)²`.
    pub fn cell_of(&self, p: Pt) -> Option<Cell> {
        let h = self.cell_size();
        let fx = ((p.x + 1.0) / h).floor();
        let fy = ((p.y + 1.0) / h).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.n as f64 || fy >= self.n as f64 {
            return None;
        }
        Some(Cell { ix: fx as u32, iy: fy as u32 })
    }

    /// Lower-left corner of the cell.
    pub fn min_corner(&self, c: Cell) -> Pt {
        let h = self.cell_size();
        Pt::new(-1.0 + h * c.ix as f64, -1.0 + h * c.iy as f64)
    }

    pub fn center(&self, c: Cell) -> Pt {
        let h = self.cell_size();
        self.min_corner(c) + Pt::new(h / 2.0, h / 2.0)
    }

    pub fn corners(&self, c: Cell) -> [Pt; 4] {
        let lo = self.min_corner(c);
        let h = self.cell_size();
        [
            lo,
            lo + Pt::new(h, 0.0),
            lo + Pt::new(h, h),
            lo + Pt::new(0.0, h),
        ]
    }

    /// True iff the closed cell lies inside the open disk of the given
    /// radius about the origin.
    pub fn cell_inside_radius(&self, c: Cell, radius: f64) -> bool {
        let r2 = radius * radius;
        self.corners(c).iter().all(|p| p.norm2() < r2)
    }

    /// Squared distance from a point to the closed cell.
    pub fn dist2_to_cell(&self, c: Cell, p: Pt) -> f64 {
        let lo = self.min_corner(c);
        let h = self.cell_size();
        let dx = (lo.x - p.x).max(p.x - (lo.x + h)).max(0.0);
        let dy = (lo.y - p.y).max(p.y - (lo.y + h)).max(0.0);
        dx * dx + dy * dy
    }

    /// The 4-neighbours (edge-sharing) that exist in the grid.
    pub fn neighbours4(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        let n = self.n;
        [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)]
            .into_iter()
            .filter_map(move |(dx, dy)| {
                let ix = c.ix as i64 + dx;
                let iy = c.iy as i64 + dy;
                (ix >= 0 && iy >= 0 && ix < n as i64 && iy < n as i64).then(|| Cell {
                    ix: ix as u32,
                    iy: iy as u32,
                })
            })
    }

    /// The 8-neighbours (edge- or corner-sharing) that exist in the grid.
    pub fn neighbours8(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        let n = self.n;
        (-1i64..=1)
            .flat_map(move |dy| (-1i64..=1).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| dx != 0 || dy != 0)
            .filter_map(move |(dx, dy)| {
                let ix = c.ix as i64 + dx;
                let iy = c.iy as i64 + dy;
                (ix >= 0 && iy >= 0 && ix < n as i64 && iy < n as i64).then(|| Cell {
                    ix: ix as u32,
                    iy: iy as u32,
                })
            })
    }
}

/// A set of cells of one grid, stored as a bitset over cell indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSet {
    n: u32,
    bits: Vec<u64>,
}

impl CellSet {
    pub fn new(grid: &Grid) -> CellSet {
        let words = grid.cell_count().div_ceil(64);
        CellSet { n: grid.n(), bits: vec![0; words] }
    }

    pub fn grid(&self) -> Grid {
        Grid { n: self.n }
    }

    fn check_same(&self, other: &CellSet) {
        assert_eq!(self.n, other.n, "cell sets belong to different grids");
    }

    pub fn insert(&mut self, c: Cell) -> bool {
        let i = self.grid().index(c);
        let (w, b) = (i / 64, i % 64);
        let had = self.bits[w] >> b & 1 == 1;
        self.bits[w] |= 1 << b;
        !had
    }

    pub fn remove(&mut self, c: Cell) -> bool {
        let i = self.grid().index(c);
        let (w, b) = (i / 64, i % 64);
        let had = self.bits[w] >> b & 1 == 1;
        self.bits[w] &= !(1 << b);
        had
    }

    pub fn contains(&self, c: Cell) -> bool {
        let i = self.grid().index(c);
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn union_with(&mut self, other: &CellSet) {
        self.check_same(other);
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &CellSet) {
        self.check_same(other);
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a &= b;
        }
    }

    pub fn subtract(&mut self, other: &CellSet) {
        self.check_same(other);
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a &= !b;
        }
    }

    pub fn intersects(&self, other: &CellSet) -> bool {
        self.check_same(other);
        self.bits.iter().zip(&other.bits).any(|(a, b)| a & b != 0)
    }

    pub fn is_subset_of(&self, other: &CellSet) -> bool {
        self.check_same(other);
        self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    /// Cells in ascending index order (row-major).
    pub fn iter(&self) -> impl Iterator<Item = Cell> + '_ {
        let grid = self.grid();
        self.bits.iter().enumerate().flat_map(move |(w, &word)| {
            let mut word = word;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let b = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(w * 64 + b)
            })
            .filter(move |&i| i < grid.cell_count())
            .map(move |i| grid.cell_at(i))
        })
    }

    pub fn cells(&self) -> Vec<Cell> {
        self.iter().collect()
    }

    pub fn indices(&self) -> Vec<u32> {
        let grid = self.grid();
        self.iter().map(|c| grid.index(c) as u32).collect()
    }

    pub fn from_cells(grid: &Grid, cells: impl IntoIterator<Item = Cell>) -> CellSet {
        let mut s = CellSet::new(grid);
        for c in cells {
            s.insert(c);
        }
        s
    }

    /// Grow by one cell in every direction (8-neighbourhood), keeping
    /// only cells of `within` when a restriction is given.
    pub fn dilate(&self, within: Option<&CellSet>) -> CellSet {
        let grid = self.grid();
        let mut out = self.clone();
        for c in self.iter() {
            for nb in grid.neighbours8(c) {
                out.insert(nb);
            }
        }
        if let Some(w) = within {
            out.intersect_with(w);
        }
        out
    }

    /// Connected components under edge-adjacency, ordered by their
    /// smallest cell index.
    pub fn components(&self) -> Vec<CellSet> {
        let grid = self.grid();
        let mut seen = CellSet::new(&grid);
        let mut out = Vec::new();
        for c in self.iter() {
            if seen.contains(c) {
                continue;
            }
            let mut comp = CellSet::new(&grid);
            let mut stack = vec![c];
            seen.insert(c);
            comp.insert(c);
            while let Some(cur) = stack.pop() {
                for nb in grid.neighbours4(cur) {
                    if self.contains(nb) && seen.insert(nb) {
                        comp.insert(nb);
                        stack.push(nb);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        if self.is_empty() {
            return true;
        }
        self.components().len() == 1
    }

    /// Smallest cell by row-major index, if any.
    pub fn first(&self) -> Option<Cell> {
        self.iter().next()
    }

    /// Inclusive bounding box `(min, max)` in cell coordinates.
    pub fn bbox(&self) -> Option<(Cell, Cell)> {
        let mut lo: Option<Cell> = None;
        let mut hi: Option<Cell> = None;
        for c in self.iter() {
            lo = Some(match lo {
                None => c,
                Some(l) => Cell { ix: l.ix.min(c.ix), iy: l.iy.min(c.iy) },
            });
            hi = Some(match hi {
                None => c,
                Some(h) => Cell { ix: h.ix.max(c.ix), iy: h.iy.max(c.iy) },
            });
        }
        lo.zip(hi)
    }

    /// Connected components counting diagonal contact, ordered by their
    /// smallest cell index. Two closed cells meeting only at a corner
    /// form a connected point set, so this matches topological
    /// connectivity of the closed union.
    pub fn components_diag(&self) -> Vec<CellSet> {
        let grid = self.grid();
        let mut seen = CellSet::new(&grid);
        let mut out = Vec::new();
        for c in self.iter() {
            if seen.contains(c) {
                continue;
            }
            let mut comp = CellSet::new(&grid);
            let mut stack = vec![c];
            seen.insert(c);
            comp.insert(c);
            while let Some(cur) = stack.pop() {
                for nb in grid.neighbours8(cur) {
                    if self.contains(nb) && seen.insert(nb) {
                        comp.insert(nb);
                        stack.push(nb);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// Euler characteristic `V − E + F` of the union of closed cells.
    /// A nonempty edge-connected set is simply connected (a closed
    /// disk) exactly when this equals 1.
    pub fn euler_characteristic(&self) -> i64 {
        let n = self.n as usize;
        let corner_stride = n + 1;
        let mut corners = vec![0u64; (corner_stride * corner_stride).div_ceil(64)];
        let mut h_edges = vec![0u64; (n * corner_stride).div_ceil(64)];
        let mut v_edges = vec![0u64; (corner_stride * n).div_ceil(64)];
        let mark = |bits: &mut Vec<u64>, i: usize| {
            let (w, b) = (i / 64, i % 64);
            let had = bits[w] >> b & 1 == 1;
            bits[w] |= 1 << b;
            u64::from(!had)
        };
        let mut v = 0i64;
        let mut e = 0i64;
        let mut f = 0i64;
        for c in self.iter() {
            let (x, y) = (c.ix as usize, c.iy as usize);
            f += 1;
            for (cx, cy) in [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)] {
                v += mark(&mut corners, cy * corner_stride + cx) as i64;
            }
            // Horizontal edges indexed by (row of corners, column of cell).
            e += mark(&mut h_edges, y * n + x) as i64;
            e += mark(&mut h_edges, (y + 1) * n + x) as i64;
            // Vertical edges indexed by (row of cell, column of corners).
            e += mark(&mut v_edges, y * corner_stride + x) as i64;
            e += mark(&mut v_edges, y * corner_stride + x + 1) as i64;
        }
        v - e + f
    }
}

/// All cells lying entirely inside the open disk of the given radius.
pub fn disk_cells(grid: &Grid, radius: f64) -> CellSet {
    let mut s = CellSet::new(grid);
    for iy in 0..grid.n() {
        for ix in 0..grid.n() {
            let c = Cell { ix, iy };
            if grid.cell_inside_radius(c, radius) {
                s.insert(c);
            }
        }
    }
    s
}

/// Cells of `set` having an 8-neighbour outside `set` (or on the grid
/// edge): the one-cell-thick boundary ring.
pub fn boundary_ring(set: &CellSet) -> CellSet {
    let grid = set.grid();
    let mut ring = CellSet::new(&grid);
    for c in set.iter() {
        let n8 = grid.neighbours8(c).filter(|nb| set.contains(*nb)).count();
        let total = grid.neighbours8(c).count();
        if n8 < 8 || total < 8 {
            ring.insert(c);
        }
    }
    ring
}
