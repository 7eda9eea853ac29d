//! Brick decompositions of grid masks, driven by a disk self-map.
//!
//! A decomposition partitions a mask (a set of grid cells) into bricks:
//! edge-connected, simply connected cell blocks. The standard build is a
//! running-bond wall — rows one cell high, bricks two cells wide, joints
//! offset by one cell between rows — so exactly three bricks meet at
//! every interior vertex. Seed blocks (orbit disks) are carved out first
//! and the wall fills around them; their 4×3 shape and column parity are
//! chosen so the wall's vertices stay degree 3 around them.
//!
//! Every brick carries a sampled image footprint: the cells hit by the
//! images of a 5×5 sample lattice per cell ("solid"), and the cells
//! within `eps_geo` of a sampled image ("fat", a superset). Footprints
//! are cached per cell, so splitting and merging bricks only regroups
//! cached data. A brick is free when its fat footprint misses its own
//! cells; refinement splits non-free bricks, and maximalization greedily
//! merges bricks while unions stay free, edge-connected and simply
//! connected.

use crate::error::{Error, Result};
use crate::geom::Pt;
use crate::grid::{Cell, CellSet, Grid};
use crate::planemap::PlaneMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Sample lattice per cell edge for footprint construction.
const SAMPLES_PER_EDGE: u32 = 5;

/// Result of the sampled freeness test for one brick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Freeness {
    /// No sampled image comes within `eps_geo` of the brick.
    Free,
    /// A sampled image lands within `eps_geo` of the brick but none
    /// inside it: freeness is not established. Treated as not free.
    Unknown,
    /// A sampled image lands inside the brick.
    NotFree,
}

#[derive(Debug, Clone)]
struct Brick {
    cells: CellSet,
    solid_fp: CellSet,
    fat_fp: CellSet,
    seeded: bool,
    /// Bricks whose closures intersect (shared edge or corner), sorted.
    touch_neighbors: Vec<u32>,
    /// Bricks sharing a boundary edge of positive length, sorted.
    edge_neighbors: Vec<u32>,
    freeness: Freeness,
    euler: i64,
}

/// A brick decomposition of a mask, with cached image footprints.
#[derive(Debug, Clone)]
pub struct BrickDecomposition {
    grid: Grid,
    mask: CellSet,
    eps_geo: f64,
    bricks: Vec<Brick>,
    /// Cell index → brick id; `u32::MAX` outside the mask.
    owner: Vec<u32>,
    /// Per-cell image cells (sorted indices), empty off the mask.
    cell_solid: Vec<Vec<u32>>,
    /// Per-cell near-image cells (sorted indices, superset of solid).
    cell_fat: Vec<Vec<u32>>,
}

fn cell_footprint(map: &PlaneMap, grid: &Grid, c: Cell, eps_geo: f64) -> Result<(Vec<u32>, Vec<u32>)> {
    let h = grid.cell_size();
    let eps2 = eps_geo * eps_geo;
    let lo = grid.min_corner(c);
    let mut solid = Vec::new();
    let mut fat = Vec::new();
    for i in 0..SAMPLES_PER_EDGE {
        for j in 0..SAMPLES_PER_EDGE {
            let q = lo
                + Pt::new(
                    h * (i as f64 + 0.5) / SAMPLES_PER_EDGE as f64,
                    h * (j as f64 + 0.5) / SAMPLES_PER_EDGE as f64,
                );
            let fq = map.eval(q)?;
            let Some(ic) = grid.cell_of(fq) else { continue };
            solid.push(grid.index(ic) as u32);
            for dx in -1i64..=1 {
                for dy in -1i64..=1 {
                    let nx = ic.ix as i64 + dx;
                    let ny = ic.iy as i64 + dy;
                    if nx < 0 || ny < 0 || nx >= grid.n() as i64 || ny >= grid.n() as i64 {
                        continue;
                    }
                    let nc = Cell { ix: nx as u32, iy: ny as u32 };
                    if grid.dist2_to_cell(nc, fq) <= eps2 {
                        fat.push(grid.index(nc) as u32);
                    }
                }
            }
        }
    }
    solid.sort_unstable();
    solid.dedup();
    fat.sort_unstable();
    fat.dedup();
    Ok((solid, fat))
}

/// Count shared vertices and edges of the closed cell complexes of two
/// disjoint cell sets (iterating the smaller side).
fn shared_boundary(a: &CellSet, b: &CellSet) -> (i64, i64) {
    let (small, big) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let grid = small.grid();
    let n = grid.n() as i64;
    let stride = n + 1;
    let mut shared_corners: BTreeSet<i64> = BTreeSet::new();
    let mut shared_edges = 0i64;
    let touches = |set: &CellSet, cx: i64, cy: i64| -> bool {
        for (x, y) in [(cx - 1, cy - 1), (cx, cy - 1), (cx - 1, cy), (cx, cy)] {
            if x >= 0 && y >= 0 && x < n && y < n && set.contains(Cell { ix: x as u32, iy: y as u32 })
            {
                return true;
            }
        }
        false
    };
    for c in small.iter() {
        for nb in grid.neighbours4(c) {
            if big.contains(nb) {
                shared_edges += 1;
            }
        }
        let (x, y) = (c.ix as i64, c.iy as i64);
        for (cx, cy) in [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)] {
            if touches(big, cx, cy) {
                shared_corners.insert(cy * stride + cx);
            }
        }
    }
    (shared_corners.len() as i64, shared_edges)
}

impl BrickDecomposition {
    /// Build the running-bond wall on `mask` around the given seed
    /// blocks, computing all footprints under `map`.
    pub fn build(
        map: &PlaneMap,
        grid: &Grid,
        mask: &CellSet,
        seeds: &[CellSet],
        eps_geo: f64,
    ) -> Result<BrickDecomposition> {
        if grid.n() < 16 {
            return Err(Error::Decomposition(format!(
                "cell size {} is too coarse for a brick wall (need ≥ 16 cells per side)",
                grid.cell_size()
            )));
        }
        if mask.is_empty() {
            return Err(Error::Decomposition("mask has no cells".into()));
        }
        if !(eps_geo > 0.0 && eps_geo <= grid.cell_size()) {
            return Err(Error::Decomposition(format!(
                "eps_geo {eps_geo} must lie in (0, cell size = {}]",
                grid.cell_size()
            )));
        }
        for c in mask.iter() {
            if !grid.cell_inside_radius(c, 1.0) {
                return Err(Error::Decomposition(format!(
                    "mask cell ({}, {}) is not strictly inside the unit disk",
                    c.ix, c.iy
                )));
            }
        }
        let mut seeded_cells = CellSet::new(grid);
        for (k, s) in seeds.iter().enumerate() {
            if s.is_empty() || !s.is_subset_of(mask) {
                return Err(Error::Decomposition(format!(
                    "seed block {k} is empty or leaves the mask"
                )));
            }
            if !s.is_connected() {
                return Err(Error::Decomposition(format!("seed block {k} is disconnected")));
            }
            if s.dilate(None).intersects(&seeded_cells) {
                return Err(Error::Decomposition(format!(
                    "seed block {k} touches an earlier seed block"
                )));
            }
            seeded_cells.union_with(s);
        }

        // Footprints for every mask cell, in parallel, assembled in
        // ascending cell order.
        let mask_cells: Vec<Cell> = mask.cells();
        let fps: Vec<(Vec<u32>, Vec<u32>)> = mask_cells
            .par_iter()
            .map(|&c| cell_footprint(map, grid, c, eps_geo))
            .collect::<Result<_>>()?;
        let mut cell_solid = vec![Vec::new(); grid.cell_count()];
        let mut cell_fat = vec![Vec::new(); grid.cell_count()];
        for (c, (s, f)) in mask_cells.iter().zip(fps) {
            let i = grid.index(*c);
            cell_solid[i] = s;
            cell_fat[i] = f;
        }

        // Masonry plan: rows one cell high; bricks two cells wide; rows
        // with odd index start with a single cell so the joints fall on
        // the midlines of the row below.
        let mut parts: Vec<(CellSet, bool)> = seeds.iter().map(|s| (s.clone(), true)).collect();
        let n = grid.n();
        for iy in 0..n {
            let mut push_block = |cols: &[u32]| {
                let cells: Vec<Cell> = cols
                    .iter()
                    .map(|&ix| Cell { ix, iy })
                    .filter(|c| mask.contains(*c) && !seeded_cells.contains(*c))
                    .collect();
                if !cells.is_empty() {
                    parts.push((CellSet::from_cells(grid, cells), false));
                }
            };
            let mut ix = 0;
            if iy % 2 == 1 {
                push_block(&[0]);
                ix = 1;
            }
            while ix < n {
                if ix + 1 < n {
                    push_block(&[ix, ix + 1]);
                } else {
                    push_block(&[ix]);
                }
                ix += 2;
            }
        }

        Ok(Self::rebuild(grid, mask, eps_geo, cell_solid, cell_fat, parts))
    }

    /// Assemble a decomposition from brick cell sets, in canonical
    /// order (by smallest cell index).
    fn rebuild(
        grid: &Grid,
        mask: &CellSet,
        eps_geo: f64,
        cell_solid: Vec<Vec<u32>>,
        cell_fat: Vec<Vec<u32>>,
        mut parts: Vec<(CellSet, bool)>,
    ) -> BrickDecomposition {
        parts.sort_by_key(|(cells, _)| {
            let c = cells.first().expect("bricks are nonempty");
            grid.index(c)
        });
        let mut owner = vec![u32::MAX; grid.cell_count()];
        for (id, (cells, _)) in parts.iter().enumerate() {
            for c in cells.iter() {
                owner[grid.index(c)] = id as u32;
            }
        }
        let bricks = parts
            .into_iter()
            .enumerate()
            .map(|(id, (cells, seeded))| {
                let mut solid_fp = CellSet::new(grid);
                let mut fat_fp = CellSet::new(grid);
                let mut touch = BTreeSet::new();
                let mut edge = BTreeSet::new();
                for c in cells.iter() {
                    let i = grid.index(c);
                    for &fc in &cell_solid[i] {
                        solid_fp.insert(grid.cell_at(fc as usize));
                    }
                    for &fc in &cell_fat[i] {
                        fat_fp.insert(grid.cell_at(fc as usize));
                    }
                    for nb in grid.neighbours4(c) {
                        let o = owner[grid.index(nb)];
                        if o != u32::MAX && o != id as u32 {
                            edge.insert(o);
                        }
                    }
                    for nb in grid.neighbours8(c) {
                        let o = owner[grid.index(nb)];
                        if o != u32::MAX && o != id as u32 {
                            touch.insert(o);
                        }
                    }
                }
                let freeness = if solid_fp.intersects(&cells) {
                    Freeness::NotFree
                } else if fat_fp.intersects(&cells) {
                    Freeness::Unknown
                } else {
                    Freeness::Free
                };
                let euler = cells.euler_characteristic();
                Brick {
                    cells,
                    solid_fp,
                    fat_fp,
                    seeded,
                    touch_neighbors: touch.into_iter().collect(),
                    edge_neighbors: edge.into_iter().collect(),
                    freeness,
                    euler,
                }
            })
            .collect();
        BrickDecomposition {
            grid: *grid,
            mask: mask.clone(),
            eps_geo,
            bricks,
            owner,
            cell_solid,
            cell_fat,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &CellSet {
        &self.mask
    }

    pub fn eps_geo(&self) -> f64 {
        self.eps_geo
    }

    pub fn brick_count(&self) -> usize {
        self.bricks.len()
    }

    pub fn cells(&self, id: u32) -> &CellSet {
        &self.bricks[id as usize].cells
    }

    pub fn is_seeded(&self, id: u32) -> bool {
        self.bricks[id as usize].seeded
    }

    pub fn seeded_ids(&self) -> Vec<u32> {
        (0..self.brick_count() as u32).filter(|&b| self.is_seeded(b)).collect()
    }

    pub fn freeness(&self, id: u32) -> Freeness {
        self.bricks[id as usize].freeness
    }

    pub fn is_free(&self, id: u32) -> bool {
        self.freeness(id) == Freeness::Free
    }

    /// Image cells of the brick (sampled).
    pub fn solid_footprint(&self, id: u32) -> &CellSet {
        &self.bricks[id as usize].solid_fp
    }

    /// Cells within `eps_geo` of a sampled image (superset of solid).
    pub fn fat_footprint(&self, id: u32) -> &CellSet {
        &self.bricks[id as usize].fat_fp
    }

    /// Bricks whose closure meets this brick's closure (corner contact
    /// counts), ascending.
    pub fn touch_neighbors(&self, id: u32) -> &[u32] {
        &self.bricks[id as usize].touch_neighbors
    }

    /// Bricks sharing a boundary edge of positive length, ascending.
    pub fn edge_neighbors(&self, id: u32) -> &[u32] {
        &self.bricks[id as usize].edge_neighbors
    }

    /// Whether the closed bricks intersect. A brick is not adjacent to
    /// itself.
    pub fn adjacent(&self, a: u32, b: u32) -> bool {
        a != b && self.bricks[a as usize].touch_neighbors.binary_search(&b).is_ok()
    }

    pub fn owner_of(&self, c: Cell) -> Option<u32> {
        let o = self.owner[self.grid.index(c)];
        (o != u32::MAX).then_some(o)
    }

    pub fn owner_of_index(&self, i: u32) -> Option<u32> {
        let o = self.owner[i as usize];
        (o != u32::MAX).then_some(o)
    }

    pub fn brick_containing(&self, p: Pt) -> Option<u32> {
        self.grid.cell_of(p).and_then(|c| self.owner_of(c))
    }

    /// Ids of bricks whose sampled image meets the given brick
    /// (`solid`) or comes within `eps_geo` of it (`fat`, a superset).
    pub fn image_bricks(&self, id: u32) -> (Vec<u32>, Vec<u32>) {
        let collect = |fp: &CellSet| {
            let mut out: Vec<u32> = fp
                .iter()
                .filter_map(|c| self.owner_of(c))
                .collect();
            out.sort_unstable();
            out.dedup();
            out
        };
        (
            collect(&self.bricks[id as usize].solid_fp),
            collect(&self.bricks[id as usize].fat_fp),
        )
    }

    /// Split every non-free brick in half along its longer axis until
    /// all bricks are free, or fail after `max_rounds` rounds listing
    /// the offenders. Seeded bricks and single cells cannot be split:
    /// a non-free one fails immediately.
    pub fn refine_until_free(&mut self, max_rounds: usize) -> Result<usize> {
        let mut splits = 0;
        for _ in 0..=max_rounds {
            let bad: Vec<u32> = (0..self.brick_count() as u32)
                .filter(|&b| self.freeness(b) != Freeness::Free)
                .collect();
            if bad.is_empty() {
                return Ok(splits);
            }
            let seeded_bad: Vec<u32> = bad.iter().copied().filter(|&b| self.is_seeded(b)).collect();
            if !seeded_bad.is_empty() {
                return Err(Error::Decomposition(format!(
                    "seed bricks {seeded_bad:?} are not free; orbit disks must be free by construction"
                )));
            }
            let dead: Vec<u32> =
                bad.iter().copied().filter(|&b| self.cells(b).len() == 1).collect();
            if !dead.is_empty() {
                return Err(Error::Decomposition(format!(
                    "single-cell bricks {dead:?} are not free; no refinement can separate a cell from its own image"
                )));
            }
            let bad_set: BTreeSet<u32> = bad.iter().copied().collect();
            let mut parts: Vec<(CellSet, bool)> = Vec::new();
            for (id, brick) in self.bricks.iter().enumerate() {
                if !bad_set.contains(&(id as u32)) {
                    parts.push((brick.cells.clone(), brick.seeded));
                    continue;
                }
                splits += 1;
                let (lo, hi) = brick.cells.bbox().expect("bricks are nonempty");
                let width = hi.ix - lo.ix + 1;
                let height = hi.iy - lo.iy + 1;
                let mut half_a = CellSet::new(&self.grid);
                let mut half_b = CellSet::new(&self.grid);
                for c in brick.cells.iter() {
                    let in_a = if width >= height {
                        c.ix < lo.ix + width / 2
                    } else {
                        c.iy < lo.iy + height / 2
                    };
                    if in_a {
                        half_a.insert(c);
                    } else {
                        half_b.insert(c);
                    }
                }
                for half in [half_a, half_b] {
                    for comp in half.components() {
                        parts.push((comp, false));
                    }
                }
            }
            *self = Self::rebuild(
                &self.grid,
                &self.mask,
                self.eps_geo,
                std::mem::take(&mut self.cell_solid),
                std::mem::take(&mut self.cell_fat),
                parts,
            );
        }
        let bad: Vec<u32> = (0..self.brick_count() as u32)
            .filter(|&b| self.freeness(b) != Freeness::Free)
            .collect();
        Err(Error::Decomposition(format!(
            "bricks {bad:?} remain non-free after the refinement budget"
        )))
    }

    /// Greedily merge bricks — lowest edge (a, b) first — while the
    /// union is free, shares a boundary edge, stays simply connected,
    /// and is not a merge of two seed bricks. Runs to a fixpoint and
    /// returns the number of merges.
    pub fn maximalize(&mut self) -> usize {
        let nb = self.brick_count();
        let mut cells: Vec<CellSet> = self.bricks.iter().map(|b| b.cells.clone()).collect();
        let mut solid: Vec<CellSet> = self.bricks.iter().map(|b| b.solid_fp.clone()).collect();
        let mut fat: Vec<CellSet> = self.bricks.iter().map(|b| b.fat_fp.clone()).collect();
        let mut seeded: Vec<bool> = self.bricks.iter().map(|b| b.seeded).collect();
        let free: Vec<bool> =
            self.bricks.iter().map(|b| b.freeness == Freeness::Free).collect();
        let mut euler: Vec<i64> = self.bricks.iter().map(|b| b.euler).collect();
        let mut edge_nb: Vec<BTreeSet<u32>> = self
            .bricks
            .iter()
            .map(|b| b.edge_neighbors.iter().copied().collect())
            .collect();
        let mut alive = vec![true; nb];
        let mut queue: BTreeSet<(u32, u32)> = BTreeSet::new();
        for (a, b) in edge_nb.iter().enumerate().flat_map(|(a, nbs)| {
            nbs.iter().map(move |&b| (a as u32, b))
        }) {
            if a < b {
                queue.insert((a, b));
            }
        }
        let mut merges = 0;
        while let Some((a, b)) = queue.pop_first() {
            let (ai, bi) = (a as usize, b as usize);
            if !alive[ai] || !alive[bi] || !edge_nb[ai].contains(&b) {
                continue;
            }
            if seeded[ai] && seeded[bi] {
                continue;
            }
            if !free[ai] || !free[bi] {
                continue;
            }
            if solid[ai].intersects(&cells[bi]) || solid[bi].intersects(&cells[ai]) {
                continue;
            }
            if fat[ai].intersects(&cells[bi]) || fat[bi].intersects(&cells[ai]) {
                continue;
            }
            let (v_sh, e_sh) = shared_boundary(&cells[ai], &cells[bi]);
            let union_euler = euler[ai] + euler[bi] - (v_sh - e_sh);
            if union_euler != 1 {
                continue;
            }
            // Merge b into a (a < b).
            let (cb, sb, fb) = (cells[bi].clone(), solid[bi].clone(), fat[bi].clone());
            cells[ai].union_with(&cb);
            solid[ai].union_with(&sb);
            fat[ai].union_with(&fb);
            seeded[ai] |= seeded[bi];
            euler[ai] = union_euler;
            alive[bi] = false;
            let b_nbs: Vec<u32> = edge_nb[bi].iter().copied().collect();
            for x in b_nbs {
                edge_nb[x as usize].remove(&b);
                if x != a {
                    edge_nb[x as usize].insert(a);
                    edge_nb[ai].insert(x);
                    queue.insert((a.min(x), a.max(x)));
                }
            }
            edge_nb[ai].remove(&b);
            edge_nb[bi].clear();
            // Fresh merge opportunities around the grown brick.
            for &x in &edge_nb[ai] {
                queue.insert((a.min(x), a.max(x)));
            }
            merges += 1;
        }
        let parts: Vec<(CellSet, bool)> = alive
            .iter()
            .enumerate()
            .filter(|&(_, &a)| a)
            .map(|(i, _)| (cells[i].clone(), seeded[i]))
            .collect();
        *self = Self::rebuild(
            &self.grid,
            &self.mask,
            self.eps_geo,
            std::mem::take(&mut self.cell_solid),
            std::mem::take(&mut self.cell_fat),
            parts,
        );
        merges
    }

    /// True when every brick of `self` lies inside a single brick of
    /// `coarser` (same grid and mask): `self` refines `coarser`.
    pub fn is_refinement_of(&self, coarser: &BrickDecomposition) -> bool {
        if self.grid.n() != coarser.grid.n() || self.mask != coarser.mask {
            return false;
        }
        (0..self.brick_count() as u32).all(|b| {
            let mut owners = self.cells(b).iter().map(|c| coarser.owner_of(c));
            let Some(first) = owners.next() else { return false };
            first.is_some() && owners.all(|o| o == first)
        })
    }

    pub fn audit_degree(&self) -> DegreeAudit {
        let n = self.grid.n();
        let mut vertices = 0;
        let mut degree3 = 0;
        let mut violations = Vec::new();
        for vy in 1..n {
            for vx in 1..n {
                let quad = [
                    Cell { ix: vx - 1, iy: vy - 1 },
                    Cell { ix: vx, iy: vy - 1 },
                    Cell { ix: vx - 1, iy: vy },
                    Cell { ix: vx, iy: vy },
                ];
                if !quad.iter().all(|&c| self.mask.contains(c)) {
                    continue;
                }
                let mut owners: Vec<u32> =
                    quad.iter().map(|&c| self.owner[self.grid.index(c)]).collect();
                owners.sort_unstable();
                owners.dedup();
                if owners.len() < 3 {
                    continue;
                }
                vertices += 1;
                if owners.len() == 3 {
                    degree3 += 1;
                } else {
                    violations.push((vx, vy));
                }
            }
        }
        DegreeAudit { vertices, degree3, violations }
    }

    pub fn audit_free(&self) -> FreeAudit {
        let mut unknown = Vec::new();
        let mut not_free = Vec::new();
        for b in 0..self.brick_count() as u32 {
            match self.freeness(b) {
                Freeness::Free => {}
                Freeness::Unknown => unknown.push(b),
                Freeness::NotFree => not_free.push(b),
            }
        }
        FreeAudit { bricks: self.brick_count(), unknown, not_free }
    }

    /// Check maximality: no candidate merge (edge-adjacent pair, not
    /// both seeded) has a free, simply connected union.
    pub fn audit_maximal(&self) -> MaximalAudit {
        let mut candidates = 0;
        let mut mergeable = Vec::new();
        for a in 0..self.brick_count() as u32 {
            for &b in self.edge_neighbors(a) {
                if b <= a {
                    continue;
                }
                let (ab, bb) = (&self.bricks[a as usize], &self.bricks[b as usize]);
                if ab.seeded && bb.seeded {
                    continue;
                }
                candidates += 1;
                if ab.freeness != Freeness::Free || bb.freeness != Freeness::Free {
                    continue;
                }
                if ab.solid_fp.intersects(&bb.cells)
                    || bb.solid_fp.intersects(&ab.cells)
                    || ab.fat_fp.intersects(&bb.cells)
                    || bb.fat_fp.intersects(&ab.cells)
                {
                    continue;
                }
                let (v_sh, e_sh) = shared_boundary(&ab.cells, &bb.cells);
                if ab.euler + bb.euler - (v_sh - e_sh) == 1 {
                    mergeable.push((a, b));
                }
            }
        }
        MaximalAudit { candidates, mergeable }
    }

    /// Serializable snapshot.
    pub fn dump(&self) -> DecompositionDump {
        DecompositionDump {
            grid_n: self.grid.n(),
            cell_size: self.grid.cell_size(),
            eps_geo: self.eps_geo,
            bricks: self
                .bricks
                .iter()
                .enumerate()
                .map(|(id, b)| BrickDump {
                    id: id as u32,
                    seeded: b.seeded,
                    free: b.freeness == Freeness::Free,
                    cells: b.cells.indices(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegreeAudit {
    /// Interior lattice points where at least three bricks meet.
    pub vertices: usize,
    pub degree3: usize,
    /// Lattice coordinates of points where four bricks meet.
    pub violations: Vec<(u32, u32)>,
}

impl DegreeAudit {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreeAudit {
    pub bricks: usize,
    pub unknown: Vec<u32>,
    pub not_free: Vec<u32>,
}

impl FreeAudit {
    pub fn clean(&self) -> bool {
        self.unknown.is_empty() && self.not_free.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaximalAudit {
    pub candidates: usize,
    pub mergeable: Vec<(u32, u32)>,
}

impl MaximalAudit {
    pub fn clean(&self) -> bool {
        self.mergeable.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionDump {
    pub grid_n: u32,
    pub cell_size: f64,
    pub eps_geo: f64,
    pub bricks: Vec<BrickDump>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BrickDump {
    pub id: u32,
    pub seeded: bool,
    pub free: bool,
    pub cells: Vec<u32>,
}

/// Center displacement below which a planned 2×1 brick could meet its
/// own image: the brick diameter plus twice the fat margin.
pub fn freeness_margin(grid: &Grid, eps_geo: f64) -> f64 {
    5.0f64.sqrt() * grid.cell_size() + 2.0 * eps_geo
}

/// Cells fully inside the disk of radius `r_outer` whose centers move
/// at least `min_displacement` under the map: the standard mask for
/// free decompositions (near-fixed cells are cut out).
pub fn displacement_mask(
    map: &PlaneMap,
    grid: &Grid,
    r_outer: f64,
    min_displacement: f64,
) -> Result<CellSet> {
    if !(r_outer > 0.0 && r_outer < 1.0) {
        return Err(Error::Decomposition(format!(
            "outer mask radius {r_outer} must lie in (0, 1)"
        )));
    }
    let mut mask = CellSet::new(grid);
    for iy in 0..grid.n() {
        for ix in 0..grid.n() {
            let c = Cell { ix, iy };
            if !grid.cell_inside_radius(c, r_outer) {
                continue;
            }
            let ctr = grid.center(c);
            if map.eval(ctr)?.dist(ctr) >= min_displacement {
                mask.insert(c);
            }
        }
    }
    if mask.is_empty() {
        return Err(Error::Decomposition(format!(
            "no cell inside radius {r_outer} moves by {min_displacement}; the mask is empty"
        )));
    }
    Ok(mask)
}

/// Remove the cells whose centers lie within `half_width` of the line
/// through the origin in direction `angle`. Masks for maps with an
/// invariant axis through the fixed core are split along it, so that
/// no brick straddles the axis and each half-domain is dynamically
/// self-contained — the truncated domain then satisfies the coverage
/// hypothesis of the reachability-connectivity theorem.
pub fn excise_axis_strip(mask: &CellSet, angle: f64, half_width: f64) -> CellSet {
    let u = Pt::from_polar(1.0, angle);
    let grid = mask.grid();
    let mut out = CellSet::new(&grid);
    for c in mask.iter() {
        if u.cross(grid.center(c)).abs() > half_width {
            out.insert(c);
        }
    }
    out
}

// ---------------------------------------------------------------------
// Orbit disk families
// ---------------------------------------------------------------------

/// Consecutive free blocks along one orbit: block `k` surrounds
/// `f^(l_min + k)` of the base point. Blocks are 4×3 cell rectangles
/// whose column parity keeps the surrounding wall's vertices at
/// degree 3.
#[derive(Debug, Clone)]
pub struct OrbitDiskFamily {
    pub l_min: i64,
    pub disks: Vec<CellSet>,
    pub centers: Vec<Pt>,
}

impl OrbitDiskFamily {
    pub fn l_max(&self) -> i64 {
        self.l_min + self.disks.len() as i64 - 1
    }

    pub fn index_of(&self, l: i64) -> Option<usize> {
        (l >= self.l_min && l <= self.l_max()).then_some((l - self.l_min) as usize)
    }

    pub fn disk(&self, l: i64) -> Option<&CellSet> {
        self.index_of(l).map(|k| &self.disks[k])
    }

    pub fn center(&self, l: i64) -> Option<Pt> {
        self.index_of(l).map(|k| self.centers[k])
    }

    /// Whether the family covers `[-radius, radius]`.
    pub fn spans(&self, radius: i64) -> bool {
        self.l_min <= -radius && self.l_max() >= radius
    }

    /// Truncated end-convergence audit: along the forward half the
    /// blocks' centers approach the forward boundary endpoint
    /// monotonically, and along the backward half the backward one.
    pub fn audit_end_convergence(&self, alpha: f64, omega: f64) -> Result<()> {
        let omega_pt = Pt::from_polar(1.0, omega);
        let alpha_pt = Pt::from_polar(1.0, alpha);
        let base = self.index_of(0).expect("family contains l = 0");
        let fwd: Vec<f64> = self.centers[base..].iter().map(|c| c.dist(omega_pt)).collect();
        let bwd: Vec<f64> =
            self.centers[..=base].iter().rev().map(|c| c.dist(alpha_pt)).collect();
        for (name, dists) in [("forward", fwd), ("backward", bwd)] {
            if let Some(w) = dists.windows(2).position(|w| w[1] >= w[0] + 1e-12) {
                return Err(Error::Soundness(format!(
                    "{name} orbit disks stop approaching their endpoint at step {w}: {:.4} → {:.4}",
                    dists[w], dists[w + 1]
                )));
            }
        }
        Ok(())
    }
}

/// The 4×3 block around `p` whose column parity matches the wall: for
/// rows `r0..r0+2`, columns start at `c0 ≡ r0 (mod 2)` with `p`'s cell
/// in one of the two middle columns and the middle row.
fn parity_block(grid: &Grid, mask: &CellSet, p: Pt) -> Option<CellSet> {
    let c = grid.cell_of(p)?;
    if c.iy < 1 || c.ix < 2 {
        return None;
    }
    let r0 = c.iy - 1;
    let c0 = if (c.ix - 1) % 2 == r0 % 2 { c.ix - 1 } else { c.ix - 2 };
    if c0 + 3 >= grid.n() || r0 + 2 >= grid.n() {
        return None;
    }
    let mut block = CellSet::new(grid);
    for ix in c0..=c0 + 3 {
        for iy in r0..=r0 + 2 {
            let cc = Cell { ix, iy };
            if !mask.contains(cc) {
                return None;
            }
            block.insert(cc);
        }
    }
    Some(block)
}

/// Build the family of orbit blocks around `base`, extending up to
/// `radius` steps each way and truncating a direction as soon as a
/// block no longer fits inside the mask. Blocks must be pairwise
/// non-touching. Use [`OrbitDiskFamily::spans`] to check the achieved
/// range.
pub fn build_orbit_disks(
    map: &PlaneMap,
    grid: &Grid,
    mask: &CellSet,
    base: Pt,
    radius: i64,
) -> Result<OrbitDiskFamily> {
    if radius < 1 {
        return Err(Error::Decomposition(format!(
            "orbit disk radius must be at least 1, got {radius}"
        )));
    }
    let base_block = parity_block(grid, mask, base).ok_or_else(|| {
        Error::Decomposition(format!(
            "no orbit block fits inside the mask around the base point ({}, {})",
            base.x, base.y
        ))
    })?;
    let mut fwd: Vec<(CellSet, Pt)> = Vec::new();
    let mut p = base;
    for _ in 0..radius {
        let Ok(next) = map.eval(p) else { break };
        let Some(block) = parity_block(grid, mask, next) else { break };
        fwd.push((block, next));
        p = next;
    }
    let mut bwd: Vec<(CellSet, Pt)> = Vec::new();
    let mut p = base;
    for _ in 0..radius {
        let Ok(prev) = map.eval_inverse(p) else { break };
        let Some(block) = parity_block(grid, mask, prev) else { break };
        bwd.push((block, prev));
        p = prev;
    }
    let l_min = -(bwd.len() as i64);
    let mut disks = Vec::new();
    let mut centers = Vec::new();
    for (block, c) in bwd.into_iter().rev() {
        disks.push(block);
        centers.push(c);
    }
    disks.push(base_block);
    centers.push(base);
    for (block, c) in fwd {
        disks.push(block);
        centers.push(c);
    }
    for i in 0..disks.len() {
        for j in i + 1..disks.len() {
            if disks[i].dilate(None).intersects(&disks[j]) {
                return Err(Error::Decomposition(format!(
                    "orbit blocks at steps {} and {} touch; the orbit is too slow for this grid",
                    l_min + i as i64,
                    l_min + j as i64
                )));
            }
        }
    }
    Ok(OrbitDiskFamily { l_min, disks, centers })
}

/// Build the seeded maximal free decomposition for a set of orbit
/// families: wall around all blocks, refinement, then constrained
/// maximalization (seed bricks never merge with each other). Returns
/// the decomposition and, per family, the brick id of each disk.
pub fn seeded_decomposition(
    map: &PlaneMap,
    grid: &Grid,
    mask: &CellSet,
    families: &[OrbitDiskFamily],
    eps_geo: f64,
    max_rounds: usize,
) -> Result<(BrickDecomposition, Vec<Vec<u32>>)> {
    let seeds: Vec<CellSet> =
        families.iter().flat_map(|f| f.disks.iter().cloned()).collect();
    let mut dec = BrickDecomposition::build(map, grid, mask, &seeds, eps_geo)?;
    dec.refine_until_free(max_rounds)?;
    dec.maximalize();
    let mut ids = Vec::new();
    for f in families {
        let mut fam_ids = Vec::new();
        for d in &f.disks {
            let c = d.first().expect("orbit disks are nonempty");
            let id = dec.owner_of(c).ok_or_else(|| {
                Error::Decomposition("orbit disk lost its brick during assembly".into())
            })?;
            if !d.is_subset_of(dec.cells(id)) {
                return Err(Error::Soundness(
                    "orbit disk is split across bricks after maximalization".into(),
                ));
            }
            fam_ids.push(id);
        }
        ids.push(fam_ids);
    }
    Ok((dec, ids))
}

/// Randomized audit: a subset of bricks is graph-connected through
/// closure adjacency exactly when the union of its cells is one
/// topologically connected piece.
pub fn audit_subset_connectivity(
    dec: &BrickDecomposition,
    subsets: usize,
    seed: u64,
) -> Result<()> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let nb = dec.brick_count() as u32;
    for trial in 0..subsets {
        let mut chosen: Vec<u32> = (0..nb).filter(|_| rng.gen_bool(0.5)).collect();
        if chosen.is_empty() {
            chosen.push(rng.gen_range(0..nb));
        }
        let in_set: BTreeSet<u32> = chosen.iter().copied().collect();
        // Graph components via BFS over touch-adjacency.
        let mut seen: BTreeSet<u32> = BTreeSet::new();
        let mut graph_components = 0;
        for &start in &chosen {
            if seen.contains(&start) {
                continue;
            }
            graph_components += 1;
            let mut stack = vec![start];
            seen.insert(start);
            while let Some(cur) = stack.pop() {
                for &nbr in dec.touch_neighbors(cur) {
                    if in_set.contains(&nbr) && seen.insert(nbr) {
                        stack.push(nbr);
                    }
                }
            }
        }
        let mut union = CellSet::new(&dec.grid);
        for &b in &chosen {
            union.union_with(dec.cells(b));
        }
        let planar_components = union.components_diag().len();
        if graph_components != planar_components {
            return Err(Error::Soundness(format!(
                "trial {trial}: {graph_components} graph components vs {planar_components} planar components on a {} brick subset",
                chosen.len()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planemap::MapSpec;
    use std::f64::consts::E;
    use std::path::Path;

    fn map(spec: &MapSpec) -> PlaneMap {
        PlaneMap::from_spec(spec, Path::new(".")).unwrap()
    }

    fn saddle(lambda: f64) -> PlaneMap {
        map(&MapSpec::Saddle { lambda })
    }

    fn annulus(grid: &Grid, inner: f64, outer: f64) -> CellSet {
        let mut s = CellSet::new(grid);
        for iy in 0..grid.n() {
            for ix in 0..grid.n() {
                let c = Cell { ix, iy };
                let r = grid.center(c).norm();
                if grid.cell_inside_radius(c, outer) && r >= inner {
                    s.insert(c);
                }
            }
        }
        s
    }

    #[test]
    fn wall_structure_is_sound() {
        let m = saddle(E);
        let grid = Grid::new(50).unwrap();
        let mask = displacement_mask(&m, &grid, 0.9, 0.25).unwrap();
        let dec = BrickDecomposition::build(&m, &grid, &mask, &[], 0.02).unwrap();
        // Owners partition the mask.
        let mut covered = CellSet::new(&grid);
        for b in 0..dec.brick_count() as u32 {
            assert!(dec.cells(b).len() <= 2);
            assert!(dec.cells(b).is_connected());
            assert!(!dec.cells(b).intersects(&covered));
            covered.union_with(dec.cells(b));
        }
        assert_eq!(covered, mask);
        // Interior vertices all have degree three.
        let deg = dec.audit_degree();
        assert!(deg.vertices > 100, "expected many interior vertices");
        assert!(deg.clean(), "degree violations at {:?}", deg.violations);
        // Conservative mask: the wall is free as built.
        assert!(dec.audit_free().clean(), "{:?}", dec.audit_free());
        // Neighbor symmetry, and corner contact is adjacency without an
        // edge.
        let mut corner_pairs = 0;
        for a in 0..dec.brick_count() as u32 {
            for &b in dec.touch_neighbors(a) {
                assert!(dec.adjacent(a, b) && dec.adjacent(b, a));
                if !dec.edge_neighbors(a).contains(&b) {
                    corner_pairs += 1;
                }
            }
            assert!(!dec.adjacent(a, a));
        }
        assert!(corner_pairs > 0, "running bond always has corner contacts");
    }

    #[test]
    fn refinement_splits_borderline_bricks_and_rejects_fixed_cores() {
        let m = saddle(E);
        let grid = Grid::new(100).unwrap();
        // The annulus reaches cells along the unstable axis whose 2×1
        // bricks return into themselves but whose single cells escape:
        // refinement must split those and stop.
        let mask = annulus(&grid, 0.04, 0.45);
        let mut dec = BrickDecomposition::build(&m, &grid, &mask, &[], 0.01).unwrap();
        let wall_free = dec.audit_free();
        assert!(!wall_free.clean(), "the raw wall must have trapped pairs");
        let splits = dec.refine_until_free(4).unwrap();
        assert!(splits >= wall_free.unknown.len() + wall_free.not_free.len());
        assert!(dec.audit_free().clean());
        assert!((0..dec.brick_count() as u32).any(|b| dec.cells(b).len() == 1));
        // A mask over the fixed core can never become free: single
        // cells near the origin return into themselves.
        let core = annulus(&grid, 0.0, 0.2);
        let mut dec = BrickDecomposition::build(&m, &grid, &core, &[], 0.01).unwrap();
        let err = dec.refine_until_free(6).unwrap_err();
        assert!(matches!(err, Error::Decomposition(_)), "{err}");
    }

    #[test]
    fn maximalize_reaches_an_audited_fixpoint() {
        let m = map(&MapSpec::Rotation { theta: 2.0 * std::f64::consts::PI / 3.0 });
        let grid = Grid::new(100).unwrap();
        let margin = freeness_margin(&grid, 0.01);
        let mask = displacement_mask(&m, &grid, 0.92, margin).unwrap();
        let mut dec = BrickDecomposition::build(&m, &grid, &mask, &[], 0.01).unwrap();
        dec.refine_until_free(4).unwrap();
        let before = dec.brick_count();
        let coarse_check = dec.clone();
        let merges = dec.maximalize();
        assert!(merges > 0);
        assert!(dec.brick_count() < before / 5, "{} of {before}", dec.brick_count());
        assert_eq!(dec.brick_count(), before - merges);
        assert!(dec.audit_free().clean());
        let max = dec.audit_maximal();
        assert!(max.clean(), "mergeable pairs remain: {:?}", max.mergeable);
        assert!(max.candidates > 0);
        // The pre-merge decomposition refines the merged one; bricks
        // stay simply connected.
        assert!(coarse_check.is_refinement_of(&dec));
        assert!(!dec.is_refinement_of(&coarse_check) || merges == 0);
        for b in 0..dec.brick_count() as u32 {
            assert_eq!(dec.cells(b).euler_characteristic(), 1);
            assert!(dec.cells(b).is_connected());
        }
        audit_subset_connectivity(&dec, 100, 99).unwrap();
    }

    #[test]
    fn footprints_agree_with_dense_sampling() {
        let m = saddle(E);
        let grid = Grid::new(40).unwrap();
        let mask = annulus(&grid, 0.15, 0.6);
        let dec = BrickDecomposition::build(&m, &grid, &mask, &[], 0.02).unwrap();
        // Independent 11×11 check per brick: definite answers must
        // agree with the footprint verdicts.
        let h = grid.cell_size();
        for b in (0..dec.brick_count() as u32).step_by(7) {
            let cells = dec.cells(b);
            let mut hit = false;
            let mut near = false;
            for c in cells.iter() {
                let lo = grid.min_corner(c);
                for i in 0..11 {
                    for j in 0..11 {
                        let q = lo
                            + Pt::new(
                                h * (i as f64 + 0.5) / 11.0,
                                h * (j as f64 + 0.5) / 11.0,
                            );
                        let fq = m.eval(q).unwrap();
                        if let Some(ic) = grid.cell_of(fq) {
                            if cells.contains(ic) {
                                hit = true;
                            }
                        }
                        for cc in cells.iter() {
                            if grid.dist2_to_cell(cc, fq) <= 0.02 * 0.02 {
                                near = true;
                            }
                        }
                    }
                }
            }
            match dec.freeness(b) {
                Freeness::NotFree => assert!(near, "brick {b} marked not free"),
                Freeness::Free => assert!(!hit, "brick {b} marked free but is hit"),
                Freeness::Unknown => {}
            }
        }
    }

    #[test]
    fn orbit_disks_build_and_seed() {
        let m = saddle(1.5);
        let grid = Grid::new(100).unwrap();
        let mask = displacement_mask(&m, &grid, 0.93, freeness_margin(&grid, 0.01)).unwrap();
        let base = Pt::new(0.35, 0.35);
        let fam = build_orbit_disks(&m, &grid, &mask, base, 3).unwrap();
        assert!(fam.spans(3), "span {}..{}", fam.l_min, fam.l_max());
        assert_eq!(fam.disks.len(), 7);
        for (k, d) in fam.disks.iter().enumerate() {
            assert_eq!(d.len(), 12, "disk {k} is a 4×3 block");
            let c = fam.centers[k];
            let cell = grid.cell_of(c).unwrap();
            assert!(d.contains(cell));
            // The center sits in the block interior: all its cell's
            // neighbours are in the block too.
            for nb in grid.neighbours8(cell) {
                assert!(d.contains(nb), "center cell on block boundary");
            }
        }
        // Centers are the orbit.
        for l in fam.l_min..=fam.l_max() {
            let expect = m.iterate(base, l).unwrap();
            assert!(fam.center(l).unwrap().dist(expect) < 1e-12);
        }
        // Forward half approaches ω = 0, backward half α = π/2.
        fam.audit_end_convergence(std::f64::consts::FRAC_PI_2, 0.0).unwrap();
        // Seeded decomposition: disks stay whole inside their bricks.
        let (dec, ids) = seeded_decomposition(&m, &grid, &mask, &[fam.clone()], 0.01, 4).unwrap();
        assert_eq!(ids.len(), 1);
        assert_eq!(ids[0].len(), 7);
        let mut distinct = ids[0].clone();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(distinct.len(), 7, "seed bricks never merge together");
        for (k, &id) in ids[0].iter().enumerate() {
            assert!(dec.is_seeded(id));
            assert!(fam.disks[k].is_subset_of(dec.cells(id)));
            assert!(dec.is_free(id));
        }
        assert_eq!(dec.seeded_ids().len(), 7);
        assert!(dec.audit_free().clean());
        assert!(dec.audit_maximal().clean());
        // Wall vertices stay degree 3 around the seed blocks.
        let deg = dec.audit_degree();
        assert!(deg.clean(), "degree violations at {:?}", deg.violations);
    }

    #[test]
    fn decomposition_dump_round_trips() {
        let m = saddle(E);
        let grid = Grid::new(40).unwrap();
        let mask = annulus(&grid, 0.2, 0.5);
        let dec = BrickDecomposition::build(&m, &grid, &mask, &[], 0.02).unwrap();
        let dump = dec.dump();
        let json = serde_json::to_string(&dump).unwrap();
        let back: DecompositionDump = serde_json::from_str(&json).unwrap();
        assert_eq!(back.bricks.len(), dec.brick_count());
        assert_eq!(back.grid_n, 40);
        let total: usize = back.bricks.iter().map(|b| b.cells.len()).sum();
        assert_eq!(total, mask.len());
    }
}
