//! Repeller–attractor configurations over brick dynamics.
//!
//! A configuration of order `n` is a family of pairwise disjoint brick
//! sets: repellers `R_0, …, R_{n-1}` and attractors `A_0, …, A_{n-1}`,
//! each nonempty, connected, closed under the brick dynamics in its
//! direction, and reaching the outer boundary ring of the domain mask.
//! A witness arc per set records where the set lands on the boundary;
//! witness bricks record the dynamical links from repellers to
//! attractors. Two kinds are distinguished by the cyclic order of the
//! boundary landings (read counterclockwise):
//!
//! * elliptic, order `n ≥ 3`: `a_0 → r_2 → a_1 → r_3 → … → a_{n-1} →
//!   r_1 → a_0` (after attractor `i` comes repeller `i+2 mod n`);
//! * hyperbolic, order `n ≥ 2`: `r_0 → a_0 → r_1 → a_1 → … → r_0`.
//!
//! The module provides verification ([`check_elliptic`],
//! [`check_hyperbolic`]), the boundary-order computation
//! ([`boundary_order`]), the enlargement calculus ([`enlarge`],
//! [`maximalize_config`]), elliptic order reduction
//! ([`reduce_elliptic_order`]), the domino containment searches over
//! seeded orbit-disk families ([`domino_elliptic`],
//! [`domino_hyperbolic`]), separation and complement audits
//! ([`audit_separation`], [`audit_upsi`]), and the end-to-end pipeline
//! [`build_config_from_polygon`] that takes a realized polygon to a
//! recurrence certificate, a verified configuration, or an honest
//! `Inconclusive` report.
//!
//! Conventions. All searches run in ascending id order, so every
//! operation is deterministic. "Interior" of a set is taken at cell
//! resolution: a witness arc is a 4-connected cell path inside the
//! set's own cells (cells of distinct bricks are disjoint, so the path
//! stays out of every other set). Witness arcs are anchored at
//! mid-radius rather than at the inner end of their set: the
//! configuration invariant asks that the mask minus all arcs stays
//! connected, and on a truncated annular mask a family of full
//! hole-to-rim cuts would disconnect it spuriously.

use std::collections::VecDeque;
use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::brick::{
    build_orbit_disks, displacement_mask, freeness_margin, seeded_decomposition,
    BrickDecomposition, OrbitDiskFamily,
};
use crate::brickdyn::{find_closed_chain, BrickSet, ChainSearch, DynGraph, RecurrenceCertificate};
use crate::error::{Error, Result};
use crate::geom::{circ_dist, Pt};
use crate::grid::{Cell, CellSet, Grid};
use crate::planemap::{fixed_regions, realizes, OrbitParams, PlaneMap};
use crate::polygon::{OrientedPolygon, ReductionKind};

/// Landing angles of two witness arcs must differ by at least this
/// much; distinct ring cells are separated by far more at any feasible
/// grid resolution.
const LANDING_SEPARATION: f64 = 1e-9;

// ---------------------------------------------------------------------
// Labels and configuration data
// ---------------------------------------------------------------------

/// Which configuration set a datum refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SetLabel {
    /// Repeller `R_i`.
    R(usize),
    /// Attractor `A_i`.
    A(usize),
}

impl fmt::Display for SetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetLabel::R(i) => write!(f, "R{i}"),
            SetLabel::A(i) => write!(f, "A{i}"),
        }
    }
}

/// The two configuration kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigKind {
    Elliptic,
    Hyperbolic,
}

/// A 4-connected cell path inside one configuration set, from an
/// interior anchor out to the mask's outer boundary ring. `cells` are
/// grid cell indices in path order; `landing` is the angle of the
/// outermost cell's center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessArc {
    pub cells: Vec<u32>,
    pub landing: f64,
}

/// Witness bricks per repeller, by kind. Elliptic: one brick `b_i ∈
/// R_i` whose future meets `A_i`. Hyperbolic: a pair `(b_i^i,
/// b_i^{i-1})` in `R_i` whose strict futures meet `A_i` and `A_{i-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witnesses {
    Elliptic(Vec<u32>),
    Hyperbolic(Vec<(u32, u32)>),
}

/// A repeller–attractor configuration over one brick decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RAConfiguration {
    pub kind: ConfigKind,
    pub repellers: Vec<BrickSet>,
    pub attractors: Vec<BrickSet>,
    /// Witness arc of `R_i`, inside `R_i`.
    pub repeller_arcs: Vec<WitnessArc>,
    /// Witness arc of `A_i`, inside `A_i`.
    pub attractor_arcs: Vec<WitnessArc>,
    pub witnesses: Witnesses,
}

impl RAConfiguration {
    /// The order `n` (number of repellers = number of attractors).
    pub fn order(&self) -> usize {
        self.repellers.len()
    }

    /// All `2n` sets with their labels, repellers first.
    pub fn labeled_sets(&self) -> Vec<(SetLabel, &BrickSet)> {
        let mut out = Vec::with_capacity(2 * self.order());
        for (i, r) in self.repellers.iter().enumerate() {
            out.push((SetLabel::R(i), r));
        }
        for (i, a) in self.attractors.iter().enumerate() {
            out.push((SetLabel::A(i), a));
        }
        out
    }

    /// The union of every configuration set.
    pub fn union_all(&self) -> BrickSet {
        let mut u = BrickSet::empty(self.repellers[0].universe());
        for (_, s) in self.labeled_sets() {
            u = u.union(s);
        }
        u
    }

    /// Total brick count across all sets (coverage).
    pub fn coverage(&self) -> usize {
        self.union_all().len()
    }
}

// ---------------------------------------------------------------------
// Outer boundary ring and witness arcs
// ---------------------------------------------------------------------

/// Cells of the mask within 1.5 cell widths of its outermost radius —
/// the discrete stand-in for the boundary circle, where landing orders
/// are read off.
pub fn outer_ring(grid: &Grid, mask: &CellSet) -> CellSet {
    let mut r_max = 0.0f64;
    for c in mask.iter() {
        r_max = r_max.max(grid.center(c).norm());
    }
    let thr = r_max - 1.5 * grid.cell_size();
    CellSet::from_cells(grid, mask.iter().filter(|&c| grid.center(c).norm() >= thr))
}

/// Union of the cells of every brick in `x`.
pub fn brick_cells(dec: &BrickDecomposition, x: &BrickSet) -> CellSet {
    let mut out = CellSet::new(dec.grid());
    for b in x.iter() {
        out.union_with(dec.cells(b));
    }
    out
}

/// Build a witness arc inside `set`: a shortest 4-connected cell path
/// from the cell at `anchor` (or the set cell nearest to it) to the
/// nearest reachable cell of `set ∩ ring`. Deterministic: breadth-first
/// with fixed neighbour order, ties resolved by ascending cell index.
pub fn build_witness_arc(grid: &Grid, set: &CellSet, ring: &CellSet, anchor: Pt) -> Result<WitnessArc> {
    if set.is_empty() {
        return Err(Error::Dynamics("witness arc: the set has no cells".into()));
    }
    let mut targets = set.clone();
    targets.intersect_with(ring);
    if targets.is_empty() {
        return Err(Error::Dynamics(
            "witness arc: the set has no cells on the outer boundary ring".into(),
        ));
    }
    let start = match grid.cell_of(anchor) {
        Some(c) if set.contains(c) => c,
        _ => {
            let mut best: Option<(f64, usize)> = None;
            for c in set.iter() {
                let key = (grid.dist2_to_cell(c, anchor), grid.index(c));
                if best.is_none() || key < best.unwrap() {
                    best = Some(key);
                }
            }
            grid.cell_at(best.unwrap().1)
        }
    };
    let nc = grid.cell_count();
    let mut dist = vec![u32::MAX; nc];
    let mut parent = vec![usize::MAX; nc];
    let si = grid.index(start);
    dist[si] = 0;
    let mut queue = VecDeque::new();
    queue.push_back(si);
    while let Some(ci) = queue.pop_front() {
        for nb in grid.neighbours4(grid.cell_at(ci)) {
            if !set.contains(nb) {
                continue;
            }
            let ni = grid.index(nb);
            if dist[ni] != u32::MAX {
                continue;
            }
            dist[ni] = dist[ci] + 1;
            parent[ni] = ci;
            queue.push_back(ni);
        }
    }
    let mut best: Option<(u32, usize)> = None;
    for c in targets.iter() {
        let i = grid.index(c);
        if dist[i] == u32::MAX {
            continue;
        }
        if best.is_none() || (dist[i], i) < best.unwrap() {
            best = Some((dist[i], i));
        }
    }
    let Some((_, ti)) = best else {
        return Err(Error::Dynamics(
            "witness arc: the set's boundary-ring cells are unreachable inside the set".into(),
        ));
    };
    let mut path = vec![ti as u32];
    let mut cur = ti;
    while cur != si {
        cur = parent[cur];
        path.push(cur as u32);
    }
    path.reverse();
    let landing = grid.center(grid.cell_at(ti)).angle().rem_euclid(TAU);
    Ok(WitnessArc { cells: path, landing })
}

// ---------------------------------------------------------------------
// Boundary order
// ---------------------------------------------------------------------

/// One labeled set's boundary footprint, as input to
/// [`boundary_order`]: its cells and the landing angle of its witness
/// arc.
#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub label: SetLabel,
    pub cells: CellSet,
    pub landing: f64,
}

/// One maximal block of a set's trace on the outer ring: the angular
/// interval `[start, end]` (counterclockwise; `end < start` means the
/// block wraps through angle zero) and the arc's landing angle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderedInterval {
    pub label: SetLabel,
    pub start: f64,
    pub end: f64,
    pub landing: f64,
}

/// The cyclic order of set traces on the outer boundary ring,
/// counterclockwise from the smallest starting angle. By construction
/// each label owns exactly one interval and the intervals are pairwise
/// disjoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryOrder {
    pub intervals: Vec<OrderedInterval>,
}

impl BoundaryOrder {
    /// The cyclic label word, counterclockwise.
    pub fn labels(&self) -> Vec<SetLabel> {
        self.intervals.iter().map(|r| r.label).collect()
    }

    /// Whether the label word equals `expected` up to cyclic rotation.
    /// Orientation is fixed (counterclockwise), so reflections do not
    /// match.
    pub fn matches(&self, expected: &[SetLabel]) -> bool {
        cyclic_rotation_eq(&self.labels(), expected)
    }
}

/// `a` equals `b` up to cyclic rotation.
pub fn cyclic_rotation_eq(a: &[SetLabel], b: &[SetLabel]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    if a.is_empty() {
        return true;
    }
    (0..a.len()).any(|r| (0..a.len()).all(|i| a[(i + r) % a.len()] == b[i]))
}

/// The elliptic boundary word of order `n`:
/// `a_0, r_2, a_1, r_3, …, a_{n-1}, r_1`.
pub fn elliptic_boundary_labels(n: usize) -> Vec<SetLabel> {
    (0..n)
        .flat_map(|i| [SetLabel::A(i), SetLabel::R((i + 2) % n)])
        .collect()
}

/// The hyperbolic boundary word of order `n`:
/// `r_0, a_0, r_1, a_1, …, r_{n-1}, a_{n-1}`.
pub fn hyperbolic_boundary_labels(n: usize) -> Vec<SetLabel> {
    (0..n)
        .flat_map(|i| [SetLabel::R(i), SetLabel::A(i)])
        .collect()
}

/// Read the cyclic order of the entries' traces on the outer boundary
/// ring of `mask`.
///
/// Ring cells are sorted by angle; cells claimed by an entry are kept
/// and run-length compressed cyclically. Errors: a set whose trace
/// misses the ring entirely; two entries claiming one cell; a trace
/// split into several blocks interleaved with other sets (the order is
/// then undefined); two landings closer than `tol_angle`.
pub fn boundary_order(
    grid: &Grid,
    mask: &CellSet,
    entries: &[TraceEntry],
    tol_angle: f64,
) -> Result<BoundaryOrder> {
    if entries.is_empty() {
        return Err(Error::InvalidInstance(
            "boundary order needs at least one traced set".into(),
        ));
    }
    let ring = outer_ring(grid, mask);
    let mut ring_cells: Vec<(f64, usize, Option<usize>)> = Vec::new();
    for c in ring.iter() {
        let mut owner = None;
        for (e, entry) in entries.iter().enumerate() {
            if entry.cells.contains(c) {
                if let Some(prev) = owner {
                    let prev: &TraceEntry = &entries[prev];
                    return Err(Error::InvalidInstance(format!(
                        "boundary traces of {} and {} overlap",
                        prev.label, entry.label
                    )));
                }
                owner = Some(e);
            }
        }
        ring_cells.push((grid.center(c).angle().rem_euclid(TAU), grid.index(c), owner));
    }
    ring_cells.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap());
    let filtered: Vec<(usize, f64)> =
        ring_cells.iter().filter_map(|&(a, _, o)| o.map(|e| (e, a))).collect();
    for (e, entry) in entries.iter().enumerate() {
        if !filtered.iter().any(|&(fe, _)| fe == e) {
            return Err(Error::Dynamics(format!(
                "{} does not reach the outer boundary ring",
                entry.label
            )));
        }
    }
    struct RawRun {
        e: usize,
        start: f64,
        end: f64,
    }
    let mut runs: Vec<RawRun> = Vec::new();
    for &(e, a) in &filtered {
        match runs.last_mut() {
            Some(r) if r.e == e => r.end = a,
            _ => runs.push(RawRun { e, start: a, end: a }),
        }
    }
    if runs.len() > 1 && runs[0].e == runs[runs.len() - 1].e {
        let first = runs.remove(0);
        runs.last_mut().unwrap().end = first.end;
    }
    for (e, entry) in entries.iter().enumerate() {
        let k = runs.iter().filter(|r| r.e == e).count();
        if k != 1 {
            return Err(Error::Dynamics(format!(
                "boundary order undefined: the trace of {} splits into {k} blocks interleaved with other sets",
                entry.label
            )));
        }
    }
    for a in 0..entries.len() {
        for b in a + 1..entries.len() {
            if circ_dist(entries[a].landing, entries[b].landing) < tol_angle {
                return Err(Error::InvalidInstance(format!(
                    "witness arcs of {} and {} land at indistinguishable angles",
                    entries[a].label, entries[b].label
                )));
            }
        }
    }
    let mut intervals: Vec<OrderedInterval> = runs
        .iter()
        .map(|r| OrderedInterval {
            label: entries[r.e].label,
            start: r.start,
            end: r.end,
            landing: entries[r.e].landing,
        })
        .collect();
    intervals.sort_by(|x, y| x.start.partial_cmp(&y.start).unwrap());
    Ok(BoundaryOrder { intervals })
}

/// Trace entries of a configuration: per set, its cells and its
/// witness arc's landing angle.
pub fn config_trace_entries(dec: &BrickDecomposition, c: &RAConfiguration) -> Vec<TraceEntry> {
    let mut out = Vec::with_capacity(2 * c.order());
    for (i, r) in c.repellers.iter().enumerate() {
        out.push(TraceEntry {
            label: SetLabel::R(i),
            cells: brick_cells(dec, r),
            landing: c.repeller_arcs[i].landing,
        });
    }
    for (i, a) in c.attractors.iter().enumerate() {
        out.push(TraceEntry {
            label: SetLabel::A(i),
            cells: brick_cells(dec, a),
            landing: c.attractor_arcs[i].landing,
        });
    }
    out
}

/// The boundary order of a configuration's sets.
pub fn config_boundary_order(dec: &BrickDecomposition, c: &RAConfiguration) -> Result<BoundaryOrder> {
    boundary_order(
        dec.grid(),
        dec.mask(),
        &config_trace_entries(dec, c),
        LANDING_SEPARATION,
    )
}

// ---------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------

/// Lowest-id brick of `from` whose (strict, if asked) future meets
/// `to`.
fn witness_brick(g: &DynGraph, from: &BrickSet, to: &BrickSet, strict: bool) -> Option<u32> {
    from.iter().find(|&b| {
        if strict {
            g.strict_future(b).intersects(to)
        } else {
            g.future(b).intersects(to)
        }
    })
}

/// Assemble a configuration from bare repeller/attractor brick sets:
/// build one witness arc per set (anchored at the given interior
/// points) and search the witness bricks, all lowest-id first. The
/// result is *not* verified; run [`check_elliptic`] or
/// [`check_hyperbolic`] on it.
pub fn assemble_config(
    dec: &BrickDecomposition,
    g: &DynGraph,
    kind: ConfigKind,
    repellers: Vec<BrickSet>,
    attractors: Vec<BrickSet>,
    repeller_anchors: &[Pt],
    attractor_anchors: &[Pt],
) -> Result<RAConfiguration> {
    let n = repellers.len();
    if n < 2 || attractors.len() != n || repeller_anchors.len() != n || attractor_anchors.len() != n
    {
        return Err(Error::InvalidInstance(format!(
            "configuration assembly needs matching set and anchor counts of at least two, got {} repellers, {} attractors, {}/{} anchors",
            n,
            attractors.len(),
            repeller_anchors.len(),
            attractor_anchors.len()
        )));
    }
    let grid = dec.grid();
    let ring = outer_ring(grid, dec.mask());
    let mut repeller_arcs = Vec::with_capacity(n);
    let mut attractor_arcs = Vec::with_capacity(n);
    for i in 0..n {
        repeller_arcs.push(
            build_witness_arc(grid, &brick_cells(dec, &repellers[i]), &ring, repeller_anchors[i])
                .map_err(|e| Error::Dynamics(format!("R{i}: {e}")))?,
        );
        attractor_arcs.push(
            build_witness_arc(grid, &brick_cells(dec, &attractors[i]), &ring, attractor_anchors[i])
                .map_err(|e| Error::Dynamics(format!("A{i}: {e}")))?,
        );
    }
    let witnesses = match kind {
        ConfigKind::Elliptic => Witnesses::Elliptic(
            (0..n)
                .map(|i| {
                    witness_brick(g, &repellers[i], &attractors[i], false).ok_or_else(|| {
                        Error::Dynamics(format!("no witness brick in R{i} reaches A{i}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        ConfigKind::Hyperbolic => Witnesses::Hyperbolic(
            (0..n)
                .map(|i| {
                    let prev = (i + n - 1) % n;
                    let cur = witness_brick(g, &repellers[i], &attractors[i], true)
                        .ok_or_else(|| {
                            Error::Dynamics(format!("no witness brick in R{i} reaches A{i}"))
                        })?;
                    let back = witness_brick(g, &repellers[i], &attractors[prev], true)
                        .ok_or_else(|| {
                            Error::Dynamics(format!("no witness brick in R{i} reaches A{prev}"))
                        })?;
                    Ok((cur, back))
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    Ok(RAConfiguration {
        kind,
        repellers,
        attractors,
        repeller_arcs,
        attractor_arcs,
        witnesses,
    })
}

// ---------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------

/// Result of verifying a configuration: every failed requirement, the
/// boundary order when it could be computed, and the overall verdict.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigCheck {
    pub ok: bool,
    pub kind: ConfigKind,
    pub order: usize,
    pub boundary: Option<BoundaryOrder>,
    pub failures: Vec<String>,
}

/// Verify an elliptic configuration. Precondition (hard error): the
/// configuration is elliptic of order at least three. Every other
/// violated requirement lands in the report's `failures`.
pub fn check_elliptic(
    dec: &BrickDecomposition,
    g: &DynGraph,
    c: &RAConfiguration,
) -> Result<ConfigCheck> {
    if c.kind != ConfigKind::Elliptic {
        return Err(Error::InvalidInstance(
            "check_elliptic requires an elliptic configuration".into(),
        ));
    }
    if c.order() < 3 {
        return Err(Error::InvalidInstance(format!(
            "elliptic configurations have order at least three, got {}",
            c.order()
        )));
    }
    Ok(run_checks(dec, g, c))
}

/// Verify a hyperbolic configuration. Precondition (hard error): the
/// configuration is hyperbolic of order at least two. Every other
/// violated requirement lands in the report's `failures`.
pub fn check_hyperbolic(
    dec: &BrickDecomposition,
    g: &DynGraph,
    c: &RAConfiguration,
) -> Result<ConfigCheck> {
    if c.kind != ConfigKind::Hyperbolic {
        return Err(Error::InvalidInstance(
            "check_hyperbolic requires a hyperbolic configuration".into(),
        ));
    }
    if c.order() < 2 {
        return Err(Error::InvalidInstance(format!(
            "hyperbolic configurations have order at least two, got {}",
            c.order()
        )));
    }
    Ok(run_checks(dec, g, c))
}

/// Dispatch to the kind's checker (preconditions included).
pub fn verify_config(
    dec: &BrickDecomposition,
    g: &DynGraph,
    c: &RAConfiguration,
) -> Result<ConfigCheck> {
    match c.kind {
        ConfigKind::Elliptic => check_elliptic(dec, g, c),
        ConfigKind::Hyperbolic => check_hyperbolic(dec, g, c),
    }
}

fn run_checks(dec: &BrickDecomposition, g: &DynGraph, c: &RAConfiguration) -> ConfigCheck {
    let n = c.order();
    let grid = dec.grid();
    let mut failures: Vec<String> = Vec::new();

    // Structural lengths.
    if c.attractors.len() != n {
        failures.push(format!(
            "set counts differ: {} repellers, {} attractors",
            n,
            c.attractors.len()
        ));
    }
    if c.repeller_arcs.len() != n || c.attractor_arcs.len() != c.attractors.len() {
        failures.push("each set needs exactly one witness arc".into());
    }

    // Set predicates.
    for (i, r) in c.repellers.iter().enumerate() {
        if r.is_empty() {
            failures.push(format!("R{i} is empty"));
            continue;
        }
        if !g.is_repeller(r) {
            failures.push(format!("R{i} is not past-closed"));
        }
        if !g.is_connected_set(r) {
            failures.push(format!("R{i} is not connected"));
        }
    }
    for (i, a) in c.attractors.iter().enumerate() {
        if a.is_empty() {
            failures.push(format!("A{i} is empty"));
            continue;
        }
        if !g.is_attractor(a) {
            failures.push(format!("A{i} is not future-closed"));
        }
        if !g.is_connected_set(a) {
            failures.push(format!("A{i} is not connected"));
        }
    }

    // Pairwise disjointness.
    let labeled = c.labeled_sets();
    for x in 0..labeled.len() {
        for y in x + 1..labeled.len() {
            if labeled[x].1.intersects(labeled[y].1) {
                failures.push(format!("{} and {} intersect", labeled[x].0, labeled[y].0));
            }
        }
    }

    // Witness arcs: inside the set, 4-connected, landing on the ring;
    // their complement in the mask stays connected.
    let ring = outer_ring(grid, dec.mask());
    let mut arc_union = CellSet::new(grid);
    let arcs = c
        .repeller_arcs
        .iter()
        .enumerate()
        .map(|(i, w)| (SetLabel::R(i), &c.repellers[i], w))
        .chain(
            c.attractor_arcs
                .iter()
                .enumerate()
                .map(|(i, w)| (SetLabel::A(i), &c.attractors[i], w)),
        );
    for (label, set, arc) in arcs {
        if arc.cells.is_empty() {
            failures.push(format!("witness arc of {label} is empty"));
            continue;
        }
        let cells: Vec<Cell> = arc.cells.iter().map(|&i| grid.cell_at(i as usize)).collect();
        let set_cells = brick_cells(dec, set);
        if let Some(c0) = cells.iter().find(|&&cc| !set_cells.contains(cc)) {
            failures.push(format!(
                "witness arc of {label} leaves the set at cell ({}, {})",
                c0.ix, c0.iy
            ));
        }
        if cells.windows(2).any(|w| {
            w[0].ix.abs_diff(w[1].ix) + w[0].iy.abs_diff(w[1].iy) != 1
        }) {
            failures.push(format!("witness arc of {label} is not a 4-connected path"));
        }
        let tail = *cells.last().unwrap();
        if !ring.contains(tail) {
            failures.push(format!("witness arc of {label} does not reach the outer boundary ring"));
        }
        let tail_angle = grid.center(tail).angle().rem_euclid(TAU);
        if circ_dist(tail_angle, arc.landing) > 1e-9 {
            failures.push(format!(
                "witness arc of {label} declares landing {:.6} but ends at angle {:.6}",
                arc.landing, tail_angle
            ));
        }
        for cc in &cells {
            arc_union.insert(*cc);
        }
    }
    let mut rest = dec.mask().clone();
    rest.subtract(&arc_union);
    if rest.components_diag().len() != 1 {
        failures.push("the mask minus all witness arcs is disconnected".into());
    }

    // Boundary order.
    let boundary = match config_boundary_order(dec, c) {
        Err(e) => {
            failures.push(format!("boundary order: {e}"));
            None
        }
        Ok(bo) => {
            let expected = match c.kind {
                ConfigKind::Elliptic => elliptic_boundary_labels(n),
                ConfigKind::Hyperbolic => hyperbolic_boundary_labels(n),
            };
            if !bo.matches(&expected) {
                let found: Vec<String> = bo.labels().iter().map(|l| l.to_string()).collect();
                let want: Vec<String> = expected.iter().map(|l| l.to_string()).collect();
                failures.push(format!(
                    "boundary order mismatch: found [{}], expected a rotation of [{}]",
                    found.join(" "),
                    want.join(" ")
                ));
            }
            Some(bo)
        }
    };

    // Witness bricks.
    match (&c.kind, &c.witnesses) {
        (ConfigKind::Elliptic, Witnesses::Elliptic(ws)) => {
            if ws.len() != n {
                failures.push(format!("expected {n} witness bricks, got {}", ws.len()));
            } else {
                for (i, &b) in ws.iter().enumerate() {
                    if !c.repellers[i].contains(b) {
                        failures.push(format!("witness brick {b} for R{i} lies outside R{i}"));
                    } else if !g.future(b).intersects(&c.attractors[i]) {
                        failures.push(format!("future of witness brick {b} in R{i} misses A{i}"));
                    }
                }
            }
        }
        (ConfigKind::Hyperbolic, Witnesses::Hyperbolic(ws)) => {
            if ws.len() != n {
                failures.push(format!("expected {n} witness pairs, got {}", ws.len()));
            } else {
                for (i, &(cur, back)) in ws.iter().enumerate() {
                    let prev = (i + n - 1) % n;
                    if !c.repellers[i].contains(cur) {
                        failures.push(format!("witness brick {cur} for R{i} lies outside R{i}"));
                    } else if !g.strict_future(cur).intersects(&c.attractors[i]) {
                        failures
                            .push(format!("strict future of witness brick {cur} in R{i} misses A{i}"));
                    }
                    if !c.repellers[i].contains(back) {
                        failures.push(format!("witness brick {back} for R{i} lies outside R{i}"));
                    } else if !g.strict_future(back).intersects(&c.attractors[prev]) {
                        failures.push(format!(
                            "strict future of witness brick {back} in R{i} misses A{prev}"
                        ));
                    }
                }
            }
        }
        _ => failures.push("witness table kind does not match the configuration kind".into()),
    }

    ConfigCheck {
        ok: failures.is_empty(),
        kind: c.kind,
        order: n,
        boundary,
        failures,
    }
}

// ---------------------------------------------------------------------
// Connexion bricks and enlargement
// ---------------------------------------------------------------------

/// Lowest-id brick outside every configuration set that is adjacent to
/// `R_j` and whose strict future contains an outside brick adjacent to
/// `A_j`. `None` when no such brick exists. Precondition: `j` is a
/// valid set index.
pub fn find_connexion_brick(g: &DynGraph, c: &RAConfiguration, j: usize) -> Result<Option<u32>> {
    let n = c.order();
    if j >= n {
        return Err(Error::InvalidInstance(format!(
            "connexion brick search: set index {j} out of range for order {n}"
        )));
    }
    let outside = c.union_all().complement();
    let adj_r = g.adjacent_to(&c.repellers[j]);
    let adj_a = g.adjacent_to(&c.attractors[j]);
    let targets = adj_a.intersection(&outside);
    for b in outside.iter() {
        if !adj_r.contains(b) {
            continue;
        }
        if g.strict_future(b).intersects(&targets) {
            return Ok(Some(b));
        }
    }
    Ok(None)
}

/// Cell-level separation audit: remove the barrier's cells from the
/// mask and locate each part in the remaining components
/// (8-connected). `placements[i]` is `None` when the part does not sit
/// wholly inside one component.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationAudit {
    /// Whether the barrier itself is connected (the separation lemmas'
    /// hypothesis).
    pub barrier_connected: bool,
    pub component_count: usize,
    pub placements: Vec<Option<usize>>,
    /// All parts located and pairwise in different components.
    pub pairwise_distinct: bool,
}

/// Audit that removing `barrier` separates the `parts` from each other
/// inside the mask.
pub fn audit_separation(
    dec: &BrickDecomposition,
    g: &DynGraph,
    barrier: &BrickSet,
    parts: &[&BrickSet],
) -> SeparationAudit {
    let mut rest = dec.mask().clone();
    rest.subtract(&brick_cells(dec, barrier));
    let comps = rest.components_diag();
    let placements: Vec<Option<usize>> = parts
        .iter()
        .map(|p| {
            let cells = brick_cells(dec, p);
            comps.iter().position(|comp| cells.is_subset_of(comp))
        })
        .collect();
    let pairwise_distinct = placements.iter().all(|p| p.is_some())
        && (0..placements.len()).all(|x| {
            (x + 1..placements.len()).all(|y| placements[x] != placements[y])
        });
    SeparationAudit {
        barrier_connected: g.is_connected_set(barrier),
        component_count: comps.len(),
        placements,
        pairwise_distinct,
    }
}

/// What one enlargement step did.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum EnlargeStep {
    /// Elliptic: every attractor was replaced by its component of the
    /// complement of (all repellers ∪ the connexion brick's past).
    EllipticAttractors { j: usize, brick: u32, grown: Vec<usize> },
    /// Hyperbolic, past meets the cyclically next repeller: attractors
    /// regrown as components of the complement of `R_j ∪ past ∪
    /// R_{j+1}` (all of them at order two, only `A_j` above).
    HyperbolicAttractors { j: usize, brick: u32, grown: Vec<usize> },
    /// Hyperbolic, past meets no other repeller: `R_j` absorbs the
    /// past.
    RepellerAbsorbsPast { j: usize, brick: u32 },
    /// Hyperbolic, past first meets the repeller `i ≥ 2` steps around:
    /// the configuration collapses to order `i`, merging `R_j`, the
    /// past, and `R_{j+i}` into the new `R_0`.
    OrderReduction { j: usize, brick: u32, new_order: usize },
}

/// Result of one enlargement step.
#[derive(Debug, Clone)]
pub struct EnlargeOutcome {
    pub config: RAConfiguration,
    pub step: EnlargeStep,
    /// The separation audit backing the step, when the step grew
    /// attractors out of complement components.
    pub separation: Option<SeparationAudit>,
}

/// Find each attractor's component among `comps`, requiring it to sit
/// wholly inside one.
fn locate_attractor(comps: &[BrickSet], a: &BrickSet, l: usize) -> Result<usize> {
    let ci = comps
        .iter()
        .position(|comp| comp.intersects(a))
        .ok_or_else(|| {
            Error::Soundness(format!(
                "attractor A{l} vanished from the complement of the enlarged repeller"
            ))
        })?;
    if !a.is_subset_of(&comps[ci]) {
        return Err(Error::Soundness(format!(
            "attractor A{l} is split by the enlarged repeller"
        )));
    }
    Ok(ci)
}

/// One enlargement step at the first (lowest `j`, then lowest brick
/// id) connexion brick.
///
/// The connexion brick's past `[b]_≤` drives the step; how depends on
/// the kind. Elliptic: the auxiliary repeller is the union of *all*
/// repellers with the past, and every attractor is replaced by its
/// component of the complement — repellers never change. Hyperbolic:
/// if the past meets no other repeller, `R_j` simply absorbs it; if it
/// first meets the cyclic neighbour `R_{j+1}`, the auxiliary repeller
/// `R_j ∪ [b]_≤ ∪ R_{j+1}` regrows the attractors (all of them at
/// order two, only `A_j` above); if it first meets `R_{j+i}` with `i ≥
/// 2`, the order drops to `i` by merging the two linked repellers
/// through the past.
///
/// Soundness errors (the caller should rerun the recurrence search):
/// the past meets an attractor; two attractors merge into one
/// complement component; a step produces no growth. Dynamics errors
/// report truncation artifacts (a complement component that is not
/// future-closed, a past disconnected from its repeller).
pub fn enlarge(dec: &BrickDecomposition, g: &DynGraph, c: &RAConfiguration) -> Result<EnlargeOutcome> {
    let n = c.order();
    let mut chosen = None;
    for j in 0..n {
        if let Some(b) = find_connexion_brick(g, c, j)? {
            chosen = Some((j, b));
            break;
        }
    }
    let Some((j, b)) = chosen else {
        return Err(Error::Dynamics(
            "no connexion brick: the configuration admits no enlargement step".into(),
        ));
    };
    let p = g.past(b);
    for (l, a) in c.attractors.iter().enumerate() {
        if p.intersects(a) {
            return Err(Error::Soundness(format!(
                "past of connexion brick {b} meets attractor A{l}; a recurrence escaped the chain search — rerun it with a larger link bound"
            )));
        }
    }
    match c.kind {
        ConfigKind::Elliptic => {
            let mut aux = p.clone();
            for r in &c.repellers {
                aux = aux.union(r);
            }
            let comps = g.components_of_set(&aux.complement());
            let mut placements = Vec::with_capacity(n);
            for (l, a) in c.attractors.iter().enumerate() {
                placements.push(locate_attractor(&comps, a, l)?);
            }
            for x in 0..n {
                for y in x + 1..n {
                    if placements[x] == placements[y] {
                        return Err(Error::Soundness(format!(
                            "attractors A{x} and A{y} merge across the enlarged repeller; rerun the chain search"
                        )));
                    }
                }
            }
            let mut new_atts = Vec::with_capacity(n);
            let mut grown = Vec::new();
            for (l, a) in c.attractors.iter().enumerate() {
                let comp = &comps[placements[l]];
                if !g.is_attractor(comp) {
                    return Err(Error::Dynamics(format!(
                        "the complement component holding A{l} is not future-closed on this truncated domain"
                    )));
                }
                if comp.len() > a.len() {
                    grown.push(l);
                }
                new_atts.push(comp.clone());
            }
            if grown.is_empty() {
                return Err(Error::Soundness(
                    "enlargement produced no growth: the connexion brick's future is already inside the configuration".into(),
                ));
            }
            let parts: Vec<&BrickSet> = new_atts.iter().collect();
            let separation = audit_separation(dec, g, &aux, &parts);
            let config = RAConfiguration {
                kind: c.kind,
                repellers: c.repellers.clone(),
                attractors: new_atts,
                repeller_arcs: c.repeller_arcs.clone(),
                attractor_arcs: c.attractor_arcs.clone(),
                witnesses: c.witnesses.clone(),
            };
            Ok(EnlargeOutcome {
                config,
                step: EnlargeStep::EllipticAttractors { j, brick: b, grown },
                separation: Some(separation),
            })
        }
        ConfigKind::Hyperbolic => {
            let touched: Vec<usize> =
                (1..n).filter(|d| p.intersects(&c.repellers[(j + d) % n])).collect();
            if touched.is_empty() {
                let r_new = c.repellers[j].union(&p);
                if !g.is_connected_set(&r_new) {
                    return Err(Error::Dynamics(format!(
                        "past of connexion brick {b} is disconnected from R{j} on this truncated domain"
                    )));
                }
                if !g.is_repeller(&r_new) {
                    return Err(Error::Soundness(format!(
                        "R{j} joined with a past closure is not past-closed"
                    )));
                }
                let mut repellers = c.repellers.clone();
                repellers[j] = r_new;
                let config = RAConfiguration {
                    kind: c.kind,
                    repellers,
                    attractors: c.attractors.clone(),
                    repeller_arcs: c.repeller_arcs.clone(),
                    attractor_arcs: c.attractor_arcs.clone(),
                    witnesses: c.witnesses.clone(),
                };
                return Ok(EnlargeOutcome {
                    config,
                    step: EnlargeStep::RepellerAbsorbsPast { j, brick: b },
                    separation: None,
                });
            }
            let i = touched[0];
            if i == 1 {
                let next = (j + 1) % n;
                let aux = c.repellers[j].union(&p).union(&c.repellers[next]);
                let comps = g.components_of_set(&aux.complement());
                let replace: Vec<usize> = if n == 2 { vec![0, 1] } else { vec![j] };
                let mut new_atts = c.attractors.clone();
                let mut grown = Vec::new();
                for &l in &replace {
                    let ci = locate_attractor(&comps, &c.attractors[l], l)?;
                    let comp = &comps[ci];
                    for (m, a) in c.attractors.iter().enumerate() {
                        if m != l && comp.intersects(a) {
                            return Err(Error::Soundness(format!(
                                "attractors A{l} and A{m} merge across the enlarged repeller; rerun the chain search"
                            )));
                        }
                    }
                    for (m, r) in c.repellers.iter().enumerate() {
                        if m != j && m != next && comp.intersects(r) {
                            return Err(Error::Soundness(format!(
                                "the complement component holding A{l} meets repeller R{m}; two-repeller separation fails on this instance"
                            )));
                        }
                    }
                    if !g.is_attractor(comp) {
                        return Err(Error::Dynamics(format!(
                            "the complement component holding A{l} is not future-closed on this truncated domain"
                        )));
                    }
                    if comp.len() > c.attractors[l].len() {
                        grown.push(l);
                    }
                    new_atts[l] = comp.clone();
                }
                if grown.is_empty() {
                    return Err(Error::Soundness(
                        "enlargement produced no growth: the connexion brick's future is already inside the configuration".into(),
                    ));
                }
                let parts: Vec<&BrickSet> = new_atts.iter().collect();
                let separation = audit_separation(dec, g, &aux, &parts);
                let config = RAConfiguration {
                    kind: c.kind,
                    repellers: c.repellers.clone(),
                    attractors: new_atts,
                    repeller_arcs: c.repeller_arcs.clone(),
                    attractor_arcs: c.attractor_arcs.clone(),
                    witnesses: c.witnesses.clone(),
                };
                Ok(EnlargeOutcome {
                    config,
                    step: EnlargeStep::HyperbolicAttractors { j, brick: b, grown },
                    separation: Some(separation),
                })
            } else {
                // Order reduction: merge R_j and R_{j+i} through the past,
                // keep the i attractors between them, re-index from j.
                let far = (j + i) % n;
                let r0 = c.repellers[j].union(&p).union(&c.repellers[far]);
                if !g.is_connected_set(&r0) {
                    return Err(Error::Dynamics(format!(
                        "merged repeller R{j} ∪ past ∪ R{far} is disconnected on this truncated domain"
                    )));
                }
                if !g.is_repeller(&r0) {
                    return Err(Error::Soundness(
                        "merged repeller is not past-closed".into(),
                    ));
                }
                let Witnesses::Hyperbolic(old_ws) = &c.witnesses else {
                    return Err(Error::InvalidInstance(
                        "hyperbolic enlargement on a configuration without witness pairs".into(),
                    ));
                };
                let mut repellers = Vec::with_capacity(i);
                let mut attractors = Vec::with_capacity(i);
                let mut repeller_arcs = Vec::with_capacity(i);
                let mut attractor_arcs = Vec::with_capacity(i);
                let mut witnesses = Vec::with_capacity(i);
                for d in 0..i {
                    let idx = (j + d) % n;
                    attractors.push(c.attractors[idx].clone());
                    attractor_arcs.push(c.attractor_arcs[idx].clone());
                    if d == 0 {
                        repellers.push(r0.clone());
                        repeller_arcs.push(c.repeller_arcs[j].clone());
                        witnesses.push((old_ws[j].0, old_ws[far].1));
                    } else {
                        repellers.push(c.repellers[idx].clone());
                        repeller_arcs.push(c.repeller_arcs[idx].clone());
                        witnesses.push(old_ws[idx]);
                    }
                }
                let config = RAConfiguration {
                    kind: c.kind,
                    repellers,
                    attractors,
                    repeller_arcs,
                    attractor_arcs,
                    witnesses: Witnesses::Hyperbolic(witnesses),
                };
                Ok(EnlargeOutcome {
                    config,
                    step: EnlargeStep::OrderReduction { j, brick: b, new_order: i },
                    separation: None,
                })
            }
        }
    }
}

// ---------------------------------------------------------------------
// Maximalization
// ---------------------------------------------------------------------

/// Result of iterating [`enlarge`] to a fixpoint.
#[derive(Debug, Clone)]
pub struct MaximalizeOutcome {
    pub config: RAConfiguration,
    pub steps: Vec<EnlargeStep>,
    /// Outside bricks absorbed directly into an adjacent set after the
    /// connexion-brick steps were exhausted.
    pub absorbed: Vec<(SetLabel, u32)>,
    /// Verification of the final configuration (always `ok`; failures
    /// become a soundness error instead).
    pub check: ConfigCheck,
}

/// Lowest outside brick that can join an adjacent set outright: its
/// one-step image inside the attractor (or its one-step preimage
/// inside the repeller, attractors scanned first).
fn absorb_candidate(g: &DynGraph, c: &RAConfiguration) -> Option<(SetLabel, u32)> {
    let u = g.brick_count();
    let outside = c.union_all().complement();
    for b in outside.iter() {
        let single = BrickSet::singleton(u, b);
        let with =
            |s: &BrickSet| s.union(&single);
        let phi = g.phi(&single);
        for (l, a) in c.attractors.iter().enumerate() {
            if g.adjacent_to(a).contains(b) && phi.is_subset_of(&with(a)) {
                return Some((SetLabel::A(l), b));
            }
        }
        let phim = g.phi_minus(&single);
        for (l, r) in c.repellers.iter().enumerate() {
            if g.adjacent_to(r).contains(b) && phim.is_subset_of(&with(r)) {
                return Some((SetLabel::R(l), b));
            }
        }
    }
    None
}

/// Iterate [`enlarge`] until no connexion brick remains, then absorb
/// any leftover outside bricks whose entire one-step dynamics lies in
/// an adjacent set, and verify the result. Each step strictly grows
/// the configuration in the partial order (set inclusion per index) or
/// reduces its order, so the loop terminates.
pub fn maximalize_config(
    dec: &BrickDecomposition,
    g: &DynGraph,
    c: &RAConfiguration,
) -> Result<MaximalizeOutcome> {
    let mut cur = c.clone();
    let mut steps = Vec::new();
    let mut absorbed = Vec::new();
    let budget = 4 * (g.brick_count() as usize + 4);
    let mut used = 0;
    loop {
        used += 1;
        if used > budget {
            return Err(Error::Soundness(
                "enlargement failed to reach a fixpoint within the step budget".into(),
            ));
        }
        let mut has_connexion = false;
        for j in 0..cur.order() {
            if find_connexion_brick(g, &cur, j)?.is_some() {
                has_connexion = true;
                break;
            }
        }
        if has_connexion {
            let before = cur.coverage();
            let out = enlarge(dec, g, &cur)?;
            let reduced = matches!(out.step, EnlargeStep::OrderReduction { .. });
            if !reduced && out.config.coverage() <= before {
                return Err(Error::Soundness(
                    "an enlargement step did not grow the configuration".into(),
                ));
            }
            steps.push(out.step);
            cur = out.config;
            continue;
        }
        if let Some((label, b)) = absorb_candidate(g, &cur) {
            match label {
                SetLabel::A(l) => cur.attractors[l].insert(b),
                SetLabel::R(l) => cur.repellers[l].insert(b),
            };
            absorbed.push((label, b));
            continue;
        }
        break;
    }
    let check = verify_config(dec, g, &cur)?;
    if !check.ok {
        return Err(Error::Soundness(format!(
            "maximal configuration failed re-verification: {}",
            check.failures.join("; ")
        )));
    }
    Ok(MaximalizeOutcome { config: cur, steps, absorbed, check })
}

// ---------------------------------------------------------------------
// Elliptic order reduction
// ---------------------------------------------------------------------

/// Result of one elliptic order-reduction step.
#[derive(Debug, Clone)]
pub struct OrderReductionOutcome {
    pub config: RAConfiguration,
    /// The brick of `R_0` whose future meets `A_1`, witnessing the
    /// reduced order-`(n-1)` configuration.
    pub witness: u32,
    pub check: ConfigCheck,
}

/// Reduce a verified elliptic configuration of order `n > 3` to order
/// `n - 1`: find a brick of `R_0` whose future meets `A_1` (lowest id
/// first — the witness whose existence the order-reduction argument
/// guarantees), drop `A_0` and `R_1`, shift the remaining sets down,
/// and re-verify.
pub fn reduce_elliptic_order(
    dec: &BrickDecomposition,
    g: &DynGraph,
    c: &RAConfiguration,
) -> Result<OrderReductionOutcome> {
    if c.kind != ConfigKind::Elliptic {
        return Err(Error::InvalidInstance(
            "order reduction applies to elliptic configurations".into(),
        ));
    }
    let n = c.order();
    if n <= 3 {
        return Err(Error::InvalidInstance(format!(
            "order reduction needs order above three, got {n}"
        )));
    }
    let Witnesses::Elliptic(old_ws) = &c.witnesses else {
        return Err(Error::InvalidInstance(
            "elliptic configuration without an elliptic witness table".into(),
        ));
    };
    let witness = c.repellers[0]
        .iter()
        .find(|&b| g.future(b).intersects(&c.attractors[1]))
        .ok_or_else(|| {
            Error::Dynamics(
                "order reduction failed: no brick of R0 reaches A1 on this instance".into(),
            )
        })?;
    let m = n - 1;
    let mut repellers = Vec::with_capacity(m);
    let mut attractors = Vec::with_capacity(m);
    let mut repeller_arcs = Vec::with_capacity(m);
    let mut attractor_arcs = Vec::with_capacity(m);
    let mut ws = Vec::with_capacity(m);
    for d in 0..m {
        attractors.push(c.attractors[d + 1].clone());
        attractor_arcs.push(c.attractor_arcs[d + 1].clone());
        if d == 0 {
            repellers.push(c.repellers[0].clone());
            repeller_arcs.push(c.repeller_arcs[0].clone());
            ws.push(witness);
        } else {
            repellers.push(c.repellers[d + 1].clone());
            repeller_arcs.push(c.repeller_arcs[d + 1].clone());
            ws.push(old_ws[d + 1]);
        }
    }
    let config = RAConfiguration {
        kind: ConfigKind::Elliptic,
        repellers,
        attractors,
        repeller_arcs,
        attractor_arcs,
        witnesses: Witnesses::Elliptic(ws),
    };
    let check = check_elliptic(dec, g, &config)?;
    if !check.ok {
        return Err(Error::Soundness(format!(
            "reduced configuration failed verification: {}",
            check.failures.join("; ")
        )));
    }
    Ok(OrderReductionOutcome { config, witness, check })
}

// ---------------------------------------------------------------------
// Domino containment over seeded families
// ---------------------------------------------------------------------

/// The bricks seeded by one orbit-disk family, indexed by disk level
/// `l ∈ [l_min, l_max]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeededFamily {
    pub l_min: i64,
    pub bricks: Vec<u32>,
}

impl SeededFamily {
    pub fn l_max(&self) -> i64 {
        self.l_min + self.bricks.len() as i64 - 1
    }

    /// Brick of the level-`l` disk, when the level exists.
    pub fn brick_at(&self, l: i64) -> Option<u32> {
        if l < self.l_min || l > self.l_max() {
            return None;
        }
        Some(self.bricks[(l - self.l_min) as usize])
    }

    /// Levels available symmetrically both ways.
    pub fn reach(&self) -> i64 {
        (-self.l_min).min(self.l_max())
    }
}

/// Outcome of a domino containment search: the least depth `k` at
/// which every required strict-future containment holds, or `None`
/// with the containment matrix at the truncation bound.
#[derive(Debug, Clone, Serialize)]
pub struct DominoReport {
    pub k: Option<i64>,
    /// Largest depth that was searchable.
    pub bound: i64,
    /// The containment matrix at depth `k` (when found) or at `bound`.
    /// Elliptic: `containment[i][j]` says the strict future of family
    /// `i`'s level `-k` brick contains family `j`'s level `k` brick.
    /// Hyperbolic: one row per even family `i`, eight entries — the
    /// strict futures of the level `-k` bricks of families `i` and
    /// `i-1`, each against the level `k` bricks of families `i-2, i-1,
    /// i, i+1` (indices cyclic).
    pub containment: Vec<Vec<bool>>,
}

fn domino_bound(fams: &[SeededFamily], k_max: i64) -> Result<i64> {
    let reach = fams.iter().map(SeededFamily::reach).min().unwrap_or(0);
    let bound = reach.min(k_max);
    if bound < 1 {
        return Err(Error::InvalidInstance(format!(
            "domino search needs at least one level each way per family (reach {reach}, requested bound {k_max})"
        )));
    }
    Ok(bound)
}

/// Least `k ≤ k_max` with `b_j^k` in the strict future of `b_i^{-k}`
/// for every ordered family pair `(i, j)`. Containment is monotone in
/// `k` (consecutive disks are linked by solid arcs), so the first hit
/// is the least.
pub fn domino_elliptic(g: &DynGraph, fams: &[SeededFamily], k_max: i64) -> Result<DominoReport> {
    if fams.len() < 3 {
        return Err(Error::InvalidInstance(format!(
            "elliptic domino needs at least three families, got {}",
            fams.len()
        )));
    }
    let bound = domino_bound(fams, k_max)?;
    let n = fams.len();
    let matrix_at = |k: i64| -> Vec<Vec<bool>> {
        (0..n)
            .map(|i| {
                let src = fams[i].brick_at(-k).unwrap();
                let fut = g.strict_future(src);
                (0..n).map(|j| fut.contains(fams[j].brick_at(k).unwrap())).collect()
            })
            .collect()
    };
    for k in 1..=bound {
        let m = matrix_at(k);
        if m.iter().all(|row| row.iter().all(|&x| x)) {
            return Ok(DominoReport { k: Some(k), bound, containment: m });
        }
    }
    Ok(DominoReport { k: None, bound, containment: matrix_at(bound) })
}

/// Least `k ≤ k_max` such that for every even family index `i`, the
/// strict futures of the level `-k` bricks of families `i` and `i-1`
/// both contain the level `k` bricks of families `i-2, i-1, i, i+1`
/// (cyclically) — the future indices immediately surround the past
/// pair `{i-1, i}`.
pub fn domino_hyperbolic(g: &DynGraph, fams: &[SeededFamily], k_max: i64) -> Result<DominoReport> {
    let n = fams.len();
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidInstance(format!(
            "hyperbolic domino needs an even family count of at least four, got {n}"
        )));
    }
    let bound = domino_bound(fams, k_max)?;
    let matrix_at = |k: i64| -> Vec<Vec<bool>> {
        (0..n)
            .step_by(2)
            .map(|i| {
                let pasts = [i, (i + n - 1) % n];
                let targets = [(i + n - 2) % n, (i + n - 1) % n, i, (i + 1) % n];
                pasts
                    .iter()
                    .flat_map(|&pi| {
                        let fut = g.strict_future(fams[pi].brick_at(-k).unwrap());
                        targets
                            .iter()
                            .map(|&t| fut.contains(fams[t].brick_at(k).unwrap()))
                            .collect::<Vec<_>>()
                    })
                    .collect()
            })
            .collect()
    };
    for k in 1..=bound {
        let m = matrix_at(k);
        if m.iter().all(|row| row.iter().all(|&x| x)) {
            return Ok(DominoReport { k: Some(k), bound, containment: m });
        }
    }
    Ok(DominoReport { k: None, bound, containment: matrix_at(bound) })
}

// ---------------------------------------------------------------------
// Complement audit
// ---------------------------------------------------------------------

/// Per configuration set: how many components of its brick-complement
/// contain bricks of other configuration sets. On a verified
/// hyperbolic configuration this must be exactly one for every set.
#[derive(Debug, Clone, Serialize)]
pub struct UpsiRow {
    pub label: SetLabel,
    pub components_with_sets: usize,
}

/// Complement-concentration audit over all `2n` sets.
#[derive(Debug, Clone, Serialize)]
pub struct UpsiAudit {
    pub rows: Vec<UpsiRow>,
    pub ok: bool,
}

/// For each set `X`, count the components of the complement of `X`
/// that meet some other configuration set.
pub fn audit_upsi(g: &DynGraph, c: &RAConfiguration) -> UpsiAudit {
    let labeled = c.labeled_sets();
    let mut rows = Vec::with_capacity(labeled.len());
    let mut ok = true;
    for (label, x) in &labeled {
        let comps = g.components_of_set(&x.complement());
        let count = comps
            .iter()
            .filter(|comp| {
                labeled.iter().any(|(l2, s2)| l2 != label && comp.intersects(s2))
            })
            .count();
        ok &= count == 1;
        rows.push(UpsiRow { label: *label, components_with_sets: count });
    }
    UpsiAudit { rows, ok }
}

// ---------------------------------------------------------------------
// Assembly from domino families
// ---------------------------------------------------------------------

/// Assemble the elliptic configuration of a successful domino search
/// at depth `k`: `R_i` is the strict past of family `i`'s level `-k`
/// brick, `A_i` the strict future of its level `k` brick, witness arcs
/// anchored one disk beyond the depth (level `±(k+1)` must exist).
pub fn assemble_elliptic(
    dec: &BrickDecomposition,
    g: &DynGraph,
    fams: &[SeededFamily],
    disks: &[OrbitDiskFamily],
    k: i64,
) -> Result<RAConfiguration> {
    assemble_from_families(dec, g, ConfigKind::Elliptic, fams, disks, k, 1)
}

/// Assemble the hyperbolic configuration of a successful domino search
/// at depth `k`, using the even-index families only (order = half the
/// family count).
pub fn assemble_hyperbolic(
    dec: &BrickDecomposition,
    g: &DynGraph,
    fams: &[SeededFamily],
    disks: &[OrbitDiskFamily],
    k: i64,
) -> Result<RAConfiguration> {
    if fams.len() % 2 != 0 {
        return Err(Error::InvalidInstance(
            "hyperbolic assembly needs an even family count".into(),
        ));
    }
    assemble_from_families(dec, g, ConfigKind::Hyperbolic, fams, disks, k, 2)
}

fn assemble_from_families(
    dec: &BrickDecomposition,
    g: &DynGraph,
    kind: ConfigKind,
    fams: &[SeededFamily],
    disks: &[OrbitDiskFamily],
    k: i64,
    stride: usize,
) -> Result<RAConfiguration> {
    if fams.len() != disks.len() {
        return Err(Error::InvalidInstance(
            "seeded families and disk families must align".into(),
        ));
    }
    let mut repellers = Vec::new();
    let mut attractors = Vec::new();
    let mut anchors_r = Vec::new();
    let mut anchors_a = Vec::new();
    for (fam, disk) in fams.iter().zip(disks).step_by(stride) {
        let past_brick = fam.brick_at(-k).ok_or_else(|| {
            Error::InvalidInstance(format!("family has no level {}", -k))
        })?;
        let fut_brick = fam
            .brick_at(k)
            .ok_or_else(|| Error::InvalidInstance(format!("family has no level {k}")))?;
        let anchor_r = disk.center(-(k + 1)).ok_or_else(|| {
            Error::Dynamics(format!(
                "assembly needs one disk beyond depth {k} (level {} missing)",
                -(k + 1)
            ))
        })?;
        let anchor_a = disk.center(k + 1).ok_or_else(|| {
            Error::Dynamics(format!(
                "assembly needs one disk beyond depth {k} (level {} missing)",
                k + 1
            ))
        })?;
        repellers.push(g.strict_past(past_brick));
        attractors.push(g.strict_future(fut_brick));
        anchors_r.push(anchor_r);
        anchors_a.push(anchor_a);
    }
    assemble_config(dec, g, kind, repellers, attractors, &anchors_r, &anchors_a)
}

// ---------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------

/// Tunables of [`build_config_from_polygon`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineParams {
    /// Orbit sampling for realization checks.
    pub orbit: OrbitParams,
    /// Grid cell size for the working region.
    pub cell_size: f64,
    /// Outer radius of the working region.
    pub r_outer: f64,
    /// Freeness tolerance of the decomposition.
    pub eps_geo: f64,
    /// Displacement threshold for fixed-region detection.
    pub eps_fix: f64,
    /// Orbit-disk levels requested each way per family.
    pub disks_per_end: i64,
    /// Refinement rounds allowed when freeing the decomposition.
    pub max_depth: usize,
    /// Link depth of the recurrence chain search.
    pub k_link: u32,
    /// Depth cap of the domino searches.
    pub l_domino: i64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            orbit: OrbitParams { steps: 400, eps_bound: 0.05, tol_angle: 0.35 },
            cell_size: 0.02,
            r_outer: 0.9,
            eps_geo: 0.01,
            eps_fix: 0.02,
            disks_per_end: 6,
            max_depth: 4,
            k_link: 10,
            l_domino: 4,
        }
    }
}

/// Summary of the numerically detected fixed regions, reported with a
/// hyperbolic outcome.
#[derive(Debug, Clone, Serialize)]
pub struct FixedSummary {
    pub component_count: usize,
    pub cell_count: usize,
    /// Distance from the origin to the nearest fixed-region cell;
    /// `None` when no fixed region was detected.
    pub origin_distance: Option<f64>,
}

/// Outcome of the full pipeline.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum PipelineOutcome {
    /// A closed chain of free bricks certifies a recurrent point.
    Recurrent { certificate: RecurrenceCertificate },
    /// A verified elliptic configuration. Since an elliptic
    /// configuration forces recurrence, the chain search is rerun at
    /// doubled depth and its result reported alongside.
    EllipticConfig {
        configuration: RAConfiguration,
        check: ConfigCheck,
        domino_k: i64,
        chain_recheck: ChainSearch,
    },
    /// A verified hyperbolic configuration, with the complement audit
    /// and the numerically detected fixed regions.
    HyperbolicConfig {
        configuration: RAConfiguration,
        check: ConfigCheck,
        domino_k: i64,
        upsi: UpsiAudit,
        fixed: FixedSummary,
    },
    /// The analysis could not settle the instance; `stage` names the
    /// step that stopped it.
    Inconclusive { stage: String, details: Vec<String> },
}

fn inconclusive(stage: &str, details: Vec<String>) -> PipelineOutcome {
    PipelineOutcome::Inconclusive { stage: stage.into(), details }
}

/// Run the whole analysis on one instance: check that the orbits
/// realize the polygon, reduce the polygon, branch on the index,
/// build seeded orbit-disk decompositions, search for a recurrence
/// certificate first, and otherwise construct and verify a
/// configuration via the domino containments.
///
/// Inconclusive outcomes (not errors) report: realization failures,
/// index zero, a negatively oriented index-one polygon (the analysis
/// applies to the mirrored map), an edge pair with coinciding
/// endpoints, an endpoint order that does not match the index class,
/// an index below zero with some adjacent edge pair coherently
/// oriented (the construction then modifies the map along a free disk
/// chain, which is out of numerical scope), orbits whose disks do not
/// span enough levels, a failed domino search, and a configuration
/// that fails verification at this truncation.
pub fn build_config_from_polygon(
    m: &PlaneMap,
    p: &OrientedPolygon,
    zs: &[Pt],
    params: &PipelineParams,
) -> Result<PipelineOutcome> {
    // Realization.
    let real = realizes(m, p, zs, &params.orbit)?;
    if !real.realized() {
        let mut details = vec![format!("status: {:?}", real.status)];
        for e in &real.edges {
            details.push(format!(
                "edge {}: {:?} (backward {:?}, forward {:?})",
                e.edge, e.status, e.backward, e.forward
            ));
        }
        return Ok(inconclusive("realization", details));
    }

    // Reduction to a minimal polygon or an index-one triangle.
    let red = p.reduce()?;
    let p2 = &red.polygon;
    let zs2: Vec<Pt> = red.surviving.iter().map(|&e| zs[e]).collect();
    if !red.dropped.is_empty() || red.kind == ReductionKind::IndexOneTriangle {
        let real2 = realizes(m, p2, &zs2, &params.orbit)?;
        if !real2.realized() {
            return Ok(inconclusive(
                "realization",
                vec!["the reduced polygon's surviving edges are no longer realized".into()],
            ));
        }
    }
    let idx = p2.index();
    let n2 = p2.n();

    // Index routing.
    let elliptic_route = if idx == 1 {
        true
    } else if idx < 0 {
        false
    } else {
        return Ok(inconclusive(
            "index-zero",
            vec!["the polygon index is zero; the analysis draws no conclusion".into()],
        ));
    };

    // Endpoint separation (disk families need disjoint interiors).
    let sep = p2.endpoint_separation(params.orbit.tol_angle);
    if !sep.distinct() {
        let details = sep
            .clashes
            .iter()
            .map(|(a, b, d)| format!("endpoints {a:?} and {b:?} are only {d:.6} apart"))
            .collect();
        return Ok(inconclusive("endpoint-separation", details));
    }

    // Order at infinity.
    if elliptic_route {
        if !p2.positively_oriented() {
            return Ok(inconclusive(
                "orientation",
                vec![
                    "index-one polygon realized with negatively oriented boundary; the construction applies to the mirrored map".into(),
                ],
            ));
        }
        let wc = p2.check_elliptic_endpoint_order();
        if !wc.holds {
            return Ok(inconclusive(
                "endpoint-order",
                vec![format!("expected {:?}", wc.expected), format!("actual {:?}", wc.actual)],
            ));
        }
    } else {
        if let Some(i) = (0..n2).find(|&i| p2.delta(i) == 0) {
            return Ok(inconclusive(
                "surgery",
                vec![format!(
                    "edges {} and {} are coherently oriented (δ_{i} = 0); handling this case modifies the map along a free disk chain, out of numerical scope",
                    (i + n2 - 1) % n2,
                    i
                )],
            ));
        }
        let wc = p2.check_hyperbolic_endpoint_order();
        if !wc.holds {
            return Ok(inconclusive(
                "endpoint-order",
                vec![format!("expected {:?}", wc.expected), format!("actual {:?}", wc.actual)],
            ));
        }
    }

    // Working region and orbit disks.
    let grid = Grid::from_cell_size(params.cell_size)?;
    let margin = freeness_margin(&grid, params.eps_geo);
    let mask = displacement_mask(m, &grid, params.r_outer, margin)?;
    let mut disks: Vec<OrbitDiskFamily> = Vec::with_capacity(n2);
    for (i, &z) in zs2.iter().enumerate() {
        let fam = match build_orbit_disks(m, &grid, &mask, z, params.disks_per_end) {
            Ok(f) => f,
            Err(e) => return Ok(inconclusive("orbit-disks", vec![format!("edge {i}: {e}")])),
        };
        let (alpha, omega) = p2.endpoints(i);
        if let Err(e) = fam.audit_end_convergence(alpha, omega) {
            return Ok(inconclusive("disk-convergence", vec![format!("edge {i}: {e}")]));
        }
        disks.push(fam);
    }
    let reach = disks
        .iter()
        .map(|f| (-f.l_min).min(f.l_max()))
        .min()
        .unwrap_or(0);
    if reach < 2 {
        return Ok(inconclusive(
            "orbit-disks",
            vec![format!("families reach only {reach} levels each way; at least 2 are needed")],
        ));
    }

    // Seeded decomposition and its audits.
    let (dec, ids) = seeded_decomposition(m, &grid, &mask, &disks, params.eps_geo, params.max_depth)?;
    if !dec.audit_degree().clean() || !dec.audit_free().clean() || !dec.audit_maximal().clean() {
        return Err(Error::Decomposition(
            "seeded decomposition failed its structural audits".into(),
        ));
    }
    let g = DynGraph::from_decomposition(&dec);

    // Recurrence first.
    if let ChainSearch::Found { certificate } = find_closed_chain(&g, &dec, m, params.k_link)? {
        return Ok(PipelineOutcome::Recurrent { certificate });
    }

    // Domino containments and assembly.
    let sfams: Vec<SeededFamily> = disks
        .iter()
        .zip(ids)
        .map(|(f, bricks)| SeededFamily { l_min: f.l_min, bricks })
        .collect();
    let bound = (reach - 1).min(params.l_domino);
    if bound < 1 {
        return Ok(inconclusive(
            "domino",
            vec!["the families are too short to search any containment depth".into()],
        ));
    }
    let domino = if elliptic_route {
        domino_elliptic(&g, &sfams, bound)?
    } else {
        domino_hyperbolic(&g, &sfams, bound)?
    };
    let Some(k) = domino.k else {
        let mut details = vec![format!("no containment depth up to {}", domino.bound)];
        for (i, row) in domino.containment.iter().enumerate() {
            details.push(format!("row {i}: {row:?}"));
        }
        return Ok(inconclusive("domino", details));
    };
    let assembled = if elliptic_route {
        assemble_elliptic(&dec, &g, &sfams, &disks, k)
    } else {
        assemble_hyperbolic(&dec, &g, &sfams, &disks, k)
    };
    let configuration = match assembled {
        Ok(cfg) => cfg,
        Err(e) => return Ok(inconclusive("assembly", vec![e.to_string()])),
    };
    let check = verify_config(&dec, &g, &configuration)?;
    if !check.ok {
        return Ok(inconclusive("config-verification", check.failures));
    }

    if elliptic_route {
        // A verified elliptic configuration forces recurrence; rerun
        // the chain search deeper and report both artifacts.
        let chain_recheck = find_closed_chain(&g, &dec, m, params.k_link * 2)?;
        Ok(PipelineOutcome::EllipticConfig {
            configuration,
            check,
            domino_k: k,
            chain_recheck,
        })
    } else {
        let upsi = audit_upsi(&g, &configuration);
        let fixed = fixed_regions(m, &grid, params.eps_fix)?;
        let origin_distance = fixed
            .cells
            .iter()
            .map(|c| grid.dist2_to_cell(c, Pt { x: 0.0, y: 0.0 }).sqrt())
            .min_by(|a, b| a.partial_cmp(b).unwrap());
        let fixed = FixedSummary {
            component_count: fixed.components.len(),
            cell_count: fixed.cells.len(),
            origin_distance,
        };
        Ok(PipelineOutcome::HyperbolicConfig {
            configuration,
            check,
            domino_k: k,
            upsi,
            fixed,
        })
    }
}

// ---------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_mask(grid: &Grid, radius: f64) -> CellSet {
        CellSet::from_cells(
            grid,
            (0..grid.cell_count())
                .map(|i| grid.cell_at(i))
                .filter(|&c| grid.center(c).norm() <= radius),
        )
    }

    /// Mask cells within `half` radians of angle `center`.
    fn sector(grid: &Grid, mask: &CellSet, center: f64, half: f64) -> CellSet {
        CellSet::from_cells(
            grid,
            mask.iter()
                .filter(|&c| circ_dist(grid.center(c).angle().rem_euclid(TAU), center) <= half),
        )
    }

    #[test]
    fn boundary_label_words() {
        use SetLabel::{A, R};
        assert_eq!(
            elliptic_boundary_labels(3),
            vec![A(0), R(2), A(1), R(0), A(2), R(1)]
        );
        assert_eq!(
            elliptic_boundary_labels(4),
            vec![A(0), R(2), A(1), R(3), A(2), R(0), A(3), R(1)]
        );
        assert_eq!(hyperbolic_boundary_labels(2), vec![R(0), A(0), R(1), A(1)]);
        assert_eq!(
            hyperbolic_boundary_labels(3),
            vec![R(0), A(0), R(1), A(1), R(2), A(2)]
        );
    }

    #[test]
    fn cyclic_matcher_accepts_rotations_not_reflections() {
        use SetLabel::{A, R};
        let word = vec![R(0), A(0), R(1), A(1)];
        let rotated = vec![R(1), A(1), R(0), A(0)];
        let reflected = vec![A(1), R(1), A(0), R(0)];
        assert!(cyclic_rotation_eq(&rotated, &word));
        assert!(!cyclic_rotation_eq(&reflected, &word));
        assert!(!cyclic_rotation_eq(&word[..3].to_vec(), &word));
    }

    #[test]
    fn boundary_order_reads_four_sectors_counterclockwise() {
        let grid = Grid::new(40).unwrap();
        let mask = disk_mask(&grid, 0.8);
        let centers = [0.0, TAU / 4.0, TAU / 2.0, 3.0 * TAU / 4.0];
        let labels = [SetLabel::R(0), SetLabel::A(0), SetLabel::R(1), SetLabel::A(1)];
        let entries: Vec<TraceEntry> = centers
            .iter()
            .zip(labels)
            .map(|(&th, label)| TraceEntry {
                label,
                cells: sector(&grid, &mask, th, 0.4),
                landing: th,
            })
            .collect();
        let bo = boundary_order(&grid, &mask, &entries, 1e-9).unwrap();
        assert_eq!(bo.intervals.len(), 4);
        assert!(bo.matches(&hyperbolic_boundary_labels(2)));
        // The sector at angle zero wraps; sorting by start angle puts it last.
        assert_eq!(
            bo.labels(),
            vec![SetLabel::A(0), SetLabel::R(1), SetLabel::A(1), SetLabel::R(0)]
        );
        for iv in &bo.intervals {
            assert!(circ_dist(iv.landing, iv.start) <= 0.45);
        }
    }

    #[test]
    fn boundary_order_rejects_interleaved_traces() {
        let grid = Grid::new(40).unwrap();
        let mask = disk_mask(&grid, 0.8);
        let mut r0 = sector(&grid, &mask, 0.0, 0.3);
        r0.union_with(&sector(&grid, &mask, TAU / 2.0, 0.3));
        let mut a0 = sector(&grid, &mask, TAU / 4.0, 0.3);
        a0.union_with(&sector(&grid, &mask, 3.0 * TAU / 4.0, 0.3));
        let entries = vec![
            TraceEntry { label: SetLabel::R(0), cells: r0, landing: 0.0 },
            TraceEntry { label: SetLabel::A(0), cells: a0, landing: TAU / 4.0 },
        ];
        let err = boundary_order(&grid, &mask, &entries, 1e-9).unwrap_err();
        assert!(err.to_string().contains("interleaved"), "{err}");
    }

    #[test]
    fn boundary_order_rejects_overlap_close_landings_and_missing_trace() {
        let grid = Grid::new(40).unwrap();
        let mask = disk_mask(&grid, 0.8);
        let s0 = sector(&grid, &mask, 0.0, 0.3);
        let s1 = sector(&grid, &mask, TAU / 2.0, 0.3);

        let overlap = vec![
            TraceEntry { label: SetLabel::R(0), cells: s0.clone(), landing: 0.0 },
            TraceEntry { label: SetLabel::A(0), cells: s0.clone(), landing: TAU / 2.0 },
        ];
        let err = boundary_order(&grid, &mask, &overlap, 1e-9).unwrap_err();
        assert!(err.to_string().contains("overlap"), "{err}");

        let close = vec![
            TraceEntry { label: SetLabel::R(0), cells: s0.clone(), landing: 1.0 },
            TraceEntry { label: SetLabel::A(0), cells: s1.clone(), landing: 1.005 },
        ];
        let err = boundary_order(&grid, &mask, &close, 0.01).unwrap_err();
        assert!(err.to_string().contains("indistinguishable"), "{err}");

        let inner = CellSet::from_cells(&grid, grid.cell_of(Pt { x: 0.0, y: 0.0 }));
        let missing = vec![
            TraceEntry { label: SetLabel::R(0), cells: s0, landing: 0.0 },
            TraceEntry { label: SetLabel::A(0), cells: inner, landing: 1.0 },
        ];
        let err = boundary_order(&grid, &mask, &missing, 1e-9).unwrap_err();
        assert!(err.to_string().contains("does not reach"), "{err}");
    }

    #[test]
    fn witness_arc_is_deterministic_and_valid() {
        let grid = Grid::new(40).unwrap();
        let mask = disk_mask(&grid, 0.8);
        let ring = outer_ring(&grid, &mask);
        let half = CellSet::from_cells(&grid, mask.iter().filter(|&c| grid.center(c).x >= 0.0));
        let anchor = Pt { x: 0.3, y: 0.0 };
        let arc = build_witness_arc(&grid, &half, &ring, anchor).unwrap();
        let again = build_witness_arc(&grid, &half, &ring, anchor).unwrap();
        assert_eq!(arc, again);
        let cells: Vec<Cell> = arc.cells.iter().map(|&i| grid.cell_at(i as usize)).collect();
        assert!(cells.iter().all(|&c| half.contains(c)));
        assert!(cells
            .windows(2)
            .all(|w| w[0].ix.abs_diff(w[1].ix) + w[0].iy.abs_diff(w[1].iy) == 1));
        assert!(ring.contains(*cells.last().unwrap()));
        // Straight march east: the landing stays near angle zero.
        assert!(circ_dist(arc.landing, 0.0) < 0.2, "landing {}", arc.landing);

        // An anchor outside the set snaps to the nearest set cell.
        let outside = build_witness_arc(&grid, &half, &ring, Pt { x: -0.5, y: 0.3 }).unwrap();
        let first = grid.cell_at(outside.cells[0] as usize);
        assert!(half.contains(first));
        assert!(grid.center(first).x.abs() <= 2.0 * grid.cell_size());

        // A set that never reaches the ring has no witness arc.
        let core = disk_mask(&grid, 0.2);
        let err = build_witness_arc(&grid, &core, &ring, anchor).unwrap_err();
        assert!(err.to_string().contains("outer boundary ring"), "{err}");
    }

    #[test]
    fn seeded_family_level_arithmetic() {
        let fam = SeededFamily { l_min: -2, bricks: vec![10, 11, 12, 13, 14] };
        assert_eq!(fam.l_max(), 2);
        assert_eq!(fam.reach(), 2);
        assert_eq!(fam.brick_at(-2), Some(10));
        assert_eq!(fam.brick_at(0), Some(12));
        assert_eq!(fam.brick_at(2), Some(14));
        assert_eq!(fam.brick_at(3), None);
        assert_eq!(fam.brick_at(-3), None);
        let lopsided = SeededFamily { l_min: -1, bricks: vec![0, 1, 2, 3] };
        assert_eq!(lopsided.l_max(), 2);
        assert_eq!(lopsided.reach(), 1);
    }

    /// Families for domino tests: family `i` owns bricks `3i` (level
    /// −1), `3i+1` (level 0), `3i+2` (level 1).
    fn domino_stage(n: usize, required: &[(usize, usize)]) -> (DynGraph, Vec<SeededFamily>) {
        let arcs: Vec<(u32, u32)> = required
            .iter()
            .map(|&(p, t)| (3 * p as u32, 3 * t as u32 + 2))
            .collect();
        let g = DynGraph::from_arcs(3 * n as u32, &arcs, &[]);
        let fams = (0..n)
            .map(|i| SeededFamily {
                l_min: -1,
                bricks: vec![3 * i as u32, 3 * i as u32 + 1, 3 * i as u32 + 2],
            })
            .collect();
        (g, fams)
    }

    #[test]
    fn elliptic_domino_finds_depth_and_reports_misses() {
        let n = 3;
        let full: Vec<(usize, usize)> =
            (0..n).flat_map(|p| (0..n).map(move |t| (p, t))).collect();
        let (g, fams) = domino_stage(n, &full);
        let report = domino_elliptic(&g, &fams, 4).unwrap();
        assert_eq!(report.k, Some(1));
        assert!(report.containment.iter().flatten().all(|&x| x));

        let partial: Vec<(usize, usize)> =
            full.iter().copied().filter(|&(p, t)| !(p == 2 && t == 0)).collect();
        let (g, fams) = domino_stage(n, &partial);
        let report = domino_elliptic(&g, &fams, 4).unwrap();
        assert_eq!(report.k, None);
        assert_eq!(report.bound, 1);
        for (i, row) in report.containment.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                assert_eq!(x, !(i == 2 && j == 0), "entry ({i}, {j})");
            }
        }
    }

    /// The hyperbolic containment pattern for even `i`: pasts are
    /// families `i` and `i−1`, futures the four families from `i−2`
    /// through `i+1`.
    fn hyperbolic_required(n: usize) -> Vec<(usize, usize)> {
        let mut req = Vec::new();
        for i in (0..n).step_by(2) {
            for p in [i, (i + n - 1) % n] {
                for t in [(i + n - 2) % n, (i + n - 1) % n, i, (i + 1) % n] {
                    if !req.contains(&(p, t)) {
                        req.push((p, t));
                    }
                }
            }
        }
        req
    }

    #[test]
    fn hyperbolic_domino_index_arithmetic() {
        let n = 6;
        let required = hyperbolic_required(n);
        let (g, fams) = domino_stage(n, &required);
        let report = domino_hyperbolic(&g, &fams, 4).unwrap();
        assert_eq!(report.k, Some(1));
        assert_eq!(report.containment.len(), 3);
        assert!(report.containment.iter().all(|row| row.len() == 8));

        // Dropping the pair (family 5 past → family 1 future) must
        // blank exactly row i = 0, past slot 1 (family 5), target slot
        // 3 (family 1): entry [0][7].
        let partial: Vec<(usize, usize)> =
            required.iter().copied().filter(|&pt| pt != (5, 1)).collect();
        let (g, fams) = domino_stage(n, &partial);
        let report = domino_hyperbolic(&g, &fams, 4).unwrap();
        assert_eq!(report.k, None);
        for (i, row) in report.containment.iter().enumerate() {
            for (s, &x) in row.iter().enumerate() {
                assert_eq!(x, !(i == 0 && s == 7), "entry ({i}, {s})");
            }
        }
    }

    #[test]
    fn domino_rejects_malformed_families() {
        let (g, fams) = domino_stage(3, &[]);
        assert!(domino_elliptic(&g, &fams[..2], 4).is_err());
        assert!(domino_hyperbolic(&g, &fams, 4).is_err());
        let (g, fams) = domino_stage(4, &[]);
        let short: Vec<SeededFamily> = fams
            .iter()
            .map(|f| SeededFamily { l_min: 0, bricks: f.bricks.clone() })
            .collect();
        assert!(domino_hyperbolic(&g, &short, 4).is_err());
    }
}
