//! Dynamics on bricks: the φ/φ⁻ operators, futures and pasts by
//! reachability, attractor/repeller calculus, recurrence certificates
//! from closed chains, and the connectivity audits that back the
//! configuration machinery.
//!
//! Arcs are conservative: `b → b′` whenever a sampled image of `b`
//! lands inside `b′` ("solid") or within `eps_geo` of it ("fat", a
//! superset). All reachability — φ, futures, attractors — runs on the
//! fat graph, so attractors remain attractors of the true dynamics.
//! Recurrence certificates run on the solid graph only and are
//! re-verified geometrically with independent, denser sampling: a
//! false recurrence claim is worse than a missed one.

use crate::brick::{BrickDecomposition, Freeness};
use crate::error::{Error, Result};
use crate::geom::Pt;
use crate::grid::CellSet;
use crate::planemap::PlaneMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Sample lattice per cell edge for independent link verification —
/// deliberately different from the footprint density.
const VERIFY_SAMPLES: u32 = 7;

// ---------------------------------------------------------------------
// Brick sets
// ---------------------------------------------------------------------

/// A set of brick ids of one decomposition, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrickSet {
    n: u32,
    ids: Vec<u32>,
}

impl BrickSet {
    pub fn empty(n: u32) -> BrickSet {
        BrickSet { n, ids: Vec::new() }
    }

    pub fn full(n: u32) -> BrickSet {
        BrickSet { n, ids: (0..n).collect() }
    }

    pub fn singleton(n: u32, b: u32) -> BrickSet {
        assert!(b < n, "brick id {b} out of range {n}");
        BrickSet { n, ids: vec![b] }
    }

    pub fn from_ids(n: u32, ids: impl IntoIterator<Item = u32>) -> BrickSet {
        let mut ids: Vec<u32> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        assert!(ids.last().is_none_or(|&b| b < n), "brick id out of range {n}");
        BrickSet { n, ids }
    }

    pub fn universe(&self) -> u32 {
        self.n
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.ids.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, b: u32) -> bool {
        self.ids.binary_search(&b).is_ok()
    }

    pub fn insert(&mut self, b: u32) -> bool {
        assert!(b < self.n, "brick id {b} out of range {}", self.n);
        match self.ids.binary_search(&b) {
            Ok(_) => false,
            Err(i) => {
                self.ids.insert(i, b);
                true
            }
        }
    }

    fn check_same(&self, other: &BrickSet) {
        assert_eq!(self.n, other.n, "brick sets belong to different decompositions");
    }

    pub fn union(&self, other: &BrickSet) -> BrickSet {
        self.check_same(other);
        let mut ids = self.ids.clone();
        ids.extend_from_slice(&other.ids);
        ids.sort_unstable();
        ids.dedup();
        BrickSet { n: self.n, ids }
    }

    pub fn intersection(&self, other: &BrickSet) -> BrickSet {
        self.check_same(other);
        BrickSet {
            n: self.n,
            ids: self.ids.iter().copied().filter(|&b| other.contains(b)).collect(),
        }
    }

    pub fn difference(&self, other: &BrickSet) -> BrickSet {
        self.check_same(other);
        BrickSet {
            n: self.n,
            ids: self.ids.iter().copied().filter(|&b| !other.contains(b)).collect(),
        }
    }

    pub fn complement(&self) -> BrickSet {
        BrickSet {
            n: self.n,
            ids: (0..self.n).filter(|&b| !self.contains(b)).collect(),
        }
    }

    pub fn intersects(&self, other: &BrickSet) -> bool {
        self.check_same(other);
        let (small, big) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.iter().any(|b| big.contains(b))
    }

    pub fn is_subset_of(&self, other: &BrickSet) -> bool {
        self.check_same(other);
        self.iter().all(|b| other.contains(b))
    }
}

// ---------------------------------------------------------------------
// The dynamical graph
// ---------------------------------------------------------------------

/// Directed graph on brick ids: `b → b′` iff the sampled image of `b`
/// meets `b′` within tolerance. Carries the reverse graph, the solid
/// (certain) sub-graph, and the closure-adjacency of the decomposition.
#[derive(Debug, Clone)]
pub struct DynGraph {
    n: u32,
    out_solid: Vec<Vec<u32>>,
    out_all: Vec<Vec<u32>>,
    in_solid: Vec<Vec<u32>>,
    in_all: Vec<Vec<u32>>,
    touch: Vec<Vec<u32>>,
    free: Vec<bool>,
}

fn transpose(n: usize, out: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let mut rev = vec![Vec::new(); n];
    for (b, targets) in out.iter().enumerate() {
        for &t in targets {
            rev[t as usize].push(b as u32);
        }
    }
    for lst in &mut rev {
        lst.sort_unstable();
    }
    rev
}

impl DynGraph {
    /// Arcs from the decomposition's cached footprints. Per-brick work
    /// is independent and runs in parallel.
    pub fn from_decomposition(dec: &BrickDecomposition) -> DynGraph {
        let n = dec.brick_count();
        let arcs: Vec<(Vec<u32>, Vec<u32>)> =
            (0..n as u32).into_par_iter().map(|b| dec.image_bricks(b)).collect();
        let out_solid: Vec<Vec<u32>> = arcs.iter().map(|(s, _)| s.clone()).collect();
        let out_all: Vec<Vec<u32>> = arcs.into_iter().map(|(_, f)| f).collect();
        let touch: Vec<Vec<u32>> =
            (0..n as u32).map(|b| dec.touch_neighbors(b).to_vec()).collect();
        let free: Vec<bool> = (0..n as u32).map(|b| dec.is_free(b)).collect();
        DynGraph {
            n: n as u32,
            in_solid: transpose(n, &out_solid),
            in_all: transpose(n, &out_all),
            out_solid,
            out_all,
            touch,
            free,
        }
    }

    /// Bare graph from explicit arc lists (no geometry, no adjacency):
    /// the oracle-testing constructor. Fat arcs are extra uncertain
    /// arcs on top of the solid ones.
    pub fn from_arcs(n: u32, solid: &[(u32, u32)], fat_extra: &[(u32, u32)]) -> DynGraph {
        let mut out_solid = vec![Vec::new(); n as usize];
        let mut out_all = vec![Vec::new(); n as usize];
        for &(a, b) in solid {
            assert!(a < n && b < n);
            out_solid[a as usize].push(b);
            out_all[a as usize].push(b);
        }
        for &(a, b) in fat_extra {
            assert!(a < n && b < n);
            out_all[a as usize].push(b);
        }
        for lst in out_solid.iter_mut().chain(&mut out_all) {
            lst.sort_unstable();
            lst.dedup();
        }
        DynGraph {
            n,
            in_solid: transpose(n as usize, &out_solid),
            in_all: transpose(n as usize, &out_all),
            out_solid,
            out_all,
            touch: vec![Vec::new(); n as usize],
            free: vec![true; n as usize],
        }
    }

    pub fn brick_count(&self) -> u32 {
        self.n
    }

    /// The freeness verdict recorded when the graph was built (always
    /// `true` for bare arc-list graphs).
    pub fn is_free_brick(&self, b: u32) -> bool {
        self.free[b as usize]
    }

    pub fn arcs_from(&self, b: u32) -> &[u32] {
        &self.out_all[b as usize]
    }

    pub fn solid_arcs_from(&self, b: u32) -> &[u32] {
        &self.out_solid[b as usize]
    }

    /// The decomposition is free exactly when no brick has a solid
    /// self-loop; a brick is fully free when it has no self-loop at
    /// all. Check both against the decomposition's own verdicts.
    pub fn audit_freeness(&self, dec: &BrickDecomposition) -> Result<()> {
        for b in 0..self.n {
            let solid_loop = self.out_solid[b as usize].binary_search(&b).is_ok();
            let any_loop = self.out_all[b as usize].binary_search(&b).is_ok();
            let verdict = dec.freeness(b);
            let expect_solid = verdict == Freeness::NotFree;
            let expect_any = verdict != Freeness::Free;
            if solid_loop != expect_solid || any_loop != expect_any {
                return Err(Error::Soundness(format!(
                    "brick {b}: self-loops (solid {solid_loop}, any {any_loop}) disagree with freeness {verdict:?}"
                )));
            }
        }
        Ok(())
    }

    /// φ(X): bricks met by the image of X (within tolerance). Need not
    /// contain X.
    pub fn phi(&self, x: &BrickSet) -> BrickSet {
        self.expand(x, &self.out_all)
    }

    /// φ⁻(X): bricks met by the preimage of X.
    pub fn phi_minus(&self, x: &BrickSet) -> BrickSet {
        self.expand(x, &self.in_all)
    }

    fn expand(&self, x: &BrickSet, adj: &[Vec<u32>]) -> BrickSet {
        assert_eq!(x.universe(), self.n, "brick set belongs to another graph");
        let mut ids: Vec<u32> = x.iter().flat_map(|b| adj[b as usize].iter().copied()).collect();
        ids.sort_unstable();
        ids.dedup();
        BrickSet { n: self.n, ids }
    }

    fn closure(&self, seeds: &[u32], adj: &[Vec<u32>]) -> BrickSet {
        let mut seen = vec![false; self.n as usize];
        let mut stack: Vec<u32> = Vec::new();
        for &s in seeds {
            if !seen[s as usize] {
                seen[s as usize] = true;
                stack.push(s);
            }
        }
        while let Some(v) = stack.pop() {
            for &w in &adj[v as usize] {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    stack.push(w);
                }
            }
        }
        BrickSet {
            n: self.n,
            ids: (0..self.n).filter(|&b| seen[b as usize]).collect(),
        }
    }

    /// `[b]_≥` — everything reachable from `b`, including `b`.
    pub fn future(&self, b: u32) -> BrickSet {
        self.closure(&[b], &self.out_all)
    }

    /// `[b]_>` — everything reachable in at least one step.
    pub fn strict_future(&self, b: u32) -> BrickSet {
        let seeds = self.out_all[b as usize].clone();
        self.closure(&seeds, &self.out_all)
    }

    /// `[b]_≤` — everything reaching `b`, including `b`.
    pub fn past(&self, b: u32) -> BrickSet {
        self.closure(&[b], &self.in_all)
    }

    /// `[b]_<` — everything reaching `b` in at least one step.
    pub fn strict_past(&self, b: u32) -> BrickSet {
        let seeds = self.in_all[b as usize].clone();
        self.closure(&seeds, &self.in_all)
    }

    /// The least attractor containing X: the union of the futures of
    /// its bricks.
    pub fn attractor_closure(&self, x: &BrickSet) -> BrickSet {
        self.closure(x.ids(), &self.out_all)
    }

    /// The least repeller containing X.
    pub fn repeller_closure(&self, x: &BrickSet) -> BrickSet {
        self.closure(x.ids(), &self.in_all)
    }

    /// φ(X) ⊆ X.
    pub fn is_attractor(&self, x: &BrickSet) -> bool {
        self.phi(x).is_subset_of(x)
    }

    /// φ⁻(X) ⊆ X.
    pub fn is_repeller(&self, x: &BrickSet) -> bool {
        self.phi_minus(x).is_subset_of(x)
    }

    /// The six equivalent recurrence conditions for one brick:
    /// `b ∈ [b]_>`, `[b]_> = [b]_≥`, `b ∈ [b]_<`, `[b]_< = [b]_≤`,
    /// `[b]_< ∩ [b]_≥ ≠ ∅`, `[b]_≤ ∩ [b]_> ≠ ∅`.
    pub fn six_conditions(&self, b: u32) -> [bool; 6] {
        let fut = self.future(b);
        let sfut = self.strict_future(b);
        let pas = self.past(b);
        let spas = self.strict_past(b);
        [
            sfut.contains(b),
            sfut == fut,
            spas.contains(b),
            spas == pas,
            spas.intersects(&fut),
            pas.intersects(&sfut),
        ]
    }

    /// Evaluate the six conditions for every brick and demand they
    /// agree; returns the per-brick recurrence flag.
    pub fn audit_six_conditions(&self) -> Result<Vec<bool>> {
        let mut flags = Vec::with_capacity(self.n as usize);
        for b in 0..self.n {
            let c = self.six_conditions(b);
            if c.iter().any(|&v| v != c[0]) {
                return Err(Error::Soundness(format!(
                    "brick {b}: the six recurrence conditions disagree: {c:?}"
                )));
            }
            flags.push(c[0]);
        }
        Ok(flags)
    }

    /// Whether the set is connected through closure adjacency (empty
    /// sets count as connected).
    pub fn is_connected_set(&self, x: &BrickSet) -> bool {
        let Some(&start) = x.ids().first() else { return true };
        let mut seen = vec![false; self.n as usize];
        seen[start as usize] = true;
        let mut stack = vec![start];
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.touch[v as usize] {
                if x.contains(w) && !seen[w as usize] {
                    seen[w as usize] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == x.len()
    }

    /// Closure-adjacency components of a set, each sorted, ordered by
    /// smallest member.
    pub fn components_of_set(&self, x: &BrickSet) -> Vec<BrickSet> {
        let mut seen = vec![false; self.n as usize];
        let mut out = Vec::new();
        for b in x.iter() {
            if seen[b as usize] {
                continue;
            }
            let mut comp = Vec::new();
            let mut stack = vec![b];
            seen[b as usize] = true;
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &w in &self.touch[v as usize] {
                    if x.contains(w) && !seen[w as usize] {
                        seen[w as usize] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(BrickSet { n: self.n, ids: comp });
        }
        out
    }

    /// Bricks outside X whose closure meets the closure of X.
    pub fn adjacent_to(&self, x: &BrickSet) -> BrickSet {
        let mut ids: Vec<u32> = x
            .iter()
            .flat_map(|b| self.touch[b as usize].iter().copied())
            .filter(|&b| !x.contains(b))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        BrickSet { n: self.n, ids }
    }

    /// Adjacency-list text export: one line per brick, fat-only arcs
    /// starred.
    pub fn to_adjacency_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for b in 0..self.n as usize {
            write!(out, "{b}:").unwrap();
            for &t in &self.out_all[b] {
                let solid = self.out_solid[b].binary_search(&t).is_ok();
                write!(out, " {t}{}", if solid { "" } else { "*" }).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

// ---------------------------------------------------------------------
// Geometric cross-checks
// ---------------------------------------------------------------------

fn dense_cell_samples(dec: &BrickDecomposition, cells: &CellSet) -> Vec<Pt> {
    let grid = dec.grid();
    let h = grid.cell_size();
    let mut pts = Vec::new();
    for c in cells.iter() {
        let lo = grid.min_corner(c);
        for i in 0..VERIFY_SAMPLES {
            for j in 0..VERIFY_SAMPLES {
                pts.push(
                    lo + Pt::new(
                        h * (i as f64 + 0.5) / VERIFY_SAMPLES as f64,
                        h * (j as f64 + 0.5) / VERIFY_SAMPLES as f64,
                    ),
                );
            }
        }
    }
    pts
}

/// Independent geometric validation of a graph attractor: no densely
/// sampled image point of X's cells may land in a brick outside X.
/// Points leaving the mask are invisible to φ and ignored.
pub fn verify_attractor_geometry(
    dec: &BrickDecomposition,
    map: &PlaneMap,
    x: &BrickSet,
) -> Result<()> {
    verify_invariance(dec, x, |p| map.eval(p), "attractor", "image")
}

/// Mirror check for repellers, via the inverse map.
pub fn verify_repeller_geometry(
    dec: &BrickDecomposition,
    map: &PlaneMap,
    x: &BrickSet,
) -> Result<()> {
    verify_invariance(dec, x, |p| map.eval_inverse(p), "repeller", "preimage")
}

fn verify_invariance(
    dec: &BrickDecomposition,
    x: &BrickSet,
    step: impl Fn(Pt) -> Result<Pt>,
    kind: &str,
    word: &str,
) -> Result<()> {
    let grid = dec.grid();
    for b in x.iter() {
        for p in dense_cell_samples(dec, dec.cells(b)) {
            let q = step(p)?;
            let Some(c) = grid.cell_of(q) else { continue };
            let Some(owner) = dec.owner_of(c) else { continue };
            if !x.contains(owner) {
                return Err(Error::Soundness(format!(
                    "{kind} check failed: the {word} of brick {b} at ({:.4}, {:.4}) lands in brick {owner} outside the set; eps_geo is too coarse for this map",
                    q.x, q.y
                )));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Attractor calculus audit
// ---------------------------------------------------------------------

/// Randomized audit of the four closure properties of attractors and
/// their repeller mirrors.
#[derive(Debug, Clone, Serialize)]
pub struct BrAudit {
    pub sets_sampled: usize,
    /// Checks performed per item (1–4), attractor side.
    pub attractor_checks: [usize; 4],
    /// Checks performed per item (1–4), repeller side.
    pub repeller_checks: [usize; 4],
    pub violations: Vec<String>,
}

impl BrAudit {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn remark_br_audit(g: &DynGraph, trials: usize, seed: u64) -> BrAudit {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = g.brick_count();
    let mut audit = BrAudit {
        sets_sampled: 0,
        attractor_checks: [0; 4],
        repeller_checks: [0; 4],
        violations: Vec::new(),
    };
    if n == 0 {
        return audit;
    }
    let random_seeds = |rng: &mut rand_chacha::ChaCha8Rng| -> BrickSet {
        let k = rng.gen_range(1..=3usize);
        BrickSet::from_ids(n, (0..k).map(|_| rng.gen_range(0..n)))
    };
    for _ in 0..trials {
        audit.sets_sampled += 2;
        let x = g.attractor_closure(&random_seeds(&mut rng));
        let r = g.repeller_closure(&random_seeds(&mut rng));
        for (set, checks, forward) in
            [(&x, &mut audit.attractor_checks, true), (&r, &mut audit.repeller_checks, false)]
        {
            let kind = if forward { "attractor" } else { "repeller" };
            let inside = |b: u32| if forward { g.future(b) } else { g.past(b) };
            let outside = |b: u32| if forward { g.past(b) } else { g.future(b) };
            let strict_in = |b: u32| if forward { g.strict_future(b) } else { g.strict_past(b) };
            // Item 1: members' closures stay inside.
            for b in set.iter() {
                checks[0] += 1;
                if !inside(b).is_subset_of(set) {
                    audit.violations.push(format!(
                        "item 1 ({kind}): brick {b} is a member but its closure escapes"
                    ));
                }
            }
            // Item 2: non-members cannot reach in (sampled).
            for _ in 0..10 {
                let b = rng.gen_range(0..n);
                if set.contains(b) {
                    continue;
                }
                checks[1] += 1;
                if outside(b).intersects(set) {
                    audit.violations.push(format!(
                        "item 2 ({kind}): brick {b} is outside but its co-closure meets the set"
                    ));
                }
            }
            // Item 3: adjacent bricks fall in within one step's closure.
            for b in g.adjacent_to(set).iter() {
                checks[2] += 1;
                if !strict_in(b).intersects(set) {
                    audit.violations.push(format!(
                        "item 3 ({kind}): brick {b} touches the set but its strict closure misses it"
                    ));
                }
            }
        }
        // Item 4: disjoint attractors cannot touch; same for repellers.
        let x2 = g.attractor_closure(&random_seeds(&mut rng));
        if !x.intersects(&x2) {
            audit.attractor_checks[3] += 1;
            if g.adjacent_to(&x).intersects(&x2) {
                audit
                    .violations
                    .push("item 4 (attractor): disjoint attractors are adjacent".into());
            }
        }
        let r2 = g.repeller_closure(&random_seeds(&mut rng));
        if !r.intersects(&r2) {
            audit.repeller_checks[3] += 1;
            if g.adjacent_to(&r).intersects(&r2) {
                audit.violations.push("item 4 (repeller): disjoint repellers are adjacent".into());
            }
        }
    }
    audit
}

// ---------------------------------------------------------------------
// Connectivity audit
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ConnectivityAudit {
    pub bricks: u32,
    /// Futures, strict futures, pasts and strict pasts checked (4 per
    /// brick).
    pub sets_checked: usize,
    /// Components of derived attractors/repellers re-tested.
    pub components_checked: usize,
    pub violations: Vec<String>,
}

impl ConnectivityAudit {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// For every brick: the four reachability sets are connected through
/// closure adjacency. Additionally, every connected component of the
/// complement-attractor of each brick's past is itself an attractor
/// (and mirrored for repellers).
pub fn connectivity_audit(g: &DynGraph) -> ConnectivityAudit {
    let mut audit = ConnectivityAudit {
        bricks: g.brick_count(),
        sets_checked: 0,
        components_checked: 0,
        violations: Vec::new(),
    };
    for b in 0..g.brick_count() {
        let sets = [
            ("future", g.future(b)),
            ("strict future", g.strict_future(b)),
            ("past", g.past(b)),
            ("strict past", g.strict_past(b)),
        ];
        for (name, set) in sets {
            audit.sets_checked += 1;
            if !g.is_connected_set(&set) {
                audit.violations.push(format!("{name} of brick {b} is disconnected"));
            }
        }
        // The complement of a repeller is an attractor whose
        // components must each be attractors (and mirrored).
        let attractor = g.past(b).complement();
        for comp in g.components_of_set(&attractor) {
            audit.components_checked += 1;
            if !g.is_attractor(&comp) {
                audit.violations.push(format!(
                    "a component of the complement of the past of brick {b} is not an attractor"
                ));
            }
        }
        let repeller = g.future(b).complement();
        for comp in g.components_of_set(&repeller) {
            audit.components_checked += 1;
            if !g.is_repeller(&comp) {
                audit.violations.push(format!(
                    "a component of the complement of the future of brick {b} is not a repeller"
                ));
            }
        }
    }
    audit
}

// ---------------------------------------------------------------------
// Closed chains and recurrence certificates
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainLink {
    pub from: u32,
    pub to: u32,
    /// Iterate count: a dense sample of `from` lands in `to` after
    /// exactly `k` steps.
    pub k: u32,
}

/// A verified closed chain of free bricks: the terminal artifact of
/// the recurrent branch. The bricks are free closed disks with
/// pairwise disjoint interiors; any two points of a brick are joined
/// by an arc through its interior, so the chain satisfies the
/// Guillou–Le Roux criterion and certifies recurrence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecurrenceCertificate {
    pub cycle: Vec<u32>,
    pub links: Vec<ChainLink>,
    /// Cell indices of each cycle brick, the disks of the chain.
    pub disks: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum ChainSearch {
    Found { certificate: RecurrenceCertificate },
    NotFound,
}

/// Strongly connected components of the solid graph, deterministic
/// (Kosaraju with ascending-id scans). Each component sorted.
fn solid_sccs(g: &DynGraph) -> Vec<Vec<u32>> {
    let n = g.n as usize;
    let mut order: Vec<u32> = Vec::with_capacity(n);
    let mut state = vec![0u8; n];
    for s in 0..n {
        if state[s] != 0 {
            continue;
        }
        let mut stack: Vec<(u32, usize)> = vec![(s as u32, 0)];
        state[s] = 1;
        while let Some(&mut (v, ref mut i)) = stack.last_mut() {
            let adj = &g.out_solid[v as usize];
            if *i < adj.len() {
                let w = adj[*i];
                *i += 1;
                if state[w as usize] == 0 {
                    state[w as usize] = 1;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
                stack.pop();
            }
        }
    }
    let mut comp_of = vec![u32::MAX; n];
    let mut comps: Vec<Vec<u32>> = Vec::new();
    for &v in order.iter().rev() {
        if comp_of[v as usize] != u32::MAX {
            continue;
        }
        let id = comps.len() as u32;
        let mut comp = vec![v];
        comp_of[v as usize] = id;
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for &w in &g.in_solid[u as usize] {
                if comp_of[w as usize] == u32::MAX {
                    comp_of[w as usize] = id;
                    comp.push(w);
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// The combinatorial half of the chain search: the lowest cycle of the
/// solid graph, as a vertex sequence, or None when the solid graph has
/// no self-loop and no nontrivial strongly connected component.
pub fn find_cycle_combinatorial(g: &DynGraph) -> Option<Vec<u32>> {
    let mut best: Option<&Vec<u32>> = None;
    let comps = solid_sccs(g);
    for comp in &comps {
        let nontrivial = comp.len() >= 2
            || g.out_solid[comp[0] as usize].binary_search(&comp[0]).is_ok();
        if nontrivial && best.is_none_or(|b| comp[0] < b[0]) {
            best = Some(comp);
        }
    }
    let comp = best?;
    let root = comp[0];
    if g.out_solid[root as usize].binary_search(&root).is_ok() {
        return Some(vec![root]);
    }
    // Shortest return path root → … → root inside the component.
    let in_comp = |b: u32| comp.binary_search(&b).is_ok();
    let mut parent = vec![u32::MAX; g.n as usize];
    let mut dist = vec![u32::MAX; g.n as usize];
    let mut queue = std::collections::VecDeque::new();
    dist[root as usize] = 0;
    queue.push_back(root);
    while let Some(v) = queue.pop_front() {
        for &w in &g.out_solid[v as usize] {
            if in_comp(w) && w != root && dist[w as usize] == u32::MAX {
                dist[w as usize] = dist[v as usize] + 1;
                parent[w as usize] = v;
                queue.push_back(w);
            }
        }
    }
    let back = comp
        .iter()
        .copied()
        .filter(|&u| dist[u as usize] != u32::MAX && g.out_solid[u as usize].binary_search(&root).is_ok())
        .min_by_key(|&u| (dist[u as usize], u))
        .expect("a strongly connected component always closes a cycle");
    let mut path = vec![back];
    let mut cur = back;
    while cur != root {
        cur = parent[cur as usize];
        path.push(cur);
    }
    path.reverse();
    Some(path)
}

/// Re-verify one chain link with independent dense sampling: the least
/// `k ∈ [1, k_link]` whose `k`-th image of `from` lands inside `to`.
fn verify_link(
    dec: &BrickDecomposition,
    map: &PlaneMap,
    from: u32,
    to: u32,
    k_link: u32,
) -> Result<u32> {
    let grid = dec.grid();
    let to_cells = dec.cells(to);
    let mut pts = dense_cell_samples(dec, dec.cells(from));
    for k in 1..=k_link {
        let mut next = Vec::with_capacity(pts.len());
        for p in pts {
            if let Ok(q) = map.eval(p) {
                next.push(q);
            }
        }
        pts = next;
        if pts.is_empty() {
            break;
        }
        if pts
            .iter()
            .any(|&q| grid.cell_of(q).is_some_and(|c| to_cells.contains(c)))
        {
            return Ok(k);
        }
    }
    Err(Error::Dynamics(format!(
        "chain link {from} → {to} is not reproducible within {k_link} iterates; the certificate is combinatorial only"
    )))
}

/// Search for a closed chain of free bricks. A found cycle is packaged
/// as a [`RecurrenceCertificate`] with every link re-verified
/// geometrically; absence means the solid graph is acyclic (no brick
/// lies in its own strict solid future).
pub fn find_closed_chain(
    g: &DynGraph,
    dec: &BrickDecomposition,
    map: &PlaneMap,
    k_link: u32,
) -> Result<ChainSearch> {
    let free_audit = dec.audit_free();
    if !free_audit.clean() || (0..g.brick_count()).any(|b| !g.is_free_brick(b)) {
        return Err(Error::Decomposition(format!(
            "chain search requires a free decomposition; offenders: unknown {:?}, not free {:?}",
            free_audit.unknown, free_audit.not_free
        )));
    }
    let Some(cycle) = find_cycle_combinatorial(g) else {
        return Ok(ChainSearch::NotFound);
    };
    let mut links = Vec::with_capacity(cycle.len());
    for i in 0..cycle.len() {
        let from = cycle[i];
        let to = cycle[(i + 1) % cycle.len()];
        let k = verify_link(dec, map, from, to, k_link)?;
        links.push(ChainLink { from, to, k });
    }
    let disks = cycle.iter().map(|&b| dec.cells(b).indices()).collect();
    Ok(ChainSearch::Found {
        certificate: RecurrenceCertificate { cycle, links, disks },
    })
}
