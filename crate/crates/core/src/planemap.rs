//! Evaluatable orientation-preserving self-maps of the open unit disk.
//!
//! The disk model is the radial compactification `Φ(w) = w/√(1+|w|²)` of
//! the plane: plane maps (translations, linear saddles, polynomial-sector
//! flows) are conjugated into the disk by `Φ`, while pushes and sampled
//! displacement fields act on disk coordinates directly. On top of bare
//! evaluation the module provides orbit sampling with boundary-limit
//! classification, realization checking of an oriented polygon by a
//! family of orbits, fixed-region detection on a cell grid, and the
//! randomized audits (orientation sign, disk invariance, inverse
//! round-trip) used by the test suites.

use crate::error::{Error, Result};
use crate::geom::{self, Pt};
use crate::grid::{disk_cells, CellSet, Grid};
use crate::polygon::OrientedPolygon;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

/// Radii are clamped below 1 by this margin before inverting `Φ`, which
/// bounds plane coordinates by about `10⁶` and keeps every composite
/// evaluation finite.
const PLANE_CLAMP: f64 = 1.0 - 1e-12;

/// Orbit sampling stops once a point is this close to the boundary:
/// further iterates are numerically indistinguishable.
const BOUNDARY_SATURATION: f64 = 1e-9;

/// Sub-steps of the Runge–Kutta integration behind the sector flow.
const FLOW_STEPS: usize = 96;

/// Map the plane onto the open unit disk, `w ↦ w/√(1+|w|²)`.
pub fn plane_to_disk(w: Pt) -> Pt {
    w * (1.0 / (1.0 + w.norm2()).sqrt())
}

/// Inverse compactification, `z ↦ z/√(1−|z|²)`, clamped near the rim.
pub fn disk_to_plane(z: Pt) -> Pt {
    let r2 = z.norm2().min(PLANE_CLAMP);
    z * (1.0 / (1.0 - r2).sqrt())
}

/// Serializable description of a disk self-map.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    /// Rigid rotation about the origin by `theta` radians.
    Rotation { theta: f64 },
    /// Plane translation by `(dx, dy)`, conjugated into the disk: a
    /// fixed-point-free Brouwer translation.
    Translation { dx: f64, dy: f64 },
    /// Time-one map of the linear saddle `ẋ = x·ln λ, ẏ = −y·ln λ`
    /// (i.e. `(x, y) ↦ (λx, y/λ)` on the plane), conjugated into the
    /// disk. Unstable axis `±x`, stable axis `±y`, unique fixed point 0.
    Saddle { lambda: f64 },
    /// Time-one map of the saturated polynomial field
    /// `ẇ = strength · e^{i·m·phase} · w̄^{m−1} / (1 + |w|^{m−2})`
    /// followed by a rotation by `beta`, conjugated into the disk.
    /// The field has `2m` invariant rays, alternately outgoing (at
    /// `phase + k·2π/m`) and ingoing.
    SectorFlow { m: u32, beta: f64, strength: f64, phase: f64 },
    /// Disk-supported bump moving `from` to `to`:
    /// `h(z) = z + (1 − r²)²·(to − from)` with `r = |z − from|/radius`,
    /// identity outside the radius. A homeomorphism whenever
    /// `|to − from| ≤ 0.6·radius` (enforced).
    Push { from: [f64; 2], to: [f64; 2], radius: f64 },
    /// Bilinearly interpolated displacement field sampled on a node grid
    /// over `[-1,1]²`, loaded from a `BDYN` file (path relative to the
    /// instance file).
    #[serde(rename = "grid")]
    Sampled { path: String },
    /// Composition; maps apply in list order (first entry acts first).
    Composite { maps: Vec<MapSpec> },
}

/// A sampled displacement field on an `r × r` node grid spanning
/// `[-1,1]²` inclusively (spacing `2/(r−1)`), row-major by node row.
#[derive(Debug, Clone)]
pub struct GridField {
    resolution: u32,
    disp: Vec<[f32; 2]>,
}

const BDYN_MAGIC: &[u8; 4] = b"BDYN";
const BDYN_VERSION: u32 = 1;

impl GridField {
    pub fn new(resolution: u32, disp: Vec<[f32; 2]>) -> Result<GridField> {
        if resolution < 2 {
            return Err(Error::InvalidInstance(format!(
                "displacement grid needs at least 2 nodes per side, got {resolution}"
            )));
        }
        let expect = resolution as usize * resolution as usize;
        if disp.len() != expect {
            return Err(Error::InvalidInstance(format!(
                "displacement grid expects {expect} nodes, got {}",
                disp.len()
            )));
        }
        if disp.iter().any(|d| !d[0].is_finite() || !d[1].is_finite()) {
            return Err(Error::InvalidInstance(
                "displacement grid contains non-finite entries".into(),
            ));
        }
        Ok(GridField { resolution, disp })
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    /// Bilinear interpolation of the displacement at `p` (clamped to the
    /// node range, which covers the closed square).
    pub fn sample(&self, p: Pt) -> Pt {
        let n = self.resolution as usize;
        let scale = (n - 1) as f64 / 2.0;
        let u = ((p.x + 1.0) * scale).clamp(0.0, (n - 1) as f64);
        let v = ((p.y + 1.0) * scale).clamp(0.0, (n - 1) as f64);
        let i0 = (u as usize).min(n - 2);
        let j0 = (v as usize).min(n - 2);
        let fu = u - i0 as f64;
        let fv = v - j0 as f64;
        let at = |i: usize, j: usize| -> Pt {
            let d = self.disp[j * n + i];
            Pt::new(d[0] as f64, d[1] as f64)
        };
        let bottom = at(i0, j0) * (1.0 - fu) + at(i0 + 1, j0) * fu;
        let top = at(i0, j0 + 1) * (1.0 - fu) + at(i0 + 1, j0 + 1) * fu;
        bottom * (1.0 - fv) + top * fv
    }

    /// Read a field from the little-endian `BDYN` binary format:
    /// magic `BDYN`, version `u32`, resolution `u32`, then
    /// `resolution²` displacement pairs as `f32`.
    pub fn load(path: &Path) -> Result<GridField> {
        let bytes = std::fs::read(path)?;
        if bytes.len() < 12 || &bytes[0..4] != BDYN_MAGIC {
            return Err(Error::InvalidInstance(format!(
                "{} is not a BDYN displacement file",
                path.display()
            )));
        }
        let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = word(4);
        if version != BDYN_VERSION {
            return Err(Error::InvalidInstance(format!(
                "unsupported BDYN version {version} in {}",
                path.display()
            )));
        }
        let resolution = word(8);
        let nodes = resolution as usize * resolution as usize;
        let expect = 12 + nodes * 8;
        if bytes.len() != expect {
            return Err(Error::InvalidInstance(format!(
                "BDYN payload of {} has {} bytes, expected {expect}",
                path.display(),
                bytes.len()
            )));
        }
        let mut disp = Vec::with_capacity(nodes);
        for k in 0..nodes {
            let o = 12 + k * 8;
            let dx = f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
            let dy = f32::from_le_bytes(bytes[o + 4..o + 8].try_into().unwrap());
            disp.push([dx, dy]);
        }
        GridField::new(resolution, disp)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(12 + self.disp.len() * 8);
        bytes.extend_from_slice(BDYN_MAGIC);
        bytes.extend_from_slice(&BDYN_VERSION.to_le_bytes());
        bytes.extend_from_slice(&self.resolution.to_le_bytes());
        for d in &self.disp {
            bytes.extend_from_slice(&d[0].to_le_bytes());
            bytes.extend_from_slice(&d[1].to_le_bytes());
        }
        std::fs::write(path, bytes)?;
        Ok(())
    }
}

/// A validated, evaluatable disk self-map.
#[derive(Debug, Clone)]
pub struct PlaneMap {
    kind: MapKind,
}

#[derive(Debug, Clone)]
enum MapKind {
    Rotation { theta: f64 },
    Translation { delta: Pt },
    Saddle { lambda: f64 },
    SectorFlow { m: u32, beta: f64, strength: f64, phase: f64 },
    Push { from: Pt, to: Pt, radius: f64 },
    Sampled { field: Arc<GridField> },
    Composite { maps: Vec<PlaneMap> },
}

fn validate_push(from: Pt, to: Pt, radius: f64) -> Result<()> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInstance(format!(
            "push radius must be positive, got {radius}"
        )));
    }
    let hop = to.dist(from);
    if hop > 0.6 * radius {
        return Err(Error::InvalidInstance(format!(
            "push displacement {hop:.4} exceeds 0.6 × radius = {:.4}; the bump would fold",
            0.6 * radius
        )));
    }
    let reach = from.norm().max(to.norm()) + radius;
    if reach >= 1.0 {
        return Err(Error::InvalidInstance(format!(
            "push support reaches radius {reach:.4}, outside the open unit disk"
        )));
    }
    Ok(())
}

impl PlaneMap {
    /// Validate a spec and load any sampled fields (paths are resolved
    /// against `base_dir`).
    pub fn from_spec(spec: &MapSpec, base_dir: &Path) -> Result<PlaneMap> {
        let kind = match spec {
            MapSpec::Rotation { theta } => MapKind::Rotation { theta: *theta },
            MapSpec::Translation { dx, dy } => {
                MapKind::Translation { delta: Pt::new(*dx, *dy) }
            }
            MapSpec::Saddle { lambda } => {
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return Err(Error::InvalidInstance(format!(
                        "saddle ratio must be positive and finite, got {lambda}"
                    )));
                }
                MapKind::Saddle { lambda: *lambda }
            }
            MapSpec::SectorFlow { m, beta, strength, phase } => {
                if *m < 2 {
                    return Err(Error::InvalidInstance(format!(
                        "sector flow needs m ≥ 2, got {m}"
                    )));
                }
                if !(strength.is_finite() && *strength > 0.0) {
                    return Err(Error::InvalidInstance(format!(
                        "sector flow strength must be positive, got {strength}"
                    )));
                }
                MapKind::SectorFlow { m: *m, beta: *beta, strength: *strength, phase: *phase }
            }
            MapSpec::Push { from, to, radius } => {
                let from = Pt::new(from[0], from[1]);
                let to = Pt::new(to[0], to[1]);
                validate_push(from, to, *radius)?;
                MapKind::Push { from, to, radius: *radius }
            }
            MapSpec::Sampled { path } => {
                let field = GridField::load(&base_dir.join(path))?;
                MapKind::Sampled { field: Arc::new(field) }
            }
            MapSpec::Composite { maps } => {
                if maps.is_empty() {
                    return Err(Error::InvalidInstance(
                        "composite map needs at least one factor".into(),
                    ));
                }
                let maps = maps
                    .iter()
                    .map(|m| PlaneMap::from_spec(m, base_dir))
                    .collect::<Result<Vec<_>>>()?;
                MapKind::Composite { maps }
            }
        };
        Ok(PlaneMap { kind })
    }

    /// Build a map around an in-memory displacement field.
    pub fn from_field(field: GridField) -> PlaneMap {
        PlaneMap { kind: MapKind::Sampled { field: Arc::new(field) } }
    }

    fn check_domain(z: Pt) -> Result<()> {
        if z.norm2() < 1.0 && z.x.is_finite() && z.y.is_finite() {
            Ok(())
        } else {
            Err(Error::Geometry(format!(
                "point ({}, {}) lies outside the open unit disk",
                z.x, z.y
            )))
        }
    }

    /// Evaluate `f(z)`; the point must lie in the open disk.
    pub fn eval(&self, z: Pt) -> Result<Pt> {
        Self::check_domain(z)?;
        Ok(self.eval_unchecked(z))
    }

    fn eval_unchecked(&self, z: Pt) -> Pt {
        match &self.kind {
            MapKind::Rotation { theta } => z.rot(*theta),
            MapKind::Translation { delta } => plane_to_disk(disk_to_plane(z) + *delta),
            MapKind::Saddle { lambda } => {
                let w = disk_to_plane(z);
                plane_to_disk(Pt::new(w.x * lambda, w.y / lambda))
            }
            MapKind::SectorFlow { m, beta, strength, phase } => {
                let w = disk_to_plane(z);
                let w = integrate_sector(w, *m, *strength, *phase, 1.0);
                plane_to_disk(w.rot(*beta))
            }
            MapKind::Push { from, to, radius } => {
                let r2 = z.dist(*from) / radius;
                let r2 = r2 * r2;
                if r2 >= 1.0 {
                    z
                } else {
                    let bump = (1.0 - r2) * (1.0 - r2);
                    z + (*to - *from) * bump
                }
            }
            MapKind::Sampled { field } => z + field.sample(z),
            MapKind::Composite { maps } => {
                maps.iter().fold(z, |p, m| m.eval_unchecked(p))
            }
        }
    }

    /// Evaluate `f⁻¹(z)`; exact or contraction-based per kind. Sampled
    /// fields may fail to invert (reported, never guessed).
    pub fn eval_inverse(&self, z: Pt) -> Result<Pt> {
        Self::check_domain(z)?;
        match &self.kind {
            MapKind::Rotation { theta } => Ok(z.rot(-theta)),
            MapKind::Translation { delta } => {
                Ok(plane_to_disk(disk_to_plane(z) - *delta))
            }
            MapKind::Saddle { lambda } => {
                let w = disk_to_plane(z);
                Ok(plane_to_disk(Pt::new(w.x / lambda, w.y * lambda)))
            }
            MapKind::SectorFlow { m, beta, strength, phase } => {
                let w = disk_to_plane(z).rot(-beta);
                let w = integrate_sector(w, *m, *strength, *phase, -1.0);
                Ok(plane_to_disk(w))
            }
            MapKind::Push { from, to, radius } => {
                // h(x) = x + φ(|x−a|/ρ)(b−a) is inverted by the
                // contraction x ← z − φ(|x−a|/ρ)(b−a): the bump's
                // Lipschitz constant is below 0.6·(8/(3√3)) < 0.93.
                let step = *to - *from;
                let mut x = z;
                for _ in 0..500 {
                    let r2 = x.dist(*from) / radius;
                    let r2 = r2 * r2;
                    let bump = if r2 >= 1.0 { 0.0 } else { (1.0 - r2) * (1.0 - r2) };
                    let next = z - step * bump;
                    let moved = next.dist(x);
                    x = next;
                    if moved < 1e-15 {
                        break;
                    }
                }
                Ok(x)
            }
            MapKind::Sampled { field } => {
                // Damped fixed-point iteration with a fixed budget.
                let mut x = z;
                for _ in 0..50 {
                    let fx = x + field.sample(x);
                    x = x + (z - fx) * 0.8;
                }
                let residual = (x + field.sample(x)).dist(z);
                if residual > 1e-6 {
                    return Err(Error::Dynamics(format!(
                        "sampled-field inverse did not converge at ({}, {}): residual {residual:.2e} after 50 iterations",
                        z.x, z.y
                    )));
                }
                Ok(x)
            }
            MapKind::Composite { maps } => {
                let mut p = z;
                for m in maps.iter().rev() {
                    p = m.eval_inverse(p)?;
                }
                Ok(p)
            }
        }
    }

    /// `f^k(z)` for any sign of `k`.
    pub fn iterate(&self, z: Pt, k: i64) -> Result<Pt> {
        let mut p = z;
        for _ in 0..k.unsigned_abs() {
            p = if k > 0 { self.eval(p)? } else { self.eval_inverse(p)? };
        }
        Ok(p)
    }
}

/// Saturated sector field `strength·e^{imφ}·w̄^{m−1}/(1+|w|^{m−2})`.
/// The denominator tames the polynomial so escapes are exponential in
/// time rather than finite-time blow-ups, without changing the phase
/// portrait (the factor is a positive scalar).
fn sector_field(w: Pt, m: u32, strength: f64, phase: f64) -> Pt {
    let conj = Pt::new(w.x, -w.y);
    let mut acc = Pt::new(1.0, 0.0);
    for _ in 0..m - 1 {
        acc = acc.cmul(conj);
    }
    let sat = 1.0 + w.norm().powi(m as i32 - 2);
    let rot = Pt::from_polar(1.0, m as f64 * phase);
    rot.cmul(acc) * (strength / sat)
}

/// Fourth-order Runge–Kutta integration of the sector field over unit
/// time (`time_sign = ±1` selects the flow direction).
fn integrate_sector(w0: Pt, m: u32, strength: f64, phase: f64, time_sign: f64) -> Pt {
    let h = time_sign / FLOW_STEPS as f64;
    let mut w = w0;
    for _ in 0..FLOW_STEPS {
        let k1 = sector_field(w, m, strength, phase);
        let k2 = sector_field(w + k1 * (h / 2.0), m, strength, phase);
        let k3 = sector_field(w + k2 * (h / 2.0), m, strength, phase);
        let k4 = sector_field(w + k3 * h, m, strength, phase);
        w = w + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    w
}

/// A chain of pushes along consecutive waypoints, all with one support
/// radius. Each hop moves its start point onto the next waypoint (up to
/// one float rounding), so a chain can redirect a marked orbit.
pub fn push_chain(waypoints: &[[f64; 2]], radius: f64) -> Result<Vec<MapSpec>> {
    let mut specs = Vec::new();
    for pair in waypoints.windows(2) {
        let from = Pt::new(pair[0][0], pair[0][1]);
        let to = Pt::new(pair[1][0], pair[1][1]);
        validate_push(from, to, radius)?;
        specs.push(MapSpec::Push { from: pair[0], to: pair[1], radius });
    }
    Ok(specs)
}

// ---------------------------------------------------------------------
// Orbits and boundary limits
// ---------------------------------------------------------------------

/// Sampling and classification parameters for orbit analysis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OrbitParams {
    /// Iterates sampled each way (`K`).
    pub steps: usize,
    /// A tail is "at the boundary" once within this distance of it.
    pub eps_bound: f64,
    /// Maximal angular spread of a convergent tail, and the match
    /// tolerance against polygon endpoints.
    pub tol_angle: f64,
}

/// Where one end of an orbit accumulates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum LimitClass {
    /// Tail approaches the boundary circle at a settled angle.
    Boundary { angle: f64 },
    /// Tail stays a definite distance from the boundary.
    Interior,
    /// Neither behaviour is established at this sampling depth.
    Undetermined,
}

impl LimitClass {
    pub fn boundary_angle(&self) -> Option<f64> {
        match self {
            LimitClass::Boundary { angle } => Some(*angle),
            _ => None,
        }
    }
}

/// Convergence diagnostics for one orbit tail.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LimitMeta {
    pub final_boundary_distance: f64,
    pub tail_angular_spread: f64,
    pub samples: usize,
}

/// A doubly sampled orbit with classified limits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub base: [f64; 2],
    /// `z, f(z), …` — stops early at boundary saturation.
    pub forward: Vec<[f64; 2]>,
    /// `z, f⁻¹(z), …` — stops early at boundary saturation.
    pub backward: Vec<[f64; 2]>,
    pub forward_limit: LimitClass,
    pub backward_limit: LimitClass,
    pub forward_meta: LimitMeta,
    pub backward_meta: LimitMeta,
}

fn sample_ray(m: &PlaneMap, z: Pt, steps: usize, forward: bool) -> Vec<Pt> {
    let mut out = vec![z];
    let mut cur = z;
    for _ in 0..steps {
        let next = if forward { m.eval(cur) } else { m.eval_inverse(cur) };
        let Ok(next) = next else { break };
        if !next.x.is_finite() || !next.y.is_finite() {
            break;
        }
        out.push(next);
        if next.norm() >= 1.0 - BOUNDARY_SATURATION {
            break;
        }
        cur = next;
    }
    out
}

fn classify_tail(samples: &[Pt], params: &OrbitParams) -> (LimitClass, LimitMeta) {
    // A quarter of the requested depth, but never more than half of what
    // was actually recorded: orbits that saturate at the boundary early
    // would otherwise drag their transient into the tail.
    let tail_len = (params.steps / 4).max(2).min(samples.len() / 2).max(2) + 1;
    let start = samples.len().saturating_sub(tail_len);
    let tail = &samples[start..];
    let dists: Vec<f64> = tail.iter().map(|p| 1.0 - p.norm()).collect();
    let final_d = *dists.last().expect("tail is nonempty");
    let meta_angle = tail.last().expect("tail is nonempty").angle();
    let spread = tail
        .iter()
        .map(|p| geom::circ_dist(p.angle(), meta_angle))
        .fold(0.0f64, f64::max);
    let meta = LimitMeta {
        final_boundary_distance: final_d,
        tail_angular_spread: spread,
        samples: samples.len(),
    };
    if samples.len() < 3 {
        return (LimitClass::Undetermined, meta);
    }
    let monotone = dists
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15);
    if monotone && final_d < params.eps_bound && spread <= params.tol_angle {
        (LimitClass::Boundary { angle: meta_angle }, meta)
    } else if dists.iter().all(|&d| d >= params.eps_bound) {
        (LimitClass::Interior, meta)
    } else {
        (LimitClass::Undetermined, meta)
    }
}

/// Sample the orbit of `z` both ways and classify both limits.
pub fn orbit(m: &PlaneMap, z: Pt, params: &OrbitParams) -> Result<OrbitRecord> {
    PlaneMap::check_domain(z)?;
    let forward = sample_ray(m, z, params.steps, true);
    let backward = sample_ray(m, z, params.steps, false);
    let (forward_limit, forward_meta) = classify_tail(&forward, params);
    let (backward_limit, backward_meta) = classify_tail(&backward, params);
    Ok(OrbitRecord {
        base: [z.x, z.y],
        forward: forward.iter().map(|p| [p.x, p.y]).collect(),
        backward: backward.iter().map(|p| [p.x, p.y]).collect(),
        forward_limit,
        backward_limit,
        forward_meta,
        backward_meta,
    })
}

// ---------------------------------------------------------------------
// Realization of an oriented polygon by marked orbits
// ---------------------------------------------------------------------

/// Per-edge outcome of the realization check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeStatus {
    Realized,
    Mismatch,
    Undetermined,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeRealization {
    pub edge: usize,
    pub status: EdgeStatus,
    /// Entry / exit angles of the edge's oriented line on the circle.
    pub alpha: f64,
    pub omega: f64,
    pub backward: LimitClass,
    pub forward: LimitClass,
    /// Angular gaps |limit − endpoint| when both are defined.
    pub backward_gap: Option<f64>,
    pub forward_gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealizationStatus {
    /// Every orbit limits onto its edge's endpoints.
    Realized,
    /// Some orbit definitely limits elsewhere.
    Mismatch,
    /// Some limit is undetermined and none mismatches.
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealizationReport {
    pub status: RealizationStatus,
    pub edges: Vec<EdgeRealization>,
    pub orbits: Vec<OrbitRecord>,
}

impl RealizationReport {
    pub fn realized(&self) -> bool {
        self.status == RealizationStatus::Realized
    }
}

/// Check that orbit `zs[i]` realizes edge `i`: backward limit at the
/// edge line's entry angle `α_i`, forward limit at its exit angle `ω_i`,
/// both within `tol_angle`.
pub fn realizes(
    m: &PlaneMap,
    p: &OrientedPolygon,
    zs: &[Pt],
    params: &OrbitParams,
) -> Result<RealizationReport> {
    if zs.len() != p.n() {
        return Err(Error::InvalidInstance(format!(
            "{} marked points for a polygon with {} edges",
            zs.len(),
            p.n()
        )));
    }
    let mut edges = Vec::with_capacity(p.n());
    let mut orbits = Vec::with_capacity(p.n());
    for (i, &z) in zs.iter().enumerate() {
        let (alpha, omega) = p.endpoints(i);
        let rec = orbit(m, z, params)?;
        let backward_gap = rec
            .backward_limit
            .boundary_angle()
            .map(|a| geom::circ_dist(a, alpha));
        let forward_gap = rec
            .forward_limit
            .boundary_angle()
            .map(|a| geom::circ_dist(a, omega));
        let end_status = |limit: &LimitClass, gap: Option<f64>| match limit {
            LimitClass::Undetermined => EdgeStatus::Undetermined,
            LimitClass::Interior => EdgeStatus::Mismatch,
            LimitClass::Boundary { .. } => {
                if gap.expect("boundary limit has a gap") <= params.tol_angle {
                    EdgeStatus::Realized
                } else {
                    EdgeStatus::Mismatch
                }
            }
        };
        let b = end_status(&rec.backward_limit, backward_gap);
        let f = end_status(&rec.forward_limit, forward_gap);
        let status = match (b, f) {
            (EdgeStatus::Mismatch, _) | (_, EdgeStatus::Mismatch) => EdgeStatus::Mismatch,
            (EdgeStatus::Undetermined, _) | (_, EdgeStatus::Undetermined) => {
                EdgeStatus::Undetermined
            }
            _ => EdgeStatus::Realized,
        };
        edges.push(EdgeRealization {
            edge: i,
            status,
            alpha,
            omega,
            backward: rec.backward_limit,
            forward: rec.forward_limit,
            backward_gap,
            forward_gap,
        });
        orbits.push(rec);
    }
    let status = if edges.iter().any(|e| e.status == EdgeStatus::Mismatch) {
        RealizationStatus::Mismatch
    } else if edges.iter().any(|e| e.status == EdgeStatus::Undetermined) {
        RealizationStatus::Inconclusive
    } else {
        RealizationStatus::Realized
    };
    Ok(RealizationReport { status, edges, orbits })
}

// ---------------------------------------------------------------------
// Fixed regions
// ---------------------------------------------------------------------

/// Grid cells that may contain fixed points: centers displaced by less
/// than `eps_fix`, grown by a one-cell safety margin.
#[derive(Debug, Clone)]
pub struct FixedRegionSet {
    pub cells: CellSet,
    pub components: Vec<CellSet>,
    pub eps_fix: f64,
}

impl FixedRegionSet {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Flag near-fixed cells of the grid. Only cells lying entirely inside
/// the open unit disk participate (elsewhere the map is undefined).
pub fn fixed_regions(m: &PlaneMap, grid: &Grid, eps_fix: f64) -> Result<FixedRegionSet> {
    if grid.n() < 16 {
        return Err(Error::Geometry(format!(
            "fixed-region scan needs resolution ≥ 16, got {}",
            grid.n()
        )));
    }
    if !(eps_fix > 0.0) {
        return Err(Error::InvalidInstance(format!(
            "eps_fix must be positive, got {eps_fix}"
        )));
    }
    let inside = disk_cells(grid, 1.0);
    let mut raw = CellSet::new(grid);
    for c in inside.iter() {
        let ctr = grid.center(c);
        if m.eval(ctr)?.dist(ctr) < eps_fix {
            raw.insert(c);
        }
    }
    let cells = raw.dilate(Some(&inside));
    let components = cells.components();
    Ok(FixedRegionSet { cells, components, eps_fix })
}

// ---------------------------------------------------------------------
// Randomized audits
// ---------------------------------------------------------------------

fn sample_disk_point(rng: &mut ChaCha8Rng, max_radius: f64) -> Pt {
    loop {
        let x = rng.gen_range(-max_radius..=max_radius);
        let y = rng.gen_range(-max_radius..=max_radius);
        let p = Pt::new(x, y);
        if p.norm() < max_radius {
            return p;
        }
    }
}

/// Orientation audit: the signed area of small sampled triangles never
/// flips sign under the map. Triangles are sampled at differential
/// scale — a nonlinear homeomorphism routinely reverses the *vertex*
/// orientation of disk-spanning triangles, so only local triangles
/// witness the Jacobian sign. Returns the number of triangles tested.
pub fn audit_orientation(m: &PlaneMap, triangles: usize, seed: u64) -> Result<usize> {
    const H: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tested = 0;
    while tested < triangles {
        let p = sample_disk_point(&mut rng, 0.9);
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        // Opening angle bounded away from 0 and π keeps the triangle
        // well-conditioned relative to the difference scheme's error.
        let psi = rng.gen_range(0.3..std::f64::consts::PI - 0.3);
        let a = p - Pt::from_polar(H, phi);
        let b = p + Pt::from_polar(H, phi);
        let c = p + Pt::from_polar(H, phi + psi);
        let area = (b - a).cross(c - a);
        if area.abs() < 1e-4 * H * H {
            continue;
        }
        let fa = m.eval(a)?;
        let fb = m.eval(b)?;
        let fc = m.eval(c)?;
        let farea = (fb - fa).cross(fc - fa);
        if area.signum() != farea.signum() || farea == 0.0 {
            return Err(Error::Soundness(format!(
                "orientation flips on triangle ({a:?}, {b:?}, {c:?}): {area:.3e} → {farea:.3e}"
            )));
        }
        tested += 1;
    }
    Ok(tested)
}

/// Disk-invariance audit: images of sampled points stay in the open disk.
pub fn audit_disk_image(m: &PlaneMap, samples: usize, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let z = sample_disk_point(&mut rng, 0.9995);
        let fz = m.eval(z)?;
        if !(fz.norm2() < 1.0) {
            return Err(Error::Soundness(format!(
                "image of ({}, {}) leaves the disk: ({}, {})",
                z.x, z.y, fz.x, fz.y
            )));
        }
    }
    Ok(())
}

/// Round-trip audit: `f⁻¹(f(z)) ≈ z` on sampled points. Returns the
/// worst error; fails if it exceeds `tol`.
pub fn audit_inverse_roundtrip(
    m: &PlaneMap,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let z = sample_disk_point(&mut rng, 0.99);
        let back = m.eval_inverse(m.eval(z)?)?;
        worst = worst.max(back.dist(z));
    }
    if worst > tol {
        return Err(Error::Soundness(format!(
            "inverse round-trip error {worst:.3e} exceeds {tol:.1e}"
        )));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_PI_2, FRAC_PI_3, PI, TAU};

    fn rot(theta: f64) -> PlaneMap {
        PlaneMap::from_spec(&MapSpec::Rotation { theta }, Path::new(".")).unwrap()
    }

    fn translation(dx: f64, dy: f64) -> PlaneMap {
        PlaneMap::from_spec(&MapSpec::Translation { dx, dy }, Path::new(".")).unwrap()
    }

    fn saddle(lambda: f64) -> PlaneMap {
        PlaneMap::from_spec(&MapSpec::Saddle { lambda }, Path::new(".")).unwrap()
    }

    fn sector(m: u32, beta: f64, strength: f64, phase: f64) -> PlaneMap {
        PlaneMap::from_spec(
            &MapSpec::SectorFlow { m, beta, strength, phase },
            Path::new("."),
        )
        .unwrap()
    }

    const ORBIT: OrbitParams = OrbitParams { steps: 60, eps_bound: 1e-3, tol_angle: 0.2 };

    #[test]
    fn rotation_fixes_center_and_stays_interior() {
        let m = rot(1.0);
        assert_eq!(m.eval(Pt::ZERO).unwrap(), Pt::ZERO);
        let rec = orbit(&m, Pt::new(0.5, 0.0), &ORBIT).unwrap();
        assert_eq!(rec.forward_limit, LimitClass::Interior);
        assert_eq!(rec.backward_limit, LimitClass::Interior);
        assert!(m.eval(Pt::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn translation_formula_and_boundary_limits() {
        let m = translation(2.0, 0.0);
        let z = Pt::new(0.0, 0.3);
        let w = disk_to_plane(z) + Pt::new(2.0, 0.0);
        assert!(m.eval(z).unwrap().dist(plane_to_disk(w)) < 1e-15);
        let rec = orbit(&m, z, &ORBIT).unwrap();
        let fwd = rec.forward_limit.boundary_angle().expect("forward limit");
        let bwd = rec.backward_limit.boundary_angle().expect("backward limit");
        assert!(geom::circ_dist(fwd, 0.0) < 0.05, "forward angle {fwd}");
        assert!(geom::circ_dist(bwd, PI) < 0.05, "backward angle {bwd}");
        // Fixed-point free: no cell is flagged, even at the rim.
        let grid = Grid::from_cell_size(0.02).unwrap();
        let fixed = fixed_regions(&m, &grid, 0.002).unwrap();
        assert!(fixed.is_empty());
    }

    #[test]
    fn saddle_matches_conjugated_linear_map() {
        let m = saddle(E);
        let z = Pt::new(0.1, 0.2);
        let w = disk_to_plane(z);
        let expect = plane_to_disk(Pt::new(w.x * E, w.y / E));
        assert!(m.eval(z).unwrap().dist(expect) < 1e-15);
        // Axis orbits: forward along the unstable axis, backward along
        // the stable one.
        let rec = orbit(&m, Pt::new(0.2, 0.0), &ORBIT).unwrap();
        assert!(geom::circ_dist(rec.forward_limit.boundary_angle().unwrap(), 0.0) < 1e-9);
        assert_eq!(rec.backward_limit, LimitClass::Interior);
        let rec = orbit(&m, Pt::new(0.0, 0.2), &ORBIT).unwrap();
        assert!(
            geom::circ_dist(rec.backward_limit.boundary_angle().unwrap(), FRAC_PI_2) < 1e-9
        );
        assert_eq!(rec.forward_limit, LimitClass::Interior);
    }

    #[test]
    fn saddle_realizes_the_diamond() {
        // Index −1 quadrilateral with vertices on the axes; each orbit
        // sits in one open quadrant and limits onto the axis endpoints,
        // within 0.1405 rad of the chord endpoints.
        let p = OrientedPolygon::new(
            vec![
                Pt::new(0.85, 0.0),
                Pt::new(0.0, 0.85),
                Pt::new(-0.85, 0.0),
                Pt::new(0.0, -0.85),
            ],
            vec![-1, 1, -1, 1],
        )
        .unwrap();
        assert_eq!(p.index(), -1);
        let zs = [
            Pt::new(0.35, 0.35),
            Pt::new(-0.35, 0.35),
            Pt::new(-0.35, -0.35),
            Pt::new(0.35, -0.35),
        ];
        let m = saddle(E);
        let report = realizes(&m, &p, &zs, &ORBIT).unwrap();
        assert_eq!(report.status, RealizationStatus::Realized, "{:#?}", report.edges);
        for e in &report.edges {
            assert!(e.backward_gap.unwrap() < 0.15);
            assert!(e.forward_gap.unwrap() < 0.15);
        }
        // The same polygon under a rotation: inconclusive or mismatch,
        // never realized.
        let report = realizes(&rot(2.0), &p, &zs, &ORBIT).unwrap();
        assert_ne!(report.status, RealizationStatus::Realized);
    }

    #[test]
    fn sector_flow_rays_and_sectors() {
        let m = sector(3, 0.0, 1.0, 0.0);
        // Point on the outgoing ray at angle 0: forward to the boundary
        // at angle 0, backward into the interior (the origin).
        let rec = orbit(&m, Pt::new(0.3, 0.0), &ORBIT).unwrap();
        assert!(geom::circ_dist(rec.forward_limit.boundary_angle().unwrap(), 0.0) < 1e-6);
        assert_eq!(rec.backward_limit, LimitClass::Interior);
        // Point on the ingoing ray at angle π/3: the mirror behaviour.
        let rec = orbit(&m, Pt::from_polar(0.3, FRAC_PI_3), &ORBIT).unwrap();
        assert!(
            geom::circ_dist(rec.backward_limit.boundary_angle().unwrap(), FRAC_PI_3) < 1e-6
        );
        assert_eq!(rec.forward_limit, LimitClass::Interior);
        // A generic point escapes along its sector's outgoing ray; the
        // basins are bounded by the ingoing rays, so angle 1.9 ∈ (π/3, π)
        // belongs to the ray at 2π/3.
        let rec = orbit(&m, Pt::from_polar(0.3, 1.9), &ORBIT).unwrap();
        assert!(
            geom::circ_dist(rec.forward_limit.boundary_angle().unwrap(), TAU / 3.0) < 1e-3
        );
    }

    #[test]
    fn sector_two_matches_saddle() {
        // m = 2 with strength 2 is the linear saddle with ratio e, up to
        // integration error.
        let m2 = sector(2, 0.0, 2.0, 0.0);
        let s = saddle(E);
        for &z in &[Pt::new(0.1, 0.2), Pt::new(-0.4, 0.3), Pt::new(0.0, -0.6)] {
            assert!(m2.eval(z).unwrap().dist(s.eval(z).unwrap()) < 1e-9);
        }
    }

    #[test]
    fn push_moves_center_exactly_and_is_supported() {
        let from = Pt::new(0.1, 0.0);
        let to = Pt::new(0.15, 0.05);
        let spec = MapSpec::Push { from: [0.1, 0.0], to: [0.15, 0.05], radius: 0.2 };
        let m = PlaneMap::from_spec(&spec, Path::new(".")).unwrap();
        assert!(m.eval(from).unwrap().dist(to) < 1e-15);
        // Identity outside the support, bit-exactly.
        let far = Pt::new(0.5, 0.5);
        assert_eq!(m.eval(far).unwrap(), far);
        let rim = Pt::new(0.1 + 0.2001, 0.0);
        assert_eq!(m.eval(rim).unwrap(), rim);
        // Inverse round-trips tightly.
        for &z in &[from, Pt::new(0.12, 0.03), Pt::new(0.05, -0.08)] {
            assert!(m.eval_inverse(m.eval(z).unwrap()).unwrap().dist(z) < 1e-12);
        }
        // A fold-inducing push is rejected.
        let bad = MapSpec::Push { from: [0.0, 0.0], to: [0.19, 0.0], radius: 0.2 };
        assert!(PlaneMap::from_spec(&bad, Path::new(".")).is_err());
        // Support leaving the disk is rejected.
        let out = MapSpec::Push { from: [0.85, 0.0], to: [0.9, 0.0], radius: 0.2 };
        assert!(PlaneMap::from_spec(&out, Path::new(".")).is_err());
    }

    #[test]
    fn push_chain_threads_waypoints() {
        let pts = [[0.0, 0.0], [0.05, 0.02], [0.1, 0.0], [0.12, -0.05]];
        let specs = push_chain(&pts, 0.15).unwrap();
        assert_eq!(specs.len(), 3);
        let m = PlaneMap::from_spec(
            &MapSpec::Composite { maps: specs },
            Path::new("."),
        )
        .unwrap();
        // The chain needn't move the first point through every waypoint
        // (later bumps disturb earlier images); each individual hop is
        // exact at its own start.
        assert!(m.eval(Pt::new(0.1, 0.0)).is_ok());
        let too_far = [[0.0, 0.0], [0.2, 0.0]];
        assert!(push_chain(&too_far, 0.15).is_err());
    }

    #[test]
    fn sampled_field_round_trips_through_bdyn() {
        // A gentle swirl: displacement = 0.05 · (−y, x), sampled on a
        // 65-node grid.
        let res = 65u32;
        let mut disp = Vec::new();
        for j in 0..res {
            for i in 0..res {
                let x = -1.0 + 2.0 * i as f64 / (res - 1) as f64;
                let y = -1.0 + 2.0 * j as f64 / (res - 1) as f64;
                disp.push([(-0.05 * y) as f32, (0.05 * x) as f32]);
            }
        }
        let field = GridField::new(res, disp).unwrap();
        let dir = std::env::temp_dir().join("diskdyn-bdyn-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("swirl.bdyn");
        field.save(&path).unwrap();
        let loaded = GridField::load(&path).unwrap();
        assert_eq!(loaded.resolution(), res);
        let m = PlaneMap::from_field(loaded);
        let z = Pt::new(0.3, -0.2);
        // Node values are exact on the grid; interpolation is linear, so
        // the sampled displacement matches the formula to f32 precision.
        let fz = m.eval(z).unwrap();
        assert!(fz.dist(z + Pt::new(0.05 * 0.2, 0.05 * 0.3)) < 1e-6);
        let back = m.eval_inverse(fz).unwrap();
        assert!(back.dist(z) < 1e-7);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn composite_composes_in_listed_order() {
        let spec = MapSpec::Composite {
            maps: vec![
                MapSpec::Rotation { theta: 0.3 },
                MapSpec::Rotation { theta: 0.5 },
            ],
        };
        let m = PlaneMap::from_spec(&spec, Path::new(".")).unwrap();
        let z = Pt::new(0.4, -0.1);
        assert!(m.eval(z).unwrap().dist(z.rot(0.8)) < 1e-12);
        assert!(m.eval_inverse(m.eval(z).unwrap()).unwrap().dist(z) < 1e-12);
        // Translation then its inverse: identity within float noise.
        let spec = MapSpec::Composite {
            maps: vec![
                MapSpec::Translation { dx: 0.7, dy: -0.2 },
                MapSpec::Translation { dx: -0.7, dy: 0.2 },
            ],
        };
        let m = PlaneMap::from_spec(&spec, Path::new(".")).unwrap();
        assert!(m.eval(z).unwrap().dist(z) < 1e-8);
    }

    #[test]
    fn fixed_regions_flag_known_fixed_sets() {
        let grid = Grid::from_cell_size(0.02).unwrap();
        // Rotation by 1 rad: a small blob around the unique fixed point.
        let m = rot(1.0);
        let fixed = fixed_regions(&m, &grid, 0.03).unwrap();
        assert!(!fixed.is_empty());
        assert_eq!(fixed.components.len(), 1);
        for &(x, y) in &[(0.005, 0.005), (-0.005, 0.005), (-0.005, -0.005), (0.005, -0.005)]
        {
            let c = grid.cell_of(Pt::new(x, y)).unwrap();
            assert!(fixed.cells.contains(c), "origin cell not flagged");
        }
        for c in fixed.cells.iter() {
            assert!(grid.center(c).norm() < 0.08, "flagged far from origin");
        }
        // Saddle: same story.
        let fixed = fixed_regions(&saddle(E), &grid, 0.025).unwrap();
        assert!(!fixed.is_empty());
        assert_eq!(fixed.components.len(), 1);
        for c in fixed.cells.iter() {
            assert!(grid.center(c).norm() < 0.08);
        }
    }

    #[test]
    fn audits_pass_for_builtins() {
        let maps = [
            rot(2.0 * PI / 3.0),
            translation(2.0, 0.0),
            saddle(E),
            sector(3, 0.1, 1.0, 0.0),
            PlaneMap::from_spec(
                &MapSpec::Push { from: [0.1, 0.0], to: [0.15, 0.05], radius: 0.2 },
                Path::new("."),
            )
            .unwrap(),
        ];
        for m in &maps {
            assert_eq!(audit_orientation(m, 10_000, 7).unwrap(), 10_000);
            audit_disk_image(m, 1_000, 11).unwrap();
            let worst = audit_inverse_roundtrip(m, 1_000, 1e-6, 13).unwrap();
            assert!(worst < 1e-6, "round-trip error {worst}");
        }
    }

    #[test]
    fn map_spec_json_round_trip() {
        let spec = MapSpec::Composite {
            maps: vec![
                MapSpec::Rotation { theta: -0.25 },
                MapSpec::Saddle { lambda: E },
                MapSpec::Push { from: [0.0, 0.1], to: [0.02, 0.1], radius: 0.1 },
            ],
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"kind\":\"composite\""));
        assert!(json.contains("\"kind\":\"saddle\""));
        let back: MapSpec = serde_json::from_str(&json).unwrap();
        let m1 = PlaneMap::from_spec(&spec, Path::new(".")).unwrap();
        let m2 = PlaneMap::from_spec(&back, Path::new(".")).unwrap();
        let z = Pt::new(0.2, -0.3);
        assert_eq!(m1.eval(z).unwrap(), m2.eval(z).unwrap());
    }
}
