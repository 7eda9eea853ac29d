//! Oriented convex polygons inscribed in the open unit disk.
//!
//! A polygon here is a strictly convex vertex cycle in counterclockwise
//! order in which every edge carries an orientation of its supporting line
//! (`+1` = along the traversal, `-1` = against it). The oriented edge
//! lines are the combinatorial skeleton of a collection of orbits of a
//! disk homeomorphism: each line records the chord along which one orbit
//! crosses the disk.
//!
//! Everything combinatorial — which side of each oriented line the polygon
//! lies on, the turning index built from side changes, minimality under
//! edge removal, the reduction to an index-one triangle — is computed in
//! exact rational arithmetic so that every verdict is a sign, never a
//! tolerance call. Only the chord endpoint angles on the unit circle are
//! floating point.

use crate::error::{Error, Result};
use crate::geom::{self, chord_angles, sgn, Pt, RPt};
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Side of an oriented line, seen along its direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Which end of a chord: where the oriented line enters the circle
/// (`Alpha`) or where it leaves (`Omega`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndKind {
    Alpha,
    Omega,
}

/// One of the `2n` chord endpoints of a polygon's edge lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointId {
    pub edge: usize,
    pub kind: EndKind,
}

impl EndpointId {
    pub fn alpha(edge: usize) -> Self {
        EndpointId { edge, kind: EndKind::Alpha }
    }
    pub fn omega(edge: usize) -> Self {
        EndpointId { edge, kind: EndKind::Omega }
    }
}

impl fmt::Display for EndpointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EndKind::Alpha => write!(f, "alpha_{}", self.edge),
            EndKind::Omega => write!(f, "omega_{}", self.edge),
        }
    }
}

/// Serialized form of an oriented polygon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolygonSpec {
    /// Vertices in counterclockwise order, strictly inside the unit disk.
    pub vertices: Vec<[f64; 2]>,
    /// Orientation of each edge's supporting line relative to the
    /// traversal from vertex `i` to vertex `i+1`: `+1` along, `-1` against.
    pub edge_dir: Vec<i8>,
}

/// A strictly convex counterclockwise polygon with oriented edge lines,
/// inscribed in the open unit disk.
#[derive(Debug, Clone)]
pub struct OrientedPolygon {
    verts: Vec<RPt>,
    verts_f: Vec<Pt>,
    edge_dir: Vec<i8>,
}

/// How a reduction ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReductionKind {
    /// No edge is removable; the polygon is already minimal.
    MinimalPolygon,
    /// A removable edge cut off a triangle of index one; that triangle is
    /// returned instead of continuing the reduction.
    IndexOneTriangle,
}

/// Result of repeatedly removing removable edges.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub kind: ReductionKind,
    /// The final polygon: minimal, or the extracted index-one triangle.
    pub polygon: OrientedPolygon,
    /// Original edge ids dropped along the way, in drop order. When the
    /// reduction ends in an index-one triangle, the edge whose removal
    /// produced that triangle is *not* listed here: its line is one of the
    /// triangle's own edges.
    pub dropped: Vec<usize>,
    /// Original edge id supporting each edge of `polygon`, in edge order.
    pub surviving: Vec<usize>,
    /// Index of each cut-off triangle, in drop order. All zeros except
    /// possibly a trailing one (which ends the reduction).
    pub triangle_indices: Vec<i64>,
    /// When the reduction ends in an index-one triangle, the polygon that
    /// remains after cutting that triangle off; `None` for a minimal
    /// result (there `polygon` is itself the remainder). Removing an edge
    /// *grows* the half-plane intersection by the cut-off triangle, so the
    /// indices satisfy `index(remainder) = index(input) + Σ triangle_indices`.
    pub remainder: Option<OrientedPolygon>,
}

impl Reduction {
    /// The polygon left after all cuts (for an index-one-triangle outcome,
    /// the part that is *not* the returned triangle).
    pub fn remaining_polygon(&self) -> &OrientedPolygon {
        self.remainder.as_ref().unwrap_or(&self.polygon)
    }
}

/// Pairwise separation report for the `2n` chord endpoints.
#[derive(Debug, Clone)]
pub struct EndpointSeparation {
    /// Smallest circular distance between any two endpoints.
    pub min_separation: f64,
    /// Pairs closer than the tolerance, with their distance.
    pub clashes: Vec<(EndpointId, EndpointId, f64)>,
}

impl EndpointSeparation {
    pub fn distinct(&self) -> bool {
        self.clashes.is_empty()
    }
}

/// Outcome of comparing the circular order of the chord endpoints against
/// a prescribed cyclic word.
#[derive(Debug, Clone)]
pub struct WordCheck {
    pub holds: bool,
    /// The prescribed cyclic word (canonical starting point).
    pub expected: Vec<EndpointId>,
    /// The endpoints in counterclockwise order on the circle.
    pub actual: Vec<EndpointId>,
    /// Set when a precondition failed rather than the order itself.
    pub note: Option<String>,
}

impl OrientedPolygon {
    /// Build and validate a polygon from floating-point vertices.
    pub fn new(verts: Vec<Pt>, edge_dir: Vec<i8>) -> Result<Self> {
        let rational: Vec<RPt> = verts.iter().map(|&p| RPt::from_pt(p)).collect();
        Self::from_rational(rational, edge_dir)
    }

    pub fn from_spec(spec: &PolygonSpec) -> Result<Self> {
        Self::new(
            spec.vertices.iter().map(|v| Pt::new(v[0], v[1])).collect(),
            spec.edge_dir.clone(),
        )
    }

    pub fn to_spec(&self) -> PolygonSpec {
        PolygonSpec {
            vertices: self.verts_f.iter().map(|p| [p.x, p.y]).collect(),
            edge_dir: self.edge_dir.clone(),
        }
    }

    /// Build and validate a polygon from exact vertices.
    pub fn from_rational(verts: Vec<RPt>, edge_dir: Vec<i8>) -> Result<Self> {
        let n = verts.len();
        if n < 3 {
            return Err(Error::InvalidPolygon(format!(
                "need at least 3 vertices, got {n}"
            )));
        }
        if edge_dir.len() != n {
            return Err(Error::InvalidPolygon(format!(
                "{} edge orientations for {} edges",
                edge_dir.len(),
                n
            )));
        }
        if let Some(d) = edge_dir.iter().find(|d| **d != 1 && **d != -1) {
            return Err(Error::InvalidPolygon(format!(
                "edge orientations must be +1 or -1, got {d}"
            )));
        }
        let one = BigRational::one();
        for (k, v) in verts.iter().enumerate() {
            if v.norm2() >= one {
                return Err(Error::InvalidPolygon(format!(
                    "vertex {k} does not lie in the open unit disk"
                )));
            }
        }
        for i in 0..n {
            let a = &verts[i];
            let b = &verts[(i + 1) % n];
            let t = b.sub(a);
            if t.is_zero() {
                return Err(Error::InvalidPolygon(format!(
                    "vertices {i} and {} coincide",
                    (i + 1) % n
                )));
            }
            for (j, v) in verts.iter().enumerate() {
                if j == i || j == (i + 1) % n {
                    continue;
                }
                if sgn(&t.cross(&v.sub(a))) <= 0 {
                    return Err(Error::InvalidPolygon(format!(
                        "not strictly convex counterclockwise: vertex {j} is not strictly left of edge {i}"
                    )));
                }
            }
        }
        let verts_f = verts.iter().map(|v| v.to_pt()).collect();
        Ok(OrientedPolygon { verts, verts_f, edge_dir })
    }

    pub fn n(&self) -> usize {
        self.verts.len()
    }

    pub fn vertex(&self, i: usize) -> Pt {
        self.verts_f[i]
    }

    pub fn vertices(&self) -> &[Pt] {
        &self.verts_f
    }

    pub fn vertex_exact(&self, i: usize) -> &RPt {
        &self.verts[i]
    }

    pub fn edge_dir(&self, i: usize) -> i8 {
        self.edge_dir[i]
    }

    pub fn edge_dirs(&self) -> &[i8] {
        &self.edge_dir
    }

    /// Oriented direction of edge line `i`, exact.
    fn rdir(&self, i: usize) -> RPt {
        let t = self.verts[(i + 1) % self.n()].sub(&self.verts[i]);
        if self.edge_dir[i] == 1 {
            t
        } else {
            t.neg()
        }
    }

    /// A point on edge line `i` and its oriented unit direction.
    pub fn line(&self, i: usize) -> (Pt, Pt) {
        let p = self.verts_f[i];
        let t = self.verts_f[(i + 1) % self.n()] - p;
        (p, (t * f64::from(self.edge_dir[i])).unit())
    }

    /// Exact vertex centroid — an interior point of a convex polygon.
    fn centroid(&self) -> RPt {
        let mut acc = RPt::new(BigRational::from_integer(0.into()), BigRational::from_integer(0.into()));
        for v in &self.verts {
            acc = acc.add(v);
        }
        let inv_n = BigRational::new(1.into(), (self.n() as i64).into());
        acc.scale(&inv_n)
    }

    /// Which side of oriented edge line `i` the polygon lies on. Exact.
    pub fn side_of(&self, i: usize) -> Side {
        let c = self.centroid();
        let d = self.rdir(i);
        match sgn(&d.cross(&c.sub(&self.verts[i]))) {
            1 => Side::Left,
            -1 => Side::Right,
            _ => unreachable!("interior reference point cannot lie on an edge line"),
        }
    }

    pub fn sides(&self) -> Vec<Side> {
        (0..self.n()).map(|i| self.side_of(i)).collect()
    }

    /// Whether every oriented edge line has the polygon on its left.
    pub fn positively_oriented(&self) -> bool {
        (0..self.n()).all(|i| self.side_of(i) == Side::Left)
    }

    /// Side change at vertex `i`: 1 when edges `i-1` and `i` put the
    /// polygon on different sides of their lines, else 0.
    pub fn delta(&self, i: usize) -> u8 {
        let prev = (i + self.n() - 1) % self.n();
        u8::from(self.side_of(prev) != self.side_of(i))
    }

    pub fn delta_sum(&self) -> i64 {
        (0..self.n()).map(|i| i64::from(self.delta(i))).sum()
    }

    /// Polygon index: one minus half the number of side changes around
    /// the cycle. Always an integer, always at most 1.
    pub fn index(&self) -> i64 {
        let s = self.delta_sum();
        assert!(s % 2 == 0, "side changes around a closed cycle must be even");
        1 - s / 2
    }

    /// Chord endpoint angles `(alpha, omega)` of oriented edge line `i` on
    /// the unit circle: first and last intersection along the orientation.
    pub fn endpoints(&self, i: usize) -> (f64, f64) {
        let p = self.verts_f[i];
        let t = self.verts_f[(i + 1) % self.n()] - p;
        chord_angles(p, t * f64::from(self.edge_dir[i]))
            .expect("edge line of an inscribed polygon is a secant of the unit circle")
    }

    pub fn endpoint_angles(&self) -> Vec<(f64, f64)> {
        (0..self.n()).map(|i| self.endpoints(i)).collect()
    }

    /// All `2n` endpoints with labels.
    pub fn labeled_endpoints(&self) -> Vec<(EndpointId, f64)> {
        let mut out = Vec::with_capacity(2 * self.n());
        for i in 0..self.n() {
            let (a, w) = self.endpoints(i);
            out.push((EndpointId::alpha(i), a));
            out.push((EndpointId::omega(i), w));
        }
        out
    }

    /// Pairwise circular separation of the `2n` endpoints against a
    /// tolerance.
    pub fn endpoint_separation(&self, tol: f64) -> EndpointSeparation {
        let pts = self.labeled_endpoints();
        let mut min_separation = f64::INFINITY;
        let mut clashes = Vec::new();
        for a in 0..pts.len() {
            for b in (a + 1)..pts.len() {
                let d = geom::circ_dist(pts[a].1, pts[b].1);
                if d < min_separation {
                    min_separation = d;
                }
                if d < tol {
                    clashes.push((pts[a].0, pts[b].0, d));
                }
            }
        }
        EndpointSeparation { min_separation, clashes }
    }

    /// Outward normal of edge `i` (the interior is strictly left of the
    /// counterclockwise traversal, so outward is the right-hand normal).
    fn outward_normal(&self, i: usize) -> RPt {
        let t = self.verts[(i + 1) % self.n()].sub(&self.verts[i]);
        RPt::new(t.y.clone(), -t.x.clone())
    }

    /// Whether dropping edge `i` leaves a bounded polygon: the remaining
    /// outward normals must positively span the plane, i.e. sorted by
    /// angle every counterclockwise gap between consecutive normals is
    /// strictly less than π. Exact.
    pub fn removable(&self, i: usize) -> bool {
        let mut normals: Vec<RPt> = (0..self.n())
            .filter(|j| *j != i)
            .map(|j| self.outward_normal(j))
            .collect();
        normals.sort_by(|a, b| geom::angular_cmp(a, b));
        (0..normals.len())
            .all(|k| geom::ccw_gap_lt_pi(&normals[k], &normals[(k + 1) % normals.len()]))
    }

    /// A polygon is minimal when no edge is removable.
    pub fn is_minimal(&self) -> bool {
        (0..self.n()).all(|i| !self.removable(i))
    }

    /// Repeatedly drop the lowest removable edge. Each removal replaces
    /// the two vertices of the dropped edge by the apex of its two
    /// neighbouring edge lines and cuts off a triangle spanned by the
    /// three lines involved; the triangle inherits the lines'
    /// orientations. If that triangle has index one it is returned
    /// immediately; otherwise the index of the shrunk polygon equals the
    /// index of the original and the loop continues until minimality.
    ///
    /// Fails when an apex does not lie in the open unit disk.
    pub fn reduce(&self) -> Result<Reduction> {
        let mut cur = self.clone();
        let mut ids: Vec<usize> = (0..self.n()).collect();
        let mut dropped = Vec::new();
        let mut triangle_indices = Vec::new();
        let original_index = self.index();
        let one = BigRational::one();
        loop {
            let Some(i) = (0..cur.n()).find(|&i| cur.removable(i)) else {
                return Ok(Reduction {
                    kind: ReductionKind::MinimalPolygon,
                    polygon: cur,
                    dropped,
                    surviving: ids,
                    triangle_indices,
                    remainder: None,
                });
            };
            let n = cur.n();
            let prev = (i + n - 1) % n;
            let next = (i + 1) % n;
            let q = geom::line_intersection(
                &cur.verts[prev],
                &cur.rdir(prev),
                &cur.verts[next],
                &cur.rdir(next),
            )
            .ok_or_else(|| {
                Error::Geometry(
                    "neighbouring edge lines of a removable edge cannot be parallel".into(),
                )
            })?;
            if q.norm2() >= one {
                let qf = q.to_pt();
                return Err(Error::Geometry(format!(
                    "reduction apex ({:.4}, {:.4}) for edge {} leaves the open unit disk",
                    qf.x, qf.y, ids[i]
                )));
            }

            // Triangle cut off by the dropped edge: vertices v_i, apex,
            // v_{i+1} in counterclockwise order, edges supported by the
            // lines prev / next / i with inherited orientations.
            let vi = cur.verts[i].clone();
            let vn = cur.verts[next].clone();
            if sgn(&q.sub(&vi).cross(&vn.sub(&vi))) <= 0 {
                return Err(Error::Soundness(
                    "reduction apex must lie strictly right of the dropped edge".into(),
                ));
            }
            let inherit = |edge_vec: &RPt, line: usize| -> i8 {
                match sgn(&edge_vec.dot(&cur.rdir(line))) {
                    1 => 1,
                    -1 => -1,
                    _ => unreachable!("triangle edge is parallel to its supporting line"),
                }
            };
            let t_dirs = vec![
                inherit(&q.sub(&vi), prev),
                inherit(&vn.sub(&q), next),
                inherit(&vi.sub(&vn), i),
            ];
            let tri = OrientedPolygon::from_rational(vec![vi, q.clone(), vn], t_dirs)?;
            let ti = tri.index();
            if ti != 0 && ti != 1 {
                return Err(Error::Soundness(format!(
                    "cut-off triangle has index {ti}, expected 0 or 1"
                )));
            }
            triangle_indices.push(ti);

            // Shrink: walk the cycle from the apex, skipping the dropped
            // edge and its two vertices.
            let mut new_verts = vec![q];
            let mut new_dirs = vec![cur.edge_dir[next]];
            let mut new_ids = vec![ids[next]];
            let mut k = (next + 1) % n;
            while k != i {
                new_verts.push(cur.verts[k].clone());
                new_dirs.push(cur.edge_dir[k]);
                new_ids.push(ids[k]);
                k = (k + 1) % n;
            }
            let shrunk = OrientedPolygon::from_rational(new_verts, new_dirs)?;
            if shrunk.index() != original_index + ti {
                return Err(Error::Soundness(format!(
                    "expected index {} after gluing on an index-{ti} triangle, got {}",
                    original_index + ti,
                    shrunk.index()
                )));
            }
            if ti == 1 {
                return Ok(Reduction {
                    kind: ReductionKind::IndexOneTriangle,
                    polygon: tri,
                    dropped,
                    surviving: vec![ids[prev], ids[next], ids[i]],
                    triangle_indices,
                    remainder: Some(shrunk),
                });
            }
            dropped.push(ids[i]);
            ids = new_ids;
            cur = shrunk;
        }
    }

    fn sorted_endpoints(&self) -> Vec<(EndpointId, f64)> {
        let mut pts = self.labeled_endpoints();
        pts.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("endpoint angles are finite"));
        pts
    }

    fn word_check(&self, expected: Vec<EndpointId>, note: Option<String>) -> WordCheck {
        let actual: Vec<EndpointId> = self.sorted_endpoints().into_iter().map(|(id, _)| id).collect();
        if let Some(note) = note {
            return WordCheck { holds: false, expected, actual, note: Some(note) };
        }
        if !self.endpoint_separation(1e-9).distinct() {
            return WordCheck {
                holds: false,
                expected,
                actual,
                note: Some("coincident endpoints make the circular order ill-defined".into()),
            };
        }
        let holds = is_cyclic_rotation(&actual, &expected);
        WordCheck { holds, expected, actual, note: None }
    }

    /// Check the chord endpoints against the elliptic cyclic word
    /// `ω_0 α_2 ω_1 α_3 … ω_{n-1} α_1`: going counterclockwise around the
    /// circle, the exit of each line is followed by the entry of the line
    /// two steps later. Requires an index-one, positively oriented
    /// polygon.
    pub fn check_elliptic_endpoint_order(&self) -> WordCheck {
        let n = self.n();
        let expected: Vec<EndpointId> = (0..n)
            .flat_map(|i| [EndpointId::omega(i), EndpointId::alpha((i + 2) % n)])
            .collect();
        let note = if self.index() != 1 {
            Some(format!("requires index 1, polygon has index {}", self.index()))
        } else if !self.positively_oriented() {
            Some("requires a positively oriented polygon (all sides Left)".into())
        } else {
            None
        };
        self.word_check(expected, note)
    }

    /// Check the chord endpoints against the hyperbolic cyclic word
    /// `α_i α_{i-1} ω_{i+1} ω_i` concatenated over every other `i`.
    /// Requires an even number of edges with alternating sides (every
    /// delta equals 1). The four-endpoint blocks are anchored on the
    /// edges whose interior side is Left; with alternating sides these
    /// are exactly the edges of one parity, so the word is well defined
    /// under relabelling.
    pub fn check_hyperbolic_endpoint_order(&self) -> WordCheck {
        let n = self.n();
        let start = usize::from(self.side_of(0) == Side::Right);
        let expected: Vec<EndpointId> = (0..n)
            .step_by(2)
            .map(|k| (k + start) % n)
            .flat_map(|i| {
                [
                    EndpointId::alpha(i),
                    EndpointId::alpha((i + n - 1) % n),
                    EndpointId::omega((i + 1) % n),
                    EndpointId::omega(i),
                ]
            })
            .collect();
        let note = if n % 2 != 0 {
            Some(format!("requires an even number of edges, got {n}"))
        } else if (0..n).any(|i| self.delta(i) != 1) {
            Some("requires alternating sides (every delta equal to 1)".into())
        } else {
            None
        };
        self.word_check(expected, note)
    }
}

fn is_cyclic_rotation(actual: &[EndpointId], expected: &[EndpointId]) -> bool {
    if actual.len() != expected.len() {
        return false;
    }
    let m = actual.len();
    (0..m).any(|shift| (0..m).all(|k| actual[(shift + k) % m] == expected[k]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn poly(verts: &[(f64, f64)], dirs: &[i8]) -> OrientedPolygon {
        OrientedPolygon::new(
            verts.iter().map(|&(x, y)| Pt::new(x, y)).collect(),
            dirs.to_vec(),
        )
        .unwrap()
    }

    fn regular(n: usize, r: f64, phase: f64) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let a = phase + TAU * k as f64 / n as f64;
                (r * a.cos(), r * a.sin())
            })
            .collect()
    }

    fn square(s: f64) -> Vec<(f64, f64)> {
        vec![(s, s), (-s, s), (-s, -s), (s, -s)]
    }

    #[test]
    fn validation_rejects_bad_input() {
        let sq = square(0.3);
        let pts: Vec<Pt> = sq.iter().map(|&(x, y)| Pt::new(x, y)).collect();
        // wrong orientation count
        assert!(OrientedPolygon::new(pts.clone(), vec![1, 1, 1]).is_err());
        // invalid orientation value
        assert!(OrientedPolygon::new(pts.clone(), vec![1, 0, 1, 1]).is_err());
        // clockwise order
        let mut cw = pts.clone();
        cw.reverse();
        assert!(OrientedPolygon::new(cw, vec![1; 4]).is_err());
        // vertex outside the disk
        assert!(OrientedPolygon::new(
            vec![Pt::new(0.9, 0.9), Pt::new(-0.3, 0.3), Pt::new(0.0, -0.4)],
            vec![1; 3]
        )
        .is_err());
        // collinear triple
        assert!(OrientedPolygon::new(
            vec![Pt::new(-0.4, 0.0), Pt::new(0.0, 0.0), Pt::new(0.4, 0.0), Pt::new(0.0, 0.4)],
            vec![1; 4]
        )
        .is_err());
        // fewer than three vertices
        assert!(OrientedPolygon::new(vec![Pt::new(0.1, 0.0), Pt::new(0.0, 0.1)], vec![1, 1]).is_err());
    }

    #[test]
    fn alternating_square_index() {
        let p = poly(&square(0.35), &[1, -1, 1, -1]);
        assert_eq!(p.sides(), vec![Side::Left, Side::Right, Side::Left, Side::Right]);
        assert_eq!(p.delta_sum(), 4);
        assert_eq!(p.index(), -1);
        assert!(!p.positively_oriented());
    }

    #[test]
    fn ccw_pentagon_index() {
        let p = poly(&regular(5, 0.45, PI / 2.0), &[1; 5]);
        assert!(p.sides().iter().all(|s| *s == Side::Left));
        assert_eq!(p.delta_sum(), 0);
        assert_eq!(p.index(), 1);
        assert!(p.positively_oriented());
    }

    #[test]
    fn alternating_hexagon_index() {
        let p = poly(&regular(6, 0.5, PI / 2.0), &[1, -1, 1, -1, 1, -1]);
        assert_eq!(p.delta_sum(), 6);
        assert_eq!(p.index(), -2);
    }

    #[test]
    fn mixed_orientation_square() {
        // One side flipped: two changes, index 0.
        let p = poly(&square(0.3), &[1, 1, 1, -1]);
        assert_eq!(p.delta_sum(), 2);
        assert_eq!(p.index(), 0);
    }

    #[test]
    fn triangles_are_minimal() {
        let p = poly(&[(0.4, 0.0), (-0.1, 0.35), (-0.2, -0.3)], &[1, 1, 1]);
        assert!(p.is_minimal());
        assert!((0..3).all(|i| !p.removable(i)));
    }

    #[test]
    fn parallelogram_is_minimal() {
        let p = poly(&[(0.5, 0.1), (-0.1, 0.4), (-0.5, -0.1), (0.1, -0.4)], &[1, -1, 1, -1]);
        assert!(p.is_minimal());
        // axis-aligned square too
        assert!(poly(&square(0.35), &[1, -1, 1, -1]).is_minimal());
    }

    #[test]
    fn trapezoid_is_not_minimal() {
        // Horizontal top and bottom are parallel; the slanted sides are
        // not. Removing the top succeeds, removing a slanted side leaves
        // the two parallel lines bounding an unbounded strip.
        let p = poly(
            &[(0.5, -0.2), (0.3, 0.3), (-0.3, 0.3), (-0.5, -0.2)],
            &[1, 1, 1, 1],
        );
        assert!(!p.removable(0));
        assert!(p.removable(1));
        assert!(!p.is_minimal());
    }

    #[test]
    fn regular_pentagon_not_minimal() {
        let p = poly(&regular(5, 0.45, PI / 2.0), &[1; 5]);
        assert!((0..5).all(|i| p.removable(i)));
        assert!(!p.is_minimal());
    }

    #[test]
    fn pentagon_reduction_reaches_minimal_triangle() {
        // Neighbouring edge lines of a regular pentagon with circumradius
        // r meet at distance r·cos36°/cos72° ≈ 2.618·r, so the apexes stay
        // inside the disk only for r below ≈ 0.382.
        let p = poly(&regular(5, 0.35, PI / 2.0), &[1; 5]);
        let red = p.reduce().unwrap();
        assert_eq!(red.kind, ReductionKind::MinimalPolygon);
        assert_eq!(red.polygon.n(), 3);
        assert_eq!(red.polygon.index(), 1);
        assert_eq!(red.dropped, vec![0, 2]);
        let mut surviving = red.surviving.clone();
        surviving.sort();
        assert_eq!(surviving, vec![1, 3, 4]);
        assert!(red.polygon.is_minimal());
        assert_eq!(red.triangle_indices, vec![0, 0]);
        assert!(red.remainder.is_none());
        assert_eq!(red.remaining_polygon().index(), p.index());
    }

    #[test]
    fn hexagon_reduction_extracts_index_one_triangle() {
        let p = poly(&regular(6, 0.5, PI / 2.0), &[1, -1, 1, -1, 1, -1]);
        assert_eq!(p.index(), -2);
        let red = p.reduce().unwrap();
        assert_eq!(red.kind, ReductionKind::IndexOneTriangle);
        assert_eq!(red.polygon.n(), 3);
        assert_eq!(red.polygon.index(), 1);
        assert!(red.dropped.is_empty());
        assert_eq!(red.surviving, vec![5, 1, 0]);
        // Dropping the edge glues the index-one triangle onto the hexagon,
        // leaving a pentagon of index -1 = -2 + 1.
        assert_eq!(red.triangle_indices, vec![1]);
        let rem = red.remainder.as_ref().unwrap();
        assert_eq!(rem.n(), 5);
        assert_eq!(rem.index(), -1);
        assert_eq!(
            red.remaining_polygon().index(),
            p.index() + red.triangle_indices.iter().sum::<i64>()
        );
        // The apex of a regular hexagon's neighbouring edge lines sits at
        // √3 times the circumradius.
        let apex_norm = red
            .polygon
            .vertices()
            .iter()
            .map(|v| v.norm())
            .fold(0.0f64, f64::max);
        assert!((apex_norm - 3.0f64.sqrt() * 0.5).abs() < 1e-9);
    }

    #[test]
    fn reduction_apex_outside_disk_is_an_error() {
        // Larger hexagon: the apex would land at 0.6·√3 ≈ 1.039.
        let p = poly(&regular(6, 0.6, PI / 2.0), &[1, -1, 1, -1, 1, -1]);
        let err = p.reduce().unwrap_err();
        assert!(matches!(err, Error::Geometry(_)), "got {err:?}");
        // Regular pentagon above the apex bound: same failure.
        let p = poly(&regular(5, 0.45, PI / 2.0), &[1; 5]);
        assert!(matches!(p.reduce().unwrap_err(), Error::Geometry(_)));
    }

    #[test]
    fn chord_endpoints_of_alternating_square() {
        // Half-side s = sin t. With the traversal/orientation convention
        // used throughout, the eight endpoints are at t, π/2 ± t, π ± t,
        // 3π/2 ± t and 2π - t.
        let s = 0.6f64;
        let t = s.asin();
        let p = poly(&square(s), &[1, -1, 1, -1]);
        let (a0, w0) = p.endpoints(0);
        assert!((a0 - t).abs() < 1e-9);
        assert!((w0 - (PI - t)).abs() < 1e-9);
        let (a1, w1) = p.endpoints(1);
        assert!((a1 - (3.0 * PI / 2.0 - t)).abs() < 1e-9);
        assert!((w1 - (PI / 2.0 + t)).abs() < 1e-9);
        let (a3, w3) = p.endpoints(3);
        assert!((a3 - (PI / 2.0 - t)).abs() < 1e-9);
        assert!((w3 - (3.0 * PI / 2.0 + t)).abs() < 1e-9);
    }

    #[test]
    fn endpoint_separation_detects_clashes() {
        // Regular pentagon, all lines counterclockwise, circumradius
        // cos 72° / cos 36°: each exit coincides with the entry of the
        // line two steps later — five exact clashes.
        let r = (TAU / 5.0 * 1.0).cos() / (TAU / 10.0).cos();
        let p = poly(&regular(5, r, PI / 2.0), &[1; 5]);
        let sep = p.endpoint_separation(0.1);
        assert!(!sep.distinct());
        assert_eq!(sep.clashes.len(), 5);
        assert!(sep.min_separation < 1e-9);
        for (a, b, _) in &sep.clashes {
            // Each clash pairs an omega with the alpha two edges later.
            let (om, al) = if a.kind == EndKind::Omega { (a, b) } else { (b, a) };
            assert_eq!(om.kind, EndKind::Omega);
            assert_eq!(al.kind, EndKind::Alpha);
            assert_eq!((om.edge + 2) % 5, al.edge);
        }
        // A generic pentagon is clash-free at the same tolerance.
        let q = poly(&regular(5, 0.45, PI / 2.0), &[1; 5]);
        assert!(q.endpoint_separation(0.1).distinct());
    }

    #[test]
    fn elliptic_word_on_ccw_polygons() {
        // Regular all-counterclockwise pentagon: holds.
        let p = poly(&regular(5, 0.45, PI / 2.0), &[1; 5]);
        let chk = p.check_elliptic_endpoint_order();
        assert!(chk.holds, "expected {:?}, actual {:?}", chk.expected, chk.actual);
        // All-counterclockwise rectangle: holds (forced by inscription).
        let r = poly(&[(0.2, 0.65), (-0.2, 0.65), (-0.2, -0.65), (0.2, -0.65)], &[1; 4]);
        assert!(r.check_elliptic_endpoint_order().holds);
        // Shallow regular hexagon: chords do not interleave deep enough,
        // the word fails even though the index is 1.
        let h = poly(&regular(6, 0.5, PI / 2.0), &[1; 6]);
        let chk = h.check_elliptic_endpoint_order();
        assert!(!chk.holds);
        assert!(chk.note.is_none());
        // Deeper regular hexagon: holds.
        let h2 = poly(&regular(6, 0.6, PI / 2.0), &[1; 6]);
        assert!(h2.check_elliptic_endpoint_order().holds);
        // Wrong index: precondition failure.
        let sq = poly(&square(0.35), &[1, -1, 1, -1]);
        let chk = sq.check_elliptic_endpoint_order();
        assert!(!chk.holds);
        assert!(chk.note.is_some());
    }

    #[test]
    fn hyperbolic_word_on_alternating_polygons() {
        // Alternating square: holds.
        let p = poly(&square(0.6), &[1, -1, 1, -1]);
        let chk = p.check_hyperbolic_endpoint_order();
        assert!(chk.holds, "expected {:?}, actual {:?}", chk.expected, chk.actual);
        // Same configuration rotated 45° and relabelled so that edge 0 has
        // its interior on the Right: the block anchor must shift by one.
        let d = poly(&[(0.85, 0.0), (0.0, 0.85), (-0.85, 0.0), (0.0, -0.85)], &[-1, 1, -1, 1]);
        assert_eq!(d.side_of(0), Side::Right);
        assert_eq!(d.index(), -1);
        let chk = d.check_hyperbolic_endpoint_order();
        assert!(chk.holds, "expected {:?}, actual {:?}", chk.expected, chk.actual);
        assert_eq!(chk.expected[0], EndpointId::alpha(1));
        // Regular alternating hexagon: alternating and index -2, but the
        // chords of a regular hexagon do not nest the way the word
        // demands.
        let h = poly(&regular(6, 0.5, PI / 2.0), &[1, -1, 1, -1, 1, -1]);
        let chk = h.check_hyperbolic_endpoint_order();
        assert!(!chk.holds);
        assert!(chk.note.is_none());
        // Precondition failures: odd edge count, non-alternating sides.
        let tri = poly(&[(0.4, 0.0), (-0.1, 0.35), (-0.2, -0.3)], &[1, 1, 1]);
        assert!(tri.check_hyperbolic_endpoint_order().note.is_some());
        let ccw = poly(&square(0.4), &[1, 1, 1, 1]);
        assert!(ccw.check_hyperbolic_endpoint_order().note.is_some());
    }

    #[test]
    fn spec_round_trip() {
        let p = poly(&square(0.35), &[1, -1, 1, -1]);
        let spec = p.to_spec();
        let q = OrientedPolygon::from_spec(&spec).unwrap();
        assert_eq!(q.index(), p.index());
        assert_eq!(q.edge_dirs(), p.edge_dirs());
    }
}
