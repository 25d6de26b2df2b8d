//! Simulation domains: containment, distance to the boundary, first exit
//! along a segment, and the Brownian-bridge crossing correction.
//!
//! Points are plain `&[f64]` slices. The public query methods check the
//! dimension; the `pub(crate)` fast paths used by the path samplers do not.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::cone::ConeSpec;
use crate::error::{Error, Result};

// Tolerance for treating a point as lying on a polygon edge or ray.
const ON_EDGE_EPS: f64 = 1e-14;

/// The geometric variants. Build them through [`Domain`]'s constructors.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Interval { a: f64, b: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Polygon2D { vertices: Vec<[f64; 2]> },
    Wedge2D { vertex: [f64; 2], axis: [f64; 2], half_angle: f64 },
    /// Cone with vertex at the origin and axis along the last coordinate.
    Cone(ConeSpec),
}

/// An open region of `R^d`, validated at construction and immutable after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainLiteral", into = "DomainLiteral")]
pub struct Domain {
    shape: Shape,
}

/// A start/end pair for one Brownian step of length `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitQuery {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub dt: f64,
}

impl ExitQuery {
    pub fn new(a: Vec<f64>, b: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::OutOfRange(format!("dt must be positive, got {dt}")));
        }
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
        }
        Ok(Self { a, b, dt })
    }
}

fn finite(xs: &[f64]) -> bool {
    xs.iter().all(|v| v.is_finite())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cross(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

fn sub(u: [f64; 2], v: [f64; 2]) -> [f64; 2] {
    [u[0] - v[0], u[1] - v[1]]
}

fn point_segment_distance(p: [f64; 2], s0: [f64; 2], s1: [f64; 2]) -> f64 {
    let e = sub(s1, s0);
    let w = sub(p, s0);
    let len2 = e[0] * e[0] + e[1] * e[1];
    let t = if len2 > 0.0 { ((w[0] * e[0] + w[1] * e[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [s0[0] + t * e[0] - p[0], s0[1] + t * e[1] - p[1]];
    q[0].hypot(q[1])
}

fn point_ray_distance(p: [f64; 2], origin: [f64; 2], dir: [f64; 2]) -> f64 {
    let w = sub(p, origin);
    let t = (w[0] * dir[0] + w[1] * dir[1]).max(0.0);
    (w[0] - t * dir[0]).hypot(w[1] - t * dir[1])
}

/// Parameter `lambda` in `[0, 1]` at which segment `a -> a + u` meets the
/// segment `s0 -> s0 + e` (or ray, when `ray` is set).
fn segment_hit(a: [f64; 2], u: [f64; 2], s0: [f64; 2], e: [f64; 2], ray: bool) -> Option<f64> {
    let denom = cross(u, e);
    if denom == 0.0 {
        return None;
    }
    let w = sub(s0, a);
    let lambda = cross(w, e) / denom;
    let s = cross(w, u) / denom;
    let s_ok = if ray { s >= 0.0 } else { (0.0..=1.0).contains(&s) };
    ((0.0..=1.0).contains(&lambda) && s_ok).then_some(lambda)
}

fn segments_intersect(p0: [f64; 2], p1: [f64; 2], q0: [f64; 2], q1: [f64; 2]) -> bool {
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| cross(sub(b, a), sub(c, a));
    let on_seg = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
    };
    let d1 = orient(q0, q1, p0);
    let d2 = orient(q0, q1, p1);
    let d3 = orient(p0, p1, q0);
    let d4 = orient(p0, p1, q1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_seg(q0, q1, p0))
        || (d2 == 0.0 && on_seg(q0, q1, p1))
        || (d3 == 0.0 && on_seg(p0, p1, q0))
        || (d4 == 0.0 && on_seg(p0, p1, q1))
}

fn rotate(v: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Smallest root in `[0, 1]` of `A l^2 + 2 B l + C = 0`.
fn first_quadratic_root(qa: f64, qb: f64, qc: f64, accept: impl Fn(f64) -> bool) -> Option<f64> {
    let mut roots = [f64::NAN; 2];
    if qa.abs() < 1e-300 {
        if qb != 0.0 {
            roots[0] = -qc / (2.0 * qb);
        }
    } else {
        let disc = qb * qb - qa * qc;
        if disc < 0.0 {
            return None;
        }
        // numerically stable pair
        let q = -(qb + qb.signum() * disc.sqrt());
        roots[0] = q / qa;
        roots[1] = if q != 0.0 { qc / q } else { 0.0 };
    }
    roots
        .into_iter()
        .filter(|l| l.is_finite() && (0.0..=1.0).contains(l) && accept(*l))
        .fold(None, |best: Option<f64>, l| Some(best.map_or(l, |b| b.min(l))))
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidDomain(format!("interval needs a < b, got ({a}, {b})")));
        }
        Ok(Self { shape: Shape::Interval { a, b } })
    }

    pub fn cuboid(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidDomain("box corners must have equal, nonzero dimension".into()));
        }
        if !finite(&lo) || !finite(&hi) || lo.iter().zip(&hi).any(|(l, h)| l >= h) {
            return Err(Error::InvalidDomain("box needs lo < hi in every coordinate".into()));
        }
        Ok(Self { shape: Shape::Box { lo, hi } })
    }

    pub fn unit_cube(d: usize) -> Result<Self> {
        Self::cuboid(vec![0.0; d], vec![1.0; d])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !finite(&center) {
            return Err(Error::InvalidDomain("ball center must be a finite point".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidDomain(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { shape: Shape::Ball { center, radius } })
    }

    /// A simple polygon; vertex order may be either orientation.
    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidDomain(format!("polygon needs at least 3 vertices, got {n}")));
        }
        if vertices.iter().any(|v| !finite(v)) {
            return Err(Error::InvalidDomain("polygon vertices must be finite".into()));
        }
        let area2: f64 = (0..n).map(|i| cross(vertices[i], vertices[(i + 1) % n])).sum();
        if area2.abs() < 1e-14 {
            return Err(Error::InvalidDomain("polygon has zero area".into()));
        }
        for i in 0..n {
            let (p0, p1) = (vertices[i], vertices[(i + 1) % n]);
            if p0 == p1 {
                return Err(Error::InvalidDomain(format!("polygon repeats vertex {i}")));
            }
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(p0, p1, vertices[j], vertices[(j + 1) % n]) {
                    return Err(Error::InvalidDomain(format!(
                        "polygon is not simple: edges {i} and {j} intersect"
                    )));
                }
            }
        }
        Ok(Self { shape: Shape::Polygon2D { vertices } })
    }

    /// Planar wedge `{x : angle(x - vertex, axis) < half_angle}`.
    pub fn wedge(vertex: [f64; 2], axis: [f64; 2], half_angle: f64) -> Result<Self> {
        let len = axis[0].hypot(axis[1]);
        if !finite(&vertex) || !(len > 0.0 && len.is_finite()) {
            return Err(Error::InvalidDomain("wedge needs a finite vertex and nonzero axis".into()));
        }
        if !(half_angle > 0.0 && half_angle < PI) {
            return Err(Error::InvalidDomain(format!("wedge half-angle {half_angle} is outside (0, pi)")));
        }
        let axis = [axis[0] / len, axis[1] / len];
        Ok(Self { shape: Shape::Wedge2D { vertex, axis, half_angle } })
    }

    /// Upper half-plane `{y > 0}` as a wedge of half-angle `pi/2`.
    pub fn half_plane() -> Self {
        Self { shape: Shape::Wedge2D { vertex: [0.0, 0.0], axis: [0.0, 1.0], half_angle: PI / 2.0 } }
    }

    pub fn cone(spec: ConeSpec) -> Result<Self> {
        if spec.d < 2 || !(spec.theta > 0.0 && spec.theta < PI) {
            return Err(Error::InvalidDomain(format!(
                "cone needs d >= 2 and theta in (0, pi), got d = {}, theta = {}",
                spec.d, spec.theta
            )));
        }
        Ok(Self { shape: Shape::Cone(spec) })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::Interval { .. } => 1,
            Shape::Box { lo, .. } => lo.len(),
            Shape::Ball { center, .. } => center.len(),
            Shape::Polygon2D { .. } | Shape::Wedge2D { .. } => 2,
            Shape::Cone(spec) => spec.d,
        }
    }

    /// Axis-aligned bounding box, or `None` for unbounded domains.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.shape {
            Shape::Interval { a, b } => Some((vec![*a], vec![*b])),
            Shape::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            Shape::Ball { center, radius } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            Shape::Polygon2D { vertices } => {
                let mut lo = vec![f64::INFINITY; 2];
                let mut hi = vec![f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                Some((lo, hi))
            }
            Shape::Wedge2D { .. } | Shape::Cone(_) => None,
        }
    }

    pub fn diameter(&self) -> Option<f64> {
        match &self.shape {
            Shape::Ball { radius, .. } => Some(2.0 * radius),
            Shape::Polygon2D { vertices } => {
                let mut best: f64 = 0.0;
                for p in vertices {
                    for q in vertices {
                        best = best.max((p[0] - q[0]).hypot(p[1] - q[1]));
                    }
                }
                Some(best)
            }
            _ => self.bounding_box().map(|(lo, hi)| {
                lo.iter().zip(&hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt()
            }),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        let expected = self.dim();
        if x.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: x.len() });
        }
        Ok(())
    }

    /// True iff `x` lies in the open set; boundary points are excluded.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        Ok(self.inside(x))
    }

    /// Euclidean distance from an interior point to the boundary.
    pub fn dist_to_boundary(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if !self.inside(x) {
            return Err(Error::OutsideDomain);
        }
        Ok(self.boundary_distance(x))
    }

    /// First point where the segment `a -> b` meets the boundary, with its
    /// parameter `lambda` in `[0, 1]`; `None` if the segment stays inside.
    pub fn segment_exit(&self, a: &[f64], b: &[f64]) -> Option<(Vec<f64>, f64)> {
        if a.len() != self.dim() || b.len() != self.dim() {
            return None;
        }
        self.exit_fraction(a, b).map(|lambda| {
            let hit = a.iter().zip(b).map(|(p, q)| p + lambda * (q - p)).collect();
            (hit, lambda)
        })
    }

    /// Probability that a Brownian bridge of duration `dt` from `a` to `b`
    /// touched the boundary, using the half-space through the nearest
    /// boundary point: `exp(-2 d(a) d(b) / dt)`.
    pub fn bridge_absorption_prob(&self, a: &[f64], b: &[f64], dt: f64) -> f64 {
        let da = if self.inside(a) { self.boundary_distance(a) } else { 0.0 };
        let db = if self.inside(b) { self.boundary_distance(b) } else { 0.0 };
        bridge_prob(da, db, dt)
    }

    /// Signed level function: positive inside, zero on the boundary, negative
    /// outside. Inside it equals the distance to the boundary.
    pub fn level(&self, x: &[f64]) -> f64 {
        match &self.shape {
            Shape::Polygon2D { vertices } => {
                let p = [x[0], x[1]];
                let dist = polygon_edge_distance(vertices, p);
                if self.inside(x) {
                    dist
                } else {
                    -dist
                }
            }
            Shape::Wedge2D { vertex, axis, half_angle } => {
                let (rays, _) = wedge_rays(*axis, *half_angle);
                let p = [x[0], x[1]];
                let dist = rays.iter().map(|r| point_ray_distance(p, *vertex, *r)).fold(f64::INFINITY, f64::min);
                if self.inside(x) {
                    dist
                } else {
                    -dist
                }
            }
            _ => self.raw_level(x),
        }
    }

    // Closed-form level for the convex shapes and the cone.
    fn raw_level(&self, x: &[f64]) -> f64 {
        match &self.shape {
            Shape::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Shape::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| (v - l).min(h - v))
                .fold(f64::INFINITY, f64::min),
            Shape::Ball { center, radius } => {
                let r: f64 = x.iter().zip(center).map(|(v, c)| (v - c) * (v - c)).sum::<f64>().sqrt();
                radius - r
            }
            Shape::Cone(spec) => cone_level(spec.theta, x),
            Shape::Polygon2D { .. } | Shape::Wedge2D { .. } => self.level(x),
        }
    }

    pub(crate) fn inside(&self, x: &[f64]) -> bool {
        match &self.shape {
            Shape::Interval { a, b } => x[0] > *a && x[0] < *b,
            Shape::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| v > l && v < h),
            Shape::Ball { .. } | Shape::Cone(_) => self.raw_level(x) > 0.0,
            Shape::Polygon2D { vertices } => polygon_contains(vertices, [x[0], x[1]]),
            Shape::Wedge2D { vertex, axis, half_angle } => {
                let w = sub([x[0], x[1]], *vertex);
                if w == [0.0, 0.0] {
                    return false;
                }
                let angle = cross(*axis, w).abs().atan2(axis[0] * w[0] + axis[1] * w[1]);
                angle < *half_angle
            }
        }
    }

    /// Distance to the boundary, assuming `x` is inside.
    pub(crate) fn boundary_distance(&self, x: &[f64]) -> f64 {
        match &self.shape {
            Shape::Polygon2D { vertices } => polygon_edge_distance(vertices, [x[0], x[1]]),
            Shape::Wedge2D { vertex, axis, half_angle } => {
                let (rays, _) = wedge_rays(*axis, *half_angle);
                let p = [x[0], x[1]];
                point_ray_distance(p, *vertex, rays[0]).min(point_ray_distance(p, *vertex, rays[1]))
            }
            _ => self.raw_level(x).max(0.0),
        }
    }

    /// Crossing parameter of the first boundary hit on `a -> b`, `a` inside.
    pub(crate) fn exit_fraction(&self, a: &[f64], b: &[f64]) -> Option<f64> {
        match &self.shape {
            Shape::Interval { a: lo, b: hi } => {
                let (x, y) = (a[0], b[0]);
                if y <= *lo {
                    Some((x - lo) / (x - y))
                } else if y >= *hi {
                    Some((hi - x) / (y - x))
                } else {
                    None
                }
            }
            Shape::Box { lo, hi } => {
                let mut best: Option<f64> = None;
                for k in 0..a.len() {
                    let u = b[k] - a[k];
                    let lambda = if b[k] <= lo[k] && u < 0.0 {
                        (lo[k] - a[k]) / u
                    } else if b[k] >= hi[k] && u > 0.0 {
                        (hi[k] - a[k]) / u
                    } else {
                        continue;
                    };
                    let lambda = lambda.clamp(0.0, 1.0);
                    best = Some(best.map_or(lambda, |l| l.min(lambda)));
                }
                best
            }
            Shape::Ball { center, radius } => {
                if self.inside(b) {
                    return None;
                }
                let mut qa = 0.0;
                let mut qb = 0.0;
                let mut qc = -radius * radius;
                for k in 0..a.len() {
                    let u = b[k] - a[k];
                    let w = a[k] - center[k];
                    qa += u * u;
                    qb += u * w;
                    qc += w * w;
                }
                let disc = (qb * qb - qa * qc).max(0.0);
                Some(((-qb + disc.sqrt()) / qa).clamp(0.0, 1.0))
            }
            Shape::Polygon2D { vertices } => {
                let pa = [a[0], a[1]];
                let u = [b[0] - a[0], b[1] - a[1]];
                let n = vertices.len();
                let mut best: Option<f64> = None;
                for i in 0..n {
                    let s0 = vertices[i];
                    let e = sub(vertices[(i + 1) % n], s0);
                    if let Some(l) = segment_hit(pa, u, s0, e, false) {
                        best = Some(best.map_or(l, |bl| bl.min(l)));
                    }
                }
                // b can land exactly on an edge without a transversal crossing
                if best.is_none() && !self.inside(b) {
                    best = Some(1.0);
                }
                best
            }
            Shape::Wedge2D { vertex, axis, half_angle } => {
                let (rays, _) = wedge_rays(*axis, *half_angle);
                let pa = [a[0], a[1]];
                let u = [b[0] - a[0], b[1] - a[1]];
                let mut best: Option<f64> = None;
                for r in rays {
                    if let Some(l) = segment_hit(pa, u, *vertex, r, true) {
                        best = Some(best.map_or(l, |bl| bl.min(l)));
                    }
                }
                if best.is_none() && !self.inside(b) {
                    best = Some(1.0);
                }
                best
            }
            Shape::Cone(spec) => {
                if self.inside(b) {
                    // a cone with theta > pi/2 is not convex; check the chord
                    if spec.theta <= PI / 2.0 {
                        return None;
                    }
                }
                let d = a.len();
                let cos2 = spec.theta.cos().powi(2);
                let mut qa = 0.0;
                let mut qb = 0.0;
                let mut qc = 0.0;
                for k in 0..d {
                    let u = b[k] - a[k];
                    let w = if k == d - 1 { 1.0 - cos2 } else { -cos2 };
                    qa += w * u * u;
                    qb += w * u * a[k];
                    qc += w * a[k] * a[k];
                }
                let cos_theta = spec.theta.cos();
                let nappe = |l: f64| {
                    let z = a[d - 1] + l * (b[d - 1] - a[d - 1]);
                    z * cos_theta >= -1e-12 * (1.0 + z.abs())
                };
                let root = first_quadratic_root(qa, qb, qc, nappe);
                match root {
                    Some(l) => Some(l),
                    None if !self.inside(b) => Some(1.0),
                    None => None,
                }
            }
        }
    }

    /// A canonical interior point: the center for symmetric shapes, a point
    /// on the axis for wedges and cones, and the deepest point of a coarse
    /// grid for polygons whose centroid falls outside.
    pub fn reference_point(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Interval { a, b } => vec![0.5 * (a + b)],
            Shape::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            Shape::Ball { center, .. } => center.clone(),
            Shape::Wedge2D { vertex, axis, .. } => vec![vertex[0] + axis[0], vertex[1] + axis[1]],
            Shape::Cone(spec) => {
                let mut x = vec![0.0; spec.d];
                x[spec.d - 1] = 1.0;
                x
            }
            Shape::Polygon2D { vertices } => {
                let n = vertices.len() as f64;
                let c = [
                    vertices.iter().map(|v| v[0]).sum::<f64>() / n,
                    vertices.iter().map(|v| v[1]).sum::<f64>() / n,
                ];
                if self.inside(&c) {
                    return c.to_vec();
                }
                let (lo, hi) = self.bounding_box().expect("polygons are bounded");
                let m = 64;
                let mut best = (f64::NEG_INFINITY, c.to_vec());
                for i in 0..m {
                    for j in 0..m {
                        let p = [
                            lo[0] + (hi[0] - lo[0]) * (i as f64 + 0.5) / m as f64,
                            lo[1] + (hi[1] - lo[1]) * (j as f64 + 0.5) / m as f64,
                        ];
                        if self.inside(&p) {
                            let d = self.boundary_distance(&p);
                            if d > best.0 {
                                best = (d, p.to_vec());
                            }
                        }
                    }
                }
                best.1
            }
        }
    }

    /// Whether this domain can serve as a target set `A` for hitting queries.
    pub fn supports_target(&self) -> bool {
        matches!(
            self.shape,
            Shape::Interval { .. } | Shape::Box { .. } | Shape::Ball { .. } | Shape::Polygon2D { .. }
        )
    }

    /// Distance from `x` to the closure of this set (zero inside).
    pub fn exterior_distance(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        match &self.shape {
            Shape::Interval { a, b } => Ok((a - x[0]).max(x[0] - b).max(0.0)),
            Shape::Box { lo, hi } => Ok(x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| (l - v).max(v - h).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt()),
            Shape::Ball { .. } => Ok((-self.raw_level(x)).max(0.0)),
            Shape::Polygon2D { vertices } => {
                if self.inside(x) {
                    Ok(0.0)
                } else {
                    Ok(polygon_edge_distance(vertices, [x[0], x[1]]))
                }
            }
            _ => Err(Error::UnsupportedDomain("target set")),
        }
    }

    /// First parameter at which `a -> b` enters the closure of this set.
    pub fn entry_fraction(&self, a: &[f64], b: &[f64]) -> Option<f64> {
        match &self.shape {
            Shape::Interval { .. } | Shape::Box { .. } => {
                let (lo, hi) = match &self.shape {
                    Shape::Interval { a, b } => (vec![*a], vec![*b]),
                    Shape::Box { lo, hi } => (lo.clone(), hi.clone()),
                    _ => unreachable!(),
                };
                let mut enter = 0.0_f64;
                let mut leave = 1.0_f64;
                for k in 0..a.len() {
                    let u = b[k] - a[k];
                    if u == 0.0 {
                        if a[k] < lo[k] || a[k] > hi[k] {
                            return None;
                        }
                        continue;
                    }
                    let (t0, t1) = ((lo[k] - a[k]) / u, (hi[k] - a[k]) / u);
                    enter = enter.max(t0.min(t1));
                    leave = leave.min(t0.max(t1));
                }
                (enter <= leave).then_some(enter)
            }
            Shape::Ball { center, radius } => {
                let mut qa = 0.0;
                let mut qb = 0.0;
                let mut qc = -radius * radius;
                for k in 0..a.len() {
                    let u = b[k] - a[k];
                    let w = a[k] - center[k];
                    qa += u * u;
                    qb += u * w;
                    qc += w * w;
                }
                if qc <= 0.0 {
                    return Some(0.0);
                }
                let disc = qb * qb - qa * qc;
                if disc < 0.0 || qa == 0.0 {
                    return None;
                }
                let l = (-qb - disc.sqrt()) / qa;
                (0.0..=1.0).contains(&l).then_some(l)
            }
            Shape::Polygon2D { vertices } => {
                let pa = [a[0], a[1]];
                if self.inside(a) || polygon_edge_distance(vertices, pa) == 0.0 {
                    return Some(0.0);
                }
                let u = [b[0] - a[0], b[1] - a[1]];
                let n = vertices.len();
                (0..n)
                    .filter_map(|i| segment_hit(pa, u, vertices[i], sub(vertices[(i + 1) % n], vertices[i]), false))
                    .fold(None, |best: Option<f64>, l| Some(best.map_or(l, |bl| bl.min(l))))
            }
            _ => None,
        }
    }
}

pub(crate) fn bridge_prob(da: f64, db: f64, dt: f64) -> f64 {
    (-2.0 * da * db / dt).exp().clamp(0.0, 1.0)
}

fn wedge_rays(axis: [f64; 2], half_angle: f64) -> ([[f64; 2]; 2], f64) {
    ([rotate(axis, half_angle), rotate(axis, -half_angle)], half_angle)
}

fn cone_level(theta: f64, x: &[f64]) -> f64 {
    let d = x.len();
    let z = x[d - 1];
    let perp = norm(&x[..d - 1]);
    let rho = z.hypot(perp);
    if rho == 0.0 {
        return 0.0;
    }
    let phi = perp.atan2(z);
    let gap = theta - phi;
    if gap >= PI / 2.0 {
        rho
    } else if gap <= -PI / 2.0 {
        -rho
    } else {
        rho * gap.sin()
    }
}

fn polygon_edge_distance(vertices: &[[f64; 2]], p: [f64; 2]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| point_segment_distance(p, vertices[i], vertices[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn polygon_contains(vertices: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (vi, vj) = (vertices[i], vertices[j]);
        if point_segment_distance(p, vi, vj) <= ON_EDGE_EPS {
            return false;
        }
        if (vi[1] > p[1]) != (vj[1] > p[1]) {
            let x_cross = vi[0] + (p[1] - vi[1]) / (vj[1] - vi[1]) * (vj[0] - vi[0]);
            if p[0] < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// JSON form of a domain, tagged by `"type"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DomainLiteral {
    Interval {
        a: f64,
        b: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Polygon2d {
        vertices: Vec<[f64; 2]>,
    },
    Wedge2d {
        #[serde(default)]
        vertex: [f64; 2],
        #[serde(default = "default_axis")]
        axis: [f64; 2],
        #[serde(rename = "halfAngle")]
        half_angle: f64,
    },
    Halfplane,
    Cone {
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
    },
}

fn default_axis() -> [f64; 2] {
    [0.0, 1.0]
}

impl TryFrom<DomainLiteral> for Domain {
    type Error = Error;

    fn try_from(lit: DomainLiteral) -> Result<Self> {
        match lit {
            DomainLiteral::Interval { a, b } => Domain::interval(a, b),
            DomainLiteral::Box { lo, hi } => Domain::cuboid(lo, hi),
            DomainLiteral::Ball { center, radius } => Domain::ball(center, radius),
            DomainLiteral::Polygon2d { vertices } => Domain::polygon(vertices),
            DomainLiteral::Wedge2d { vertex, axis, half_angle } => Domain::wedge(vertex, axis, half_angle),
            DomainLiteral::Halfplane => Ok(Domain::half_plane()),
            DomainLiteral::Cone { d, p, theta } => {
                let spec = match (p, theta) {
                    (Some(p), None) => ConeSpec::new(p, d)?,
                    (None, Some(theta)) => ConeSpec::from_half_angle(theta, d)?,
                    (Some(p), Some(theta)) => ConeSpec { p, d, theta },
                    (None, None) => return Err(Error::InvalidDomain("cone needs p or theta".into())),
                };
                Domain::cone(spec)
            }
        }
    }
}

impl From<Domain> for DomainLiteral {
    fn from(d: Domain) -> Self {
        match d.shape {
            Shape::Interval { a, b } => DomainLiteral::Interval { a, b },
            Shape::Box { lo, hi } => DomainLiteral::Box { lo, hi },
            Shape::Ball { center, radius } => DomainLiteral::Ball { center, radius },
            Shape::Polygon2D { vertices } => DomainLiteral::Polygon2d { vertices },
            Shape::Wedge2D { vertex, axis, half_angle } => DomainLiteral::Wedge2d { vertex, axis, half_angle },
            Shape::Cone(spec) => DomainLiteral::Cone { d: spec.d, p: Some(spec.p), theta: Some(spec.theta) },
        }
    }
}

/// Unit square minus its upper-right quadrant.
pub fn l_shape() -> Domain {
    Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 0.5], [0.5, 1.0], [0.0, 1.0]])
        .expect("L-shape is simple")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    fn unit_square() -> Domain {
        Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn containment() {
        let i = Domain::interval(0.0, 1.0).unwrap();
        assert!(i.contains(&[0.5]).unwrap());
        assert!(!i.contains(&[0.0]).unwrap());
        let b = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert!(!b.contains(&[0.6, 0.8]).unwrap());
        assert!(!b.contains(&[1.0, 0.0]).unwrap());
        let l = l_shape();
        assert!(!l.contains(&[0.75, 0.75]).unwrap());
        assert!(l.contains(&[0.25, 0.75]).unwrap());
        assert!(l.contains(&[0.75, 0.25]).unwrap());
        assert!(!l.contains(&[0.5, 0.75]).unwrap());
        assert!(matches!(b.contains(&[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn distances() {
        let i = Domain::interval(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(i.dist_to_boundary(&[0.3]).unwrap(), 0.3, epsilon = 1e-15);
        let b = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_abs_diff_eq!(b.dist_to_boundary(&[0.6, 0.0]).unwrap(), 0.4, epsilon = 1e-15);
        let w = Domain::wedge([0.0, 0.0], [1.0, 0.0], FRAC_PI_4).unwrap();
        let r = 0.7;
        assert_abs_diff_eq!(w.dist_to_boundary(&[r, 0.0]).unwrap(), r * FRAC_PI_4.sin(), epsilon = 1e-14);
        assert_eq!(i.dist_to_boundary(&[1.5]), Err(Error::OutsideDomain));
        // nearest boundary point is the reentrant corner
        assert_abs_diff_eq!(l_shape().dist_to_boundary(&[0.45, 0.45]).unwrap(), 0.05 * 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(l_shape().dist_to_boundary(&[0.45, 0.7]).unwrap(), 0.05, epsilon = 1e-14);
    }

    #[test]
    fn wedge_and_cone_agree_in_plane() {
        let spec = ConeSpec::new(2.0, 2).unwrap();
        let cone = Domain::cone(spec).unwrap();
        let wedge = Domain::wedge([0.0, 0.0], [0.0, 1.0], spec.theta).unwrap();
        for p in [[0.1, 0.5], [-0.3, 0.35], [0.2, 0.1], [0.0, 2.0], [0.5, -0.1]] {
            assert_eq!(cone.contains(&p).unwrap(), wedge.contains(&p).unwrap());
            assert_abs_diff_eq!(cone.level(&p), wedge.level(&p), epsilon = 1e-12);
        }
    }

    #[test]
    fn wide_wedge_distance() {
        // reflex half-angle: near the vertex the distance is to the vertex
        let w = Domain::wedge([0.0, 0.0], [0.0, 1.0], 3.0 * FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(w.dist_to_boundary(&[0.0, 1.0]).unwrap(), 1.0, epsilon = 1e-14);
        assert!(w.contains(&[1.0, -0.5]).unwrap());
        let hp = Domain::half_plane();
        assert_abs_diff_eq!(hp.dist_to_boundary(&[3.0, 0.25]).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn segment_exits() {
        let i = Domain::interval(0.0, 1.0).unwrap();
        let (hit, l) = i.segment_exit(&[0.2], &[-0.1]).unwrap();
        assert_abs_diff_eq!(hit[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l, 2.0 / 3.0, epsilon = 1e-15);
        let b = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let (hit, l) = b.segment_exit(&[0.0, 0.0], &[2.0, 0.0]).unwrap();
        assert_abs_diff_eq!(hit[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l, 0.5, epsilon = 1e-15);
        assert!(unit_square().segment_exit(&[0.5, 0.5], &[0.5, 0.4]).is_none());
        // leaving the L through the reentrant notch
        let (hit, l) = l_shape().segment_exit(&[0.25, 0.75], &[0.75, 0.75]).unwrap();
        assert_abs_diff_eq!(hit[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(l, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn bridge_probabilities() {
        let i = Domain::interval(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(i.bridge_absorption_prob(&[0.1], &[0.9], 0.01), (-2.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(bridge_prob(0.0, 0.3, 0.01), 1.0);
        assert!(bridge_prob(0.4, 0.4, 1e-4) < 1e-300);
    }

    #[test]
    fn rejects_bad_domains() {
        let bowtie = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(Domain::polygon(bowtie), Err(Error::InvalidDomain(_))));
        assert!(Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        assert!(Domain::interval(1.0, 0.0).is_err());
        assert!(Domain::ball(vec![0.0], -1.0).is_err());
        assert!(Domain::cuboid(vec![0.0, 0.0], vec![1.0, 0.0]).is_err());
        assert!(Domain::wedge([0.0, 0.0], [1.0, 0.0], 4.0).is_err());
    }

    #[test]
    fn literal_round_trip() {
        let json = r#"{"type":"polygon2d","vertices":[[0,0],[1,0],[1,0.5],[0.5,0.5],[0.5,1],[0,1]]}"#;
        let d: Domain = serde_json::from_str(json).unwrap();
        assert_eq!(d, l_shape());
        let back = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<Domain>(&back).unwrap(), d);
        let bad = r#"{"type":"polygon2d","vertices":[[0,0],[1,1],[1,0],[0,1]]}"#;
        assert!(serde_json::from_str::<Domain>(bad).is_err());
        let w: Domain = serde_json::from_str(r#"{"type":"wedge2d","halfAngle":0.39269908169872414}"#).unwrap();
        assert!(w.contains(&[0.0, 1.0]).unwrap());
        let c: Domain = serde_json::from_str(r#"{"type":"cone","d":3,"p":2}"#).unwrap();
        assert_eq!(c.dim(), 3);
    }

    #[test]
    fn target_queries() {
        let a = Domain::interval(0.4, 0.6).unwrap();
        assert_abs_diff_eq!(a.exterior_distance(&[0.25]).unwrap(), 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(a.entry_fraction(&[0.3], &[0.5]).unwrap(), 0.5, epsilon = 1e-12);
        assert!(a.entry_fraction(&[0.3], &[0.35]).is_none());
        let disk = Domain::ball(vec![0.0, 1.0], 0.3).unwrap();
        assert_abs_diff_eq!(disk.entry_fraction(&[0.0, 0.0], &[0.0, 1.4]).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(disk.exterior_distance(&[0.0, 0.2]).unwrap(), 0.5, epsilon = 1e-12);
        assert!(Domain::half_plane().exterior_distance(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn ball_and_box_distance_match_brute_force() {
        let ball = Domain::ball(vec![0.2, -0.1], 0.8).unwrap();
        let cube = Domain::cuboid(vec![0.0, 0.0], vec![1.0, 0.5]).unwrap();
        let n = 10_000;
        let ball_pts: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                [0.2 + 0.8 * t.cos(), -0.1 + 0.8 * t.sin()]
            })
            .collect();
        let perimeter = 3.0;
        let box_pts: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let s = perimeter * i as f64 / n as f64;
                if s < 1.0 {
                    [s, 0.0]
                } else if s < 1.5 {
                    [1.0, s - 1.0]
                } else if s < 2.5 {
                    [2.5 - s, 0.5]
                } else {
                    [0.0, 3.0 - s]
                }
            })
            .collect();
        let brute = |pts: &[[f64; 2]], x: [f64; 2]| {
            pts.iter().map(|p| (p[0] - x[0]).hypot(p[1] - x[1])).fold(f64::INFINITY, f64::min)
        };
        for x in [[0.3, 0.2], [0.7, -0.4], [-0.3, 0.1], [0.25, 0.3]] {
            if ball.contains(&x).unwrap() {
                assert!((ball.dist_to_boundary(&x).unwrap() - brute(&ball_pts, x)).abs() < 1e-6);
            }
        }
        for x in [[0.3, 0.2], [0.9, 0.25], [0.05, 0.45], [0.5, 0.25]] {
            assert!((cube.dist_to_boundary(&x).unwrap() - brute(&box_pts, x)).abs() < 1e-6);
        }
    }

    fn domains() -> Vec<Domain> {
        vec![
            Domain::interval(-0.5, 2.0).unwrap(),
            unit_square(),
            l_shape(),
            Domain::cuboid(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 1.0]).unwrap(),
            Domain::ball(vec![0.5, 0.5], 0.5).unwrap(),
            Domain::wedge([0.5, 0.5], [0.0, 1.0], PI / 8.0).unwrap(),
            Domain::wedge([0.5, 0.5], [1.0, 1.0], 2.5).unwrap(),
            Domain::cone(ConeSpec::new(1.5, 3).unwrap()).unwrap(),
            Domain::cone(ConeSpec::new(0.8, 3).unwrap()).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn exit_lands_on_boundary(idx in 0usize..9, a in prop::array::uniform3(-1.0f64..2.0),
                                  step in prop::array::uniform3(-1.5f64..1.5)) {
            let dom = &domains()[idx];
            let d = dom.dim();
            let a = &a[..d];
            prop_assume!(dom.inside(a));
            let b: Vec<f64> = a.iter().zip(&step[..d]).map(|(x, s)| x + s).collect();
            match dom.segment_exit(a, &b) {
                None => prop_assert!(dom.level(&b) >= -1e-12),
                Some((hit, l)) => {
                    prop_assert!((0.0..=1.0).contains(&l));
                    prop_assert!(dom.level(&hit).abs() < 1e-9, "level {}", dom.level(&hit));
                }
            }
        }

        #[test]
        fn inside_points_have_positive_distance(idx in 0usize..9, x in prop::array::uniform3(-1.0f64..2.0)) {
            let dom = &domains()[idx];
            let x = &x[..dom.dim()];
            if dom.contains(x).unwrap() {
                prop_assert!(dom.dist_to_boundary(x).unwrap() > 0.0);
            }
        }

        #[test]
        fn bridge_is_monotone(da in 0.0f64..0.5, db in 0.0f64..0.5, dt in 1e-5f64..1e-1, bump in 1e-3f64..0.1) {
            let p = bridge_prob(da, db, dt);
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(bridge_prob(da + bump, db, dt) <= p);
            prop_assert!(bridge_prob(da, db + bump, dt) <= p);
            prop_assert!(bridge_prob(da, db, dt * (1.0 - bump)) <= p);
        }
    }
}
