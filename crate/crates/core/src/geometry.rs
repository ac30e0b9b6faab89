//! Moving fluid domain: the pinned free-surface curve, the closed boundary
//! polygon built around it, and the polygon predicates used as breakdown
//! detectors.
//!
//! The domain is the box `0 <= x1 <= 1`, `x2 >= 0` closed from above by the
//! free surface, whose end markers are pinned at `(0, 1)` and `(1, 1)`.

use std::ops::{Add, Mul, Neg, Sub};
use std::ops::Range;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

pub const CORNER_LEFT: Point = Point::new(0.0, 1.0);
pub const CORNER_RIGHT: Point = Point::new(1.0, 1.0);

/// Lagrangian marker representation of the free surface.
///
/// Markers run from the left corner to the right corner; `alpha` is the
/// material label of each marker.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceCurve {
    alpha: Vec<f64>,
    points: Vec<Point>,
}

impl InterfaceCurve {
    /// Builds a curve, checking the pinning and labelling invariants.
    ///
    /// Markers outside the strip `0 <= x1 <= 1` are accepted here; they are
    /// reported by the breakdown detectors instead.
    pub fn new(alpha: Vec<f64>, points: Vec<Point>) -> Result<Self> {
        if alpha.len() != points.len() {
            return Err(Error::Argument(format!(
                "{} labels for {} markers",
                alpha.len(),
                points.len()
            )));
        }
        if points.len() < 2 {
            return Err(Error::Geometry("interface needs at least two markers".into()));
        }
        if points[0] != CORNER_LEFT || points[points.len() - 1] != CORNER_RIGHT {
            return Err(Error::Geometry(format!(
                "interface endpoints {:?} and {:?} are not pinned to the corners",
                points[0],
                points[points.len() - 1]
            )));
        }
        if alpha[0] != 0.0 || alpha[alpha.len() - 1] != 1.0 {
            return Err(Error::Geometry("labels must run from 0 to 1".into()));
        }
        if alpha.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Geometry("labels must be strictly increasing".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Geometry("non-finite marker position".into()));
        }
        Ok(Self { alpha, points })
    }

    /// Flat interface `x2 = 1` with `n` uniformly spaced markers.
    pub fn flat(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Argument("flat interface needs n >= 2".into()));
        }
        let alpha: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let points = alpha.iter().map(|&a| Point::new(a, 1.0)).collect();
        Self::new(alpha, points)
    }

    /// Samples `x2 = 1 + height(x1)` at `n` uniform abscissae; `height` must
    /// vanish at both ends.
    pub fn graph(n: usize, height: impl Fn(f64) -> f64) -> Result<Self> {
        let flat = Self::flat(n)?;
        let mut points = flat.points;
        let last = points.len() - 1;
        for p in &mut points[1..last] {
            p.y = 1.0 + height(p.x);
        }
        Self::new(flat.alpha, points)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn segment_count(&self) -> usize {
        self.points.len() - 1
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).collect()
    }

    pub fn arclength(&self) -> f64 {
        self.segment_lengths().iter().sum()
    }

    /// True when every marker satisfies `0 <= x1 <= 1`.
    pub fn within_strip(&self) -> bool {
        self.points.iter().all(|p| (0.0..=1.0).contains(&p.x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcKind {
    /// Potential prescribed (free surface).
    DirichletSurface,
    /// Normal flux prescribed (fixed walls).
    NeumannWall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Bottom,
    Right,
    Surface,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub a: Point,
    pub b: Point,
    pub mid: Point,
    /// Unit tangent from `a` to `b`.
    pub tangent: Point,
    /// Unit normal pointing out of the fluid.
    pub normal: Point,
    pub length: f64,
    pub bc: BcKind,
    pub side: Side,
}

impl Panel {
    pub fn new(a: Point, b: Point, bc: BcKind, side: Side) -> Result<Self> {
        let d = b - a;
        let length = d.norm();
        if !(length > 1e-14) {
            return Err(Error::Geometry(format!("degenerate panel {a:?} -> {b:?}")));
        }
        let tangent = d * (1.0 / length);
        Ok(Self {
            a,
            b,
            mid: (a + b) * 0.5,
            tangent,
            // clockwise rotation: outward for a counterclockwise polygon
            normal: Point::new(tangent.y, -tangent.x),
            length,
            bc,
            side,
        })
    }

    /// Euclidean distance from `p` to the closed segment.
    pub fn distance_to(&self, p: Point) -> f64 {
        let s = (p - self.a).dot(self.tangent).clamp(0.0, self.length);
        (p - (self.a + self.tangent * s)).norm()
    }
}

/// Closed counterclockwise panel polygon: bottom wall, right wall, free
/// surface traversed right to left, left wall.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMesh {
    panels: Vec<Panel>,
    bottom: Range<usize>,
    right: Range<usize>,
    surface: Range<usize>,
    left: Range<usize>,
}

pub fn build_boundary_mesh(curve: &InterfaceCurve, wall_panels_per_side: usize) -> Result<BoundaryMesh> {
    if wall_panels_per_side < 4 {
        return Err(Error::Argument(format!(
            "wall_panels_per_side = {wall_panels_per_side}, need at least 4"
        )));
    }
    let pts = curve.points();
    if pts[0] != CORNER_LEFT || pts[pts.len() - 1] != CORNER_RIGHT {
        return Err(Error::Geometry("interface endpoints are not pinned".into()));
    }
    let m = wall_panels_per_side;
    let ns = curve.segment_count();
    let mut panels = Vec::with_capacity(3 * m + ns);
    let frac = |i: usize| i as f64 / m as f64;

    for i in 0..m {
        let a = Point::new(frac(i), 0.0);
        let b = Point::new(frac(i + 1), 0.0);
        panels.push(Panel::new(a, b, BcKind::NeumannWall, Side::Bottom)?);
    }
    for i in 0..m {
        let a = Point::new(1.0, frac(i));
        let b = Point::new(1.0, frac(i + 1));
        panels.push(Panel::new(a, b, BcKind::NeumannWall, Side::Right)?);
    }
    for i in (0..ns).rev() {
        panels.push(Panel::new(pts[i + 1], pts[i], BcKind::DirichletSurface, Side::Surface)?);
    }
    for i in 0..m {
        let a = Point::new(0.0, 1.0 - frac(i));
        let b = Point::new(0.0, 1.0 - frac(i + 1));
        panels.push(Panel::new(a, b, BcKind::NeumannWall, Side::Left)?);
    }

    let mesh = BoundaryMesh {
        panels,
        bottom: 0..m,
        right: m..2 * m,
        surface: 2 * m..2 * m + ns,
        left: 2 * m + ns..3 * m + ns,
    };
    if let Some((i, j)) = first_crossing(&mesh.vertices()) {
        return Err(Error::SelfIntersection(format!("panels {i} and {j} intersect")));
    }
    if !(mesh.signed_area() > 0.0) {
        return Err(Error::Geometry("boundary polygon is not positively oriented".into()));
    }
    Ok(mesh)
}

impl BoundaryMesh {
    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn side_range(&self, side: Side) -> Range<usize> {
        match side {
            Side::Bottom => self.bottom.clone(),
            Side::Right => self.right.clone(),
            Side::Surface => self.surface.clone(),
            Side::Left => self.left.clone(),
        }
    }

    pub fn surface_range(&self) -> Range<usize> {
        self.surface.clone()
    }

    pub fn surface_count(&self) -> usize {
        self.surface.len()
    }

    pub fn wall_count(&self) -> usize {
        self.panels.len() - self.surface.len()
    }

    /// Mesh index of the panel covering curve segment `seg` (markers `seg`
    /// and `seg + 1`).
    pub fn surface_panel_of_segment(&self, seg: usize) -> usize {
        self.surface.end - 1 - seg
    }

    /// Indices of the panels with the given boundary-condition kind, in mesh
    /// order.
    pub fn indices_of(&self, kind: BcKind) -> Vec<usize> {
        (0..self.panels.len()).filter(|&i| self.panels[i].bc == kind).collect()
    }

    /// Polygon vertices in traversal order (each panel's start point).
    pub fn vertices(&self) -> Vec<Point> {
        self.panels.iter().map(|p| p.a).collect()
    }

    fn signed_area(&self) -> f64 {
        0.5 * self.panels.iter().map(|p| p.a.cross(p.b)).sum::<f64>()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.panels {
            lo.x = lo.x.min(p.a.x);
            lo.y = lo.y.min(p.a.y);
            hi.x = hi.x.max(p.a.x);
            hi.y = hi.y.max(p.a.y);
        }
        (lo, hi)
    }

    /// Even-odd crossing test against the closed polygon.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for panel in &self.panels {
            let (a, b) = (panel.a, panel.b);
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Smallest `distance / panel length` over all panels.
    pub fn near_field_ratio(&self, p: Point) -> f64 {
        self.panels
            .iter()
            .map(|panel| panel.distance_to(p) / panel.length)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Shoelace area of the boundary polygon.
pub fn polygon_area(mesh: &BoundaryMesh) -> f64 {
    mesh.signed_area()
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test, collinear overlaps included.
pub fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// True iff two non-adjacent segments of the open marker polyline meet.
pub fn self_intersects(curve: &InterfaceCurve) -> bool {
    let p = curve.points();
    let n = p.len().saturating_sub(1);
    for i in 0..n {
        for j in i + 2..n {
            if segments_intersect(p[i], p[i + 1], p[j], p[j + 1]) {
                return true;
            }
        }
    }
    false
}

/// First pair of non-adjacent edges of a closed polygon that intersect.
fn first_crossing(vertices: &[Point]) -> Option<(usize, usize)> {
    let n = vertices.len();
    let edge = |i: usize| (vertices[i], vertices[(i + 1) % n]);
    for i in 0..n {
        let (a1, a2) = edge(i);
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (b1, b2) = edge(j);
            if segments_intersect(a1, a2, b1, b2) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Closed boundary polygon (walls plus surface) of the curve fails to be
/// simple, or the surface has left the strip.
pub fn boundary_self_intersects(curve: &InterfaceCurve) -> bool {
    if !curve.within_strip() {
        return true;
    }
    let mut vertices = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)];
    vertices.extend(curve.points().iter().rev().copied());
    first_crossing(&vertices).is_some()
}
