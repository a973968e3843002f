//! Planar points and polygonal boundary curves.

use std::ops::{Add, Mul, Sub};

use crate::error::{AbemError, Result};

/// Point (or vector) in the plane.
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

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + t * (other.x - self.x),
            self.y + t * (other.y - self.y),
        )
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// Euclidean distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    p.dist(a.lerp(b, t))
}

/// Euclidean distance between the segments `[a0, a1]` and `[b0, b1]`.
pub fn segment_segment_distance(a0: Point, a1: Point, b0: Point, b1: Point) -> f64 {
    if segments_intersect(a0, a1, b0, b1) {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

fn segments_intersect(a0: Point, a1: Point, b0: Point, b1: Point) -> bool {
    let d1 = (a1 - a0).cross(b0 - a0);
    let d2 = (a1 - a0).cross(b1 - a0);
    let d3 = (b1 - b0).cross(a0 - b0);
    let d4 = (b1 - b0).cross(a1 - b0);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Polygonal curve in the plane: an open arc or a closed polygon.
///
/// Every vertex is a permanent node of any mesh built on the curve, so
/// mesh elements never straddle a corner.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    vertices: Vec<Point>,
    closed: bool,
    corner_indices: Vec<usize>,
}

impl BoundaryCurve {
    pub fn new(vertices: Vec<Point>, closed: bool) -> Result<Self> {
        let min_vertices = if closed { 3 } else { 2 };
        if vertices.len() < min_vertices {
            return Err(AbemError::DegenerateCurve(format!(
                "{} vertices given, at least {min_vertices} required",
                vertices.len()
            )));
        }
        if vertices
            .iter()
            .any(|v| !v.x.is_finite() || !v.y.is_finite())
        {
            return Err(AbemError::DegenerateCurve("non-finite vertex".into()));
        }
        let sides = if closed {
            vertices.len()
        } else {
            vertices.len() - 1
        };
        for i in 0..sides {
            let a = vertices[i];
            let b = vertices[(i + 1) % vertices.len()];
            if a == b {
                return Err(AbemError::DegenerateCurve(format!(
                    "consecutive vertices {i} and {} coincide",
                    (i + 1) % vertices.len()
                )));
            }
        }
        let corner_indices = Self::find_corners(&vertices, closed);
        let curve = Self {
            vertices,
            closed,
            corner_indices,
        };
        if curve.diameter() == 0.0 {
            return Err(AbemError::DegenerateCurve("zero diameter".into()));
        }
        Ok(curve)
    }

    /// Straight segment from `a` to `b`.
    pub fn segment(a: Point, b: Point) -> Result<Self> {
        Self::new(vec![a, b], false)
    }

    fn find_corners(vertices: &[Point], closed: bool) -> Vec<usize> {
        let n = vertices.len();
        (0..n)
            .filter(|&i| {
                if !closed && (i == 0 || i == n - 1) {
                    return false;
                }
                let prev = vertices[(i + n - 1) % n];
                let next = vertices[(i + 1) % n];
                let d0 = vertices[i] - prev;
                let d1 = next - vertices[i];
                d0.cross(d1).abs() > 1e-12 * d0.norm() * d1.norm() || d0.dot(d1) < 0.0
            })
            .collect()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn corner_indices(&self) -> &[usize] {
        &self.corner_indices
    }

    pub fn side_count(&self) -> usize {
        if self.closed {
            self.vertices.len()
        } else {
            self.vertices.len() - 1
        }
    }

    /// Endpoints of side `i`.
    pub fn side(&self, i: usize) -> (Point, Point) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn length(&self) -> f64 {
        (0..self.side_count())
            .map(|i| {
                let (a, b) = self.side(i);
                a.dist(b)
            })
            .sum()
    }

    /// Largest distance between two vertices, which equals the diameter of
    /// the polygon and of its convex hull.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max(a.dist(*b));
            }
        }
        d
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len() as f64;
        let sum = self
            .vertices
            .iter()
            .fold(Point::default(), |acc, &v| acc + v);
        sum * (1.0 / n)
    }

    /// Endpoints of an open arc; `None` for closed curves.
    pub fn endpoints(&self) -> Option<(Point, Point)> {
        if self.closed {
            None
        } else {
            Some((self.vertices[0], *self.vertices.last().unwrap()))
        }
    }

    fn scaled(&self, center: Point, factor: f64) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|&v| center + (v - center) * factor)
                .collect(),
            closed: self.closed,
            corner_indices: self.corner_indices.clone(),
        }
    }
}

/// Diameter every curve is scaled to before solving; the 2D simple-layer
/// operator is elliptic only for diameters below 1.
pub const NORMALIZED_DIAMETER: f64 = 0.5;

/// Scales `curve` about its vertex centroid to diameter
/// [`NORMALIZED_DIAMETER`] and returns the factor applied to coordinates.
pub fn normalize_curve(curve: &BoundaryCurve) -> Result<(BoundaryCurve, f64)> {
    let diameter = curve.diameter();
    if !(diameter > 0.0) {
        return Err(AbemError::DegenerateCurve("zero diameter".into()));
    }
    let factor = NORMALIZED_DIAMETER / diameter;
    if factor == 1.0 {
        return Ok((curve.clone(), 1.0));
    }
    Ok((curve.scaled(curve.centroid(), factor), factor))
}
