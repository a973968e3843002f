//! Closed-form integrals of the 2D Laplace fundamental solution over
//! straight segments.
//!
//! Everything here works with `ln|x - y|`; the fundamental solution is
//! `G(z) = -ln|z| / (2 pi)`.

use std::f64::consts::PI;

use crate::geometry::{point_segment_distance, segment_segment_distance, Point};
use crate::mesh::Element;
use crate::quadrature::{gauss, order_for_separation};

/// `1 / (2 pi)`.
pub const INV_2PI: f64 = 0.5 / PI;

/// Fundamental solution of the Laplacian in two dimensions,
/// `G(z) = -ln|z| / (2 pi)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct KernelLog2D;

impl KernelLog2D {
    pub fn eval(&self, z: Point) -> f64 {
        -INV_2PI * z.norm().ln()
    }
}

/// Straight segment with cached frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
    pub len: f64,
    /// Unit tangent from `a` to `b`.
    pub tangent: Point,
    /// Unit normal, the tangent rotated counter-clockwise.
    pub normal: Point,
}

impl Segment {
    pub fn new(a: Point, b: Point) -> Self {
        let len = a.dist(b);
        let tangent = (b - a) * (1.0 / len);
        Self {
            a,
            b,
            len,
            tangent,
            normal: tangent.perp(),
        }
    }

    pub fn point_at(&self, t: f64) -> Point {
        self.a.lerp(self.b, t)
    }

    pub fn distance_to(&self, x: Point) -> f64 {
        point_segment_distance(x, self.a, self.b)
    }
}

impl From<&Element> for Segment {
    fn from(e: &Element) -> Self {
        Segment::new(e.start, e.end)
    }
}

/// `int_0^u 0.5 ln(v^2 + d^2) dv`.
fn half_log_antiderivative(u: f64, d: f64) -> f64 {
    let log_term = if u == 0.0 {
        0.0
    } else {
        0.5 * u * (u * u + d * d).ln()
    };
    let atan_term = if d == 0.0 { 0.0 } else { d * (u / d).atan() };
    log_term - u + atan_term
}

/// `int_seg ln|x - y| ds_y` in closed form; finite for every `x`.
pub fn log_integral_closed(x: Point, seg: &Segment) -> f64 {
    let r = x - seg.a;
    let p = r.dot(seg.tangent);
    let d = r.dot(seg.normal);
    half_log_antiderivative(seg.len - p, d) - half_log_antiderivative(-p, d)
}

/// `int_seg ln|x - y| ds_y`; closed form near the segment, Gauss
/// quadrature when `x` is well separated.
pub fn log_integral(x: Point, seg: &Segment) -> f64 {
    let dist = seg.distance_to(x);
    if dist > 2.0 * seg.len {
        let rule = gauss(order_for_separation(seg.len, dist));
        let mut acc = 0.0;
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            acc += w * (x - seg.point_at(t)).norm_sq().ln();
        }
        0.5 * seg.len * acc
    } else {
        log_integral_closed(x, seg)
    }
}

/// Gradient in `x` of `int_seg ln|x - y| ds_y`:
/// `tangent * ln(|x - a| / |x - b|) + normal * angle`, where `angle` is the
/// signed angle the segment subtends at `x`. Singular at the endpoints.
pub fn log_integral_gradient(x: Point, seg: &Segment) -> Point {
    let ra = x - seg.a;
    let rb = x - seg.b;
    let ra2 = ra.norm_sq();
    let rb2 = rb.norm_sq();
    // |x-a|^2 - |x-b|^2 without cancellation
    let ratio = (seg.b - seg.a).dot(ra + rb) / rb2;
    let along = if ratio.abs() < 0.5 {
        0.5 * ratio.ln_1p()
    } else {
        0.5 * (ra2.ln() - rb2.ln())
    };
    let angle = ra.cross(rb).atan2(ra.dot(rb));
    seg.tangent * along + seg.normal * angle
}

/// Derivative of `int_seg ln|x - y| ds_y` along the unit direction `dir`;
/// closed form near the segment, Gauss quadrature of the smooth kernel
/// gradient when `x` is well separated.
pub fn log_integral_directional(x: Point, seg: &Segment, dir: Point) -> f64 {
    let dist = seg.distance_to(x);
    if dist > 2.0 * seg.len {
        let rule = gauss(order_for_separation(seg.len, dist));
        let mut acc = 0.0;
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            let r = x - seg.point_at(t);
            acc += w * r.dot(dir) / r.norm_sq();
        }
        seg.len * acc
    } else {
        log_integral_gradient(x, seg).dot(dir)
    }
}

fn phi(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        0.5 * u * u * u.abs().ln() - 0.75 * u * u
    }
}

/// `int_0^L int_0^L ln|s - t| ds dt`.
pub fn self_log_double_integral(len: f64) -> f64 {
    len * len * (len.ln() - 1.5)
}

fn collinear_positions(si: &Segment, sj: &Segment) -> Option<(f64, f64)> {
    let scale = si.len.max(sj.len);
    if si.tangent.cross(sj.tangent).abs() > 1e-13 {
        return None;
    }
    let off_a = (sj.a - si.a).dot(si.normal).abs();
    let off_b = (sj.b - si.a).dot(si.normal).abs();
    if off_a > 1e-13 * scale || off_b > 1e-13 * scale {
        return None;
    }
    let alpha = (sj.a - si.a).dot(si.tangent);
    let beta = (sj.b - si.a).dot(si.tangent);
    Some(if alpha <= beta {
        (alpha, beta)
    } else {
        (beta, alpha)
    })
}

/// Closed form of `int_{a1}^{b1} int_{a2}^{b2} ln|s - t| dt ds` for two
/// intervals on a common line.
pub fn collinear_log_double_integral(a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
    phi(b1 - a2) - phi(b1 - b2) - phi(a1 - a2) + phi(a1 - b2)
}

const MAX_PANEL_DEPTH: u32 = 40;

fn outer_panels(si: &Segment, sj: &Segment, t0: f64, t1: f64, depth: u32) -> f64 {
    let p0 = si.point_at(t0);
    let p1 = si.point_at(t1);
    let h = (t1 - t0) * si.len;
    let d = segment_segment_distance(p0, p1, sj.a, sj.b);
    if d >= h || depth >= MAX_PANEL_DEPTH {
        let order = if d >= h {
            order_for_separation(h, d).max(4)
        } else {
            16
        };
        let rule = gauss(order);
        let mut acc = 0.0;
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            acc += w * log_integral_closed(p0.lerp(p1, t), sj);
        }
        acc * h
    } else {
        let tm = 0.5 * (t0 + t1);
        outer_panels(si, sj, t0, tm, depth + 1) + outer_panels(si, sj, tm, t1, depth + 1)
    }
}

/// `int_{si} int_{sj} ln|x - y| ds_y ds_x`.
///
/// Identical and near collinear pairs use closed forms; well separated
/// pairs use tensor Gauss rules; everything else integrates the closed-form
/// inner integral with Gauss panels on `si` refined toward `sj`.
pub fn log_double_integral(si: &Segment, sj: &Segment) -> f64 {
    if (si.a == sj.a && si.b == sj.b) || (si.a == sj.b && si.b == sj.a) {
        return self_log_double_integral(si.len);
    }
    let lmax = si.len.max(sj.len);
    let dist = segment_segment_distance(si.a, si.b, sj.a, sj.b);
    if dist <= 4.0 * lmax {
        if let Some((a2, b2)) = collinear_positions(si, sj) {
            return collinear_log_double_integral(0.0, si.len, a2, b2);
        }
    }
    if dist >= 4.0 * lmax {
        let ri = gauss(order_for_separation(si.len, dist));
        let rj = gauss(order_for_separation(sj.len, dist));
        let mut acc = 0.0;
        for (&ti, &wi) in ri.nodes.iter().zip(&ri.weights) {
            let x = si.point_at(ti);
            let mut inner = 0.0;
            for (&tj, &wj) in rj.nodes.iter().zip(&rj.weights) {
                inner += wj * (x - sj.point_at(tj)).norm_sq().ln();
            }
            acc += wi * inner;
        }
        return 0.5 * acc * si.len * sj.len;
    }
    outer_panels(si, sj, 0.0, 1.0, 0)
}

/// Simple-layer Galerkin entry `int int G(x - y)` for two segments.
pub fn simple_layer_entry(si: &Segment, sj: &Segment) -> f64 {
    -INV_2PI * log_double_integral(si, sj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(ax: f64, ay: f64, bx: f64, by: f64) -> Segment {
        Segment::new(Point::new(ax, ay), Point::new(bx, by))
    }

    #[test]
    fn unit_collinear_entries() {
        let s0 = seg(0.0, 0.0, 1.0, 0.0);
        let s1 = seg(1.0, 0.0, 2.0, 0.0);
        let diag = simple_layer_entry(&s0, &s0);
        assert!((diag - 3.0 / (4.0 * PI)).abs() < 1e-15);
        let off = simple_layer_entry(&s0, &s1);
        assert!((off - (1.5 - 2.0 * 2f64.ln()) / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn self_entry_scaling() {
        for h in [0.5, 0.25, 1e-3] {
            let s = seg(0.0, 0.0, h, 0.0);
            let expected = h * h / (2.0 * PI) * (1.5 - h.ln());
            assert!(
                (simple_layer_entry(&s, &s) - expected).abs()
                    < 1e-15 * expected.abs().max(1e-300) + 1e-18
            );
        }
    }

    #[test]
    fn potential_of_unit_density_at_midpoint() {
        let s = seg(0.0, 0.0, 1.0, 0.0);
        let v = -INV_2PI * log_integral(Point::new(0.5, 0.0), &s);
        assert!((v - (1.0 + 2f64.ln()) / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn far_and_closed_inner_agree() {
        let s = seg(0.1, 0.2, 0.3, -0.1);
        for x in [
            Point::new(3.0, 1.0),
            Point::new(-2.0, 0.5),
            Point::new(0.2, 5.0),
        ] {
            let a = log_integral(x, &s);
            let b = log_integral_closed(x, &s);
            assert!((a - b).abs() < 1e-13 * b.abs().max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = seg(0.0, 0.0, 1.0, 0.5);
        for x in [
            Point::new(0.3, 0.7),
            Point::new(1.5, -0.2),
            Point::new(0.2, 0.3),
        ] {
            let g = log_integral_gradient(x, &s);
            let h = 1e-6;
            let fx = (log_integral_closed(x + Point::new(h, 0.0), &s)
                - log_integral_closed(x - Point::new(h, 0.0), &s))
                / (2.0 * h);
            let fy = (log_integral_closed(x + Point::new(0.0, h), &s)
                - log_integral_closed(x - Point::new(0.0, h), &s))
                / (2.0 * h);
            assert!((g.x - fx).abs() < 1e-7, "{} {}", g.x, fx);
            assert!((g.y - fy).abs() < 1e-7, "{} {}", g.y, fy);
        }
    }

    #[test]
    fn far_directional_derivative_matches_closed_form() {
        let s = seg(0.0, 0.0, 0.1, 0.05);
        let dir = Point::new(0.6, 0.8);
        for x in [Point::new(1.0, 0.3), Point::new(-0.5, -0.5)] {
            let a = log_integral_directional(x, &s, dir);
            let b = log_integral_gradient(x, &s).dot(dir);
            assert!((a - b).abs() < 1e-13 * b.abs().max(1e-3), "{a} {b}");
        }
    }

    #[test]
    fn kernel_is_radial() {
        let k = KernelLog2D;
        assert!((k.eval(Point::new(0.3, 0.4)) - k.eval(Point::new(-0.5, 0.0))).abs() < 1e-15);
        assert!(k.eval(Point::new(1e-300, 0.0)) > 100.0);
    }
}
