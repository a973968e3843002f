//! Faermann's estimator: `H^{1/2}` Sobolev-Slobodeckij seminorms of the
//! residual on node patches.
//!
//! The residual is interpolated on every element by a polynomial of degree
//! `q` at Chebyshev-Lobatto points. On one element the difference quotient
//! of a polynomial is again a polynomial, so the diagonal block is
//! integrated exactly by tensor Gauss rules. Blocks of two elements sharing
//! a node are Duffy-transformed around that node, which leaves a smooth
//! integrand.

use nalgebra::DMatrix;

use crate::error::{AbemError, Result};
use crate::exec::Execution;
use crate::galerkin::{Density, EquationTag, Regularity, RightHandSide};
use crate::geometry::Point;
use crate::kernel::Segment;
use crate::quadrature::{gauss, lobatto_points};

use super::residual::ResidualField;
use super::{EstimatorKind, EstimatorReport};

/// Quadrature parameters of the patch seminorms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlobodeckijQuadrature {
    pub interpolation_degree: usize,
    pub gauss_order: usize,
    /// Number of dyadic splits of the angular Duffy coordinate.
    pub diagonal_subdivisions: usize,
}

impl Default for SlobodeckijQuadrature {
    fn default() -> Self {
        Self {
            interpolation_degree: 6,
            gauss_order: 8,
            diagonal_subdivisions: 3,
        }
    }
}

/// Monomial coefficients of element interpolants.
struct Interpolator {
    nodes: Vec<f64>,
    inverse_vandermonde: DMatrix<f64>,
}

impl Interpolator {
    fn new(degree: usize) -> Self {
        let nodes = lobatto_points(degree);
        let n = nodes.len();
        let v = DMatrix::from_fn(n, n, |i, j| nodes[i].powi(j as i32));
        let inverse_vandermonde = v.try_inverse().expect("distinct interpolation nodes");
        Self {
            nodes,
            inverse_vandermonde,
        }
    }

    fn coefficients(&self, values: &[f64]) -> Vec<f64> {
        let n = self.nodes.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.inverse_vandermonde[(i, j)] * values[j])
                    .sum()
            })
            .collect()
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
}

impl SlobodeckijQuadrature {
    pub fn validate(&self) -> Result<()> {
        if self.interpolation_degree < 2 || self.interpolation_degree > 16 {
            return Err(AbemError::InvalidParameter {
                name: "interpolation_degree",
                reason: "must lie in 2..=16".into(),
            });
        }
        if self.gauss_order == 0 || self.gauss_order > crate::quadrature::MAX_GAUSS_ORDER {
            return Err(AbemError::InvalidParameter {
                name: "gauss_order",
                reason: "out of range".into(),
            });
        }
        if self.diagonal_subdivisions == 0 || self.diagonal_subdivisions > 10 {
            return Err(AbemError::InvalidParameter {
                name: "diagonal_subdivisions",
                reason: "must lie in 1..=10".into(),
            });
        }
        Ok(())
    }

    /// Interpolation points on `[0, 1]`; residual values are expected at
    /// these local parameters.
    pub fn nodes(&self) -> Vec<f64> {
        lobatto_points(self.interpolation_degree)
    }

    /// `int_T int_T |p(x) - p(y)|^2 / |x - y|^2` for the interpolant of
    /// `values` (independent of the element length).
    fn self_block(&self, c: &[f64]) -> f64 {
        let rule = gauss(self.gauss_order);
        let q = c.len() - 1;
        let mut total = 0.0;
        let mut ps = vec![0.0; q];
        let mut pt = vec![0.0; q];
        for (&s, &ws) in rule.nodes.iter().zip(&rule.weights) {
            powers(s, &mut ps);
            let mut inner = 0.0;
            for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
                powers(t, &mut pt);
                // (p(s) - p(t)) / (s - t) = sum_k c_k sum_{j<k} s^j t^{k-1-j}
                let mut dd = 0.0;
                for k in 1..=q {
                    let mut h = 0.0;
                    for j in 0..k {
                        h += ps[j] * pt[k - 1 - j];
                    }
                    dd += c[k] * h;
                }
                inner += wt * dd * dd;
            }
            total += ws * inner;
        }
        total
    }

    fn angular_rule(&self) -> (Vec<f64>, Vec<f64>) {
        let panels = 1usize << self.diagonal_subdivisions;
        let g = gauss(self.gauss_order);
        let h = 1.0 / panels as f64;
        let mut nodes = Vec::with_capacity(panels * g.order());
        let mut weights = Vec::with_capacity(panels * g.order());
        for p in 0..panels {
            for (&t, &w) in g.nodes.iter().zip(&g.weights) {
                nodes.push((p as f64 + t) * h);
                weights.push(w * h);
            }
        }
        (nodes, weights)
    }

    /// `int_A int_B |p_A(x) - p_B(y)|^2 / |x - y|^2` for two elements that
    /// share the node `z`. `ca`, `cb` are monomial coefficients in the
    /// local coordinate measured from `z`.
    fn cross_block(&self, la: f64, ea: Point, ca: &[f64], lb: f64, eb: Point, cb: &[f64]) -> f64 {
        let rule = gauss(self.gauss_order);
        let (vn, vw) = self.angular_rule();
        // q(x) = (p(x) - p(0)) / x
        let qa = &ca[1..];
        let qb = &cb[1..];
        let mut total = 0.0;
        for (&v, &wv) in vn.iter().zip(&vw) {
            let g1 = (ea * la - eb * (v * lb)).norm_sq();
            let g2 = (ea * (v * la) - eb * lb).norm_sq();
            let mut inner = 0.0;
            for (&u, &wu) in rule.nodes.iter().zip(&rule.weights) {
                let d1 = horner(qa, u) - v * horner(qb, u * v);
                let d2 = v * horner(qa, u * v) - horner(qb, u);
                inner += wu * u * (d1 * d1 / g1 + d2 * d2 / g2);
            }
            total += wv * inner;
        }
        la * lb * total
    }

    /// Squared seminorm over the union of one or two elements sharing the
    /// node `z`; `values[i]` holds the function at [`nodes`](Self::nodes)
    /// of `segments[i]`, in the direction of the segment.
    pub fn patch_seminorm_sq(
        &self,
        segments: &[Segment],
        values: &[Vec<f64>],
        z: Point,
    ) -> Result<f64> {
        self.validate()?;
        let interp = Interpolator::new(self.interpolation_degree);
        let tol = 1e-12 * segments.iter().map(|s| s.len).fold(0.0, f64::max);
        let mut oriented = Vec::with_capacity(segments.len());
        let mut total = 0.0;
        for (s, v) in segments.iter().zip(values) {
            if v.len() != interp.nodes.len() {
                return Err(AbemError::DimensionMismatch {
                    expected: interp.nodes.len(),
                    found: v.len(),
                });
            }
            total += self.self_block(&interp.coefficients(v));
            let (from_z, dir) = if s.a.dist(z) <= tol {
                (v.clone(), s.tangent)
            } else if s.b.dist(z) <= tol {
                (v.iter().rev().copied().collect(), s.tangent * -1.0)
            } else {
                return Err(AbemError::NotANode { x: z.x, y: z.y });
            };
            oriented.push((s.len, dir, interp.coefficients(&from_z)));
        }
        match oriented.as_slice() {
            [_] => Ok(total),
            [(la, ea, ca), (lb, eb, cb)] => {
                Ok(total + 2.0 * self.cross_block(*la, *ea, ca, *lb, *eb, cb))
            }
            _ => Err(AbemError::InvalidParameter {
                name: "segments",
                reason: "a node patch has one or two elements".into(),
            }),
        }
    }
}

fn powers(x: f64, out: &mut [f64]) {
    let mut p = 1.0;
    for o in out.iter_mut() {
        *o = p;
        p *= x;
    }
}

pub fn faermann(f: &RightHandSide, u: &Density, equation: EquationTag) -> Result<EstimatorReport> {
    faermann_with(
        f,
        u,
        equation,
        &SlobodeckijQuadrature::default(),
        Execution::default(),
    )
}

/// `mu(T)^2 = sum over the nodes z of T of |F - V U|^2_{H^{1/2}(omega(z))}`.
pub fn faermann_with(
    f: &RightHandSide,
    u: &Density,
    equation: EquationTag,
    quad: &SlobodeckijQuadrature,
    exec: Execution,
) -> Result<EstimatorReport> {
    EstimatorKind::Faermann.check(equation)?;
    quad.validate()?;
    f.require(Regularity::HHalf)?;
    let field = ResidualField::new(f, u, equation)?;
    let mesh = u.space().mesh();
    let interp = Interpolator::new(quad.interpolation_degree);
    let ts = interp.nodes.clone();
    let values: Vec<Vec<f64>> = exec.map(mesh.len(), |e| {
        ts.iter().map(|&t| field.value(e, t)).collect()
    });
    let self_blocks: Vec<f64> = exec.map(mesh.len(), |e| {
        quad.self_block(&interp.coefficients(&values[e]))
    });
    let node_terms: Vec<f64> = exec.map(mesh.node_count(), |i| {
        let patch = mesh.node_elements(i);
        let mut s: f64 = patch.iter().map(|&e| self_blocks[e]).sum();
        if let [a, b] = patch[..] {
            // `a` ends at the node, `b` starts there
            let ea = mesh.element(a);
            let eb = mesh.element(b);
            let va: Vec<f64> = values[a].iter().rev().copied().collect();
            let ca = interp.coefficients(&va);
            let cb = interp.coefficients(&values[b]);
            s += 2.0
                * quad.cross_block(
                    ea.len(),
                    ea.tangent() * -1.0,
                    &ca,
                    eb.len(),
                    eb.tangent(),
                    &cb,
                );
        }
        s
    });
    let local = (0..mesh.len())
        .map(|e| {
            let (a, b) = mesh.element_nodes(e);
            (node_terms[a] + node_terms[b]).max(0.0).sqrt()
        })
        .collect();
    Ok(EstimatorReport::new(
        EstimatorKind::Faermann,
        equation,
        mesh.level(),
        local,
    ))
}
