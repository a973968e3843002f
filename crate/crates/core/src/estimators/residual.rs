//! Pointwise residuals and the weighted-residual estimators.

use crate::error::{AbemError, Result};
use crate::exec::Execution;
use crate::galerkin::{Density, EquationTag, Regularity, RightHandSide, TraceFn};
use crate::mesh::BoundaryMesh;
use crate::mesh_width::MeshWidth;
use crate::operators::PotentialEvaluator;
use crate::quadrature::gauss;
use crate::space::SpaceKind;

use super::{EstimatorKind, EstimatorReport};

/// Element quadrature for squared residuals: Gauss panels on `[0, 1]` with
/// dyadic subdivision toward both element endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResidualQuadrature {
    pub gauss_order: usize,
    pub endpoint_subdivisions: usize,
}

impl Default for ResidualQuadrature {
    fn default() -> Self {
        Self {
            gauss_order: 8,
            endpoint_subdivisions: 1,
        }
    }
}

impl ResidualQuadrature {
    /// Nodes and weights on `[0, 1]`.
    pub fn rule(&self) -> (Vec<f64>, Vec<f64>) {
        let mut breaks = vec![0.0];
        let mut left = Vec::new();
        let mut x = 0.5;
        for _ in 0..self.endpoint_subdivisions {
            x *= 0.5;
            left.push(x);
        }
        left.reverse();
        breaks.extend(&left);
        breaks.push(0.5);
        breaks.extend(left.iter().rev().map(|t| 1.0 - t));
        breaks.push(1.0);
        let g = gauss(self.gauss_order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in breaks.windows(2) {
            for (&t, &wt) in g.nodes.iter().zip(&g.weights) {
                nodes.push(w[0] + (w[1] - w[0]) * t);
                weights.push((w[1] - w[0]) * wt);
            }
        }
        (nodes, weights)
    }
}

/// Residual `F - A U` of a discrete solution, evaluable at element points.
pub struct ResidualField {
    equation: EquationTag,
    mesh: std::sync::Arc<BoundaryMesh>,
    value: Option<TraceFn>,
    derivative: Option<TraceFn>,
    // V applied to this element-wise density is `+V w` (weakly singular)
    // or the `V w'` inside `-W w` (hyper-singular)
    evaluator: PotentialEvaluator,
    shift: f64,
}

impl ResidualField {
    pub fn new(f: &RightHandSide, u: &Density, equation: EquationTag) -> Result<Self> {
        let space = u.space();
        if space.kind() != equation.space_kind() {
            return Err(AbemError::IncompatibleSpace(format!(
                "{equation} needs {}, solution lives in {}",
                equation.space_kind(),
                space.kind()
            )));
        }
        let (value, derivative, w) = match f {
            RightHandSide::Analytic {
                value,
                arc_derivative,
                ..
            } => (
                Some(value.clone()),
                arc_derivative.clone(),
                u.coefficients().iter().map(|c| -c).collect::<Vec<f64>>(),
            ),
            RightHandSide::Synthetic { density } => {
                let shift = stabilization_shift(u, equation);
                if !density.space().mesh().is_nested_in(space.mesh()) {
                    // data on a refinement: represent the residual there
                    let fine = density.space();
                    let uf = space.prolongate(u.coefficients(), fine)?;
                    let w: Vec<f64> = density
                        .coefficients()
                        .iter()
                        .zip(&uf)
                        .map(|(a, b)| a - b)
                        .collect();
                    let mut field = Self::build(equation, fine, None, None, &w, shift)?;
                    field.mesh = space.mesh().clone();
                    return Ok(field);
                }
                let v = density.space().prolongate(density.coefficients(), space)?;
                let w = v.iter().zip(u.coefficients()).map(|(a, b)| a - b).collect();
                (None, None, w)
            }
        };
        Self::build(
            equation,
            space,
            value,
            derivative,
            &w,
            stabilization_shift(u, equation),
        )
    }

    /// `A w` alone, without data.
    pub fn operator_only(w: &Density, equation: EquationTag) -> Result<Self> {
        if w.space().kind() != equation.space_kind() {
            return Err(AbemError::IncompatibleSpace(format!(
                "{equation} needs {}",
                equation.space_kind()
            )));
        }
        Self::build(equation, w.space(), None, None, w.coefficients(), 0.0)
    }

    fn build(
        equation: EquationTag,
        space: &crate::space::DiscreteSpace,
        value: Option<TraceFn>,
        derivative: Option<TraceFn>,
        w: &[f64],
        shift: f64,
    ) -> Result<Self> {
        let mesh = space.mesh().clone();
        let element_values = if space.kind() == SpaceKind::P0 {
            w.to_vec()
        } else {
            space.derivative(w)?
        };
        let evaluator = PotentialEvaluator::new(&mesh, &element_values);
        Ok(Self {
            equation,
            mesh,
            value,
            derivative,
            evaluator,
            shift,
        })
    }

    pub fn mesh(&self) -> &BoundaryMesh {
        &self.mesh
    }

    /// Residual at local parameter `t` of element `e`.
    pub fn value(&self, e: usize, t: f64) -> f64 {
        let el = self.mesh.element(e);
        let x = el.point_at(t);
        let data = self.value.as_ref().map_or(0.0, |f| f(x, el.arc_at(t)));
        let a = if self.equation.is_hypersingular() {
            -self.evaluator.derivative(x, el.tangent())
        } else {
            self.evaluator.value(x)
        };
        data + a + self.shift
    }

    pub fn has_derivative(&self) -> bool {
        self.value.is_none() || self.derivative.is_some()
    }

    /// Arc-length derivative of the weakly-singular residual at an interior
    /// point of element `e`.
    pub fn arc_derivative(&self, e: usize, t: f64) -> f64 {
        let el = self.mesh.element(e);
        let x = el.point_at(t);
        let data = self.derivative.as_ref().map_or(0.0, |f| f(x, el.arc_at(t)));
        data + self.evaluator.derivative(x, el.tangent())
    }

    /// Element-wise `int_T |integrand|^2`, where the integrand is the
    /// residual derivative (weakly singular) or the residual (hyper-singular).
    pub fn squared_integrals(&self, quad: &ResidualQuadrature, exec: Execution) -> Vec<f64> {
        let (nodes, weights) = quad.rule();
        let hyper = self.equation.is_hypersingular();
        exec.map(self.mesh.len(), |e| {
            let len = self.mesh.element(e).len();
            let s: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(&t, &w)| {
                    let v = if hyper {
                        self.value(e, t)
                    } else {
                        self.arc_derivative(e, t)
                    };
                    w * v * v
                })
                .sum();
            s * len
        })
    }
}

fn stabilization_shift(u: &Density, equation: EquationTag) -> f64 {
    if equation == EquationTag::HypersingularStabilized {
        -u.integral()
    } else {
        0.0
    }
}

fn required_regularity(equation: EquationTag) -> Regularity {
    if equation.is_hypersingular() {
        Regularity::L2
    } else {
        Regularity::HOne
    }
}

/// `int_T |r'|^2` (weakly singular) or `int_T |r|^2` (hyper-singular) per
/// element, the common core of `eta` and `rho`.
pub fn residual_integrals(
    f: &RightHandSide,
    u: &Density,
    equation: EquationTag,
) -> Result<Vec<f64>> {
    residual_integrals_with(
        f,
        u,
        equation,
        &ResidualQuadrature::default(),
        Execution::default(),
    )
}

pub fn residual_integrals_with(
    f: &RightHandSide,
    u: &Density,
    equation: EquationTag,
    quad: &ResidualQuadrature,
    exec: Execution,
) -> Result<Vec<f64>> {
    f.require(required_regularity(equation))?;
    let field = ResidualField::new(f, u, equation)?;
    if !equation.is_hypersingular() && !field.has_derivative() {
        return Err(AbemError::InsufficientRegularity {
            required: Regularity::HOne.name(),
            found: "data without arc-length derivative",
        });
    }
    Ok(field.squared_integrals(quad, exec))
}

/// `eta(T) = diam(T)^{1/2} ||r'||_{L2(T)}` or `diam(T)^{1/2} ||r||_{L2(T)}`.
pub fn weighted_residual(
    f: &RightHandSide,
    u: &Density,
    equation: EquationTag,
) -> Result<EstimatorReport> {
    let integrals = residual_integrals(f, u, equation)?;
    let mesh = u.space().mesh();
    let local = integrals
        .iter()
        .zip(mesh.elements())
        .map(|(i, e)| (e.len() * i).sqrt())
        .collect();
    Ok(EstimatorReport::new(
        EstimatorKind::WeightedResidual,
        equation,
        mesh.level(),
        local,
    ))
}

/// `rho(T)` with the modified mesh width in place of the diameter.
pub fn rho_modified(
    f: &RightHandSide,
    u: &Density,
    equation: EquationTag,
    width: &MeshWidth,
) -> Result<EstimatorReport> {
    let integrals = residual_integrals(f, u, equation)?;
    let mesh = u.space().mesh();
    if width.modified.len() != mesh.len() {
        return Err(AbemError::DimensionMismatch {
            expected: mesh.len(),
            found: width.modified.len(),
        });
    }
    let local = integrals
        .iter()
        .zip(&width.modified)
        .map(|(i, h)| (h * i).sqrt())
        .collect();
    Ok(EstimatorReport::new(
        EstimatorKind::RhoModified,
        equation,
        mesh.level(),
        local,
    ))
}

/// `||h^{1/2} d_s(V psi)|| / ||psi||_V` (weakly singular) or
/// `||h^{1/2} W v|| / ||v||_W` (hyper-singular); `energy_sq` is the
/// Galerkin quadratic form of the density.
pub fn inverse_estimate_ratio(
    w: &Density,
    equation: EquationTag,
    energy_sq: f64,
    quad: &ResidualQuadrature,
    exec: Execution,
) -> Result<f64> {
    let field = ResidualField::operator_only(w, equation)?;
    let integrals = field.squared_integrals(quad, exec);
    let num: f64 = integrals
        .iter()
        .zip(field.mesh().elements())
        .map(|(i, e)| e.len() * i)
        .sum();
    if !(energy_sq > 0.0) {
        return Err(AbemError::ZeroError);
    }
    Ok((num / energy_sq).sqrt())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::{BoundaryCurve, Point};
    use crate::space::DiscreteSpace;

    fn slit(n: usize) -> Arc<BoundaryMesh> {
        let c = BoundaryCurve::segment(Point::new(-0.25, 0.0), Point::new(0.25, 0.0)).unwrap();
        Arc::new(BoundaryMesh::initial(c, n, 2.0).unwrap())
    }

    #[test]
    fn rule_is_normalized() {
        let (n, w) = ResidualQuadrature::default().rule();
        assert_eq!(n.len(), 32);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_solution_closed_form_indicators() {
        let m = slit(4);
        let u = Density::zero(DiscreteSpace::p0(m.clone()));
        let eta = weighted_residual(
            &RightHandSide::arc_length(),
            &u,
            EquationTag::WeaklySingular,
        )
        .unwrap();
        for (v, e) in eta.local.iter().zip(m.elements()) {
            assert!((v - e.len()).abs() < 1e-14);
        }
        let s1 = DiscreteSpace::new(SpaceKind::S1Tilde, m.clone()).unwrap();
        let u = Density::zero(s1);
        let eta = weighted_residual(
            &RightHandSide::constant_one(),
            &u,
            EquationTag::Hypersingular,
        )
        .unwrap();
        for (v, e) in eta.local.iter().zip(m.elements()) {
            assert!((v - e.len()).abs() < 1e-14);
        }
    }

    #[test]
    fn rough_data_rejected_for_weakly_singular() {
        let u = Density::zero(DiscreteSpace::p0(slit(2)));
        let f = RightHandSide::analytic("rough", Regularity::HHalf, |_, _| 1.0);
        let err = weighted_residual(&f, &u, EquationTag::WeaklySingular).unwrap_err();
        assert!(err.to_string().contains("H_one"));
    }

    #[test]
    fn rho_with_plain_width_is_eta() {
        let m = slit(4);
        let u = Density::zero(DiscreteSpace::p0(m.clone()));
        let f = RightHandSide::arc_length();
        let eta = weighted_residual(&f, &u, EquationTag::WeaklySingular).unwrap();
        let w = MeshWidth::initial(&m, 1);
        let rho = rho_modified(&f, &u, EquationTag::WeaklySingular, &w).unwrap();
        assert_eq!(eta.local, rho.local);
    }
}
