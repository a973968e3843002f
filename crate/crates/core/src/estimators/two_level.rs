//! Two-level estimators: the residual tested with one hierarchical
//! fine-mesh function per element, scaled by its energy norm.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{AbemError, Result};
use crate::exec::Execution;
use crate::galerkin::{Density, EquationTag, RightHandSide};
use crate::mesh::BoundaryMesh;
use crate::operators::{matvec, simple_layer_matrix};
use crate::space::DiscreteSpace;

use super::{EstimatorKind, EstimatorReport};

/// Fine-mesh test function attached to a coarse element `T` with sons
/// `T_a`, `T_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoLevelBasis {
    /// `+1` on `T_a`, `-1` on `T_b`; zero mean on `T`.
    Haar,
    /// Fine hat at the midpoint of `T`, zero at every other fine node.
    MidpointHat,
}

impl TwoLevelBasis {
    pub fn for_equation(equation: EquationTag) -> Self {
        if equation.is_hypersingular() {
            TwoLevelBasis::MidpointHat
        } else {
            TwoLevelBasis::Haar
        }
    }
}

/// Uniform refinement of a mesh with its simple-layer matrix.
#[derive(Debug, Clone)]
pub struct TwoLevelFine {
    pub mesh: Arc<BoundaryMesh>,
    pub simple_layer: DMatrix<f64>,
}

impl TwoLevelFine {
    pub fn new(coarse: &BoundaryMesh, exec: Execution) -> Self {
        let mesh = Arc::new(coarse.uniform_refine());
        let simple_layer = simple_layer_matrix(&mesh, exec);
        Self { mesh, simple_layer }
    }
}

pub fn two_level(f: &RightHandSide, u: &Density, equation: EquationTag) -> Result<EstimatorReport> {
    let fine = TwoLevelFine::new(u.space().mesh(), Execution::default());
    two_level_with(f, u, equation, &fine)
}

pub fn two_level_with(
    f: &RightHandSide,
    u: &Density,
    equation: EquationTag,
    fine: &TwoLevelFine,
) -> Result<EstimatorReport> {
    let coarse = u.space().mesh();
    if u.space().kind() != equation.space_kind() {
        return Err(AbemError::IncompatibleSpace(format!(
            "{equation} needs {}",
            equation.space_kind()
        )));
    }
    let map = coarse.ancestor_map(&fine.mesh)?;
    let n = coarse.len();
    if fine.mesh.len() != 2 * n || (0..n).any(|t| map[2 * t] != t || map[2 * t + 1] != t) {
        return Err(AbemError::NotNested(
            "two-level estimator needs the uniform refinement".into(),
        ));
    }
    let sf = DiscreteSpace::new(u.space().kind(), fine.mesh.clone())?;
    let u_fine = u.prolongate(&sf)?;
    let (w, load) = match f {
        RightHandSide::Analytic { .. } => (
            u_fine
                .coefficients()
                .iter()
                .map(|c| -c)
                .collect::<Vec<f64>>(),
            Some(f.analytic_load(&sf)?),
        ),
        RightHandSide::Synthetic { density } => {
            let v = density.space().prolongate(density.coefficients(), &sf)?;
            let w = v
                .iter()
                .zip(u_fine.coefficients())
                .map(|(a, b)| a - b)
                .collect();
            (w, None)
        }
    };
    let v = &fine.simple_layer;
    let local: Vec<f64> = if !equation.is_hypersingular() {
        let g = matvec(v, &w);
        (0..n)
            .map(|t| {
                let (a, b) = (2 * t, 2 * t + 1);
                let mut num = g[a] - g[b];
                if let Some(load) = &load {
                    num += load[a] - load[b];
                }
                let den = v[(a, a)] + v[(b, b)] - 2.0 * v[(a, b)];
                num.abs() / den.sqrt()
            })
            .collect()
    } else {
        let slopes = sf.derivative(&w)?;
        let g = matvec(v, &slopes);
        let shift = if equation == EquationTag::HypersingularStabilized {
            u.integral()
        } else {
            0.0
        };
        (0..n)
            .map(|t| {
                let (a, b) = (2 * t, 2 * t + 1);
                // the new node is the start of the second son
                let Some(dof) = sf.node_dof(b) else {
                    return 0.0;
                };
                let la = fine.mesh.element(a).len();
                let lb = fine.mesh.element(b).len();
                let mut num = g[a] / la - g[b] / lb;
                if let Some(load) = &load {
                    num += load[dof];
                }
                let mut den =
                    v[(a, a)] / (la * la) + v[(b, b)] / (lb * lb) - 2.0 * v[(a, b)] / (la * lb);
                if equation == EquationTag::HypersingularStabilized {
                    let mass = 0.5 * (la + lb);
                    num -= shift * mass;
                    den += mass * mass;
                }
                num.abs() / den.sqrt()
            })
            .collect()
    };
    Ok(EstimatorReport::new(
        EstimatorKind::TwoLevel,
        equation,
        coarse.level(),
        local,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{assemble_rhs, solve};
    use crate::geometry::{BoundaryCurve, Point};
    use crate::operators::assemble_simple_layer;

    #[test]
    fn haar_denominator_on_unit_element() {
        let c = BoundaryCurve::segment(Point::new(0.0, 0.0), Point::new(1.0, 0.0)).unwrap();
        let m = BoundaryMesh::initial(c, 1, 2.0).unwrap();
        let fine = TwoLevelFine::new(&m, Execution::Sequential);
        let v = &fine.simple_layer;
        let den = v[(0, 0)] + v[(1, 1)] - 2.0 * v[(0, 1)];
        // 2 (V_00 - V_01) for halves of the unit segment
        let expected = std::f64::consts::LN_2 / (2.0 * std::f64::consts::PI);
        assert!((den - expected).abs() < 1e-13 * expected, "{den}");
    }

    #[test]
    fn discrete_data_gives_zero_indicators() {
        let c = BoundaryCurve::segment(Point::new(-0.25, 0.0), Point::new(0.25, 0.0)).unwrap();
        let m = Arc::new(BoundaryMesh::initial(c, 6, 2.0).unwrap());
        let sp = DiscreteSpace::p0(m);
        let v = Density::new(sp.clone(), vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.0]).unwrap();
        let f = RightHandSide::synthetic(v);
        let a = assemble_simple_layer(&sp).unwrap();
        let u = solve(&a, &assemble_rhs(&f, &sp).unwrap(), &sp).unwrap();
        let r = two_level(&f, &u, EquationTag::WeaklySingular).unwrap();
        assert!(r.local.iter().all(|&x| x < 1e-10), "{:?}", r.local);
    }
}
