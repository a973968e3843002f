//! Galerkin matrices of the simple-layer and hyper-singular operators and
//! pointwise evaluation of single-layer potentials on the boundary.
//!
//! The hyper-singular operator only enters through the Maue identity
//! `<W u, v> = <V u', v'>` with arc-length derivatives, so every matrix
//! is built from simple-layer entries of piecewise constants.

use std::fmt::{self, Write as _};

use nalgebra::DMatrix;

use crate::error::{AbemError, Result};
use crate::exec::Execution;
use crate::galerkin::Density;
use crate::geometry::Point;
use crate::kernel::{log_integral, log_integral_directional, simple_layer_entry, Segment, INV_2PI};
use crate::mesh::BoundaryMesh;
use crate::space::{DiscreteSpace, SpaceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorTag {
    SimpleLayer,
    Hypersingular,
    HypersingularStabilized,
}

impl fmt::Display for OperatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorTag::SimpleLayer => "simple_layer",
            OperatorTag::Hypersingular => "hypersingular",
            OperatorTag::HypersingularStabilized => "hypersingular_stabilized",
        })
    }
}

/// Dense symmetric Galerkin matrix.
#[derive(Debug, Clone)]
pub struct GalerkinMatrix {
    pub entries: DMatrix<f64>,
    pub tag: OperatorTag,
    pub mesh_level: usize,
}

impl GalerkinMatrix {
    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let n = self.dimension();
        let scale = self.entries.amax();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)]).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }

    /// `<A u, v>` for coefficient vectors.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.dimension();
        let mut acc = 0.0;
        for j in 0..n {
            if u[j] == 0.0 {
                continue;
            }
            let col = self.entries.column(j);
            let mut s = 0.0;
            for i in 0..n {
                s += col[i] * v[i];
            }
            acc += u[j] * s;
        }
        acc
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        matvec(&self.entries, u)
    }

    /// Debug dump, one `i j value` triple per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let n = self.dimension();
        for i in 0..n {
            for j in 0..n {
                let _ = writeln!(out, "{i} {j} {:e}", self.entries[(i, j)]);
            }
        }
        out
    }
}

pub(crate) fn matvec(a: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    let mut out = vec![0.0; n];
    for (j, &uj) in u.iter().enumerate() {
        if uj == 0.0 {
            continue;
        }
        let col = a.column(j);
        for i in 0..n {
            out[i] += col[i] * uj;
        }
    }
    out
}

pub fn check_normalized(mesh: &BoundaryMesh) -> Result<()> {
    let diameter = mesh.curve().diameter();
    if diameter >= 1.0 {
        return Err(AbemError::NotNormalized { diameter });
    }
    Ok(())
}

pub fn segments(mesh: &BoundaryMesh) -> Vec<Segment> {
    mesh.elements().iter().map(Segment::from).collect()
}

/// Simple-layer matrix of the element indicator functions of `mesh`.
pub fn simple_layer_matrix(mesh: &BoundaryMesh, exec: Execution) -> DMatrix<f64> {
    let segs = segments(mesh);
    let n = segs.len();
    let rows = exec.map(n, |i| {
        (i..n)
            .map(|j| simple_layer_entry(&segs[i], &segs[j]))
            .collect::<Vec<f64>>()
    });
    let mut a = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (k, v) in row.into_iter().enumerate() {
            a[(i, i + k)] = v;
            a[(i + k, i)] = v;
        }
    }
    a
}

/// Simple-layer matrix of a coarse P0 space obtained by summing the
/// entries of a fine P0 matrix; `ancestor[f]` is the coarse element
/// containing fine element `f`.
pub fn restrict_p0_matrix(
    fine: &DMatrix<f64>,
    ancestor: &[usize],
    coarse_len: usize,
) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(coarse_len, coarse_len);
    for (fj, &cj) in ancestor.iter().enumerate() {
        let col = fine.column(fj);
        for (fi, &ci) in ancestor.iter().enumerate() {
            c[(ci, cj)] += col[fi];
        }
    }
    c
}

pub fn assemble_simple_layer(space: &DiscreteSpace) -> Result<GalerkinMatrix> {
    assemble_simple_layer_with(space, Execution::default())
}

pub fn assemble_simple_layer_with(
    space: &DiscreteSpace,
    exec: Execution,
) -> Result<GalerkinMatrix> {
    if space.kind() != SpaceKind::P0 {
        return Err(AbemError::IncompatibleSpace(format!(
            "simple-layer assembly needs P0, got {}",
            space.kind()
        )));
    }
    check_normalized(space.mesh())?;
    Ok(GalerkinMatrix {
        entries: simple_layer_matrix(space.mesh(), exec),
        tag: OperatorTag::SimpleLayer,
        mesh_level: space.mesh().level(),
    })
}

fn check_hypersingular_space(space: &DiscreteSpace) -> Result<()> {
    match (space.kind(), space.mesh().is_closed()) {
        (SpaceKind::S1Tilde, false) | (SpaceKind::S1, true) => Ok(()),
        (SpaceKind::S1, false) => Err(AbemError::IncompatibleSpace(
            "S1 on an open arc violates the trial-space condition; use S1_tilde".into(),
        )),
        (kind, _) => Err(AbemError::IncompatibleSpace(format!(
            "hyper-singular assembly needs S1_tilde (open arc) or S1 (closed curve), got {kind}"
        ))),
    }
}

/// `D^T V D`, where `v` is the simple-layer matrix on the elements of the
/// space's mesh and `D` maps coefficients to element-wise derivatives.
pub fn hypersingular_from_simple_layer(
    space: &DiscreteSpace,
    v: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_hypersingular_space(space)?;
    let mesh = space.mesh();
    let ne = mesh.len();
    let nd = space.dof_count();
    // sparse columns of D
    let mut dcols: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(2); nd];
    for e in 0..ne {
        let inv = 1.0 / mesh.element(e).len();
        let (a, b) = space.element_dofs(e);
        if let Some(a) = a {
            dcols[a].push((e, -inv));
        }
        if let Some(b) = b {
            dcols[b].push((e, inv));
        }
    }
    let mut vd = DMatrix::<f64>::zeros(ne, nd);
    for (j, col) in dcols.iter().enumerate() {
        for &(e, d) in col {
            let src = v.column(e);
            let mut dst = vd.column_mut(j);
            for i in 0..ne {
                dst[i] += d * src[i];
            }
        }
    }
    let mut w = DMatrix::zeros(nd, nd);
    for j in 0..nd {
        let vdj = vd.column(j);
        for i in 0..=j {
            let s: f64 = dcols[i].iter().map(|&(e, d)| d * vdj[e]).sum();
            w[(i, j)] = s;
            w[(j, i)] = s;
        }
    }
    Ok(w)
}

pub fn assemble_hypersingular(space: &DiscreteSpace) -> Result<GalerkinMatrix> {
    assemble_hypersingular_with(space, Execution::default())
}

pub fn assemble_hypersingular_with(
    space: &DiscreteSpace,
    exec: Execution,
) -> Result<GalerkinMatrix> {
    check_hypersingular_space(space)?;
    check_normalized(space.mesh())?;
    let v = simple_layer_matrix(space.mesh(), exec);
    Ok(GalerkinMatrix {
        entries: hypersingular_from_simple_layer(space, &v)?,
        tag: OperatorTag::Hypersingular,
        mesh_level: space.mesh().level(),
    })
}

/// Adds `m m^T` with `m_i = int phi_i`, removing the constants from the
/// kernel of the closed-curve hyper-singular matrix.
pub fn stabilize(matrix: &GalerkinMatrix, space: &DiscreteSpace) -> Result<GalerkinMatrix> {
    if !space.mesh().is_closed() || space.kind() != SpaceKind::S1 {
        return Err(AbemError::IncompatibleSpace(
            "stabilization needs S1 on a closed curve".into(),
        ));
    }
    if matrix.tag != OperatorTag::Hypersingular {
        return Err(AbemError::IncompatibleSpace(format!(
            "cannot stabilize a {} matrix",
            matrix.tag
        )));
    }
    if matrix.dimension() != space.dof_count() {
        return Err(AbemError::DimensionMismatch {
            expected: space.dof_count(),
            found: matrix.dimension(),
        });
    }
    let m = space.mass_vector();
    let mut entries = matrix.entries.clone();
    for j in 0..m.len() {
        for i in 0..m.len() {
            entries[(i, j)] += m[i] * m[j];
        }
    }
    Ok(GalerkinMatrix {
        entries,
        tag: OperatorTag::HypersingularStabilized,
        mesh_level: matrix.mesh_level,
    })
}

/// Single-layer potential of an element-wise constant density, evaluated
/// at arbitrary points of the plane.
#[derive(Debug, Clone)]
pub struct PotentialEvaluator {
    sources: Vec<(Segment, f64)>,
}

impl PotentialEvaluator {
    /// `values[e]` is the density on element `e` of `mesh`.
    pub fn new(mesh: &BoundaryMesh, values: &[f64]) -> Self {
        let sources = mesh
            .elements()
            .iter()
            .zip(values)
            .filter(|(_, &v)| v != 0.0)
            .map(|(e, &v)| (Segment::from(e), v))
            .collect();
        Self { sources }
    }

    /// `(V psi)(x)`.
    pub fn value(&self, x: Point) -> f64 {
        let s: f64 = self
            .sources
            .iter()
            .map(|(seg, c)| c * log_integral(x, seg))
            .sum();
        -INV_2PI * s
    }

    /// Derivative of `V psi` at `x` along the unit vector `dir`.
    pub fn derivative(&self, x: Point, dir: Point) -> f64 {
        let s: f64 = self
            .sources
            .iter()
            .map(|(seg, c)| c * log_integral_directional(x, seg, dir))
            .sum();
        -INV_2PI * s
    }
}

fn p0_evaluator(density: &Density) -> Result<PotentialEvaluator> {
    if density.space().kind() != SpaceKind::P0 {
        return Err(AbemError::IncompatibleSpace(format!(
            "single-layer evaluation needs a P0 density, got {}",
            density.space().kind()
        )));
    }
    Ok(PotentialEvaluator::new(
        density.space().mesh(),
        density.coefficients(),
    ))
}

/// `(V U)(x)` for a point `x` on the curve away from mesh nodes.
pub fn eval_single_layer(density: &Density, point: Point) -> Result<f64> {
    let ev = p0_evaluator(density)?;
    density.space().mesh().locate(point)?;
    Ok(ev.value(point))
}

/// Arc-length derivative of `V U` at an element-interior point.
pub fn eval_tangential_derivative_v(density: &Density, point: Point) -> Result<f64> {
    let ev = p0_evaluator(density)?;
    let mesh = density.space().mesh();
    let (e, _) = mesh.locate(point)?;
    Ok(ev.derivative(point, mesh.element(e).tangent()))
}

/// `(W U)(x) = -d/ds V(U')(x)` at an element-interior point.
pub fn eval_w_residual_part(density: &Density, point: Point) -> Result<f64> {
    let space = density.space();
    let mesh = space.mesh();
    let (e, _) = mesh.locate(point)?;
    let slopes = space.derivative(density.coefficients())?;
    let ev = PotentialEvaluator::new(mesh, &slopes);
    Ok(-ev.derivative(point, mesh.element(e).tangent()))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::geometry::BoundaryCurve;

    fn slit(n: usize) -> Arc<BoundaryMesh> {
        let c = BoundaryCurve::segment(Point::new(-0.25, 0.0), Point::new(0.25, 0.0)).unwrap();
        Arc::new(BoundaryMesh::initial(c, n, 2.0).unwrap())
    }

    fn square(n: usize) -> Arc<BoundaryMesh> {
        let h = 0.5 / 2f64.sqrt();
        let c = BoundaryCurve::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(h, 0.0),
                Point::new(h, h),
                Point::new(0.0, h),
            ],
            true,
        )
        .unwrap();
        Arc::new(BoundaryMesh::initial(c, n, 2.0).unwrap())
    }

    #[test]
    fn rejects_unnormalized_curve() {
        let c = BoundaryCurve::segment(Point::new(0.0, 0.0), Point::new(2.0, 0.0)).unwrap();
        let m = Arc::new(BoundaryMesh::initial(c, 2, 2.0).unwrap());
        assert!(matches!(
            assemble_simple_layer(&DiscreteSpace::p0(m)),
            Err(AbemError::NotNormalized { .. })
        ));
    }

    #[test]
    fn simple_layer_is_symmetric_positive_definite() {
        let sp = DiscreteSpace::p0(square(12));
        let a = assemble_simple_layer(&sp).unwrap();
        assert!(a.asymmetry() <= 1e-12);
        assert!(a.entries.clone().cholesky().is_some());
    }

    #[test]
    fn sequential_and_parallel_assembly_agree() {
        let sp = DiscreteSpace::p0(square(16));
        let a = assemble_simple_layer_with(&sp, Execution::Sequential).unwrap();
        let b = assemble_simple_layer_with(&sp, Execution::Parallel).unwrap();
        assert_eq!(a.entries, b.entries);
    }

    #[test]
    fn restriction_matches_direct_assembly() {
        let coarse = square(8);
        let fine = Arc::new(coarse.uniform_refine());
        let vf = simple_layer_matrix(&fine, Execution::Sequential);
        let map = coarse.ancestor_map(&fine).unwrap();
        let vc = restrict_p0_matrix(&vf, &map, coarse.len());
        let direct = simple_layer_matrix(&coarse, Execution::Sequential);
        let err = (&vc - &direct).amax() / direct.amax();
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn hypersingular_hat_entry() {
        let c = BoundaryCurve::segment(Point::new(0.0, 0.0), Point::new(2.0, 0.0)).unwrap();
        let m = Arc::new(BoundaryMesh::initial(c, 2, 2.0).unwrap());
        let sp = DiscreteSpace::new(SpaceKind::S1Tilde, m.clone()).unwrap();
        let v = simple_layer_matrix(&m, Execution::Sequential);
        let w = hypersingular_from_simple_layer(&sp, &v).unwrap();
        let expected = 2.0 * (3.0 / (4.0 * PI) - (1.5 - 2.0 * 2f64.ln()) / (2.0 * PI));
        assert!((w[(0, 0)] - expected).abs() < 1e-14);
    }

    #[test]
    fn closed_curve_hypersingular_kernel_and_stabilization() {
        let mesh = square(12);
        let sp = DiscreteSpace::new(SpaceKind::S1, mesh.clone()).unwrap();
        let w = assemble_hypersingular(&sp).unwrap();
        let ones = vec![1.0; sp.dof_count()];
        let rows = w.apply(&ones);
        assert!(rows.iter().all(|r| r.abs() < 1e-10));
        let s = stabilize(&w, &sp).unwrap();
        assert!(s.entries.clone().cholesky().is_some());
        let h = mesh.element(0).len();
        assert!(sp.mass_vector().iter().all(|&m| (m - h).abs() < 1e-15));
        let open = DiscreteSpace::new(SpaceKind::S1, slit(4)).unwrap();
        assert!(assemble_hypersingular(&open).is_err());
    }

    #[test]
    fn pointwise_evaluations() {
        let c = BoundaryCurve::segment(Point::new(0.0, 0.0), Point::new(0.5, 0.0)).unwrap();
        let m = Arc::new(BoundaryMesh::initial(c, 2, 2.0).unwrap());
        let sp = DiscreteSpace::p0(m);
        let zero = Density::new(sp.clone(), vec![0.0, 0.0]).unwrap();
        assert_eq!(eval_single_layer(&zero, Point::new(0.1, 0.0)).unwrap(), 0.0);
        assert_eq!(
            eval_tangential_derivative_v(&zero, Point::new(0.1, 0.0)).unwrap(),
            0.0
        );
        let unit = Density::new(sp.clone(), vec![1.0, 1.0]).unwrap();
        // symmetric density on a symmetric mesh: derivative vanishes at the center
        let mid = eval_tangential_derivative_v(&unit, Point::new(0.2500000001, 0.0)).unwrap();
        assert!(mid.abs() < 1e-7, "{mid}");
        assert!(eval_single_layer(&unit, Point::new(0.25, 0.0)).is_err());
        let scaled = Density::new(sp, vec![3.0, 3.0]).unwrap();
        let x = Point::new(0.1, 0.0);
        let a = eval_single_layer(&unit, x).unwrap();
        let b = eval_single_layer(&scaled, x).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-13);
    }

    #[test]
    fn w_annihilates_constants_on_closed_curves() {
        let sp = DiscreteSpace::new(SpaceKind::S1, square(8)).unwrap();
        let d = Density::new(sp.clone(), vec![2.5; sp.dof_count()]).unwrap();
        let h = 0.5 / 2f64.sqrt();
        let v = eval_w_residual_part(&d, Point::new(0.3 * h, 0.0)).unwrap();
        assert!(v.abs() < 1e-10);
    }
}
