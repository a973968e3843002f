//! Right-hand sides, Galerkin solves and energy-error bookkeeping.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{AbemError, Result};
use crate::geometry::Point;
use crate::operators::{matvec, GalerkinMatrix, OperatorTag};
use crate::quadrature::gauss;
use crate::space::{DiscreteSpace, SpaceKind};

/// Which boundary integral equation is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquationTag {
    /// `V u = F` with piecewise constants.
    WeaklySingular,
    /// `W u = F` on an open arc with hat functions vanishing at the ends.
    Hypersingular,
    /// `W u + <u, 1> = F` on a closed curve with all hat functions.
    HypersingularStabilized,
}

impl EquationTag {
    pub fn name(self) -> &'static str {
        match self {
            EquationTag::WeaklySingular => "weakly_singular",
            EquationTag::Hypersingular => "hypersingular",
            EquationTag::HypersingularStabilized => "hypersingular_stabilized",
        }
    }

    pub fn space_kind(self) -> SpaceKind {
        match self {
            EquationTag::WeaklySingular => SpaceKind::P0,
            EquationTag::Hypersingular => SpaceKind::S1Tilde,
            EquationTag::HypersingularStabilized => SpaceKind::S1,
        }
    }

    pub fn operator_tag(self) -> OperatorTag {
        match self {
            EquationTag::WeaklySingular => OperatorTag::SimpleLayer,
            EquationTag::Hypersingular => OperatorTag::Hypersingular,
            EquationTag::HypersingularStabilized => OperatorTag::HypersingularStabilized,
        }
    }

    pub fn is_hypersingular(self) -> bool {
        self != EquationTag::WeaklySingular
    }
}

impl fmt::Display for EquationTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EquationTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "weakly_singular" => Ok(EquationTag::WeaklySingular),
            "hypersingular" => Ok(EquationTag::Hypersingular),
            "hypersingular_stabilized" => Ok(EquationTag::HypersingularStabilized),
            other => Err(format!(
                "unknown equation `{other}` (expected weakly_singular, hypersingular or hypersingular_stabilized)"
            )),
        }
    }
}

/// Coefficient vector of a discrete function.
#[derive(Debug, Clone)]
pub struct Density {
    space: DiscreteSpace,
    coefficients: Vec<f64>,
}

impl Density {
    pub fn new(space: DiscreteSpace, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != space.dof_count() {
            return Err(AbemError::DimensionMismatch {
                expected: space.dof_count(),
                found: coefficients.len(),
            });
        }
        Ok(Self {
            space,
            coefficients,
        })
    }

    pub fn zero(space: DiscreteSpace) -> Self {
        let n = space.dof_count();
        Self {
            space,
            coefficients: vec![0.0; n],
        }
    }

    pub fn space(&self) -> &DiscreteSpace {
        &self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// The same function expressed on a finer nested space of the same kind.
    pub fn prolongate(&self, fine: &DiscreteSpace) -> Result<Density> {
        let c = self.space.prolongate(&self.coefficients, fine)?;
        Density::new(fine.clone(), c)
    }

    /// `<U, 1>`.
    pub fn integral(&self) -> f64 {
        self.space
            .mass_vector()
            .iter()
            .zip(&self.coefficients)
            .map(|(m, c)| m * c)
            .sum()
    }
}

/// Smoothness class of a right-hand side; decides which estimators apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Regularity {
    L2,
    HHalf,
    HOne,
}

impl Regularity {
    pub fn name(self) -> &'static str {
        match self {
            Regularity::L2 => "L2",
            Regularity::HHalf => "H_half",
            Regularity::HOne => "H_one",
        }
    }
}

/// Function of a boundary point and its arc-length position.
pub type TraceFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;

/// Data `F` of the integral equation.
#[derive(Clone)]
pub enum RightHandSide {
    /// Pointwise evaluable trace; `arc_derivative` is required for the
    /// weakly-singular weighted-residual estimator.
    Analytic {
        name: String,
        value: TraceFn,
        arc_derivative: Option<TraceFn>,
        regularity: Regularity,
    },
    /// `F = A v` for a discrete density `v`.
    Synthetic { density: Density },
}

impl fmt::Debug for RightHandSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RightHandSide::Analytic {
                name, regularity, ..
            } => f
                .debug_struct("Analytic")
                .field("name", name)
                .field("regularity", regularity)
                .finish(),
            RightHandSide::Synthetic { density } => f
                .debug_struct("Synthetic")
                .field("kind", &density.space().kind())
                .field("dofs", &density.space().dof_count())
                .finish(),
        }
    }
}

impl RightHandSide {
    /// Smooth analytic data with a known arc-length derivative.
    pub fn smooth(
        name: impl Into<String>,
        value: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
        arc_derivative: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        RightHandSide::Analytic {
            name: name.into(),
            value: Arc::new(value),
            arc_derivative: Some(Arc::new(arc_derivative)),
            regularity: Regularity::HOne,
        }
    }

    /// Analytic data without derivative information.
    pub fn analytic(
        name: impl Into<String>,
        regularity: Regularity,
        value: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        RightHandSide::Analytic {
            name: name.into(),
            value: Arc::new(value),
            arc_derivative: None,
            regularity,
        }
    }

    /// `F = 1`.
    pub fn constant_one() -> Self {
        Self::smooth("one", |_, _| 1.0, |_, _| 0.0)
    }

    /// `F(s) = s`, the arc-length position.
    pub fn arc_length() -> Self {
        Self::smooth("arc_length", |_, s| s, |_, _| 1.0)
    }

    pub fn synthetic(density: Density) -> Self {
        RightHandSide::Synthetic { density }
    }

    pub fn name(&self) -> String {
        match self {
            RightHandSide::Analytic { name, .. } => name.clone(),
            RightHandSide::Synthetic { .. } => "synthetic".into(),
        }
    }

    pub fn regularity(&self) -> Regularity {
        match self {
            RightHandSide::Analytic { regularity, .. } => *regularity,
            RightHandSide::Synthetic { density } => {
                if density.space().kind() == SpaceKind::P0 {
                    Regularity::HOne
                } else {
                    Regularity::L2
                }
            }
        }
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self, RightHandSide::Synthetic { .. })
    }

    /// Checks the regularity tag against `required`.
    pub fn require(&self, required: Regularity) -> Result<()> {
        let found = self.regularity();
        if found < required {
            return Err(AbemError::InsufficientRegularity {
                required: required.name(),
                found: found.name(),
            });
        }
        Ok(())
    }

    /// `<F, phi_i>` for analytic data, by order-16 Gauss quadrature per
    /// element.
    pub fn analytic_load(&self, space: &DiscreteSpace) -> Result<Vec<f64>> {
        let RightHandSide::Analytic { value, .. } = self else {
            return Err(AbemError::IncompatibleSpace(
                "synthetic data needs the Galerkin matrix of the target space".into(),
            ));
        };
        let mesh = space.mesh();
        let rule = gauss(16);
        let mut out = vec![0.0; space.dof_count()];
        for (e, el) in mesh.elements().iter().enumerate() {
            let len = el.len();
            let (mut i0, mut i1) = (0.0, 0.0);
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                let x = el.point_at(t);
                let s = el.arc_start + t * (el.arc_end - el.arc_start);
                let f = w * value(x, s);
                i0 += (1.0 - t) * f;
                i1 += t * f;
            }
            if space.kind() == SpaceKind::P0 {
                out[e] = (i0 + i1) * len;
            } else {
                let (a, b) = space.element_dofs(e);
                if let Some(a) = a {
                    out[a] += i0 * len;
                }
                if let Some(b) = b {
                    out[b] += i1 * len;
                }
            }
        }
        Ok(out)
    }

    /// `<F, 1>`; synthetic data needs a space containing the constants and
    /// its operator matrix.
    pub fn total_integral(&self, space: &DiscreteSpace, operator: &DMatrix<f64>) -> Result<f64> {
        match self {
            RightHandSide::Analytic { .. } => {
                let p0 = DiscreteSpace::p0(space.mesh().clone());
                Ok(self.analytic_load(&p0)?.iter().sum())
            }
            RightHandSide::Synthetic { .. } => {
                if space.kind() == SpaceKind::S1Tilde {
                    return Err(AbemError::IncompatibleSpace(
                        "S1_tilde does not contain the constants".into(),
                    ));
                }
                Ok(assemble_rhs_with(self, space, operator)?.iter().sum())
            }
        }
    }
}

/// `<F, phi_i>`; synthetic data needs the Galerkin matrix of the operator
/// (unstabilized), so this assembles it.
pub fn assemble_rhs(f: &RightHandSide, space: &DiscreteSpace) -> Result<Vec<f64>> {
    match f {
        RightHandSide::Analytic { .. } => f.analytic_load(space),
        RightHandSide::Synthetic { density } => {
            let matrix = match density.space().kind() {
                SpaceKind::P0 => crate::operators::assemble_simple_layer(space)?,
                _ => crate::operators::assemble_hypersingular(space)?,
            };
            assemble_rhs_with(f, space, &matrix.entries)
        }
    }
}

/// Like [`assemble_rhs`], with the operator matrix of `space` supplied.
pub fn assemble_rhs_with(
    f: &RightHandSide,
    space: &DiscreteSpace,
    operator: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    match f {
        RightHandSide::Analytic { .. } => f.analytic_load(space),
        RightHandSide::Synthetic { density } => {
            if !density.space().mesh().is_nested_in(space.mesh()) {
                return finer_synthetic_load(density, space);
            }
            let v = density.space().prolongate(density.coefficients(), space)?;
            if operator.nrows() != v.len() {
                return Err(AbemError::DimensionMismatch {
                    expected: v.len(),
                    found: operator.nrows(),
                });
            }
            Ok(matvec(operator, &v))
        }
    }
}

// data defined on a refinement of the target mesh: `P^T A_fine v`
fn finer_synthetic_load(density: &Density, space: &DiscreteSpace) -> Result<Vec<f64>> {
    let fine = density.space();
    let matrix = match fine.kind() {
        SpaceKind::P0 => crate::operators::assemble_simple_layer(fine)?,
        _ => crate::operators::assemble_hypersingular(fine)?,
    };
    let g = matvec(&matrix.entries, density.coefficients());
    space.restrict(fine, &g)
}

fn residual_inf(a: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    b - a * x
}

/// Cholesky solve with iterative refinement; guarantees
/// `||A x - b||_inf <= 1e-10 ||b||_inf`.
pub fn solve(matrix: &GalerkinMatrix, rhs: &[f64], space: &DiscreteSpace) -> Result<Density> {
    let n = matrix.dimension();
    if rhs.len() != n || space.dof_count() != n {
        return Err(AbemError::DimensionMismatch {
            expected: n,
            found: rhs.len().max(space.dof_count()),
        });
    }
    let chol = matrix
        .entries
        .clone()
        .cholesky()
        .ok_or(AbemError::NotPositiveDefinite { dimension: n })?;
    let b = DVector::from_column_slice(rhs);
    let bnorm = b.amax();
    let mut x = chol.solve(&b);
    let mut rel = 0.0;
    for _ in 0..3 {
        let r = residual_inf(&matrix.entries, &x, &b);
        rel = if bnorm > 0.0 {
            r.amax() / bnorm
        } else {
            r.amax()
        };
        if rel <= 1e-12 {
            break;
        }
        x += chol.solve(&r);
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(AbemError::NotPositiveDefinite { dimension: n });
    }
    if rel > 1e-10 {
        let r = residual_inf(&matrix.entries, &x, &b);
        rel = if bnorm > 0.0 {
            r.amax() / bnorm
        } else {
            r.amax()
        };
        if rel > 1e-10 {
            return Err(AbemError::InaccurateSolve { relative: rel });
        }
    }
    Density::new(space.clone(), x.as_slice().to_vec())
}

/// Galerkin solution together with its load vector and energy.
#[derive(Debug, Clone)]
pub struct GalerkinSolution {
    pub density: Density,
    pub load: Vec<f64>,
    /// `<A U, U>`, which equals `<F, U>` for a Galerkin solution.
    pub energy_sq: f64,
}

impl GalerkinSolution {
    pub fn compute(matrix: &GalerkinMatrix, load: Vec<f64>, space: &DiscreteSpace) -> Result<Self> {
        let density = solve(matrix, &load, space)?;
        let energy_sq = load
            .iter()
            .zip(density.coefficients())
            .map(|(b, u)| b * u)
            .sum();
        Ok(Self {
            density,
            load,
            energy_sq,
        })
    }
}

/// Energy of a solution and its Galerkin error against a nested reference.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub energy_sq: f64,
    pub error_vs_reference_sq: f64,
    pub reference_level: String,
}

const CLAMP_TOLERANCE: f64 = 1e-10;

/// `E_ref - E` with the tiny-negative clamp; larger negative values mean
/// the spaces are not nested.
pub fn energy_difference(energy_sq: f64, reference_energy_sq: f64) -> Result<f64> {
    let diff = reference_energy_sq - energy_sq;
    if diff >= 0.0 {
        Ok(diff)
    } else if diff >= -CLAMP_TOLERANCE * reference_energy_sq.abs() {
        Ok(0.0)
    } else {
        Err(AbemError::NotNested(format!(
            "reference energy {reference_energy_sq:e} is below the discrete energy {energy_sq:e}"
        )))
    }
}

/// Galerkin orthogonality gives `||u_ref - U||_A^2 = E_ref - E` for
/// nested spaces and the same data.
pub fn energy_error_vs_reference(
    u: &GalerkinSolution,
    reference: &GalerkinSolution,
) -> Result<EnergyReport> {
    let coarse = u.density.space().mesh();
    let fine = reference.density.space().mesh();
    coarse.ancestor_map(fine)?;
    if u.density.space().kind() != reference.density.space().kind() {
        return Err(AbemError::IncompatibleSpace(
            "reference uses a different space".into(),
        ));
    }
    Ok(EnergyReport {
        energy_sq: u.energy_sq,
        error_vs_reference_sq: energy_difference(u.energy_sq, reference.energy_sq)?,
        reference_level: format!(
            "level {} ({} dofs)",
            fine.level(),
            reference.density.space().dof_count()
        ),
    })
}

/// `||u_ref - U_hat||_A / ||u_ref - U||_A`, the measured saturation ratio.
pub fn measure_saturation(
    u: &GalerkinSolution,
    u_hat: &GalerkinSolution,
    reference: &GalerkinSolution,
) -> Result<f64> {
    let coarse = energy_error_vs_reference(u, reference)?.error_vs_reference_sq;
    let fine = energy_error_vs_reference(u_hat, reference)?.error_vs_reference_sq;
    if coarse <= 0.0 {
        return Err(AbemError::ZeroError);
    }
    Ok((fine / coarse).sqrt())
}
