//! Built-in geometries, data and reference energies.

use std::f64::consts::{LN_2, PI, TAU};
use std::sync::Arc;

use abem_core::adaptive::{Problem, ReferenceEnergy};
use abem_core::exec::Execution;
use abem_core::galerkin::{Density, EquationTag, RightHandSide};
use abem_core::geometry::{normalize_curve, BoundaryCurve, Point};
use abem_core::mesh::BoundaryMesh;
use abem_core::operators::{assemble_hypersingular_with, assemble_simple_layer_with};
use abem_core::space::{DiscreteSpace, SpaceKind};
use abem_core::Result;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::config::{ExperimentConfig, ProblemSpec, RhsSpec};

/// Named smooth data: `cos_arc` and `sin_arc` are one full period of
/// `cos`/`sin` in the normalized arc length; both have zero mean on closed
/// curves.
pub const DATA_IDS: [&str; 2] = ["cos_arc", "sin_arc"];

/// Local mesh-ratio bound of all catalogue meshes.
pub const GAMMA_BOUND: f64 = 2.0;

/// Unknown cap of the overkill reference.
pub const OVERKILL_MAX_UNKNOWNS: usize = 4000;

fn p(x: f64, y: f64) -> Point {
    Point::new(x, y)
}

/// The curve of a problem before normalization.
pub fn raw_curve(problem: &ProblemSpec) -> Result<BoundaryCurve> {
    match problem {
        ProblemSpec::Slit => BoundaryCurve::segment(p(-1.0, 0.0), p(1.0, 0.0)),
        // L-domain (-1,1)^2 minus [0,1]x[-1,0], without its two long sides
        ProblemSpec::LShapeBoundary => BoundaryCurve::new(
            vec![
                p(-1.0, -1.0),
                p(0.0, -1.0),
                p(0.0, 0.0),
                p(1.0, 0.0),
                p(1.0, 1.0),
            ],
            false,
        ),
        ProblemSpec::SquareClosed => BoundaryCurve::new(
            vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)],
            true,
        ),
        ProblemSpec::Custom { vertices, closed } => {
            BoundaryCurve::new(vertices.iter().map(|&(x, y)| p(x, y)).collect(), *closed)
        }
    }
}

pub fn curve(problem: &ProblemSpec) -> Result<BoundaryCurve> {
    Ok(normalize_curve(&raw_curve(problem)?)?.0)
}

pub fn seed_mesh(problem: &ProblemSpec, elements: usize) -> Result<Arc<BoundaryMesh>> {
    Ok(Arc::new(BoundaryMesh::initial(
        curve(problem)?,
        elements,
        GAMMA_BOUND,
    )?))
}

fn periodic(name: &str, length: f64) -> RightHandSide {
    let k = TAU / length;
    if name == "cos_arc" {
        RightHandSide::smooth(
            name,
            move |_, s| (k * s).cos(),
            move |_, s| -k * (k * s).sin(),
        )
    } else {
        RightHandSide::smooth(
            name,
            move |_, s| (k * s).sin(),
            move |_, s| k * (k * s).cos(),
        )
    }
}

/// Random coefficients in `[-1, 1]` on `space`; mean-free on closed curves
/// for the stabilized equation so that the data is compatible.
pub fn synthetic_density(
    space: &DiscreteSpace,
    equation: EquationTag,
    seed: u64,
) -> Result<Density> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut c: Vec<f64> = (0..space.dof_count())
        .map(|_| rng.gen_range(-1.0..=1.0))
        .collect();
    if equation == EquationTag::HypersingularStabilized && space.kind() == SpaceKind::S1 {
        let mass = space.mass_vector();
        let mean = c.iter().zip(&mass).map(|(a, m)| a * m).sum::<f64>() / mass.iter().sum::<f64>();
        c.iter_mut().for_each(|v| *v -= mean);
    }
    Density::new(space.clone(), c)
}

/// Data, seed mesh and reference energy of an experiment.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    let mesh = seed_mesh(&cfg.problem, cfg.seed_mesh_elements)?;
    let equation = cfg.equation_tag;
    let overkill = ReferenceEnergy::Overkill {
        extra_refinements: cfg.overkill_extra_refinements,
        max_unknowns: OVERKILL_MAX_UNKNOWNS,
    };
    let (rhs, reference) = match &cfg.rhs {
        RhsSpec::One => {
            let reference = match (&cfg.problem, equation) {
                (ProblemSpec::Slit, EquationTag::WeaklySingular) => {
                    ReferenceEnergy::Exact(slit_energy_weakly_singular())
                }
                (ProblemSpec::Slit, EquationTag::Hypersingular) => {
                    ReferenceEnergy::Exact(slit_energy_hypersingular())
                }
                _ => overkill,
            };
            (RightHandSide::constant_one(), reference)
        }
        RhsSpec::ArcLength => (RightHandSide::arc_length(), overkill),
        RhsSpec::Catalogue(name) => (periodic(name, mesh.total_length()), overkill),
        RhsSpec::Synthetic(seed) => {
            let space = DiscreteSpace::new(equation.space_kind(), mesh.clone())?;
            let v = synthetic_density(&space, equation, *seed)?;
            // the solution is v itself, and <v, 1> = 0 when stabilized
            let a = if equation.is_hypersingular() {
                assemble_hypersingular_with(&space, Execution::default())?
            } else {
                assemble_simple_layer_with(&space, Execution::default())?
            };
            let energy = a.bilinear(v.coefficients(), v.coefficients());
            (RightHandSide::synthetic(v), ReferenceEnergy::Exact(energy))
        }
    };
    Ok(Problem {
        initial_mesh: mesh,
        rhs,
        reference,
    })
}

/// `<V u, u>` for `V u = 1` on a straight slit of length 1/2.
pub fn slit_energy_weakly_singular() -> f64 {
    TAU / (3.0 * LN_2)
}

/// `<W u, u>` for `W u = 1` on a straight slit of length 1/2.
pub fn slit_energy_hypersingular() -> f64 {
    PI / 16.0
}
