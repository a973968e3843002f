use std::sync::Arc;

use abem_core::adaptive::{
    rate_fit_rows, run_adaptive, write_trace_csv, AdaptiveConfig, Problem, ReferenceEnergy,
    Refinement,
};
use abem_core::estimators::EstimatorKind;
use abem_core::exec::Execution;
use abem_core::galerkin::{Density, EquationTag, RightHandSide};
use abem_core::geometry::{BoundaryCurve, Point};
use abem_core::mesh::BoundaryMesh;
use abem_core::space::DiscreteSpace;
use abem_core::AbemError;

fn slit() -> Arc<BoundaryMesh> {
    let c = BoundaryCurve::segment(Point::new(-0.25, 0.0), Point::new(0.25, 0.0)).unwrap();
    Arc::new(BoundaryMesh::initial(c, 2, 2.0).unwrap())
}

fn square() -> Arc<BoundaryMesh> {
    let s = 0.5 / 2f64.sqrt();
    let v = vec![
        Point::new(0.0, 0.0),
        Point::new(s, 0.0),
        Point::new(s, s),
        Point::new(0.0, s),
    ];
    Arc::new(BoundaryMesh::initial(BoundaryCurve::new(v, true).unwrap(), 4, 2.0).unwrap())
}

fn problem(mesh: Arc<BoundaryMesh>, rhs: RightHandSide) -> Problem {
    Problem {
        initial_mesh: mesh,
        rhs,
        reference: ReferenceEnergy::None,
    }
}

#[test]
fn sequential_and_parallel_traces_agree() {
    let p = problem(slit(), RightHandSide::constant_one());
    let mut cfg = AdaptiveConfig::new(EquationTag::WeaklySingular, EstimatorKind::TwoLevel);
    cfg.max_dofs = 40;
    cfg.execution = Execution::Sequential;
    let a = run_adaptive(&p, &cfg).unwrap();
    cfg.execution = Execution::Parallel;
    let b = run_adaptive(&p, &cfg).unwrap();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    write_trace_csv(&a.rows(), &mut x).unwrap();
    write_trace_csv(&b.rows(), &mut y).unwrap();
    assert_eq!(x, y);
}

#[test]
fn estimators_decrease_on_the_slit() {
    for (eq, kind) in [
        (EquationTag::WeaklySingular, EstimatorKind::Faermann),
        (EquationTag::WeaklySingular, EstimatorKind::WeightedResidual),
        (EquationTag::Hypersingular, EstimatorKind::TwoLevel),
    ] {
        let p = problem(slit(), RightHandSide::constant_one());
        let mut cfg = AdaptiveConfig::new(eq, kind);
        cfg.max_dofs = 60;
        let t = run_adaptive(&p, &cfg).unwrap();
        let first = t.records[0].mu;
        let last = t.final_record().mu;
        assert!(last < first / 3.0, "{eq} {kind}: {first} -> {last}");
        assert!(t.records.len() >= 5);
        assert!(t.final_record().dofs <= 60);
        // each level is nested in the next
        for w in t.levels.windows(2) {
            assert!(w[0].mesh.is_nested_in(&w[1].mesh));
        }
    }
}

#[test]
fn uniform_refinement_rate_on_the_slit() {
    let p = problem(slit(), RightHandSide::constant_one());
    let mut cfg = AdaptiveConfig::new(EquationTag::WeaklySingular, EstimatorKind::WeightedResidual);
    cfg.refinement = Refinement::Uniform;
    cfg.max_dofs = 256;
    let t = run_adaptive(&p, &cfg).unwrap();
    assert_eq!(t.records.len(), 8);
    let slope = rate_fit_rows(&t.rows()).unwrap();
    assert!((-0.65..=-0.35).contains(&slope), "{slope}");
}

#[test]
fn stabilized_square_rejects_constant_data() {
    let p = problem(square(), RightHandSide::constant_one());
    let cfg = AdaptiveConfig::new(
        EquationTag::HypersingularStabilized,
        EstimatorKind::TwoLevel,
    );
    match run_adaptive(&p, &cfg) {
        Err(AbemError::InvalidParameter { name, .. }) => assert_eq!(name, "rhs"),
        other => panic!("expected a compatibility error, got {other:?}"),
    }
}

#[test]
fn stabilized_square_with_mean_zero_data() {
    let mesh = square();
    let space = DiscreteSpace::new(abem_core::space::SpaceKind::S1, mesh.clone()).unwrap();
    let n = space.dof_count();
    let mut c: Vec<f64> = (0..n).map(|i| ((i * 5 % 7) as f64) - 3.0).collect();
    let mean = c.iter().sum::<f64>() / n as f64;
    c.iter_mut().for_each(|v| *v -= mean);
    let v = Density::new(space, c.clone()).unwrap();
    let p = problem(mesh, RightHandSide::synthetic(v));
    let cfg = AdaptiveConfig::new(
        EquationTag::HypersingularStabilized,
        EstimatorKind::TwoLevel,
    );
    let t = run_adaptive(&p, &cfg).unwrap();
    let r = &t.records[0];
    // discrete data is reproduced on the first mesh
    assert!(r.mu < 1e-8, "{}", r.mu);
    assert!(r.integral.abs() < 1e-9);
    for (a, b) in t.levels[0].solution.coefficients().iter().zip(&c) {
        assert!((a - b).abs() < 1e-10);
    }
}
