//! The adaptive loop: solve, estimate, mark, refine.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{AbemError, Result};
use crate::estimators::{
    faermann_with, inverse_estimate_ratio, residual_integrals_with, two_level_with, EstimatorKind,
    EstimatorReport, ResidualQuadrature, SlobodeckijQuadrature, TwoLevelFine,
};
use crate::exec::Execution;
use crate::galerkin::{
    assemble_rhs_with, energy_difference, solve, Density, EquationTag, RightHandSide,
};
use crate::mesh::BoundaryMesh;
use crate::mesh_width::MeshWidth;
use crate::operators::{
    hypersingular_from_simple_layer, matvec, restrict_p0_matrix, simple_layer_matrix, stabilize,
    GalerkinMatrix, OperatorTag,
};
use crate::space::{DiscreteSpace, SpaceKind};

/// Minimal set `M` with `theta * sum_T mu(T)^2 <= sum_{T in M} mu(T)^2`,
/// chosen greedily by descending indicator with ties to the lower id.
/// Returns the empty set when all indicators vanish.
pub fn mark_doerfler(report: &EstimatorReport, theta: f64) -> Result<BTreeSet<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(AbemError::InvalidParameter {
            name: "theta",
            reason: format!("{theta} is not in (0, 1]"),
        });
    }
    if report.local.iter().any(|v| !v.is_finite()) {
        return Err(AbemError::InvalidParameter {
            name: "indicators",
            reason: "non-finite indicator".into(),
        });
    }
    let mut order: Vec<usize> = (0..report.local.len()).collect();
    let sq = |i: usize| report.local[i] * report.local[i];
    order.sort_by(|&a, &b| sq(b).total_cmp(&sq(a)).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&i| sq(i)).sum();
    let mut marked = BTreeSet::new();
    if total == 0.0 {
        return Ok(marked);
    }
    let goal = theta * total;
    let mut acc = 0.0;
    for i in order {
        if acc >= goal {
            break;
        }
        acc += sq(i);
        marked.insert(i);
    }
    Ok(marked)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marking {
    MinimalCardinalityGreedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refinement {
    /// Refine the marked elements (with mesh-ratio closure).
    Adaptive,
    /// Bisect every element on every level.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct AdaptiveConfig {
    pub theta: f64,
    pub estimator_kind: EstimatorKind,
    pub equation_tag: EquationTag,
    /// No level with more unknowns is solved.
    pub max_dofs: usize,
    pub max_levels: usize,
    pub stop_estimator: f64,
    pub marking: Marking,
    /// Patch depth of the modified mesh width.
    pub k_patch_param: usize,
    pub refinement: Refinement,
    pub execution: Execution,
    pub residual_quadrature: ResidualQuadrature,
    pub slobodeckij_quadrature: SlobodeckijQuadrature,
}

impl AdaptiveConfig {
    pub fn new(equation_tag: EquationTag, estimator_kind: EstimatorKind) -> Self {
        Self {
            theta: 0.5,
            estimator_kind,
            equation_tag,
            max_dofs: 2000,
            max_levels: 100,
            stop_estimator: 1e-13,
            marking: Marking::MinimalCardinalityGreedy,
            k_patch_param: 1,
            refinement: Refinement::Adaptive,
            execution: Execution::default(),
            residual_quadrature: ResidualQuadrature::default(),
            slobodeckij_quadrature: SlobodeckijQuadrature::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(AbemError::InvalidParameter {
                name: "theta",
                reason: format!("{} is not in (0, 1]", self.theta),
            });
        }
        if self.max_levels == 0 {
            return Err(AbemError::InvalidParameter {
                name: "max_levels",
                reason: "must be positive".into(),
            });
        }
        if !(self.stop_estimator >= 0.0) {
            return Err(AbemError::InvalidParameter {
                name: "stop_estimator",
                reason: "must be non-negative".into(),
            });
        }
        self.estimator_kind.check(self.equation_tag)?;
        self.slobodeckij_quadrature.validate()
    }
}

/// Source of the exact energy `<A u, u>` used for error columns.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceEnergy {
    /// Known in closed form.
    Exact(f64),
    /// Galerkin energy on uniform refinements of the finest mesh; fewer
    /// refinements are used if the reference would exceed `max_unknowns`.
    Overkill {
        extra_refinements: usize,
        max_unknowns: usize,
    },
    None,
}

/// Initial mesh, data and reference of an adaptive run.
#[derive(Debug, Clone)]
pub struct Problem {
    pub initial_mesh: Arc<BoundaryMesh>,
    pub rhs: RightHandSide,
    pub reference: ReferenceEnergy,
}

/// Everything measured on one level. Entries that need the next level or a
/// reference are NaN when unavailable.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    pub dofs: usize,
    pub elements: usize,
    /// Estimator `mu_l` of the configured kind.
    pub mu: f64,
    pub eta: f64,
    pub rho: f64,
    /// `<A U_l, U_l>`.
    pub energy_sq: f64,
    /// `||u - U_l||_A` against the reference.
    pub error: f64,
    /// `||U_{l+1} - U_l||_A`.
    pub increment: f64,
    /// `mu_l(M_l) / rho_l(R_l)`.
    pub a1_ratio: f64,
    /// Largest element-wise ratio of `mu` against `eta` on the patch rule.
    pub a1_elementwise: f64,
    /// Smallest `c` with
    /// `rho_l(R_l)^2 / c <= rho_l^2 - rho_{l+1}^2 / 2 + 2 c ||U_{l+1} - U_l||_A^2`.
    pub a2_c: f64,
    /// `mu_l / error`.
    pub effectivity: f64,
    pub c_meshsize: f64,
    pub marked: BTreeSet<usize>,
    pub refined_superset: BTreeSet<usize>,
    /// `rho_l(R_l)`.
    pub rho_superset: f64,
    /// `max_T |<F - A U, chi_T>| / |T|` (P0 only).
    pub mean_zero_defect: f64,
    /// `<U_l, 1>`.
    pub integral: f64,
}

/// Mesh, solution and estimator data of one level.
#[derive(Debug, Clone)]
pub struct LevelData {
    pub mesh: Arc<BoundaryMesh>,
    pub solution: Density,
    pub estimator: EstimatorReport,
    pub eta: EstimatorReport,
    pub rho: EstimatorReport,
    pub width: MeshWidth,
}

#[derive(Debug, Clone)]
pub struct AdaptiveTrace {
    pub config: AdaptiveConfig,
    pub records: Vec<LevelRecord>,
    pub levels: Vec<LevelData>,
    pub reference_energy_sq: Option<f64>,
}

impl AdaptiveTrace {
    pub fn rows(&self) -> Vec<TraceRow> {
        self.records
            .iter()
            .map(|r| TraceRow {
                level: r.level,
                dofs: r.dofs,
                mu: r.mu,
                eta: r.eta,
                rho: r.rho,
                error: r.error,
                increment: r.increment,
                a1_ratio: r.a1_ratio,
                a2_c: r.a2_c,
                effectivity: r.effectivity,
            })
            .collect()
    }

    pub fn final_record(&self) -> &LevelRecord {
        self.records.last().expect("a trace has at least one level")
    }
}

/// `R_l` for the A1/A2 checks: the marked set itself for the residual
/// estimators and the weakly-singular two-level estimator, the marked
/// elements plus one layer otherwise.
pub fn refined_superset(
    kind: EstimatorKind,
    equation: EquationTag,
    mesh: &BoundaryMesh,
    marked: &BTreeSet<usize>,
) -> Result<BTreeSet<usize>> {
    let layer = match kind {
        EstimatorKind::Faermann => true,
        EstimatorKind::TwoLevel => equation.is_hypersingular(),
        EstimatorKind::WeightedResidual | EstimatorKind::RhoModified => false,
    };
    if layer {
        mesh.k_patch(marked, 1)
    } else {
        Ok(marked.clone())
    }
}

fn elementwise_a1(
    kind: EstimatorKind,
    equation: EquationTag,
    mesh: &BoundaryMesh,
    mu: &EstimatorReport,
    eta: &EstimatorReport,
) -> f64 {
    let scale = eta.local.iter().fold(0.0, |a: f64, &b| a.max(b));
    let mut worst: f64 = 0.0;
    for (t, &m) in mu.local.iter().enumerate() {
        let mut set = BTreeSet::from([t]);
        let layer = kind == EstimatorKind::Faermann
            || (kind == EstimatorKind::TwoLevel && equation.is_hypersingular());
        if layer {
            set.extend(mesh.neighbors(t));
        }
        let den = eta.subset_total(&set);
        if den > 1e-12 * scale {
            worst = worst.max(m / den);
        }
    }
    worst
}

/// Unstabilized operator matrix (`V` or `W`) and the system matrix.
fn system_matrices(
    space: &DiscreteSpace,
    equation: EquationTag,
    v: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, GalerkinMatrix)> {
    let level = space.mesh().level();
    match equation {
        EquationTag::WeaklySingular => Ok((
            v.clone(),
            GalerkinMatrix {
                entries: v.clone(),
                tag: OperatorTag::SimpleLayer,
                mesh_level: level,
            },
        )),
        EquationTag::Hypersingular | EquationTag::HypersingularStabilized => {
            let w = hypersingular_from_simple_layer(space, v)?;
            let plain = GalerkinMatrix {
                entries: w.clone(),
                tag: OperatorTag::Hypersingular,
                mesh_level: level,
            };
            if equation == EquationTag::HypersingularStabilized {
                Ok((w, stabilize(&plain, space)?))
            } else {
                Ok((w, plain))
            }
        }
    }
}

fn check_compatibility(equation: EquationTag, load: &[f64]) -> Result<()> {
    if equation != EquationTag::HypersingularStabilized {
        return Ok(());
    }
    let total: f64 = load.iter().sum();
    let scale: f64 = load.iter().map(|v| v.abs()).sum();
    if total.abs() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(AbemError::InvalidParameter {
            name: "rhs",
            reason: format!("<F, 1> = {total:e} must vanish on a closed curve"),
        });
    }
    Ok(())
}

struct Solved {
    space: DiscreteSpace,
    solution: Density,
    energy_sq: f64,
    mean_zero_defect: f64,
    fine: Option<TwoLevelFine>,
}

fn solve_level(
    mesh: &Arc<BoundaryMesh>,
    f: &RightHandSide,
    config: &AdaptiveConfig,
    need_fine: bool,
) -> Result<Solved> {
    let equation = config.equation_tag;
    let space = DiscreteSpace::new(equation.space_kind(), mesh.clone())?;
    crate::operators::check_normalized(mesh)?;
    let fine = need_fine.then(|| TwoLevelFine::new(mesh, config.execution));
    let v = match &fine {
        Some(fine) => {
            let map = mesh.ancestor_map(&fine.mesh)?;
            restrict_p0_matrix(&fine.simple_layer, &map, mesh.len())
        }
        None => simple_layer_matrix(mesh, config.execution),
    };
    let (operator, system) = system_matrices(&space, equation, &v)?;
    let load = assemble_rhs_with(f, &space, &operator)?;
    check_compatibility(equation, &load)?;
    let solution = solve(&system, &load, &space)?;
    let energy_sq = load
        .iter()
        .zip(solution.coefficients())
        .map(|(b, u)| b * u)
        .sum();
    let mean_zero_defect = if space.kind() == SpaceKind::P0 {
        let au = matvec(&system.entries, solution.coefficients());
        load.iter()
            .zip(&au)
            .zip(mesh.elements())
            .map(|((b, a), e)| (b - a).abs() / e.len())
            .fold(0.0, f64::max)
    } else {
        f64::NAN
    };
    Ok(Solved {
        space,
        solution,
        energy_sq,
        mean_zero_defect,
        fine,
    })
}

fn estimate(
    kind: EstimatorKind,
    f: &RightHandSide,
    solved: &Solved,
    config: &AdaptiveConfig,
    eta: &EstimatorReport,
    rho: &EstimatorReport,
) -> Result<EstimatorReport> {
    let eq = config.equation_tag;
    match kind {
        EstimatorKind::Faermann => faermann_with(
            f,
            &solved.solution,
            eq,
            &config.slobodeckij_quadrature,
            config.execution,
        ),
        EstimatorKind::TwoLevel => {
            let fine = solved
                .fine
                .as_ref()
                .expect("fine mesh prepared for two-level");
            two_level_with(f, &solved.solution, eq, fine)
        }
        EstimatorKind::WeightedResidual => Ok(eta.clone()),
        EstimatorKind::RhoModified => Ok(rho.clone()),
    }
}

fn residual_reports(
    f: &RightHandSide,
    u: &Density,
    config: &AdaptiveConfig,
    width: &MeshWidth,
) -> Result<(EstimatorReport, EstimatorReport)> {
    let eq = config.equation_tag;
    let mesh = u.space().mesh();
    let integrals =
        residual_integrals_with(f, u, eq, &config.residual_quadrature, config.execution)?;
    let eta = integrals
        .iter()
        .zip(&width.plain)
        .map(|(i, h)| (h * i).sqrt())
        .collect();
    let rho = integrals
        .iter()
        .zip(&width.modified)
        .map(|(i, h)| (h * i).sqrt())
        .collect();
    Ok((
        EstimatorReport::new(EstimatorKind::WeightedResidual, eq, mesh.level(), eta),
        EstimatorReport::new(EstimatorKind::RhoModified, eq, mesh.level(), rho),
    ))
}

fn nan_report(kind: EstimatorKind, eq: EquationTag, mesh: &BoundaryMesh) -> EstimatorReport {
    EstimatorReport::new(kind, eq, mesh.level(), vec![f64::NAN; mesh.len()])
}

/// Smallest admissible A2 constant; `a = rho_l(R_l)^2`,
/// `b = rho_l^2 - rho_{l+1}^2 / 2`, `e = ||U_{l+1} - U_l||_A^2`.
pub fn a2_constant(a: f64, b: f64, e: f64) -> f64 {
    if !(a.is_finite() && b.is_finite() && e.is_finite()) {
        return f64::NAN;
    }
    if a <= 0.0 {
        return 0.0;
    }
    if e <= 0.0 {
        return if b > 0.0 { a / b } else { f64::INFINITY };
    }
    // positive root of 2 e c^2 + b c - a = 0
    let disc = (b * b + 8.0 * e * a).sqrt();
    if b > 0.0 {
        2.0 * a / (b + disc)
    } else {
        (disc - b) / (4.0 * e)
    }
}

fn dof_count(kind: SpaceKind, mesh: &BoundaryMesh) -> usize {
    match kind {
        SpaceKind::P0 => mesh.len(),
        SpaceKind::S1 => mesh.node_count(),
        SpaceKind::S1Tilde => mesh.node_count().saturating_sub(2),
    }
}

/// Runs the loop until the next mesh would exceed `max_dofs`, the level
/// cap is reached, or the estimator drops to `stop_estimator`.
pub fn run_adaptive(problem: &Problem, config: &AdaptiveConfig) -> Result<AdaptiveTrace> {
    config.validate()?;
    let f = &problem.rhs;
    let eq = config.equation_tag;
    let kind = config.estimator_kind;
    let space_kind = eq.space_kind();
    let mut mesh = problem.initial_mesh.clone();
    if dof_count(space_kind, &mesh) == 0 {
        return Err(AbemError::InvalidParameter {
            name: "seed_mesh_elements",
            reason: "initial mesh has no unknowns".into(),
        });
    }
    let mut width = MeshWidth::initial(&mesh, config.k_patch_param);
    let mut records = Vec::new();
    let mut levels = Vec::new();
    loop {
        let level = records.len();
        let solved = solve_level(&mesh, f, config, kind == EstimatorKind::TwoLevel)?;
        let (eta, rho) = match residual_reports(f, &solved.solution, config, &width) {
            Ok(r) => r,
            Err(AbemError::InsufficientRegularity { .. })
                if !matches!(
                    kind,
                    EstimatorKind::WeightedResidual | EstimatorKind::RhoModified
                ) =>
            {
                (
                    nan_report(EstimatorKind::WeightedResidual, eq, &mesh),
                    nan_report(EstimatorKind::RhoModified, eq, &mesh),
                )
            }
            Err(e) => return Err(e),
        };
        let mu = estimate(kind, f, &solved, config, &eta, &rho)?;
        if !mu.total.is_finite() {
            return Err(AbemError::InvalidParameter {
                name: "estimator",
                reason: format!("non-finite estimator on level {level}"),
            });
        }
        let marked = match config.refinement {
            Refinement::Adaptive => mark_doerfler(&mu, config.theta)?,
            Refinement::Uniform => (0..mesh.len()).collect(),
        };
        let superset = refined_superset(kind, eq, &mesh, &marked)?;
        let rho_superset = rho.subset_total(&superset);
        let a1_ratio = if rho_superset > 0.0 {
            mu.subset_total(&marked) / rho_superset
        } else {
            f64::NAN
        };
        records.push(LevelRecord {
            level,
            dofs: solved.space.dof_count(),
            elements: mesh.len(),
            mu: mu.total,
            eta: eta.total,
            rho: rho.total,
            energy_sq: solved.energy_sq,
            error: f64::NAN,
            increment: f64::NAN,
            a1_ratio,
            a1_elementwise: elementwise_a1(kind, eq, &mesh, &mu, &eta),
            a2_c: f64::NAN,
            effectivity: f64::NAN,
            c_meshsize: width.c_meshsize,
            marked: marked.clone(),
            refined_superset: superset,
            rho_superset,
            mean_zero_defect: solved.mean_zero_defect,
            integral: solved.solution.integral(),
        });
        levels.push(LevelData {
            mesh: mesh.clone(),
            solution: solved.solution,
            estimator: mu.clone(),
            eta,
            rho,
            width: width.clone(),
        });
        if marked.is_empty() || mu.total <= config.stop_estimator || level + 1 >= config.max_levels
        {
            break;
        }
        let next = match config.refinement {
            Refinement::Adaptive => mesh.refine_marked(&marked)?,
            Refinement::Uniform => mesh.uniform_refine(),
        };
        if dof_count(space_kind, &next) > config.max_dofs {
            break;
        }
        width = width.advance(&mesh, &next)?;
        mesh = Arc::new(next);
    }
    let reference_energy_sq = reference_energy(problem, config, &levels)?;
    fill_derived(&mut records, reference_energy_sq)?;
    Ok(AdaptiveTrace {
        config: config.clone(),
        records,
        levels,
        reference_energy_sq,
    })
}

fn reference_energy(
    problem: &Problem,
    config: &AdaptiveConfig,
    levels: &[LevelData],
) -> Result<Option<f64>> {
    match problem.reference {
        ReferenceEnergy::Exact(e) => Ok(Some(e)),
        ReferenceEnergy::None => Ok(None),
        ReferenceEnergy::Overkill {
            extra_refinements,
            max_unknowns,
        } => {
            let finest = levels.last().expect("at least one level").mesh.clone();
            let kind = config.equation_tag.space_kind();
            let mut mesh = (*finest).clone();
            for _ in 0..extra_refinements {
                let next = mesh.uniform_refine();
                if dof_count(kind, &next) > max_unknowns {
                    break;
                }
                mesh = next;
            }
            let solved = solve_level(&Arc::new(mesh), &problem.rhs, config, false)?;
            Ok(Some(solved.energy_sq))
        }
    }
}

fn fill_derived(records: &mut [LevelRecord], reference: Option<f64>) -> Result<()> {
    for l in 0..records.len() {
        if l + 1 < records.len() {
            let inc_sq = energy_difference(records[l].energy_sq, records[l + 1].energy_sq)?;
            records[l].increment = inc_sq.sqrt();
            let a = records[l].rho_superset.powi(2);
            let b = records[l].rho.powi(2) - 0.5 * records[l + 1].rho.powi(2);
            records[l].a2_c = a2_constant(a, b, inc_sq);
        }
        if let Some(e_ref) = reference {
            let err_sq = energy_difference(records[l].energy_sq, e_ref)?;
            records[l].error = err_sq.sqrt();
            records[l].effectivity = if err_sq > 0.0 {
                records[l].mu / records[l].error
            } else {
                f64::NAN
            };
        }
    }
    Ok(())
}

/// One line of the exported trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub level: usize,
    pub dofs: usize,
    pub mu: f64,
    pub eta: f64,
    pub rho: f64,
    pub error: f64,
    pub increment: f64,
    pub a1_ratio: f64,
    pub a2_c: f64,
    pub effectivity: f64,
}

pub const TRACE_HEADER: [&str; 10] = [
    "level",
    "dofs",
    "mu",
    "eta",
    "rho",
    "error",
    "increment",
    "a1_ratio",
    "a2_c",
    "effectivity",
];

fn io_err(e: impl std::fmt::Display) -> AbemError {
    AbemError::TraceIo(e.to_string())
}

pub fn write_trace_csv(rows: &[TraceRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(io_err)?;
    for r in rows {
        let vals = [
            r.mu,
            r.eta,
            r.rho,
            r.error,
            r.increment,
            r.a1_ratio,
            r.a2_c,
            r.effectivity,
        ];
        let mut rec = vec![r.level.to_string(), r.dofs.to_string()];
        rec.extend(vals.iter().map(|v| format!("{v:e}")));
        w.write_record(&rec).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_trace_csv(input: impl Read) -> Result<Vec<TraceRow>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = r.headers().map_err(io_err)?.clone();
    if header.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(AbemError::TraceIo(format!(
            "unexpected header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(io_err)?;
        let bad = |col: &str| AbemError::TraceIo(format!("row {}: bad `{col}` value", line + 1));
        let int = |i: usize| rec[i].parse::<usize>().map_err(|_| bad(TRACE_HEADER[i]));
        let real = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(TRACE_HEADER[i]));
        rows.push(TraceRow {
            level: int(0)?,
            dofs: int(1)?,
            mu: real(2)?,
            eta: real(3)?,
            rho: real(4)?,
            error: real(5)?,
            increment: real(6)?,
            a1_ratio: real(7)?,
            a2_c: real(8)?,
            effectivity: real(9)?,
        });
    }
    for w in rows.windows(2) {
        if w[1].level <= w[0].level {
            return Err(AbemError::TraceIo("levels must increase strictly".into()));
        }
        if w[1].dofs < w[0].dofs {
            return Err(AbemError::TraceIo("dofs must not decrease".into()));
        }
    }
    Ok(rows)
}

/// Least-squares slope of `log values` against `log dofs` over the last
/// `ceil(n / 2)` points.
pub fn rate_fit(dofs: &[f64], values: &[f64]) -> Result<f64> {
    if dofs.len() != values.len() {
        return Err(AbemError::DimensionMismatch {
            expected: dofs.len(),
            found: values.len(),
        });
    }
    let n = dofs.len();
    if n < 4 {
        return Err(AbemError::InvalidParameter {
            name: "levels",
            reason: format!("rate fit needs at least 4 levels, got {n}"),
        });
    }
    let start = n - n.div_ceil(2);
    let xs: Vec<f64> = dofs[start..].iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = values[start..].iter().map(|v| v.ln()).collect();
    if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
        return Err(AbemError::InvalidParameter {
            name: "values",
            reason: "rate fit needs positive data".into(),
        });
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(AbemError::InvalidParameter {
            name: "dofs",
            reason: "rate fit needs distinct dof counts".into(),
        });
    }
    Ok(sxy / sxx)
}

/// Slope of `mu` against dofs.
pub fn rate_fit_rows(rows: &[TraceRow]) -> Result<f64> {
    let d: Vec<f64> = rows.iter().map(|r| r.dofs as f64).collect();
    let m: Vec<f64> = rows.iter().map(|r| r.mu).collect();
    rate_fit(&d, &m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyTolerances {
    /// Levels excluded from the A1 growth check.
    pub burn_in: usize,
    /// Allowed growth of the A1 ratio over its level-0 value.
    pub a1_growth: f64,
    /// Allowed ratio of the last-levels maximum of `c` over its median.
    pub a2_growth: f64,
    pub a2_window: usize,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        Self {
            burn_in: 3,
            a1_growth: 2.0,
            a2_growth: 1.25,
            a2_window: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub a1_level0: f64,
    pub a1_max: f64,
    pub a1_bounded: bool,
    pub a2_median: f64,
    pub a2_tail_max: f64,
    pub a2_bounded: bool,
    /// Human-readable description of every violation.
    pub violations: Vec<String>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Re-checks the A1 and A2 surrogates of a trace: A1 ratios after the
/// burn-in stay within `a1_growth` times the level-0 value; A2 constants
/// are finite and their maximum over the last `a2_window` steps stays
/// within `a2_growth` times their median.
pub fn verify_assumptions(rows: &[TraceRow], tol: &VerifyTolerances) -> Result<VerificationReport> {
    if rows.is_empty() {
        return Err(AbemError::IncompleteTrace("levels"));
    }
    if rows.iter().all(|r| r.rho.is_nan()) {
        return Err(AbemError::IncompleteTrace("rho"));
    }
    let mut violations = Vec::new();
    let a1_level0 = rows[0].a1_ratio;
    let mut a1_max: f64 = 0.0;
    for r in rows.iter().skip(tol.burn_in) {
        if r.a1_ratio.is_nan() {
            continue;
        }
        a1_max = a1_max.max(r.a1_ratio);
        if !(r.a1_ratio <= tol.a1_growth * a1_level0) {
            violations.push(format!(
                "A1 ratio {:.4e} on level {} exceeds {} x level-0 value {:.4e}",
                r.a1_ratio, r.level, tol.a1_growth, a1_level0
            ));
        }
    }
    // the last level has no successor
    let steps = &rows[..rows.len() - 1];
    let cs: Vec<f64> = steps.iter().map(|r| r.a2_c).collect();
    for (r, c) in steps.iter().zip(&cs) {
        if !c.is_finite() {
            violations.push(format!("A2 constant is not finite on level {}", r.level));
        }
    }
    let a2_median = median(&cs);
    let tail = &cs[cs.len().saturating_sub(tol.a2_window)..];
    let a2_tail_max = tail.iter().copied().fold(f64::NAN, f64::max);
    if a2_tail_max > tol.a2_growth * a2_median {
        violations.push(format!(
            "A2 constant {a2_tail_max:.4e} over the last {} steps exceeds {} x median {a2_median:.4e}",
            tol.a2_window, tol.a2_growth
        ));
    }
    let a1_bounded = !violations.iter().any(|v| v.starts_with("A1"));
    let a2_bounded = !violations.iter().any(|v| v.starts_with("A2"));
    Ok(VerificationReport {
        a1_level0,
        a1_max,
        a1_bounded,
        a2_median,
        a2_tail_max,
        a2_bounded,
        violations,
    })
}

/// A3 surrogate: `|mu(F; M) - mu(F'; M)| / ||v' - v||_A` for synthetic data
/// `F = A v`, `F' = A v'` whose densities live on a common refinement of
/// `mesh`, with the Galerkin solutions on `mesh`.
pub fn stability_ratio(
    kind: EstimatorKind,
    equation: EquationTag,
    mesh: &Arc<BoundaryMesh>,
    marked: &BTreeSet<usize>,
    data: &Density,
    perturbed: &Density,
) -> Result<f64> {
    if data.space().mesh().elements() != perturbed.space().mesh().elements()
        || data.space().kind() != perturbed.space().kind()
    {
        return Err(AbemError::IncompatibleSpace(
            "both densities must live on the same space".into(),
        ));
    }
    let mut config = AdaptiveConfig::new(equation, kind);
    config.execution = Execution::Sequential;
    let mu = |v: &Density| -> Result<EstimatorReport> {
        let f = RightHandSide::synthetic(v.clone());
        let solved = solve_level(mesh, &f, &config, kind == EstimatorKind::TwoLevel)?;
        let width = MeshWidth::initial(mesh, config.k_patch_param);
        let (eta, rho) = residual_reports(&f, &solved.solution, &config, &width)?;
        estimate(kind, &f, &solved, &config, &eta, &rho)
    };
    let a = mu(data)?.subset_total(marked);
    let b = mu(perturbed)?.subset_total(marked);
    let diff: Vec<f64> = perturbed
        .coefficients()
        .iter()
        .zip(data.coefficients())
        .map(|(p, d)| p - d)
        .collect();
    let fine = data.space();
    let v = simple_layer_matrix(fine.mesh(), Execution::Sequential);
    let (operator, _) = system_matrices(fine, equation, &v)?;
    let norm_sq: f64 = diff
        .iter()
        .zip(matvec(&operator, &diff))
        .map(|(x, y)| x * y)
        .sum();
    if norm_sq <= 0.0 {
        return Ok(if a == b { 0.0 } else { f64::INFINITY });
    }
    Ok((a - b).abs() / norm_sq.sqrt())
}

/// Largest inverse-estimate ratio `||h^{1/2} D(A psi)|| / ||psi||_A` over
/// all basis functions of the trial space on `mesh` and `samples` random
/// densities (`D` is the arc-length derivative for the weakly-singular
/// operator and the identity for the hyper-singular one).
pub fn inverse_estimate_sweep(
    mesh: &Arc<BoundaryMesh>,
    equation: EquationTag,
    samples: usize,
    seed: u64,
    quad: &ResidualQuadrature,
    exec: Execution,
) -> Result<f64> {
    let space = DiscreteSpace::new(equation.space_kind(), mesh.clone())?;
    crate::operators::check_normalized(mesh)?;
    let v = simple_layer_matrix(mesh, exec);
    let (operator, _) = system_matrices(&space, equation, &v)?;
    let n = space.dof_count();
    let ratio = |c: Vec<f64>| -> Result<f64> {
        let energy: f64 = c
            .iter()
            .zip(matvec(&operator, &c))
            .map(|(x, y)| x * y)
            .sum();
        let w = Density::new(space.clone(), c)?;
        inverse_estimate_ratio(&w, equation, energy, quad, Execution::Sequential)
    };
    let basis: Vec<Result<f64>> = exec.map(n, |i| {
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        ratio(c)
    });
    let mut worst: f64 = 0.0;
    for r in basis {
        worst = worst.max(r?);
    }
    let mut rng = StdRng::seed_from_u64(seed);
    for _ in 0..samples {
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        worst = worst.max(ratio(c)?);
    }
    Ok(worst)
}
