//! `abemlab run`: one experiment and its artifact files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use abem_core::adaptive::{
    rate_fit_rows, run_adaptive, write_trace_csv, AdaptiveConfig, AdaptiveTrace, Refinement,
};
use abem_core::AbemError;

use crate::catalogue::build_problem;
use crate::config::{ConfigError, ExperimentConfig};
use crate::svg::{loglog, Series};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(AbemError),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io { .. } => 1,
            RunError::Numerical(_) => 2,
        }
    }
}

impl From<AbemError> for RunError {
    fn from(e: AbemError) -> Self {
        match e {
            AbemError::InvalidParameter { name, reason } => {
                RunError::Config(ConfigError::new(name, reason))
            }
            AbemError::EstimatorMismatch { .. } => {
                RunError::Config(ConfigError::new("estimator_kind", e.to_string()))
            }
            AbemError::InsufficientRegularity { .. } => {
                RunError::Config(ConfigError::new("rhs", e.to_string()))
            }
            AbemError::IncompatibleSpace(_) => {
                RunError::Config(ConfigError::new("equation_tag", e.to_string()))
            }
            AbemError::DegenerateCurve(_) | AbemError::NotNormalized { .. } => {
                RunError::Config(ConfigError::new("problem", e.to_string()))
            }
            other => RunError::Numerical(other),
        }
    }
}

pub fn adaptive_config(cfg: &ExperimentConfig) -> AdaptiveConfig {
    let mut c = AdaptiveConfig::new(cfg.equation_tag, cfg.estimator_kind);
    c.theta = cfg.theta;
    c.max_dofs = cfg.max_dofs;
    c
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub adaptive: AdaptiveTrace,
    pub uniform: Option<AdaptiveTrace>,
}

impl RunOutcome {
    pub fn adaptive_slope(&self) -> Option<f64> {
        rate_fit_rows(&self.adaptive.rows()).ok()
    }

    pub fn uniform_slope(&self) -> Option<f64> {
        self.uniform
            .as_ref()
            .and_then(|t| rate_fit_rows(&t.rows()).ok())
    }
}

/// Runs the adaptive study and, if requested, the uniform one.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome, RunError> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    let config = adaptive_config(cfg);
    let adaptive = run_adaptive(&problem, &config)?;
    let uniform = if cfg.compare_uniform {
        let mut u = config.clone();
        u.refinement = Refinement::Uniform;
        Some(run_adaptive(&problem, &u)?)
    } else {
        None
    };
    Ok(RunOutcome { adaptive, uniform })
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<(), RunError> {
    fs::write(&path, contents).map_err(|source| RunError::Io { path, source })
}

fn trace_bytes(t: &AdaptiveTrace) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace_csv(&t.rows(), &mut buf).expect("writing to memory");
    buf
}

fn slope_line(name: &str, t: &AdaptiveTrace) -> String {
    match rate_fit_rows(&t.rows()) {
        Ok(s) => format!("{name} {s:.6}\n"),
        Err(e) => format!("{name} unavailable ({e})\n"),
    }
}

/// Writes `trace.csv`, `trace_uniform.csv`, `mesh_L.txt`,
/// `estimators_L.txt`, `rates.txt` and `convergence.svg` into `dir`.
pub fn write_artifacts(dir: &Path, outcome: &RunOutcome) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let t = &outcome.adaptive;
    write(dir.join("trace.csv"), trace_bytes(t))?;
    for (l, data) in t.levels.iter().enumerate() {
        write(dir.join(format!("mesh_{l}.txt")), data.mesh.snapshot())?;
        write(
            dir.join(format!("estimators_{l}.txt")),
            data.estimator.export(),
        )?;
    }
    let mut rates = slope_line("adaptive", t);
    if let Some(u) = &outcome.uniform {
        write(dir.join("trace_uniform.csv"), trace_bytes(u))?;
        rates.push_str(&slope_line("uniform", u));
    }
    write(dir.join("rates.txt"), rates)?;
    write(dir.join("convergence.svg"), plot(outcome))?;
    Ok(())
}

fn plot(outcome: &RunOutcome) -> String {
    let series = |t: &AdaptiveTrace,
                  label: &str,
                  colour: &'static str,
                  dashed: bool,
                  f: fn(&abem_core::adaptive::LevelRecord) -> f64| Series {
        label: label.to_string(),
        colour,
        dashed,
        points: t.records.iter().map(|r| (r.dofs as f64, f(r))).collect(),
    };
    let t = &outcome.adaptive;
    let mut all = vec![
        series(t, "mu", "#1f4e9c", false, |r| r.mu),
        series(t, "eta", "#3a8f3a", false, |r| r.eta),
        series(t, "error", "#b02a2a", false, |r| r.error),
    ];
    if let Some(u) = &outcome.uniform {
        all.push(series(u, "mu (uniform)", "#1f4e9c", true, |r| r.mu));
        all.push(series(u, "error (uniform)", "#b02a2a", true, |r| r.error));
    }
    let mut title = String::new();
    let _ = write!(
        title,
        "{} / {}",
        t.config.equation_tag, t.config.estimator_kind
    );
    loglog(&title, &all)
}
