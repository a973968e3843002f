//! Experiment configuration: a flat `key = value` file.
//!
//! Blank lines and lines starting with `#` are ignored. Recognized keys:
//! `problem`, `equation_tag`, `estimator_kind`, `theta`, `max_dofs`, `rhs`,
//! `seed_mesh_elements`, `outputs`, `compare_uniform`,
//! `overkill_extra_refinements`, and for `problem = custom` also
//! `vertices` (`x y; x y; ...`) and `closed`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use abem_core::estimators::EstimatorKind;
use abem_core::galerkin::EquationTag;

/// A configuration problem, tied to the offending key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Slit,
    LShapeBoundary,
    SquareClosed,
    Custom {
        vertices: Vec<(f64, f64)>,
        closed: bool,
    },
}

impl ProblemSpec {
    pub fn is_closed(&self) -> bool {
        match self {
            ProblemSpec::Slit | ProblemSpec::LShapeBoundary => false,
            ProblemSpec::SquareClosed => true,
            ProblemSpec::Custom { closed, .. } => *closed,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Slit => "slit",
            ProblemSpec::LShapeBoundary => "lshape_boundary",
            ProblemSpec::SquareClosed => "square_closed",
            ProblemSpec::Custom { .. } => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RhsSpec {
    One,
    ArcLength,
    /// Random discrete density on the seed mesh.
    Synthetic(u64),
    /// Named entry of the data catalogue.
    Catalogue(String),
}

impl FromStr for RhsSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "one" => Ok(RhsSpec::One),
            "arc_length" => Ok(RhsSpec::ArcLength),
            _ => {
                if let Some(seed) = s.strip_prefix("synthetic:") {
                    let seed = seed.trim().parse().map_err(|_| {
                        format!("synthetic seed `{seed}` is not an unsigned integer")
                    })?;
                    return Ok(RhsSpec::Synthetic(seed));
                }
                if crate::catalogue::DATA_IDS.contains(&s) {
                    return Ok(RhsSpec::Catalogue(s.to_string()));
                }
                Err(format!(
                    "unknown data `{s}` (expected one, arc_length, synthetic:<seed> or one of {})",
                    crate::catalogue::DATA_IDS.join(", ")
                ))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub equation_tag: EquationTag,
    pub estimator_kind: EstimatorKind,
    pub theta: f64,
    pub max_dofs: usize,
    pub rhs: RhsSpec,
    pub seed_mesh_elements: usize,
    pub outputs: PathBuf,
    pub compare_uniform: bool,
    pub overkill_extra_refinements: usize,
}

const KEYS: [&str; 12] = [
    "problem",
    "equation_tag",
    "estimator_kind",
    "theta",
    "max_dofs",
    "rhs",
    "seed_mesh_elements",
    "outputs",
    "compare_uniform",
    "overkill_extra_refinements",
    "vertices",
    "closed",
];

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    raw.parse()
        .map_err(|e| ConfigError::new(key, format!("cannot parse `{raw}`: {e}")))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool, ConfigError> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::new(key, format!("`{raw}` is not a boolean"))),
    }
}

fn parse_vertices(raw: &str) -> Result<Vec<(f64, f64)>, ConfigError> {
    raw.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let xy: Vec<&str> = pair.split([' ', ',']).filter(|s| !s.is_empty()).collect();
            match xy.as_slice() {
                [x, y] => Ok((parse_value("vertices", x)?, parse_value("vertices", y)?)),
                _ => Err(ConfigError::new(
                    "vertices",
                    format!("`{pair}` is not an `x y` pair"),
                )),
            }
        })
        .collect()
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::new("config", format!("cannot read {}: {e}", path.display()))
        })?;
        text.parse()
    }

    /// Defaults for everything except the three mandatory keys.
    pub fn new(
        problem: ProblemSpec,
        equation_tag: EquationTag,
        estimator_kind: EstimatorKind,
    ) -> Self {
        Self {
            problem,
            equation_tag,
            estimator_kind,
            theta: 0.5,
            max_dofs: 2000,
            rhs: RhsSpec::One,
            seed_mesh_elements: 2,
            outputs: PathBuf::from("out"),
            compare_uniform: false,
            overkill_extra_refinements: 3,
        }
    }

    /// Checks value ranges and the problem/equation/estimator combination.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(ConfigError::new(
                "theta",
                format!("{} is not in (0, 1]", self.theta),
            ));
        }
        if self.seed_mesh_elements < 2 {
            return Err(ConfigError::new("seed_mesh_elements", "must be at least 2"));
        }
        if self.max_dofs == 0 {
            return Err(ConfigError::new("max_dofs", "must be positive"));
        }
        if let ProblemSpec::Custom { vertices, closed } = &self.problem {
            let needed = if *closed { 3 } else { 2 };
            if vertices.len() < needed {
                return Err(ConfigError::new(
                    "vertices",
                    format!("a custom curve needs at least {needed} vertices"),
                ));
            }
        }
        if !self.estimator_kind.supports(self.equation_tag) {
            return Err(ConfigError::new(
                "estimator_kind",
                format!(
                    "{} is not defined for {}",
                    self.estimator_kind, self.equation_tag
                ),
            ));
        }
        if self.estimator_kind == EstimatorKind::RhoModified {
            return Err(ConfigError::new(
                "estimator_kind",
                "rho_modified is an analysis quantity, not a marking estimator",
            ));
        }
        let closed = self.problem.is_closed();
        match self.equation_tag {
            EquationTag::Hypersingular if closed => return Err(ConfigError::new(
                "equation_tag",
                "hypersingular needs an open arc; use hypersingular_stabilized on closed curves",
            )),
            EquationTag::HypersingularStabilized if !closed => {
                return Err(ConfigError::new(
                    "equation_tag",
                    "hypersingular_stabilized needs a closed curve",
                ))
            }
            _ => {}
        }
        if self.equation_tag == EquationTag::HypersingularStabilized && self.rhs == RhsSpec::One {
            return Err(ConfigError::new(
                "rhs",
                "<F, 1> must vanish on a closed curve, and F = 1 has <F, 1> = |boundary|",
            ));
        }
        Ok(())
    }
}

impl FromStr for ExperimentConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::new(
                    "config",
                    format!("line {} has no `=`", n + 1),
                ));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(ConfigError::new(k, "unknown key"));
            }
            if map.insert(k, v).is_some() {
                return Err(ConfigError::new(k, "given twice"));
            }
        }
        let required = |k: &'static str| {
            map.get(k)
                .copied()
                .ok_or_else(|| ConfigError::new(k, "missing"))
        };
        let problem = match required("problem")? {
            "slit" => ProblemSpec::Slit,
            "lshape_boundary" => ProblemSpec::LShapeBoundary,
            "square_closed" => ProblemSpec::SquareClosed,
            "custom" => ProblemSpec::Custom {
                vertices: parse_vertices(required("vertices")?)?,
                closed: map.get("closed").map_or(Ok(false), |v| parse_bool("closed", v))?,
            },
            other => {
                return Err(ConfigError::new(
                    "problem",
                    format!("unknown problem `{other}` (expected slit, lshape_boundary, square_closed or custom)"),
                ))
            }
        };
        if !matches!(problem, ProblemSpec::Custom { .. }) {
            for k in ["vertices", "closed"] {
                if map.contains_key(k) {
                    return Err(ConfigError::new(k, "only valid with `problem = custom`"));
                }
            }
        }
        let mut cfg = ExperimentConfig::new(
            problem,
            parse_value("equation_tag", required("equation_tag")?)?,
            parse_value("estimator_kind", required("estimator_kind")?)?,
        );
        if let Some(v) = map.get("theta") {
            cfg.theta = parse_value("theta", v)?;
        }
        if let Some(v) = map.get("max_dofs") {
            cfg.max_dofs = parse_value("max_dofs", v)?;
        }
        if let Some(v) = map.get("rhs") {
            cfg.rhs = parse_value("rhs", v)?;
        }
        if let Some(v) = map.get("seed_mesh_elements") {
            cfg.seed_mesh_elements = parse_value("seed_mesh_elements", v)?;
        }
        if let Some(v) = map.get("outputs") {
            if v.is_empty() {
                return Err(ConfigError::new("outputs", "empty path"));
            }
            cfg.outputs = PathBuf::from(v);
        }
        if let Some(v) = map.get("compare_uniform") {
            cfg.compare_uniform = parse_bool("compare_uniform", v)?;
        }
        if let Some(v) = map.get("overkill_extra_refinements") {
            cfg.overkill_extra_refinements = parse_value("overkill_extra_refinements", v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str =
        "problem = slit\nequation_tag = weakly_singular\nestimator_kind = faermann\n";

    fn field_of(text: &str) -> String {
        text.parse::<ExperimentConfig>().unwrap_err().field
    }

    #[test]
    fn defaults_and_overrides() {
        let cfg: ExperimentConfig =
            format!("# demo\n{BASE}theta = 0.3\ncompare_uniform = true\nrhs = synthetic:7\n")
                .parse()
                .unwrap();
        assert_eq!(cfg.theta, 0.3);
        assert_eq!(cfg.max_dofs, 2000);
        assert_eq!(cfg.overkill_extra_refinements, 3);
        assert_eq!(cfg.rhs, RhsSpec::Synthetic(7));
        assert!(cfg.compare_uniform);
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(field_of(&format!("{BASE}theta = 1.5")), "theta");
        assert_eq!(field_of(&format!("{BASE}theta = abc")), "theta");
        assert_eq!(
            field_of(&format!("{BASE}seed_mesh_elements = 1")),
            "seed_mesh_elements"
        );
        assert_eq!(field_of(&format!("{BASE}colour = red")), "colour");
        assert_eq!(field_of(&format!("{BASE}rhs = banana")), "rhs");
        assert_eq!(
            field_of("equation_tag = weakly_singular\nestimator_kind = faermann"),
            "problem"
        );
        assert_eq!(
            field_of("problem = slit\nequation_tag = hypersingular\nestimator_kind = faermann"),
            "estimator_kind"
        );
        assert_eq!(
            field_of("problem = square_closed\nequation_tag = hypersingular_stabilized\nestimator_kind = two_level"),
            "rhs"
        );
        assert_eq!(
            field_of("problem = slit\nequation_tag = hypersingular_stabilized\nestimator_kind = two_level"),
            "equation_tag"
        );
    }

    #[test]
    fn custom_polygon() {
        let cfg: ExperimentConfig =
            "problem = custom\nvertices = 0 0; 1 0; 1 1\nclosed = true\nequation_tag = weakly_singular\nestimator_kind = two_level"
                .parse()
                .unwrap();
        assert_eq!(
            cfg.problem,
            ProblemSpec::Custom {
                vertices: vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)],
                closed: true
            }
        );
        assert_eq!(field_of(&format!("{BASE}vertices = 0 0; 1 0")), "vertices");
    }
}
