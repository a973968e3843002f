//! A posteriori error estimators with element-wise indicators.

mod faermann;
mod residual;
mod two_level;

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

pub use faermann::{faermann, faermann_with, SlobodeckijQuadrature};
pub use residual::{
    inverse_estimate_ratio, residual_integrals, residual_integrals_with, rho_modified,
    weighted_residual, ResidualField, ResidualQuadrature,
};
pub use two_level::{two_level, two_level_with, TwoLevelBasis, TwoLevelFine};

use crate::galerkin::EquationTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Faermann,
    TwoLevel,
    WeightedResidual,
    RhoModified,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Faermann => "faermann",
            EstimatorKind::TwoLevel => "two_level",
            EstimatorKind::WeightedResidual => "weighted_residual",
            EstimatorKind::RhoModified => "rho_modified",
        }
    }

    /// Whether the estimator is defined for `equation`.
    pub fn supports(self, equation: EquationTag) -> bool {
        !(self == EstimatorKind::Faermann && equation.is_hypersingular())
    }

    pub fn check(self, equation: EquationTag) -> crate::Result<()> {
        if self.supports(equation) {
            Ok(())
        } else {
            Err(crate::AbemError::EstimatorMismatch {
                estimator: self.name(),
                equation: equation.name(),
            })
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "faermann" => Ok(EstimatorKind::Faermann),
            "two_level" => Ok(EstimatorKind::TwoLevel),
            "weighted_residual" => Ok(EstimatorKind::WeightedResidual),
            "rho_modified" => Ok(EstimatorKind::RhoModified),
            other => Err(format!(
                "unknown estimator `{other}` (expected faermann, two_level or weighted_residual)"
            )),
        }
    }
}

/// Element-wise indicators of one estimator on one level.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub kind: EstimatorKind,
    /// Indicator of element `i`.
    pub local: Vec<f64>,
    /// `sqrt(sum local^2)`.
    pub total: f64,
    pub level: usize,
    pub equation: EquationTag,
}

impl EstimatorReport {
    pub fn new(kind: EstimatorKind, equation: EquationTag, level: usize, local: Vec<f64>) -> Self {
        let total = local.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self {
            kind,
            local,
            total,
            level,
            equation,
        }
    }

    /// `sqrt(sum_{T in set} local(T)^2)`.
    pub fn subset_total(&self, set: &BTreeSet<usize>) -> f64 {
        set.iter()
            .map(|&i| self.local[i].powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// One `level kind element_id indicator` line per element.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for (i, v) in self.local.iter().enumerate() {
            let _ = writeln!(out, "{} {} {} {:e}", self.level, self.kind, i, v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_export() {
        let r = EstimatorReport::new(
            EstimatorKind::TwoLevel,
            EquationTag::WeaklySingular,
            3,
            vec![3.0, 4.0],
        );
        assert_eq!(r.total, 5.0);
        assert_eq!(r.subset_total(&BTreeSet::from([1])), 4.0);
        assert_eq!(r.export(), "3 two_level 0 3e0\n3 two_level 1 4e0\n");
    }

    #[test]
    fn faermann_needs_weakly_singular() {
        assert!(EstimatorKind::Faermann
            .check(EquationTag::Hypersingular)
            .is_err());
        assert!(EstimatorKind::TwoLevel
            .check(EquationTag::Hypersingular)
            .is_ok());
    }
}
