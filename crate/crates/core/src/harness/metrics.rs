//! Per-run metrics against an oracle reference.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::record::RunRecord;

/// Fraction of the listed integer coordinates where `candidate` differs from
/// `reference`. Comparison is exact.
pub fn integer_error_rate(candidate: &[f64], reference: &[f64], indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::UndefinedMetric("integer error rate needs n_z >= 1"));
    }
    if candidate.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            found: candidate.len(),
        });
    }
    let mut wrong = 0usize;
    for &i in indices {
        let (c, r) = match (candidate.get(i), reference.get(i)) {
            (Some(&c), Some(&r)) => (c, r),
            _ => return Err(invalid(format!("index {i} out of range"))),
        };
        if c.fract() != 0.0 || r.fract() != 0.0 {
            return Err(invalid(format!("coordinate {i} is not integral")));
        }
        if c != r {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / indices.len() as f64)
}

/// How a per-run objective value was scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormFlag {
    /// Divided by a positive oracle optimum.
    Normalized,
    /// The oracle optimum is zero; the value is absolute.
    AbsoluteZeroReference,
    /// No oracle optimum is available; the value is absolute.
    Unavailable,
}

impl NormFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            NormFlag::Normalized => "normalized",
            NormFlag::AbsoluteZeroReference => "absolute_zero_reference",
            NormFlag::Unavailable => "unavailable",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(NormFlag::Normalized),
            "absolute_zero_reference" => Ok(NormFlag::AbsoluteZeroReference),
            "unavailable" => Ok(NormFlag::Unavailable),
            _ => Err(invalid(format!("unknown normalization flag '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalized {
    pub value: f64,
    pub flag: NormFlag,
    /// The run ended infeasible and entered with its penalized cost.
    pub infeasible: bool,
}

/// `best_cost / reference_f`; equal to `best_f / reference_f` for feasible
/// runs, while infeasible runs keep their penalty.
pub fn normalized_objective(run: &RunRecord, reference_f: Option<f64>) -> Result<Normalized> {
    let infeasible = !run.feasible;
    match reference_f {
        None => Ok(Normalized {
            value: run.best_cost,
            flag: NormFlag::Unavailable,
            infeasible,
        }),
        Some(0.0) => Ok(Normalized {
            value: run.best_cost,
            flag: NormFlag::AbsoluteZeroReference,
            infeasible,
        }),
        Some(r) if r > 0.0 && r.is_finite() => Ok(Normalized {
            value: run.best_cost / r,
            flag: NormFlag::Normalized,
            infeasible,
        }),
        Some(r) => Err(invalid(format!("reference optimum must be >= 0, got {r}"))),
    }
}
