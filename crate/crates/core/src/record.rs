//! Per-run outcome shared by both solvers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadforms::{Evaluation, InstanceDescriptor};

/// Feasibility slack used for reporting.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "mies")]
    Mies,
    #[serde(rename = "cma_ih")]
    CmaIh,
}

impl SolverKind {
    pub const ALL: [SolverKind; 2] = [SolverKind::Mies, SolverKind::CmaIh];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Mies => "mies",
            SolverKind::CmaIh => "cma_ih",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "mies" => Ok(SolverKind::Mies),
            "cma_ih" | "cma" | "cmaih" => Ok(SolverKind::CmaIh),
            _ => Err(invalid(format!("unknown solver '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    #[serde(rename = "budget")]
    Budget,
    #[serde(rename = "tolerance")]
    Tolerance,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Budget => "budget",
            Termination::Tolerance => "tolerance",
        }
    }
}

impl FromStr for Termination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "budget" => Ok(Termination::Budget),
            "tolerance" => Ok(Termination::Tolerance),
            _ => Err(invalid(format!("unknown termination '{s}'"))),
        }
    }
}

/// Outcome of one solver run on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub descriptor: InstanceDescriptor,
    pub solver: SolverKind,
    pub seed_index: usize,
    pub seed: u64,
    /// Penalized cost of the best-ever candidate.
    pub best_cost: f64,
    pub best_f: f64,
    pub best_g: f64,
    pub feasible: bool,
    /// Lowest objective among evaluated candidates with `g <= E`.
    pub best_feasible_f: Option<f64>,
    pub evaluations_used: u64,
    pub wall_time: f64,
    pub best_x: Vec<f64>,
    pub termination: Termination,
}

impl RunRecord {
    /// Checks the reporting invariants: feasibility agrees with `best_g` and
    /// the cost equals the objective on feasible rows.
    pub fn check_invariants(&self) -> Result<()> {
        let level = self.descriptor.level;
        if self.feasible != (self.best_g <= level + FEASIBILITY_TOL) {
            return Err(invalid("feasible flag disagrees with best_g"));
        }
        if self.feasible && self.best_g <= level && self.best_cost != self.best_f {
            return Err(invalid("feasible best_cost differs from best_f"));
        }
        if self.best_x.len() != self.descriptor.dim {
            return Err(Error::DimensionMismatch {
                expected: self.descriptor.dim,
                found: self.best_x.len(),
            });
        }
        for &v in &self.best_x[self.descriptor.n_r..] {
            if v.fract() != 0.0 {
                return Err(invalid("integer coordinate is not integral"));
            }
        }
        Ok(())
    }
}

/// One generation of a convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub generation: u64,
    pub evaluations: u64,
    /// Best-ever penalized cost so far.
    pub best_cost: f64,
    /// Global step size (CMA) or mean real step size (MIES).
    pub step: f64,
    /// Smallest effective standard deviation over the integer coordinates,
    /// `sigma * sqrt(C_ii)` for CMA; NaN where not applicable.
    pub min_integer_std: f64,
}

/// Best-ever bookkeeping shared by the solvers.
#[derive(Debug, Clone)]
pub(crate) struct BestTracker {
    pub x: Vec<f64>,
    pub eval: Evaluation,
    pub feasible_f: Option<f64>,
    level: f64,
}

impl BestTracker {
    pub fn new(x: Vec<f64>, eval: Evaluation, level: f64) -> Self {
        let feasible_f = (eval.g <= level).then_some(eval.f);
        BestTracker {
            x,
            eval,
            feasible_f,
            level,
        }
    }

    /// Strictly better cost, or equal cost with a lower constraint value.
    pub fn offer(&mut self, x: &[f64], eval: Evaluation) -> bool {
        if eval.g <= self.level && self.feasible_f.is_none_or(|f| eval.f < f) {
            self.feasible_f = Some(eval.f);
        }
        let better =
            eval.cost < self.eval.cost || (eval.cost == self.eval.cost && eval.g < self.eval.g);
        if better {
            self.x.clear();
            self.x.extend_from_slice(x);
            self.eval = eval;
        }
        better
    }

    pub fn into_record(
        self,
        descriptor: InstanceDescriptor,
        solver: SolverKind,
        seed: u64,
        evaluations_used: u64,
        wall_time: f64,
        termination: Termination,
    ) -> RunRecord {
        RunRecord {
            descriptor,
            solver,
            seed_index: 0,
            seed,
            best_cost: self.eval.cost,
            best_f: self.eval.f,
            best_g: self.eval.g,
            feasible: self.eval.g <= descriptor.level + FEASIBILITY_TOL,
            best_feasible_f: self.feasible_f,
            evaluations_used,
            wall_time,
            best_x: self.x,
            termination,
        }
    }
}
