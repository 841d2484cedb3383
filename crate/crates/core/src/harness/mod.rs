//! Experiment matrices: grid configuration, seeded parallel execution,
//! oracle references, metrics and CSV output.
//!
//! Seeds are derived as the first eight bytes (little endian) of
//! `SHA-256("{descriptor key}|{seed_index}")`, so both solvers see the same
//! seeds on a cell and results do not depend on platform or thread count.

pub mod io;
pub mod metrics;
pub mod summary;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cma_ih::{self, CmaConfig};
use crate::error::{invalid, Error, Result};
use crate::mies::{self, MiesConfig};
use crate::oracle::{OracleCache, OracleSolution};
use crate::quadforms::{InstanceDescriptor, TestCase};
use crate::record::{RunRecord, SolverKind, TraceRow};

pub use metrics::{integer_error_rate, normalized_objective, NormFlag, Normalized};
pub use summary::{five_numbers, quantile_sorted, summarize, SummaryRow};

/// Default evaluation budget per run.
pub const DEFAULT_BUDGET: u64 = 20_000;

/// Grid of cells and run settings. Every key is optional in JSON; missing
/// keys take the desk defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatrixConfig {
    pub test_cases: Vec<TestCase>,
    pub dims: Vec<usize>,
    pub conds: Vec<f64>,
    pub levels: Vec<f64>,
    pub solvers: Vec<SolverKind>,
    pub seeds: usize,
    pub budget: u64,
    pub all_integer: bool,
    pub trace: bool,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
    pub mies: MiesConfig,
    pub cma: CmaConfig,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        MatrixConfig {
            test_cases: TestCase::ALL_TC.to_vec(),
            dims: vec![8],
            conds: vec![10.0, 1e3, 1e6],
            levels: vec![10.0, 50.0],
            solvers: SolverKind::ALL.to_vec(),
            seeds: 5,
            budget: DEFAULT_BUDGET,
            all_integer: false,
            trace: false,
            threads: None,
            mies: MiesConfig::default(),
            cma: CmaConfig::default(),
        }
    }
}

impl MatrixConfig {
    /// Distinct instances in grid order.
    pub fn descriptors(&self) -> Vec<InstanceDescriptor> {
        let mut out = Vec::new();
        for &tc in &self.test_cases {
            for &d in &self.dims {
                for &c in &self.conds {
                    for &e in &self.levels {
                        out.push(InstanceDescriptor::new(tc, d, c, e, self.all_integer));
                    }
                }
            }
        }
        out
    }

    /// `(instance, solver)` cells in grid order.
    pub fn cells(&self) -> Vec<(InstanceDescriptor, SolverKind)> {
        self.descriptors()
            .into_iter()
            .flat_map(|d| self.solvers.iter().map(move |&s| (d, s)))
            .collect()
    }

    pub fn run_count(&self) -> usize {
        self.cells().len() * self.seeds
    }

    pub fn validate(&self) -> Result<()> {
        for d in self.descriptors() {
            d.build()?;
        }
        self.mies.validate()?;
        self.cma.validate()?;
        if self.threads == Some(0) {
            return Err(invalid("threads must be >= 1"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Stable per-run seed.
pub fn derive_seed(descriptor: &InstanceDescriptor, seed_index: usize) -> u64 {
    let digest = Sha256::digest(format!("{}|{}", descriptor.key(), seed_index).as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// One run of one solver with the matrix settings.
pub fn run_one(
    descriptor: &InstanceDescriptor,
    solver: SolverKind,
    seed_index: usize,
    config: &MatrixConfig,
) -> Result<(RunRecord, Vec<TraceRow>)> {
    let instance = descriptor.build()?;
    let seed = derive_seed(descriptor, seed_index);
    let (mut record, trace) = match solver {
        SolverKind::Mies => {
            let cfg = MiesConfig {
                budget: config.budget,
                ..config.mies.clone()
            };
            mies::run_traced(&instance, &cfg, seed)?
        }
        SolverKind::CmaIh => {
            let cfg = CmaConfig {
                budget: config.budget,
                ..config.cma.clone()
            };
            cma_ih::run_traced(&instance, &cfg, seed)?
        }
    };
    record.seed_index = seed_index;
    record.check_invariants()?;
    Ok((record, trace))
}

#[derive(Debug, Clone, Default)]
pub struct MatrixOutput {
    /// Sorted by cell in grid order, then seed index.
    pub records: Vec<RunRecord>,
    /// Present only when tracing is enabled.
    pub traces: Vec<(RunRecord, Vec<TraceRow>)>,
}

/// Executes every `(cell, seed)` run on a work pool.
pub fn run_matrix(config: &MatrixConfig) -> Result<MatrixOutput> {
    config.validate()?;
    let jobs: Vec<(InstanceDescriptor, SolverKind, usize)> = config
        .cells()
        .into_iter()
        .flat_map(|(d, s)| (0..config.seeds).map(move |k| (d, s, k)))
        .collect();
    let work = || -> Result<Vec<(RunRecord, Vec<TraceRow>)>> {
        jobs.par_iter()
            .map(|(d, s, k)| run_one(d, *s, *k, config))
            .collect()
    };
    let results = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| invalid(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let records = results.iter().map(|(r, _)| r.clone()).collect();
    let traces = if config.trace { results } else { Vec::new() };
    Ok(MatrixOutput { records, traces })
}

/// Oracle optima for the given instances, computed into `cache` when
/// missing. Instances beyond the oracle's reach are left out so their cells
/// get flagged.
pub fn oracle_references(
    descriptors: &[InstanceDescriptor],
    cache: &mut OracleCache,
    solve_missing: bool,
) -> Result<BTreeMap<String, OracleSolution>> {
    let missing: Vec<InstanceDescriptor> = descriptors
        .iter()
        .filter(|d| cache.get(d).is_none())
        .copied()
        .collect();
    if solve_missing {
        let solved: Vec<(InstanceDescriptor, Result<OracleSolution>)> = missing
            .par_iter()
            .map(|d| {
                (
                    *d,
                    d.build().and_then(|i| crate::oracle::solve_instance(&i)),
                )
            })
            .collect();
        for (d, res) in solved {
            match res {
                Ok(sol) => cache.insert(d, sol),
                Err(Error::EnumerationGuard { .. }) | Err(Error::BracketFailure(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(descriptors
        .iter()
        .filter_map(|d| cache.get(d).map(|s| (d.key(), s.clone())))
        .collect())
}
