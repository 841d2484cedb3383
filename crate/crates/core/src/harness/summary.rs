//! Per-cell summaries across seeds.

use std::collections::BTreeMap;

use crate::error::{invalid, Result};
use crate::harness::metrics::{integer_error_rate, normalized_objective, NormFlag};
use crate::oracle::OracleSolution;
use crate::quadforms::InstanceDescriptor;
use crate::record::{RunRecord, SolverKind};

/// Linear-interpolation quantile (`h = (n-1) q`) of already sorted values.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `[min, q25, median, q75, max]`.
pub fn five_numbers(values: &[f64]) -> [f64; 5] {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| quantile_sorted(&v, q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub descriptor: InstanceDescriptor,
    pub solver: SolverKind,
    pub runs: usize,
    pub reference_f: Option<f64>,
    pub flag: NormFlag,
    /// `[min, q25, median, q75, max]` of the per-run values.
    pub quantiles: [f64; 5],
    pub mean_eps_z: Option<f64>,
    pub feasibility_rate: f64,
    pub infeasible_runs: usize,
}

impl SummaryRow {
    pub fn median(&self) -> f64 {
        self.quantiles[2]
    }
}

/// Groups records by descriptor and solver and summarizes each group.
///
/// `references` maps [`InstanceDescriptor::key`] to the oracle optimum; cells
/// without one are flagged as unavailable.
pub fn summarize(
    records: &[RunRecord],
    references: &BTreeMap<String, OracleSolution>,
) -> Result<Vec<SummaryRow>> {
    let mut order: Vec<(InstanceDescriptor, SolverKind)> = Vec::new();
    let mut groups: BTreeMap<(String, SolverKind), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.descriptor.key(), r.solver);
        let group = groups.entry(key).or_default();
        if group.is_empty() {
            order.push((r.descriptor, r.solver));
        }
        group.push(r);
    }
    let mut rows = Vec::with_capacity(order.len());
    for (descriptor, solver) in order {
        let group = &groups[&(descriptor.key(), solver)];
        let reference = references.get(&descriptor.key());
        rows.push(summarize_cell(descriptor, solver, group, reference)?);
    }
    Ok(rows)
}

fn summarize_cell(
    descriptor: InstanceDescriptor,
    solver: SolverKind,
    group: &[&RunRecord],
    reference: Option<&OracleSolution>,
) -> Result<SummaryRow> {
    if group.is_empty() {
        return Err(invalid("empty cell"));
    }
    let reference_f = reference.map(|s| s.f_star);
    let mut values = Vec::with_capacity(group.len());
    let mut flag = NormFlag::Unavailable;
    for r in group {
        let n = normalized_objective(r, reference_f)?;
        flag = n.flag;
        values.push(n.value);
    }
    let mean_eps_z = match reference {
        Some(sol) if descriptor.n_z > 0 => {
            let idx: Vec<usize> = (descriptor.n_r..descriptor.dim).collect();
            let mut total = 0.0;
            for r in group {
                total += integer_error_rate(&r.best_x, &sol.x_star, &idx)?;
            }
            Some(total / group.len() as f64)
        }
        _ => None,
    };
    let feasible = group.iter().filter(|r| r.feasible).count();
    Ok(SummaryRow {
        descriptor,
        solver,
        runs: group.len(),
        reference_f,
        flag,
        quantiles: five_numbers(&values),
        mean_eps_z,
        feasibility_rate: feasible as f64 / group.len() as f64,
        infeasible_runs: group.len() - feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::OracleStatus;
    use crate::quadforms::TestCase;
    use crate::record::Termination;
    use proptest::prelude::*;

    #[test]
    fn quantile_examples() {
        assert_eq!(five_numbers(&[4.0]), [4.0; 5]);
        assert_eq!(
            five_numbers(&[5.0, 1.0, 3.0, 2.0, 4.0]),
            [1.0, 2.0, 3.0, 4.0, 5.0]
        );
        assert_eq!(five_numbers(&[1.0, 2.0])[2], 1.5);
        assert_eq!(quantile_sorted(&[0.0, 10.0], 0.25), 2.5);
    }

    fn rec(best_cost: f64, z: f64, feasible: bool) -> RunRecord {
        let d = InstanceDescriptor::new(TestCase::Tc0, 2 * 2, 10.0, 30.0, false);
        RunRecord {
            descriptor: d,
            solver: SolverKind::CmaIh,
            seed_index: 0,
            seed: 0,
            best_cost,
            best_f: best_cost,
            best_g: if feasible { 1.0 } else { 40.0 },
            feasible,
            best_feasible_f: None,
            evaluations_used: 1,
            wall_time: 0.0,
            best_x: vec![0.0, 0.0, z, z],
            termination: Termination::Budget,
        }
    }

    fn reference(f: f64) -> BTreeMap<String, OracleSolution> {
        let d = InstanceDescriptor::new(TestCase::Tc0, 4, 10.0, 30.0, false);
        let sol = OracleSolution {
            x_star: vec![0.0, 0.0, 1.0, 1.0],
            f_star: f,
            g_at_star: 30.0,
            status: OracleStatus::Boundary,
            multiplier: 1.0,
            nodes_enumerated: 1,
        };
        BTreeMap::from([(d.key(), sol)])
    }

    #[test]
    fn mean_error_rate_and_feasibility() {
        let rows = summarize(
            &[rec(2.0, 1.0, true), rec(4.0, 0.0, false)],
            &reference(2.0),
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        let row = &rows[0];
        assert_eq!(row.mean_eps_z, Some(0.5));
        assert_eq!(row.feasibility_rate, 0.5);
        assert_eq!(row.infeasible_runs, 1);
        assert_eq!(row.quantiles[0], 1.0);
        assert_eq!(row.quantiles[4], 2.0);
        assert_eq!(row.flag, NormFlag::Normalized);
    }

    #[test]
    fn missing_reference_is_flagged() {
        let rows = summarize(&[rec(2.0, 1.0, true)], &BTreeMap::new()).unwrap();
        assert_eq!(rows[0].flag, NormFlag::Unavailable);
        assert_eq!(rows[0].mean_eps_z, None);
        assert_eq!(rows[0].quantiles, [2.0; 5]);
    }

    #[test]
    fn cells_are_separated_by_solver() {
        let mut other = rec(3.0, 1.0, true);
        other.solver = SolverKind::Mies;
        let rows = summarize(&[rec(2.0, 1.0, true), other], &reference(1.0)).unwrap();
        assert_eq!(rows.len(), 2);
    }

    proptest! {
        #[test]
        fn quantiles_are_ordered_and_order_free(mut v in proptest::collection::vec(-1e6f64..1e6, 1..40)) {
            let q = five_numbers(&v);
            for w in q.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            v.reverse();
            prop_assert_eq!(five_numbers(&v), q);
        }
    }
}
