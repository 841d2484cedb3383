//! CSV files for run records, summaries and traces.
//!
//! Column order is fixed by the `*_HEADER` constants. Reals are written with
//! 17 significant digits; missing values are empty fields; `best_x` is a
//! `;`-separated list in coordinate order (coordinate 1 first).

use std::io::{Read, Write};

use crate::error::{invalid, Result};
use crate::harness::metrics::NormFlag;
use crate::harness::summary::SummaryRow;
use crate::quadforms::{InstanceDescriptor, TestCase};
use crate::record::{RunRecord, SolverKind, Termination, TraceRow};

pub const RUN_HEADER: [&str; 18] = [
    "test_case",
    "D",
    "n_r",
    "n_z",
    "c",
    "E",
    "solver",
    "seed_index",
    "seed",
    "best_cost",
    "best_f",
    "best_g",
    "feasible",
    "best_feasible_f",
    "evaluations_used",
    "wall_time",
    "termination",
    "best_x",
];

pub const SUMMARY_HEADER: [&str; 18] = [
    "test_case",
    "D",
    "n_r",
    "n_z",
    "c",
    "E",
    "solver",
    "runs",
    "reference_f",
    "normalization",
    "min",
    "q25",
    "median",
    "q75",
    "max",
    "mean_eps_z",
    "feasibility_rate",
    "infeasible_runs",
];

pub const TRACE_HEADER: [&str; 13] = [
    "test_case",
    "D",
    "n_r",
    "n_z",
    "c",
    "E",
    "solver",
    "seed_index",
    "generation",
    "evaluations",
    "best_cost",
    "step",
    "min_integer_std",
];

/// Index of the `wall_time` column in [`RUN_HEADER`].
pub const WALL_TIME_COLUMN: usize = 15;

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

fn descriptor_fields(d: &InstanceDescriptor) -> [String; 6] {
    [
        d.test_case.to_string(),
        d.dim.to_string(),
        d.n_r.to_string(),
        d.n_z.to_string(),
        fmt_real(d.cond),
        fmt_real(d.level),
    ]
}

pub fn run_fields(r: &RunRecord) -> Vec<String> {
    let mut row: Vec<String> = descriptor_fields(&r.descriptor).into();
    row.extend([
        r.solver.to_string(),
        r.seed_index.to_string(),
        r.seed.to_string(),
        fmt_real(r.best_cost),
        fmt_real(r.best_f),
        fmt_real(r.best_g),
        r.feasible.to_string(),
        fmt_opt(r.best_feasible_f),
        r.evaluations_used.to_string(),
        fmt_real(r.wall_time),
        r.termination.as_str().to_string(),
        r.best_x
            .iter()
            .map(|&v| fmt_real(v))
            .collect::<Vec<_>>()
            .join(";"),
    ]);
    row
}

pub fn write_runs<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUN_HEADER)?;
    for r in records {
        w.write_record(run_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for s in rows {
        let mut row: Vec<String> = descriptor_fields(&s.descriptor).into();
        row.extend([
            s.solver.to_string(),
            s.runs.to_string(),
            fmt_opt(s.reference_f),
            s.flag.as_str().to_string(),
        ]);
        row.extend(s.quantiles.iter().map(|&q| fmt_real(q)));
        row.extend([
            fmt_opt(s.mean_eps_z),
            fmt_real(s.feasibility_rate),
            s.infeasible_runs.to_string(),
        ]);
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One trace file for many runs; each block is keyed by its run.
pub fn write_traces<W: Write>(out: W, traces: &[(RunRecord, Vec<TraceRow>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for (r, rows) in traces {
        for t in rows {
            let mut row: Vec<String> = descriptor_fields(&r.descriptor).into();
            row.extend([
                r.solver.to_string(),
                r.seed_index.to_string(),
                t.generation.to_string(),
                t.evaluations.to_string(),
                fmt_real(t.best_cost),
                fmt_real(t.step),
                fmt_real(t.min_integer_std),
            ]);
            w.write_record(row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(invalid(format!("unexpected CSV header: {found:?}")));
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, name: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| invalid(format!("cannot parse {name} from '{field}'")))
}

fn parse_opt(field: &str, name: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse(field, name).map(Some)
    }
}

fn parse_descriptor(rec: &csv::StringRecord) -> Result<InstanceDescriptor> {
    Ok(InstanceDescriptor {
        test_case: rec[0].parse::<TestCase>()?,
        dim: parse(&rec[1], "D")?,
        n_r: parse(&rec[2], "n_r")?,
        n_z: parse(&rec[3], "n_z")?,
        cond: parse(&rec[4], "c")?,
        level: parse(&rec[5], "E")?,
    })
}

pub fn read_runs<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    check_header(rd.headers()?, &RUN_HEADER)?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let best_x = if rec[17].is_empty() {
            Vec::new()
        } else {
            rec[17]
                .split(';')
                .map(|v| parse(v, "best_x"))
                .collect::<Result<_>>()?
        };
        out.push(RunRecord {
            descriptor: parse_descriptor(&rec)?,
            solver: rec[6].parse::<SolverKind>()?,
            seed_index: parse(&rec[7], "seed_index")?,
            seed: parse(&rec[8], "seed")?,
            best_cost: parse(&rec[9], "best_cost")?,
            best_f: parse(&rec[10], "best_f")?,
            best_g: parse(&rec[11], "best_g")?,
            feasible: parse(&rec[12], "feasible")?,
            best_feasible_f: parse_opt(&rec[13], "best_feasible_f")?,
            evaluations_used: parse(&rec[14], "evaluations_used")?,
            wall_time: parse(&rec[15], "wall_time")?,
            termination: rec[16].parse::<Termination>()?,
            best_x,
        });
    }
    Ok(out)
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut rd = csv::Reader::from_reader(input);
    check_header(rd.headers()?, &SUMMARY_HEADER)?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let mut quantiles = [0.0; 5];
        for (k, q) in quantiles.iter_mut().enumerate() {
            *q = parse(&rec[10 + k], SUMMARY_HEADER[10 + k])?;
        }
        out.push(SummaryRow {
            descriptor: parse_descriptor(&rec)?,
            solver: rec[6].parse::<SolverKind>()?,
            runs: parse(&rec[7], "runs")?,
            reference_f: parse_opt(&rec[8], "reference_f")?,
            flag: NormFlag::parse(&rec[9])?,
            quantiles,
            mean_eps_z: parse_opt(&rec[15], "mean_eps_z")?,
            feasibility_rate: parse(&rec[16], "feasibility_rate")?,
            infeasible_runs: parse(&rec[17], "infeasible_runs")?,
        });
    }
    Ok(out)
}
