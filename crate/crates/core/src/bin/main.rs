use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use miqcqp_es::harness::{self, io, MatrixConfig};
use miqcqp_es::intdist::{self, DoubleGeometric};
use miqcqp_es::oracle::OracleCache;
use miqcqp_es::{SolverKind, TestCase};

#[derive(Parser)]
#[command(
    name = "miqcqp-es",
    version,
    about = "Mixed-integer evolution strategies on quadratically-constrained quadratic programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment matrix and write runs/summary CSV files.
    Run(RunArgs),
    /// Compute or refresh oracle references for a grid.
    Oracle(OracleArgs),
    /// Summarize an existing runs CSV.
    Summarize(SummarizeArgs),
    /// Check the double-geometric sampler against its pmf.
    DistTest(DistArgs),
}

/// Grid flags; list flags take comma-separated values.
#[derive(Args, Clone)]
struct GridArgs {
    #[arg(long = "test-case", value_delimiter = ',')]
    test_case: Vec<TestCase>,
    #[arg(long, value_delimiter = ',')]
    dim: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    cond: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    level: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    solver: Vec<SolverKind>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    all_integer: bool,
    #[arg(long)]
    threads: Option<usize>,
    /// JSON matrix config; its keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Output directory for runs.csv, summary.csv, traces.csv and oracle.json.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Also write per-generation traces.
    #[arg(long)]
    trace: bool,
    /// Oracle fixtures file; defaults to <out>/oracle.json.
    #[arg(long)]
    oracle: Option<PathBuf>,
    /// Use only cached oracle references.
    #[arg(long)]
    no_solve: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Fixtures file to create or extend.
    #[arg(long, default_value = "oracle.json")]
    out: PathBuf,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Runs CSV produced by `run`.
    #[arg(long)]
    input: PathBuf,
    /// Oracle fixtures file.
    #[arg(long)]
    oracle: Option<PathBuf>,
    /// Solve missing references and store them in the fixtures file.
    #[arg(long)]
    solve: bool,
    #[arg(long, default_value = "summary.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct DistArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.3, 0.5, 0.9])]
    p: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn matrix_config(grid: &GridArgs, trace: bool) -> anyhow::Result<MatrixConfig> {
    let mut cfg = MatrixConfig::default();
    if !grid.test_case.is_empty() {
        cfg.test_cases = grid.test_case.clone();
    }
    if !grid.dim.is_empty() {
        cfg.dims = grid.dim.clone();
    }
    if !grid.cond.is_empty() {
        cfg.conds = grid.cond.clone();
    }
    if !grid.level.is_empty() {
        cfg.levels = grid.level.clone();
    }
    if !grid.solver.is_empty() {
        cfg.solvers = grid.solver.clone();
    }
    if let Some(s) = grid.seeds {
        cfg.seeds = s;
    }
    if let Some(b) = grid.budget {
        cfg.budget = b;
    }
    cfg.all_integer |= grid.all_integer;
    cfg.trace |= trace;
    cfg.threads = grid.threads.or(cfg.threads);
    if let Some(path) = &grid.config {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: serde_json::Value = serde_json::from_str(&text).context("parsing config")?;
        let serde_json::Value::Object(overrides) = file else {
            bail!("config file must hold a JSON object");
        };
        let mut merged = serde_json::to_value(&cfg)?;
        if let serde_json::Value::Object(base) = &mut merged {
            base.extend(overrides);
        }
        cfg = serde_json::from_value(merged).context("invalid config")?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let cfg = matrix_config(&args.grid, args.trace)?;
    let oracle_path = args.oracle.unwrap_or_else(|| args.out.join("oracle.json"));
    let mut cache = OracleCache::load_or_default(&oracle_path)?;
    let start = Instant::now();
    let refs = harness::oracle_references(&cfg.descriptors(), &mut cache, !args.no_solve)?;
    cache.save(&oracle_path)?;
    eprintln!(
        "oracle: {}/{} references in {:.1}s",
        refs.len(),
        cfg.descriptors().len(),
        start.elapsed().as_secs_f64()
    );
    let start = Instant::now();
    let out = harness::run_matrix(&cfg)?;
    eprintln!(
        "runs: {} in {:.1}s",
        out.records.len(),
        start.elapsed().as_secs_f64()
    );
    io::write_runs(create(&args.out.join("runs.csv"))?, &out.records)?;
    let summary = harness::summarize(&out.records, &refs)?;
    io::write_summary(create(&args.out.join("summary.csv"))?, &summary)?;
    if cfg.trace {
        io::write_traces(create(&args.out.join("traces.csv"))?, &out.traces)?;
    }
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> anyhow::Result<()> {
    let cfg = matrix_config(&args.grid, false)?;
    let mut cache = OracleCache::load_or_default(&args.out)?;
    let descriptors = cfg.descriptors();
    let refs = harness::oracle_references(&descriptors, &mut cache, true)?;
    cache.save(&args.out)?;
    for d in &descriptors {
        match refs.get(&d.key()) {
            Some(s) => println!(
                "{}\tf*={:.12e}\tnodes={}",
                d.key(),
                s.f_star,
                s.nodes_enumerated
            ),
            None => println!("{}\tunavailable", d.key()),
        }
    }
    Ok(())
}

fn cmd_summarize(args: SummarizeArgs) -> anyhow::Result<()> {
    let file =
        File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let records = io::read_runs(file)?;
    let mut descriptors = Vec::new();
    for r in &records {
        r.check_invariants()?;
        if !descriptors.contains(&r.descriptor) {
            descriptors.push(r.descriptor);
        }
    }
    let mut cache = match &args.oracle {
        Some(p) => OracleCache::load_or_default(p)?,
        None => OracleCache::default(),
    };
    let refs = harness::oracle_references(&descriptors, &mut cache, args.solve)?;
    if let (true, Some(p)) = (args.solve, &args.oracle) {
        cache.save(p)?;
    }
    let rows = harness::summarize(&records, &refs)?;
    io::write_summary(create(&args.out)?, &rows)?;
    Ok(())
}

fn cmd_dist_test(args: DistArgs) -> anyhow::Result<bool> {
    println!("p\tchi2\tdof\tp_value\tmean_abs\texpected\tresult");
    let mut ok = true;
    for &p in &args.p {
        let law = DoubleGeometric::new(p)?;
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let samples: Vec<i64> = (0..args.samples).map(|_| law.sample(&mut rng)).collect();
        let fit = intdist::chi_square_test(&samples, p)?;
        let mean_abs =
            samples.iter().map(|z| z.unsigned_abs() as f64).sum::<f64>() / samples.len() as f64;
        let expected = intdist::mean_abs(p);
        let pass = fit.p_value > 1e-3 && (mean_abs / expected - 1.0).abs() <= 0.02;
        ok &= pass;
        println!(
            "{p}\t{:.3}\t{}\t{:.4}\t{mean_abs:.5}\t{expected:.5}\t{}",
            fit.statistic,
            fit.dof,
            fit.p_value,
            if pass { "pass" } else { "FAIL" }
        );
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Oracle(a) => cmd_oracle(a).map(|_| true),
        Command::Summarize(a) => cmd_summarize(a).map(|_| true),
        Command::DistTest(a) => cmd_dist_test(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
