//! Self-adaptive mixed-integer evolution strategy.
//!
//! Continuous coordinates mutate with normal steps whose per-coordinate
//! standard deviations `s` adapt log-normally; integer coordinates mutate
//! with double-geometric steps whose per-coordinate mean-step parameters `q`
//! adapt the same way. There is no recombination and no boundary handling.
//! Constraint violations enter through the penalized cost only.

use std::time::Instant;

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::intdist::{p_from_mean_step, DoubleGeometric};
use crate::quadforms::{Evaluation, ProblemInstance};
use crate::record::{BestTracker, RunRecord, SolverKind, Termination, TraceRow};

/// Lower bound on the real step sizes.
pub const STEP_FLOOR: f64 = 1e-5;
/// Lower bound on the integer mean-step parameters.
pub const INTEGER_STEP_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// Parents are drawn from the offspring only.
    Comma,
    /// Parents are drawn from parents and offspring.
    Plus,
}

/// How a mutated `q_i` is turned into the geometric parameter `p_i`.
///
/// `q_i` is read as a mean step `S` and converted with
/// `p = 1 - (S/n)/(sqrt(1 + (S/n)^2) + 1)`, where `n` is either the integer
/// dimension or one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeanStepDivisor {
    #[serde(rename = "n_z")]
    Dimension,
    #[serde(rename = "one")]
    One,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiesConfig {
    pub mu: usize,
    pub lambda: usize,
    pub selection: Selection,
    /// Function evaluations. The initial population is always evaluated.
    pub budget: u64,
    /// Uniform initialization interval for `x` and `z`.
    pub init_box: (f64, f64),
    pub init_s: f64,
    pub init_q: f64,
    pub mean_step_divisor: MeanStepDivisor,
}

impl Default for MiesConfig {
    fn default() -> Self {
        MiesConfig {
            mu: 15,
            lambda: 100,
            selection: Selection::Comma,
            budget: 20_000,
            init_box: (-10.0, 10.0),
            init_s: 1.0,
            init_q: 1.0,
            mean_step_divisor: MeanStepDivisor::One,
        }
    }
}

impl MiesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mu == 0 || self.lambda < self.mu {
            return Err(invalid(format!(
                "need lambda >= mu >= 1, got mu={} lambda={}",
                self.mu, self.lambda
            )));
        }
        let (lo, hi) = self.init_box;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid("init_box must be a finite interval lo < hi"));
        }
        if !(self.init_s > 0.0) {
            return Err(invalid("init_s must be positive"));
        }
        if !(self.init_q >= INTEGER_STEP_FLOOR) {
            return Err(invalid("init_q must be >= 1"));
        }
        Ok(())
    }
}

/// Real part `(x, s)` and integer part `(z, q)` plus the last evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct MiesIndividual {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub z: Vec<i64>,
    pub q: Vec<f64>,
    /// `f`, `g` and penalized cost; infinite until evaluated.
    pub eval: Evaluation,
}

impl MiesIndividual {
    pub fn new(x: Vec<f64>, s: Vec<f64>, z: Vec<i64>, q: Vec<f64>) -> Self {
        assert_eq!(x.len(), s.len());
        assert_eq!(z.len(), q.len());
        MiesIndividual {
            x,
            s,
            z,
            q,
            eval: Evaluation {
                f: f64::INFINITY,
                g: f64::INFINITY,
                cost: f64::INFINITY,
            },
        }
    }

    pub fn cost(&self) -> f64 {
        self.eval.cost
    }

    pub fn feasible(&self, level: f64) -> bool {
        self.eval.g <= level
    }

    /// Writes `x` followed by `z` into `out`.
    pub fn write_decision_vector(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.x);
        out.extend(self.z.iter().map(|&v| v as f64));
    }

    pub fn decision_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.x.len() + self.z.len());
        self.write_decision_vector(&mut v);
        v
    }

    fn evaluate(&mut self, inst: &ProblemInstance, buf: &mut Vec<f64>) {
        self.write_decision_vector(buf);
        self.eval = inst.evaluate_unchecked(buf);
    }
}

fn learning_rates(n: usize) -> (f64, f64) {
    let n = n as f64;
    (1.0 / (2.0 * n).sqrt(), 1.0 / (2.0 * n.sqrt()).sqrt())
}

/// Self-adaptive mutation. The parent is left untouched; the child carries
/// no evaluation.
pub fn mutate<R: Rng + ?Sized>(
    parent: &MiesIndividual,
    divisor: MeanStepDivisor,
    rng: &mut R,
) -> MiesIndividual {
    let n_r = parent.x.len();
    let n_z = parent.z.len();
    let mut child = MiesIndividual::new(
        parent.x.clone(),
        parent.s.clone(),
        parent.z.clone(),
        parent.q.clone(),
    );

    if n_r > 0 {
        let (tau_g, tau_l) = learning_rates(n_r);
        let global: f64 = rng.sample(StandardNormal);
        for i in 0..n_r {
            let local: f64 = rng.sample(StandardNormal);
            let s = (parent.s[i] * (tau_g * global + tau_l * local).exp()).max(STEP_FLOOR);
            let step: f64 = rng.sample(StandardNormal);
            child.s[i] = s;
            child.x[i] = parent.x[i] + s * step;
        }
    }

    if n_z > 0 {
        let (tau_g, tau_l) = learning_rates(n_z);
        let div = match divisor {
            MeanStepDivisor::Dimension => n_z,
            MeanStepDivisor::One => 1,
        };
        let global: f64 = rng.sample(StandardNormal);
        for i in 0..n_z {
            let local: f64 = rng.sample(StandardNormal);
            let q = (parent.q[i] * (tau_g * global + tau_l * local).exp()).max(INTEGER_STEP_FLOOR);
            let p = p_from_mean_step(q, div).expect("q >= 1 is a valid mean step");
            let law = DoubleGeometric::new(p).expect("p lies in (0, 1]");
            child.q[i] = q;
            child.z[i] = parent.z[i].saturating_add(law.sample(rng));
        }
    }
    child
}

/// Truncation selection of the `mu` best by penalized cost, ties broken by
/// constraint value and then by position (parents before offspring).
pub fn select(
    parents: Vec<MiesIndividual>,
    offspring: Vec<MiesIndividual>,
    config: &MiesConfig,
) -> Vec<MiesIndividual> {
    let mut pool = match config.selection {
        Selection::Comma => offspring,
        Selection::Plus => {
            let mut p = parents;
            p.extend(offspring);
            p
        }
    };
    pool.sort_by(|a, b| {
        a.eval
            .cost
            .total_cmp(&b.eval.cost)
            .then(a.eval.g.total_cmp(&b.eval.g))
    });
    pool.truncate(config.mu);
    pool
}

fn initial_individual<R: Rng + ?Sized>(
    n_r: usize,
    n_z: usize,
    config: &MiesConfig,
    rng: &mut R,
) -> MiesIndividual {
    let (lo, hi) = config.init_box;
    let x = (0..n_r).map(|_| rng.random_range(lo..hi)).collect();
    let (zlo, zhi) = (lo.ceil() as i64, hi.floor() as i64);
    let z = (0..n_z)
        .map(|_| {
            if zlo <= zhi {
                rng.random_range(zlo..=zhi)
            } else {
                lo.round() as i64
            }
        })
        .collect();
    MiesIndividual::new(x, vec![config.init_s; n_r], z, vec![config.init_q; n_z])
}

/// Runs the strategy until the evaluation budget is spent.
pub fn run(instance: &ProblemInstance, config: &MiesConfig, seed: u64) -> Result<RunRecord> {
    Ok(run_traced(instance, config, seed)?.0)
}

/// Like [`run`], also returning one trace row per generation.
pub fn run_traced(
    instance: &ProblemInstance,
    config: &MiesConfig,
    seed: u64,
) -> Result<(RunRecord, Vec<TraceRow>)> {
    config.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_r, n_z) = (instance.n_r(), instance.n_z());
    let mut buf = Vec::with_capacity(instance.dim());

    let mut parents: Vec<MiesIndividual> = (0..config.mu)
        .map(|_| initial_individual(n_r, n_z, config, &mut rng))
        .collect();
    for p in &mut parents {
        p.evaluate(instance, &mut buf);
    }
    let mut evaluations = parents.len() as u64;
    let first = &parents[0];
    let mut best = BestTracker::new(first.decision_vector(), first.eval, instance.level());
    for p in &parents[1..] {
        p.write_decision_vector(&mut buf);
        best.offer(&buf, p.eval);
    }
    parents = select(
        parents,
        Vec::new(),
        &MiesConfig {
            selection: Selection::Plus,
            ..config.clone()
        },
    );

    let mut trace = Vec::new();
    let mut generation = 0u64;
    while evaluations < config.budget {
        let mut offspring = Vec::with_capacity(config.lambda);
        for _ in 0..config.lambda {
            let parent = &parents[rng.random_range(0..parents.len())];
            let mut child = mutate(parent, config.mean_step_divisor, &mut rng);
            child.evaluate(instance, &mut buf);
            best.offer(&buf, child.eval);
            offspring.push(child);
        }
        evaluations += config.lambda as u64;
        generation += 1;
        parents = select(parents, offspring, config);
        let lead = &parents[0];
        trace.push(TraceRow {
            generation,
            evaluations,
            best_cost: best.eval.cost,
            step: if n_r > 0 {
                lead.s.iter().sum::<f64>() / n_r as f64
            } else {
                f64::NAN
            },
            min_integer_std: f64::NAN,
        });
    }

    let record = best.into_record(
        instance.descriptor(),
        SolverKind::Mies,
        seed,
        evaluations,
        start.elapsed().as_secs_f64(),
        Termination::Budget,
    );
    Ok((record, trace))
}
