//! CMA-ES with integer handling.
//!
//! One covariance matrix covers all `D` coordinates. Candidates are sampled
//! from `N(m, sigma^2 C)`, integer coordinates are rounded before
//! evaluation, and the raw (unrounded) samples drive the update. After each
//! update the effective standard deviation `sigma * sqrt(C_ii)` of every
//! integer coordinate is held above a floor so the search cannot freeze on
//! an integer plateau.
//!
//! Strategy constants follow the usual defaults: `lambda = 4 + floor(3 ln D)`,
//! `mu = floor(lambda / 2)`, log-linear weights, cumulative step-size
//! adaptation and rank-one plus rank-mu covariance updates.

use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadforms::ProblemInstance;
use crate::record::{BestTracker, RunRecord, SolverKind, Termination, TraceRow};

/// Eigenvalues below this fraction of the largest are clamped.
const EIGEN_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CmaConfig {
    /// Population size; `None` uses `4 + floor(3 ln D)`.
    pub lambda: Option<usize>,
    pub budget: u64,
    /// Floor on `sigma * sqrt(C_ii)` for integer coordinates.
    pub integer_min_std: f64,
    /// Stop when the spread of recent generation-best costs drops below this.
    pub tol_fun: f64,
    /// Stop when `sigma * sqrt(max C_ii)` over continuous coordinates drops
    /// below this; `None` uses `1e-11 * init_sigma`.
    pub tol_x: Option<f64>,
    pub init_sigma: f64,
    /// The initial mean is drawn uniformly from this interval.
    pub init_box: (f64, f64),
}

impl Default for CmaConfig {
    fn default() -> Self {
        CmaConfig {
            lambda: None,
            budget: 20_000,
            integer_min_std: 0.2,
            tol_fun: 1e-9,
            tol_x: None,
            init_sigma: 5.0,
            init_box: (-10.0, 10.0),
        }
    }
}

impl CmaConfig {
    pub fn validate(&self) -> Result<()> {
        if matches!(self.lambda, Some(l) if l < 2) {
            return Err(invalid("lambda must be >= 2"));
        }
        if !(self.integer_min_std > 0.0) {
            return Err(invalid("integer_min_std must be positive"));
        }
        if !(self.init_sigma > 0.0 && self.init_sigma.is_finite()) {
            return Err(invalid("init_sigma must be positive"));
        }
        if !(self.tol_fun >= 0.0) || matches!(self.tol_x, Some(t) if !(t >= 0.0)) {
            return Err(invalid("tolerances must be nonnegative"));
        }
        let (lo, hi) = self.init_box;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid("init_box must be a finite interval lo < hi"));
        }
        Ok(())
    }

    pub fn tol_x(&self) -> f64 {
        self.tol_x.unwrap_or(1e-11 * self.init_sigma)
    }
}

/// Strategy constants derived from `D` and `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaParams {
    pub dim: usize,
    pub lambda: usize,
    pub mu: usize,
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    pub chi_n: f64,
}

impl CmaParams {
    pub fn new(dim: usize, lambda: Option<usize>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be >= 1"));
        }
        let n = dim as f64;
        let lambda = lambda.unwrap_or(4 + (3.0 * n.ln()).floor() as usize).max(2);
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu =
            (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Ok(CmaParams {
            dim,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        })
    }

    /// Generations between eigendecompositions.
    fn eigen_gap(&self) -> u64 {
        let g = self.lambda as f64 / ((self.c_1 + self.c_mu) * self.dim as f64 * 10.0);
        (g.floor() as u64).max(1)
    }
}

#[derive(Debug, Clone)]
struct EigenCache {
    basis: DMatrix<f64>,
    /// Square roots of the eigenvalues of C.
    scales: DVector<f64>,
    inv_sqrt: DMatrix<f64>,
    generation: u64,
}

/// Sample of one generation: raw vector for the update, rounded vector for
/// evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub raw: DVector<f64>,
    pub rounded: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CmaState {
    params: CmaParams,
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,
    generation: u64,
    integer_mask: Vec<bool>,
    integer_min_std: f64,
    eigen: EigenCache,
    eigen_stale: bool,
}

impl CmaState {
    pub fn new(
        mean: Vec<f64>,
        sigma: f64,
        integer_mask: Vec<bool>,
        integer_min_std: f64,
        lambda: Option<usize>,
    ) -> Result<Self> {
        let dim = mean.len();
        if integer_mask.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: integer_mask.len(),
            });
        }
        if !(sigma > 0.0) {
            return Err(invalid("sigma must be positive"));
        }
        let params = CmaParams::new(dim, lambda)?;
        let cov = DMatrix::identity(dim, dim);
        let eigen = EigenCache {
            basis: DMatrix::identity(dim, dim),
            scales: DVector::from_element(dim, 1.0),
            inv_sqrt: DMatrix::identity(dim, dim),
            generation: 0,
        };
        let mut state = CmaState {
            params,
            mean: DVector::from_vec(mean),
            sigma,
            cov,
            path_sigma: DVector::zeros(dim),
            path_c: DVector::zeros(dim),
            generation: 0,
            integer_mask,
            integer_min_std,
            eigen,
            eigen_stale: false,
        };
        state.apply_integer_floor();
        Ok(state)
    }

    pub fn params(&self) -> &CmaParams {
        &self.params
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn integer_indices(&self) -> Vec<usize> {
        (0..self.integer_mask.len())
            .filter(|&i| self.integer_mask[i])
            .collect()
    }

    /// `sigma * sqrt(C_ii)`.
    pub fn coordinate_std(&self, i: usize) -> f64 {
        self.sigma * self.cov[(i, i)].sqrt()
    }

    /// Smallest `sigma * sqrt(C_ii)` over integer coordinates, NaN if none.
    pub fn min_integer_std(&self) -> f64 {
        self.integer_indices()
            .into_iter()
            .map(|i| self.coordinate_std(i))
            .reduce(f64::min)
            .unwrap_or(f64::NAN)
    }

    /// `sigma * sqrt(max C_ii)` over continuous coordinates, NaN if none.
    pub fn max_continuous_std(&self) -> f64 {
        (0..self.params.dim)
            .filter(|&i| !self.integer_mask[i])
            .map(|i| self.coordinate_std(i))
            .reduce(f64::max)
            .unwrap_or(f64::NAN)
    }

    fn refresh_eigen(&mut self) {
        let n = self.params.dim;
        let eig = SymmetricEigen::new(self.cov.clone());
        let max = eig.eigenvalues.max();
        let floor = EIGEN_FLOOR * max.max(f64::MIN_POSITIVE);
        let mut values = eig.eigenvalues.clone();
        let mut repaired = false;
        for v in values.iter_mut() {
            if *v < floor {
                *v = floor;
                repaired = true;
            }
        }
        let basis = eig.eigenvectors;
        if repaired {
            let rebuilt = &basis * DMatrix::from_diagonal(&values) * basis.transpose();
            self.cov = (&rebuilt + rebuilt.transpose()) * 0.5;
        }
        let scales = values.map(f64::sqrt);
        let inv = DMatrix::from_diagonal(&scales.map(|s| 1.0 / s));
        self.eigen = EigenCache {
            inv_sqrt: &basis * inv * basis.transpose(),
            basis,
            scales,
            generation: self.generation,
        };
        self.eigen_stale = false;
        debug_assert_eq!(self.eigen.scales.len(), n);
    }

    fn ensure_eigen(&mut self) {
        if self.eigen_stale || self.generation - self.eigen.generation >= self.params.eigen_gap() {
            self.refresh_eigen();
        }
    }

    /// Draws `lambda` candidates `m + sigma * C^(1/2) z` and rounds the
    /// integer coordinates half away from zero.
    pub fn ask<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<Candidate> {
        self.ensure_eigen();
        let n = self.params.dim;
        (0..self.params.lambda)
            .map(|_| {
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = &self.eigen.basis * z.component_mul(&self.eigen.scales);
                let raw = &self.mean + y * self.sigma;
                let rounded = raw
                    .iter()
                    .zip(&self.integer_mask)
                    .map(|(&v, &int)| if int { v.round() } else { v })
                    .collect();
                Candidate { raw, rounded }
            })
            .collect()
    }

    /// Updates mean, paths, covariance and step size from evaluated
    /// candidates, then applies the integer variance floor.
    pub fn tell(&mut self, candidates: &[Candidate], costs: &[f64]) -> Result<()> {
        let p = self.params.clone();
        if candidates.len() != p.lambda || costs.len() != p.lambda {
            return Err(Error::DimensionMismatch {
                expected: p.lambda,
                found: candidates.len().min(costs.len()),
            });
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCost);
        }
        let n = p.dim;
        let mut order: Vec<usize> = (0..p.lambda).collect();
        order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));

        let old_mean = self.mean.clone();
        let steps: Vec<DVector<f64>> = order[..p.mu]
            .iter()
            .map(|&k| (&candidates[k].raw - &old_mean) / self.sigma)
            .collect();
        let mut y_w = DVector::zeros(n);
        for (w, y) in p.weights.iter().zip(&steps) {
            y_w.axpy(*w, y, 1.0);
        }
        self.mean = &old_mean + &y_w * self.sigma;

        let cs = p.c_sigma;
        self.path_sigma = &self.path_sigma * (1.0 - cs)
            + (&self.eigen.inv_sqrt * &y_w) * (cs * (2.0 - cs) * p.mu_eff).sqrt();
        let ps_norm = self.path_sigma.norm();
        let decay = 1.0 - (1.0 - cs).powf(2.0 * (self.generation + 1) as f64);
        let h_sigma = ps_norm / decay.sqrt() / p.chi_n < 1.4 + 2.0 / (n as f64 + 1.0);
        let cc = p.c_c;
        let h = if h_sigma { 1.0 } else { 0.0 };
        self.path_c = &self.path_c * (1.0 - cc) + &y_w * (h * (cc * (2.0 - cc) * p.mu_eff).sqrt());

        let delta = (1.0 - h) * cc * (2.0 - cc);
        let mut rank_mu = DMatrix::zeros(n, n);
        for (w, y) in p.weights.iter().zip(&steps) {
            rank_mu.ger(*w, y, y, 1.0);
        }
        let rank_one = &self.path_c * self.path_c.transpose();
        let cov = &self.cov * (1.0 - p.c_1 - p.c_mu + p.c_1 * delta)
            + rank_one * p.c_1
            + rank_mu * p.c_mu;
        self.cov = (&cov + cov.transpose()) * 0.5;

        self.sigma *= ((cs / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).exp();
        self.generation += 1;
        self.apply_integer_floor();
        Ok(())
    }

    fn apply_integer_floor(&mut self) {
        let idx = self.integer_indices();
        if enforce_integer_floor(self, &idx, self.integer_min_std) {
            self.eigen_stale = true;
        }
    }
}

/// Raises `sigma * sqrt(C_ii)` to `min_std` for every listed coordinate that
/// falls below it, scaling row and column `i` by the same factor so the
/// correlations are kept. Returns whether `C` changed.
pub fn enforce_integer_floor(state: &mut CmaState, indices: &[usize], min_std: f64) -> bool {
    let n = state.params.dim;
    let mut changed = false;
    for &i in indices {
        let std = state.sigma * state.cov[(i, i)].sqrt();
        if std >= min_std {
            continue;
        }
        let target = (min_std / state.sigma).powi(2);
        let factor = if std > 0.0 { min_std / std } else { 0.0 };
        for j in 0..n {
            if j != i {
                state.cov[(i, j)] *= factor;
                state.cov[(j, i)] *= factor;
            }
        }
        state.cov[(i, i)] = target;
        // guard against rounding leaving the product a hair under the floor
        if state.sigma * state.cov[(i, i)].sqrt() < min_std {
            state.cov[(i, i)] = f64::from_bits(target.to_bits() + 1);
        }
        changed = true;
    }
    if changed {
        state.eigen_stale = true;
    }
    changed
}

/// Runs ask/evaluate/tell until the budget is spent or a tolerance fires.
pub fn run(instance: &ProblemInstance, config: &CmaConfig, seed: u64) -> Result<RunRecord> {
    Ok(run_traced(instance, config, seed)?.0)
}

/// Like [`run`], also returning one trace row per generation.
pub fn run_traced(
    instance: &ProblemInstance,
    config: &CmaConfig,
    seed: u64,
) -> Result<(RunRecord, Vec<TraceRow>)> {
    config.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = instance.dim();
    let (lo, hi) = config.init_box;
    let mean: Vec<f64> = (0..dim).map(|_| rng.random_range(lo..hi)).collect();
    let mask: Vec<bool> = (0..dim).map(|i| instance.is_integer(i)).collect();
    let mut state = CmaState::new(
        mean,
        config.init_sigma,
        mask.clone(),
        config.integer_min_std,
        config.lambda,
    )?;

    let x0: Vec<f64> = state
        .mean
        .iter()
        .zip(&mask)
        .map(|(&v, &int)| if int { v.round() } else { v })
        .collect();
    let e0 = instance.evaluate_unchecked(&x0);
    let mut best = BestTracker::new(x0, e0, instance.level());
    let mut evaluations = 1u64;

    let lambda = state.params.lambda;
    let window = 10 + (30.0 * dim as f64 / lambda as f64).ceil() as usize;
    let mut history: VecDeque<f64> = VecDeque::with_capacity(window + 1);
    let tol_x = config.tol_x();
    let mut termination = Termination::Budget;
    let mut trace = Vec::new();
    let mut costs = vec![0.0; lambda];

    while evaluations < config.budget {
        let candidates = state.ask(&mut rng);
        let mut gen_best = f64::INFINITY;
        for (k, cand) in candidates.iter().enumerate() {
            let e = instance.evaluate_unchecked(&cand.rounded);
            best.offer(&cand.rounded, e);
            costs[k] = e.cost;
            gen_best = gen_best.min(e.cost);
        }
        evaluations += lambda as u64;
        state.tell(&candidates, &costs)?;
        trace.push(TraceRow {
            generation: state.generation,
            evaluations,
            best_cost: best.eval.cost,
            step: state.sigma,
            min_integer_std: state.min_integer_std(),
        });

        history.push_back(gen_best);
        if history.len() > window {
            history.pop_front();
        }
        if history.len() == window {
            let (mn, mx) = history
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                });
            if mx - mn < config.tol_fun {
                termination = Termination::Tolerance;
                break;
            }
        }
        let cont = state.max_continuous_std();
        if cont.is_finite() && cont < tol_x {
            termination = Termination::Tolerance;
            break;
        }
        if !state.sigma.is_finite() || state.cov.iter().any(|v| !v.is_finite()) {
            termination = Termination::Tolerance;
            break;
        }
    }

    let record = best.into_record(
        instance.descriptor(),
        SolverKind::CmaIh,
        seed,
        evaluations,
        start.elapsed().as_secs_f64(),
        termination,
    );
    Ok((record, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadforms::{make_instance, sphere_instance, TestCase};

    fn sphere_state(mean: Vec<f64>, sigma: f64, mask: Vec<bool>) -> CmaState {
        CmaState::new(mean, sigma, mask, 0.2, None).unwrap()
    }

    #[test]
    fn default_parameters() {
        let p = CmaParams::new(8, None).unwrap();
        assert_eq!(p.lambda, 10);
        assert_eq!(p.mu, 5);
        assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.weights.windows(2).all(|w| w[0] >= w[1]));
        assert!(p.weights.iter().all(|&w| w > 0.0));
        assert!(p.c_1 + p.c_mu <= 1.0);
    }

    #[test]
    fn vanishing_sigma_reproduces_the_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mean = vec![1.5, -2.25, 3.0];
        let mut st = sphere_state(mean.clone(), 1e-300, vec![false; 3]);
        for c in st.ask(&mut rng) {
            assert_eq!(c.rounded, mean);
        }
    }

    #[test]
    fn rounding_dominates_a_tiny_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut st = CmaState::new(vec![0.4; 4], 1e-6, vec![true; 4], 1e-9, None).unwrap();
        for c in st.ask(&mut rng) {
            assert_eq!(c.rounded, vec![0.0; 4]);
            assert!(c.raw.iter().all(|&v| v != 0.0));
        }
    }

    #[test]
    fn integer_coordinates_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut st = sphere_state(
            vec![0.3; 6],
            2.0,
            vec![false, false, false, true, true, true],
        );
        for c in st.ask(&mut rng) {
            assert!(c.rounded[3..].iter().all(|v| v.fract() == 0.0));
            assert_eq!(c.rounded[3], c.raw[3].round());
        }
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(2.5f64.round(), 3.0);
        assert_eq!((-2.5f64).round(), -3.0);
        assert_eq!((-0.5f64).round(), -1.0);
    }

    #[test]
    fn floor_example() {
        let mut st = CmaState::new(vec![0.0; 2], 0.01, vec![false, false], 0.2, None).unwrap();
        assert!(enforce_integer_floor(&mut st, &[1], 0.2));
        assert!((st.cov()[(1, 1)] - 400.0).abs() < 1e-9);
        assert_eq!(st.cov()[(0, 0)], 1.0);
        assert!(st.coordinate_std(1) >= 0.2 - 1e-12);
    }

    #[test]
    fn floor_keeps_correlations_and_ignores_satisfied_coordinates() {
        let mut st = CmaState::new(vec![0.0; 2], 1.0, vec![false, false], 0.2, None).unwrap();
        st.cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.01, 0.01, 0.0004]);
        let before = st.cov[(0, 1)] / (st.cov[(0, 0)] * st.cov[(1, 1)]).sqrt();
        assert!(!enforce_integer_floor(&mut st, &[0], 0.5));
        assert!(enforce_integer_floor(&mut st, &[1], 0.5));
        let after = st.cov[(0, 1)] / (st.cov[(0, 0)] * st.cov[(1, 1)]).sqrt();
        assert!((before - after).abs() < 1e-12);
        assert!(st.coordinate_std(1) >= 0.5 - 1e-12);
    }

    #[test]
    fn tied_costs_give_the_plain_weighted_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut st = sphere_state(vec![0.0; 3], 1.0, vec![false; 3]);
        let cands = st.ask(&mut rng);
        let costs = vec![1.0; cands.len()];
        let mut expected = DVector::zeros(3);
        for (w, c) in st.params().weights.clone().iter().zip(&cands) {
            expected += &c.raw * *w;
        }
        st.tell(&cands, &costs).unwrap();
        assert!((st.mean() - expected).amax() < 1e-14);
    }

    #[test]
    fn non_finite_costs_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut st = sphere_state(vec![0.0; 3], 1.0, vec![false; 3]);
        let cands = st.ask(&mut rng);
        let mut costs = vec![1.0; cands.len()];
        costs[2] = f64::NAN;
        assert!(matches!(st.tell(&cands, &costs), Err(Error::NonFiniteCost)));
    }

    #[test]
    fn covariance_stays_symmetric_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let inst = make_instance(TestCase::Tc3, 4, 1e3, 30.0, false).unwrap();
        let mask: Vec<bool> = (0..4).map(|i| inst.is_integer(i)).collect();
        let mut st = CmaState::new(vec![0.0; 4], 3.0, mask, 0.2, None).unwrap();
        for _ in 0..1000 {
            let cands = st.ask(&mut rng);
            let costs: Vec<f64> = cands
                .iter()
                .map(|c| inst.evaluate(&c.rounded).unwrap().cost)
                .collect();
            st.tell(&cands, &costs).unwrap();
            let c = st.cov();
            assert!((c - c.transpose()).amax() <= 1e-10);
            assert!(st.min_integer_std() >= 0.2 - 1e-12);
        }
        let ev = SymmetricEigen::new(st.cov().clone()).eigenvalues;
        assert!(ev.min() > 0.0);
    }

    #[test]
    fn converges_on_a_continuous_sphere() {
        // quadratic sphere with an inactive constraint, every coordinate real
        let obj = crate::quadforms::QuadraticForm::new(
            crate::quadforms::HessianMatrix::new(DMatrix::identity(2, 2)).unwrap(),
            vec![7.0, -7.0],
            1.0,
        )
        .unwrap();
        let con = obj.clone();
        let inst = ProblemInstance::new(obj, con, 1e9, 2, 0, TestCase::Sphere, 1.0).unwrap();
        let cfg = CmaConfig {
            budget: 10_000,
            tol_fun: 0.0,
            tol_x: Some(0.0),
            ..Default::default()
        };
        let rec = run(&inst, &cfg, 4).unwrap();
        assert!(rec.best_f < 1e-10, "{}", rec.best_f);
    }

    #[test]
    fn zero_budget_evaluates_the_initial_mean_only() {
        let inst = sphere_instance(4, 10.0, false).unwrap();
        let cfg = CmaConfig {
            budget: 0,
            ..Default::default()
        };
        let (rec, trace) = run_traced(&inst, &cfg, 2).unwrap();
        assert_eq!(rec.evaluations_used, 1);
        assert!(trace.is_empty());
        rec.check_invariants().unwrap();
    }

    #[test]
    fn runs_are_deterministic() {
        let inst = make_instance(TestCase::Tc2, 8, 100.0, 30.0, false).unwrap();
        let cfg = CmaConfig {
            budget: 5_000,
            ..Default::default()
        };
        let mut a = run(&inst, &cfg, 77).unwrap();
        let mut b = run(&inst, &cfg, 77).unwrap();
        a.wall_time = 0.0;
        b.wall_time = 0.0;
        assert_eq!(a, b);
    }

    #[test]
    fn trace_is_monotone_and_floor_holds() {
        let inst = make_instance(TestCase::Tc0, 8, 10.0, 30.0, false).unwrap();
        let cfg = CmaConfig {
            budget: 20_000,
            ..Default::default()
        };
        let (rec, trace) = run_traced(&inst, &cfg, 5).unwrap();
        assert!(trace.windows(2).all(|w| w[1].best_cost <= w[0].best_cost));
        assert!(trace
            .iter()
            .all(|t| t.min_integer_std >= cfg.integer_min_std - 1e-12));
        assert!(rec.evaluations_used <= cfg.budget + 10);
        rec.check_invariants().unwrap();
    }
}
