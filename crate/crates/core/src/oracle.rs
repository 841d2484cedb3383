//! Exact reference optima for small instances.
//!
//! The continuous subproblem `min (y-a)^T A (y-a)  s.t.  (y-b)^T B (y-b) <= E`
//! is reduced by `B = L L^T` and an eigendecomposition of `L^-1 A L^-T` to a
//! diagonal trust-region problem, whose multiplier is found by bisection on
//! the monotone constraint curve.
//!
//! Mixed problems are solved by depth-first branch-and-bound over the integer
//! coordinates. Fixing a prefix of integers conditions both quadratics onto
//! the remaining free coordinates (Schur complements, precomputed per
//! depth); the continuous relaxation of the remainder gives a lower bound
//! that is convex in the next branching value, so each sibling scan walks
//! outward from the relaxed optimum and stops at the first pruned or
//! infeasible value.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadforms::{HessianMatrix, InstanceDescriptor, ProblemInstance};

/// Bisection stops once `|g - E| <= BISECTION_RTOL * E`.
pub const BISECTION_RTOL: f64 = 1e-10;
/// Upper end of the multiplier bracket.
pub const MAX_MULTIPLIER: f64 = 1e15;
/// Largest integer dimension handled by [`solve_mixed`].
pub const MAX_INTEGER_DIM: usize = 8;
/// Default limit on solved branch-and-bound nodes.
pub const DEFAULT_NODE_LIMIT: u64 = 10_000_000;
/// Limit on the box volume for [`solve_mixed_naive`].
pub const NAIVE_VOLUME_LIMIT: f64 = 1e7;

/// Relative slack for pruning. Larger than the bisection error so nodes whose
/// true bound ties the incumbent are still explored.
const PRUNE_RTOL: f64 = 1e-7;
/// Objective values closer than this (relative) count as ties.
const TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleStatus {
    /// The constraint is inactive at the optimum.
    Interior,
    /// The optimum lies on `g = E`.
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub g_at_star: f64,
    pub status: OracleStatus,
    /// Constraint multiplier of the continuous subproblem at the optimum.
    pub multiplier: f64,
    pub nodes_enumerated: u64,
}

/// Diagonalized continuous QCQP for fixed Hessians `A` (objective) and `B`
/// (constraint); centers and level vary per solve.
#[derive(Debug, Clone)]
struct QcqpFactor {
    /// `Q^T L^T`: maps `y - b` to the diagonal coordinates `u`.
    to_u: DMatrix<f64>,
    /// `L^-T Q`: maps `u` back to `y - b`.
    from_u: DMatrix<f64>,
    lambda: Vec<f64>,
}

#[derive(Debug, Clone)]
struct TrsPoint {
    y: DVector<f64>,
    /// Objective value of the subproblem (without any conditioning constant).
    f: f64,
    nu: f64,
    interior: bool,
}

fn cholesky_with_jitter(m: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let n = m.nrows();
    let trace = m.trace();
    if !(trace > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let jitter = 1e-12 * trace;
    Cholesky::new(m + DMatrix::identity(n, n) * jitter).ok_or(Error::NotPositiveDefinite)
}

impl QcqpFactor {
    fn new(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let l = cholesky_with_jitter(b)?.l();
        let l_inv = l
            .clone()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or(Error::NotPositiveDefinite)?;
        let at = &l_inv * a * l_inv.transpose();
        let at = (&at + at.transpose()) * 0.5;
        let eig = SymmetricEigen::new(at);
        let lambda = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        Ok(QcqpFactor {
            to_u: eig.eigenvectors.transpose() * l.transpose(),
            from_u: l_inv.transpose() * &eig.eigenvectors,
            lambda,
        })
    }

    fn constraint_at(&self, target: &[f64], nu: f64) -> f64 {
        self.lambda
            .iter()
            .zip(target)
            .map(|(&l, &t)| {
                let u = if l > 0.0 { l * t / (l + nu) } else { 0.0 };
                u * u
            })
            .sum()
    }

    /// `None` when the level is negative (empty feasible set).
    fn solve(&self, a: &DVector<f64>, b: &DVector<f64>, level: f64) -> Result<Option<TrsPoint>> {
        if level < 0.0 {
            return Ok(None);
        }
        let target: Vec<f64> = (&self.to_u * (a - b)).iter().copied().collect();
        let g0 = self.constraint_at(&target, 0.0);
        let nu = if g0 <= level {
            0.0
        } else if level == 0.0 {
            f64::INFINITY
        } else {
            let mut lo = 0.0;
            let mut hi = 1.0;
            while self.constraint_at(&target, hi) > level {
                lo = hi;
                hi *= 2.0;
                if hi > MAX_MULTIPLIER {
                    return Err(Error::BracketFailure(MAX_MULTIPLIER));
                }
            }
            for _ in 0..400 {
                if level - self.constraint_at(&target, hi) <= BISECTION_RTOL * level {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.constraint_at(&target, mid) > level {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        };
        let u: Vec<f64> = self
            .lambda
            .iter()
            .zip(&target)
            .map(|(&l, &t)| {
                if l > 0.0 && nu.is_finite() {
                    l * t / (l + nu)
                } else {
                    0.0
                }
            })
            .collect();
        let f = self
            .lambda
            .iter()
            .zip(u.iter().zip(&target))
            .map(|(&l, (&ui, &ti))| l * (ui - ti) * (ui - ti))
            .sum();
        let y = b + &self.from_u * DVector::from_vec(u);
        Ok(Some(TrsPoint {
            y,
            f,
            nu: if nu.is_finite() { nu } else { MAX_MULTIPLIER },
            interior: nu == 0.0,
        }))
    }
}

fn quad(m: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    y.dot(&(m * y))
}

/// Solves `min (y-a)^T A (y-a)  s.t.  (y-b)^T B (y-b) <= E` exactly.
///
/// `A` may be singular; `B` must be positive definite (a tiny jitter is
/// tried before giving up).
pub fn solve_continuous_qcqp(
    a_mat: &HessianMatrix,
    a: &[f64],
    b_mat: &HessianMatrix,
    b: &[f64],
    level: f64,
) -> Result<OracleSolution> {
    let n = a_mat.dim();
    for len in [a.len(), b.len(), b_mat.dim()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    if !(level > 0.0) {
        return Err(invalid("constraint level must be positive"));
    }
    let factor = QcqpFactor::new(a_mat.as_matrix(), b_mat.as_matrix())?;
    let av = DVector::from_row_slice(a);
    let bv = DVector::from_row_slice(b);
    let pt = factor.solve(&av, &bv, level)?.ok_or(Error::Infeasible)?;
    let f_star = quad(a_mat.as_matrix(), &(&pt.y - &av));
    let g_at_star = quad(b_mat.as_matrix(), &(&pt.y - &bv));
    Ok(OracleSolution {
        x_star: pt.y.iter().copied().collect(),
        f_star,
        g_at_star,
        status: if pt.interior {
            OracleStatus::Interior
        } else {
            OracleStatus::Boundary
        },
        multiplier: pt.nu,
        nodes_enumerated: 1,
    })
}

/// Gradient residual `|grad f + nu grad g|` of a continuous solution and the
/// norm of `grad f`, for KKT checks.
pub fn kkt_residual(
    a_mat: &HessianMatrix,
    a: &[f64],
    b_mat: &HessianMatrix,
    b: &[f64],
    sol: &OracleSolution,
) -> (f64, f64) {
    let y = DVector::from_row_slice(&sol.x_star);
    let gf = a_mat.as_matrix() * (&y - DVector::from_row_slice(a)) * 2.0;
    let gg = b_mat.as_matrix() * (&y - DVector::from_row_slice(b)) * 2.0;
    ((&gf + gg * sol.multiplier).norm(), gf.norm())
}

/// Per-integer-coordinate intervals guaranteed to contain every feasible
/// point: `|x - xi_1| <= sqrt(E / lambda_min)` for the scaled constraint
/// Hessian, rounded outward.
pub fn certified_box(instance: &ProblemInstance) -> Result<Vec<(i64, i64)>> {
    let con = instance.constraint();
    let lmin = con.hessian().min_eigenvalue() * con.scale();
    if !(lmin > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let r = (instance.level() / lmin).sqrt();
    Ok(instance
        .integer_indices()
        .map(|i| {
            let c = con.center()[i];
            ((c - r).floor() as i64, (c + r).ceil() as i64)
        })
        .collect())
}

/// One quadratic form conditioned on a fixed subset of coordinates.
#[derive(Debug, Clone)]
struct ConditionedForm {
    center_free: DVector<f64>,
    center_fixed: DVector<f64>,
    /// `H_FF^-1 H_FW`.
    gain: DMatrix<f64>,
    /// `H_WW - H_WF H_FF^-1 H_FW`.
    schur: DMatrix<f64>,
    hessian_free: DMatrix<f64>,
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

impl ConditionedForm {
    fn new(h: &DMatrix<f64>, center: &[f64], free: &[usize], fixed: &[usize]) -> Result<Self> {
        let hff = submatrix(h, free, free);
        let hfw = submatrix(h, free, fixed);
        let hww = submatrix(h, fixed, fixed);
        let gain = if free.is_empty() {
            DMatrix::zeros(0, fixed.len())
        } else {
            cholesky_with_jitter(&hff)?.solve(&hfw)
        };
        let schur = &hww - hfw.transpose() * &gain;
        Ok(ConditionedForm {
            center_free: DVector::from_iterator(free.len(), free.iter().map(|&i| center[i])),
            center_fixed: DVector::from_iterator(fixed.len(), fixed.iter().map(|&i| center[i])),
            gain,
            schur: (&schur + schur.transpose()) * 0.5,
            hessian_free: hff,
        })
    }

    /// Shifted center over the free coordinates and the constant part.
    fn condition(&self, fixed_values: &DVector<f64>) -> (DVector<f64>, f64) {
        let dw = fixed_values - &self.center_fixed;
        let center = &self.center_free - &self.gain * &dw;
        (center, quad(&self.schur, &dw).max(0.0))
    }
}

#[derive(Debug, Clone)]
struct DepthModel {
    free: Vec<usize>,
    fixed: Vec<usize>,
    f: ConditionedForm,
    g: ConditionedForm,
    factor: Option<QcqpFactor>,
    /// Position of the next branching coordinate inside `free`.
    next_pos: Option<usize>,
}

enum NodeResult {
    Infeasible,
    Solved {
        value: f64,
        free_point: DVector<f64>,
        nu: f64,
        interior: bool,
    },
}

struct Search<'a> {
    instance: &'a ProblemInstance,
    models: Vec<DepthModel>,
    integer_coords: Vec<usize>,
    level: f64,
    nodes: u64,
    node_limit: u64,
    best: Option<Incumbent>,
}

#[derive(Debug, Clone)]
struct Incumbent {
    value: f64,
    assignment: Vec<i64>,
    free_point: DVector<f64>,
    nu: f64,
    interior: bool,
}

impl<'a> Search<'a> {
    fn new(instance: &'a ProblemInstance, node_limit: u64) -> Result<Self> {
        let d = instance.dim();
        let integer_coords: Vec<usize> = instance.integer_indices().collect();
        let a = instance.objective().scaled_hessian();
        let b = instance.constraint().scaled_hessian();
        let mut models = Vec::with_capacity(integer_coords.len() + 1);
        for k in 0..=integer_coords.len() {
            let fixed: Vec<usize> = integer_coords[..k].to_vec();
            let free: Vec<usize> = (0..d).filter(|i| !fixed.contains(i)).collect();
            let f = ConditionedForm::new(&a, instance.objective().center(), &free, &fixed)?;
            let g = ConditionedForm::new(&b, instance.constraint().center(), &free, &fixed)?;
            let factor = if free.is_empty() {
                None
            } else {
                Some(QcqpFactor::new(&f.hessian_free, &g.hessian_free)?)
            };
            let next_pos = integer_coords.get(k).map(|c| {
                free.iter()
                    .position(|i| i == c)
                    .expect("next coordinate is free")
            });
            models.push(DepthModel {
                free,
                fixed,
                f,
                g,
                factor,
                next_pos,
            });
        }
        Ok(Search {
            instance,
            models,
            integer_coords,
            level: instance.level(),
            nodes: 0,
            node_limit,
            best: None,
        })
    }

    fn node(&mut self, prefix: &[i64]) -> Result<NodeResult> {
        self.nodes += 1;
        if self.nodes > self.node_limit {
            return Err(Error::EnumerationGuard {
                what: "nodes",
                value: self.nodes as f64,
                limit: self.node_limit as f64,
            });
        }
        let model = &self.models[prefix.len()];
        let w = DVector::from_iterator(prefix.len(), prefix.iter().map(|&v| v as f64));
        let (cf, kf) = model.f.condition(&w);
        let (cg, kg) = model.g.condition(&w);
        let rest = self.level - kg;
        match &model.factor {
            None => Ok(if rest >= 0.0 {
                NodeResult::Solved {
                    value: kf,
                    free_point: DVector::zeros(0),
                    nu: 0.0,
                    interior: rest > 0.0,
                }
            } else {
                NodeResult::Infeasible
            }),
            Some(factor) => Ok(match factor.solve(&cf, &cg, rest)? {
                None => NodeResult::Infeasible,
                Some(pt) => NodeResult::Solved {
                    value: kf + pt.f,
                    free_point: pt.y,
                    nu: pt.nu,
                    interior: pt.interior,
                },
            }),
        }
    }

    fn prune_threshold(&self) -> f64 {
        match &self.best {
            Some(b) => b.value + PRUNE_RTOL * b.value.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    fn offer(
        &mut self,
        value: f64,
        assignment: &[i64],
        free_point: DVector<f64>,
        nu: f64,
        interior: bool,
    ) {
        let replace = match &self.best {
            None => true,
            Some(b) => {
                let tol = TIE_RTOL * b.value.abs().max(1.0);
                value < b.value - tol
                    || (value <= b.value + tol && assignment < b.assignment.as_slice())
            }
        };
        if replace {
            self.best = Some(Incumbent {
                value,
                assignment: assignment.to_vec(),
                free_point,
                nu,
                interior,
            });
        }
    }

    /// Scans values of the next integer coordinate outward from its relaxed
    /// optimum `t_star` and recurses into surviving children.
    fn branch(&mut self, prefix: &mut Vec<i64>, t_star: f64, bounds: &[(i64, i64)]) -> Result<()> {
        let depth = prefix.len();
        let (lo, hi) = bounds[depth];
        let t_star = t_star.clamp(lo as f64, hi as f64);
        let up_start = t_star.ceil() as i64;
        let down_start = if t_star.floor() as i64 == up_start {
            up_start - 1
        } else {
            t_star.floor() as i64
        };
        // (next value, step); None once the direction is exhausted
        let mut dirs = [(up_start, 1i64), (down_start, -1i64)].map(Some);
        while dirs.iter().any(Option::is_some) {
            for slot in dirs.iter_mut() {
                let Some((t, step)) = *slot else { continue };
                if t < lo || t > hi {
                    *slot = None;
                    continue;
                }
                prefix.push(t);
                let keep = self.visit_child(prefix, bounds)?;
                prefix.pop();
                *slot = keep.then_some((t + step, step));
            }
        }
        Ok(())
    }

    /// Returns whether the scan in this direction should continue.
    fn visit_child(&mut self, prefix: &mut Vec<i64>, bounds: &[(i64, i64)]) -> Result<bool> {
        let res = self.node(prefix)?;
        let NodeResult::Solved {
            value,
            free_point,
            nu,
            interior,
        } = res
        else {
            return Ok(false);
        };
        if value > self.prune_threshold() {
            return Ok(false);
        }
        let depth = prefix.len();
        if depth == self.integer_coords.len() {
            self.offer(value, prefix, free_point, nu, interior);
        } else {
            let pos = self.models[depth].next_pos.expect("branching coordinate");
            let t_star = free_point[pos];
            self.branch(prefix, t_star, bounds)?;
        }
        Ok(true)
    }

    fn solution(&self) -> Result<OracleSolution> {
        let best = self.best.as_ref().ok_or(Error::Infeasible)?;
        let model = &self.models[self.integer_coords.len()];
        let mut x = vec![0.0; self.instance.dim()];
        for (&i, &v) in model.fixed.iter().zip(&best.assignment) {
            x[i] = v as f64;
        }
        for (&i, &v) in model.free.iter().zip(best.free_point.iter()) {
            x[i] = v;
        }
        let e = self.instance.evaluate(&x)?;
        Ok(OracleSolution {
            x_star: x,
            f_star: e.f,
            g_at_star: e.g,
            status: if best.interior {
                OracleStatus::Interior
            } else {
                OracleStatus::Boundary
            },
            multiplier: best.nu,
            nodes_enumerated: self.nodes,
        })
    }
}

fn check_integer_dim(instance: &ProblemInstance) -> Result<()> {
    if instance.n_z() > MAX_INTEGER_DIM {
        return Err(Error::EnumerationGuard {
            what: "n_z",
            value: instance.n_z() as f64,
            limit: MAX_INTEGER_DIM as f64,
        });
    }
    Ok(())
}

/// Exact optimum of a mixed instance inside its [`certified_box`].
pub fn solve_instance(instance: &ProblemInstance) -> Result<OracleSolution> {
    solve_mixed(instance, &certified_box(instance)?)
}

/// Exact optimum by branch-and-bound over the integer box, which must contain
/// the optimum.
pub fn solve_mixed(instance: &ProblemInstance, z_box: &[(i64, i64)]) -> Result<OracleSolution> {
    solve_mixed_with_limit(instance, z_box, DEFAULT_NODE_LIMIT)
}

/// [`solve_mixed`] with an explicit node limit.
pub fn solve_mixed_with_limit(
    instance: &ProblemInstance,
    z_box: &[(i64, i64)],
    node_limit: u64,
) -> Result<OracleSolution> {
    check_integer_dim(instance)?;
    if z_box.len() != instance.n_z() {
        return Err(Error::DimensionMismatch {
            expected: instance.n_z(),
            found: z_box.len(),
        });
    }
    if instance.n_z() == 0 {
        let obj = instance.objective();
        let con = instance.constraint();
        let a = HessianMatrix::new(obj.scaled_hessian())?;
        let b = HessianMatrix::new(con.scaled_hessian())?;
        return solve_continuous_qcqp(&a, obj.center(), &b, con.center(), instance.level());
    }
    let mut search = Search::new(instance, node_limit)?;
    let root = search.node(&[])?;
    let NodeResult::Solved { free_point, .. } = root else {
        return Err(Error::Infeasible);
    };
    let pos = search.models[0]
        .next_pos
        .expect("at least one integer coordinate");
    let mut prefix = Vec::with_capacity(instance.n_z());
    search.branch(&mut prefix, free_point[pos], z_box)?;
    search.solution()
}

/// Full enumeration of the box without pruning; a cross-check for
/// [`solve_mixed`].
pub fn solve_mixed_naive(
    instance: &ProblemInstance,
    z_box: &[(i64, i64)],
) -> Result<OracleSolution> {
    check_integer_dim(instance)?;
    if z_box.len() != instance.n_z() {
        return Err(Error::DimensionMismatch {
            expected: instance.n_z(),
            found: z_box.len(),
        });
    }
    let volume: f64 = z_box
        .iter()
        .map(|&(lo, hi)| (hi - lo + 1).max(0) as f64)
        .product();
    if volume > NAIVE_VOLUME_LIMIT {
        return Err(Error::EnumerationGuard {
            what: "box volume",
            value: volume,
            limit: NAIVE_VOLUME_LIMIT,
        });
    }
    if z_box.iter().any(|&(lo, hi)| lo > hi) {
        return Err(Error::Infeasible);
    }
    let mut search = Search::new(instance, u64::MAX)?;
    let mut assignment: Vec<i64> = z_box.iter().map(|&(lo, _)| lo).collect();
    loop {
        if let NodeResult::Solved {
            value,
            free_point,
            nu,
            interior,
        } = search.node(&assignment)?
        {
            search.offer(value, &assignment, free_point, nu, interior);
        }
        // odometer, last coordinate fastest: lexicographic order
        let mut k = assignment.len();
        loop {
            if k == 0 {
                return search.solution();
            }
            k -= 1;
            if assignment[k] < z_box[k].1 {
                assignment[k] += 1;
                break;
            }
            assignment[k] = z_box[k].0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub descriptor: InstanceDescriptor,
    pub solution: OracleSolution,
}

/// Oracle results keyed by [`InstanceDescriptor::key`], stored as JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleCache {
    pub entries: BTreeMap<String, FixtureEntry>,
}

impl OracleCache {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Loads the file if it exists, otherwise starts empty.
    pub fn load_or_default(path: &Path) -> Result<Self> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::default())
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn get(&self, descriptor: &InstanceDescriptor) -> Option<&OracleSolution> {
        self.entries.get(&descriptor.key()).map(|e| &e.solution)
    }

    pub fn insert(&mut self, descriptor: InstanceDescriptor, solution: OracleSolution) {
        self.entries.insert(
            descriptor.key(),
            FixtureEntry {
                descriptor,
                solution,
            },
        );
    }

    /// Cached value or a fresh [`solve_mixed`].
    pub fn get_or_solve(&mut self, descriptor: &InstanceDescriptor) -> Result<OracleSolution> {
        if let Some(sol) = self.get(descriptor) {
            return Ok(sol.clone());
        }
        let sol = solve_instance(&descriptor.build()?)?;
        self.insert(*descriptor, sol.clone());
        Ok(sol)
    }
}
