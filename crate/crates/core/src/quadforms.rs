//! The parametric MIQCQP instance family.
//!
//! An instance minimizes a shifted convex quadratic `f` subject to a single
//! shifted convex quadratic constraint `g <= E`. The first `n_r` coordinates
//! are continuous, the trailing `n_z` coordinates are integers. Hessians are
//! drawn from two families (Cigar and rotated ellipse) of size `n = D/2` and
//! block-concatenated to `D x D`, so both variable types see the conditioning.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Weight of the quartic penalty term: `1e4 * D^2 * (g - E)^2` for `g > E`.
pub const PENALTY_WEIGHT: f64 = 1e4;

/// Center of every objective form: `(+7, -7, +7, -7, ...)`.
pub const OBJECTIVE_CENTER_VALUE: f64 = 7.0;
/// Center of every constraint form: `(-4, +4, -4, +4, ...)`.
pub const CONSTRAINT_CENTER_VALUE: f64 = -4.0;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_REL_TOL: f64 = 1e-9;

/// Dense symmetric positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianMatrix(DMatrix<f64>);

impl HessianMatrix {
    /// Validates symmetry and positive semidefiniteness. The stored matrix is
    /// exactly symmetrized.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(invalid(format!(
                "hessian must be a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(invalid("hessian has non-finite entries"));
        }
        let scale = m.amax().max(1.0);
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(invalid(format!("hessian not symmetric at ({i}, {j})")));
                }
            }
        }
        let sym = symmetrize(&m);
        let eig = SymmetricEigen::new(sym.clone()).eigenvalues;
        let max = eig.max();
        let min = eig.min();
        if min < -PSD_REL_TOL * max.abs().max(f64::MIN_POSITIVE) {
            return Err(invalid(format!(
                "hessian not positive semidefinite (smallest eigenvalue {min:e})"
            )));
        }
        Ok(HessianMatrix(sym))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_condition(c: f64) -> Result<()> {
    if !(c.is_finite() && c >= 1.0) {
        return Err(invalid(format!("condition number must be >= 1, got {c}")));
    }
    Ok(())
}

/// Cigar Hessian: `diag(1, c, ..., c)`.
pub fn build_cigar(n: usize, c: f64) -> Result<HessianMatrix> {
    if n == 0 {
        return Err(invalid("cigar dimension must be >= 1"));
    }
    check_condition(c)?;
    let mut m = DMatrix::from_diagonal_element(n, n, c);
    m[(0, 0)] = 1.0;
    Ok(HessianMatrix(m))
}

/// Axis-parallel ellipse: `diag(c^((i-1)/(n-1)))`, `i = 1..n`.
pub fn build_ellipse(n: usize, c: f64) -> Result<HessianMatrix> {
    if n < 2 {
        return Err(invalid("ellipse dimension must be >= 2"));
    }
    check_condition(c)?;
    let denom = (n - 1) as f64;
    let diag: Vec<f64> = (0..n).map(|i| c.powf(i as f64 / denom)).collect();
    Ok(HessianMatrix(DMatrix::from_diagonal(&diag.into())))
}

/// Rotation by `theta` in the plane spanned by `(1,0,1,0,...)` and
/// `(0,1,0,1,...)`, identity on the orthogonal complement.
pub fn build_plane_rotation(n: usize, theta: f64) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(invalid("rotation dimension must be >= 2"));
    }
    let (u, v) = alternating_basis(n);
    let uu = &u * u.transpose();
    let vv = &v * v.transpose();
    let vu = &v * u.transpose();
    let uv = &u * v.transpose();
    let (s, c) = theta.sin_cos();
    Ok(DMatrix::identity(n, n) + (uu + vv) * (c - 1.0) + (vu - uv) * s)
}

/// Unit vectors along `(1,0,1,0,...)` and `(0,1,0,1,...)`.
pub fn alternating_basis(n: usize) -> (nalgebra::DVector<f64>, nalgebra::DVector<f64>) {
    let u = nalgebra::DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { 0.0 });
    let v = nalgebra::DVector::from_fn(n, |i, _| if i % 2 == 1 { 1.0 } else { 0.0 });
    (u.normalize(), v.normalize())
}

/// `R * ellipse(n, c) * R^T` with the rotation angle fixed at `pi/4`.
pub fn build_rotated_ellipse(n: usize, c: f64) -> Result<HessianMatrix> {
    let ellipse = build_ellipse(n, c)?;
    let r = build_plane_rotation(n, std::f64::consts::FRAC_PI_4)?;
    let m = &r * ellipse.as_matrix() * r.transpose();
    HessianMatrix::new(symmetrize(&m))
}

/// `blockdiag(H, H)`.
pub fn block_concat(h: &HessianMatrix) -> HessianMatrix {
    let n = h.dim();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(h.as_matrix());
    m.view_mut((n, n), (n, n)).copy_from(h.as_matrix());
    HessianMatrix(m)
}

/// `scale * (x - center)^T H (x - center)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    hessian: HessianMatrix,
    center: Vec<f64>,
    scale: f64,
}

impl QuadraticForm {
    pub fn new(hessian: HessianMatrix, center: Vec<f64>, scale: f64) -> Result<Self> {
        if center.len() != hessian.dim() {
            return Err(Error::DimensionMismatch {
                expected: hessian.dim(),
                found: center.len(),
            });
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid(format!("form scale must be positive, got {scale}")));
        }
        Ok(QuadraticForm {
            hessian,
            center,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn hessian(&self) -> &HessianMatrix {
        &self.hessian
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The Hessian with the scale folded in.
    pub fn scaled_hessian(&self) -> DMatrix<f64> {
        self.hessian.as_matrix() * self.scale
    }

    /// Same form with its scale multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        QuadraticForm::new(
            self.hessian.clone(),
            self.center.clone(),
            self.scale * factor,
        )
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.value_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let h = self.hessian.as_matrix();
        let mut acc = 0.0;
        for j in 0..n {
            let yj = x[j] - self.center[j];
            if yj == 0.0 {
                continue;
            }
            let col = h.column(j);
            let mut s = 0.0;
            for i in 0..n {
                s += col[i] * (x[i] - self.center[i]);
            }
            acc += s * yj;
        }
        // PSD forms are nonnegative; clip rounding noise.
        (acc * self.scale).max(0.0)
    }
}

/// Which test case an instance belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestCase {
    /// Cigar objective, Cigar constraint.
    #[serde(rename = "TC0")]
    Tc0,
    /// Rotated-ellipse objective, Cigar constraint.
    #[serde(rename = "TC1")]
    Tc1,
    /// Cigar objective, rotated-ellipse constraint.
    #[serde(rename = "TC2")]
    Tc2,
    /// Rotated-ellipse objective and constraint.
    #[serde(rename = "TC3")]
    Tc3,
    /// Identity Hessians, no condition scaling.
    #[serde(rename = "SPHERE")]
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HessianKind {
    Cigar,
    RotatedEllipse,
}

impl TestCase {
    pub const ALL_TC: [TestCase; 4] = [TestCase::Tc0, TestCase::Tc1, TestCase::Tc2, TestCase::Tc3];

    pub fn as_str(self) -> &'static str {
        match self {
            TestCase::Tc0 => "TC0",
            TestCase::Tc1 => "TC1",
            TestCase::Tc2 => "TC2",
            TestCase::Tc3 => "TC3",
            TestCase::Sphere => "SPHERE",
        }
    }

    fn kinds(self) -> Option<(HessianKind, HessianKind)> {
        use HessianKind::*;
        match self {
            TestCase::Tc0 => Some((Cigar, Cigar)),
            TestCase::Tc1 => Some((RotatedEllipse, Cigar)),
            TestCase::Tc2 => Some((Cigar, RotatedEllipse)),
            TestCase::Tc3 => Some((RotatedEllipse, RotatedEllipse)),
            TestCase::Sphere => None,
        }
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "").as_str() {
            "TC0" | "0" => Ok(TestCase::Tc0),
            "TC1" | "1" => Ok(TestCase::Tc1),
            "TC2" | "2" => Ok(TestCase::Tc2),
            "TC3" | "3" => Ok(TestCase::Tc3),
            "SPHERE" => Ok(TestCase::Sphere),
            _ => Err(invalid(format!("unknown test case '{s}'"))),
        }
    }
}

/// Flat record identifying an instance; used as CSV key and fixtures key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub test_case: TestCase,
    #[serde(rename = "D")]
    pub dim: usize,
    pub n_r: usize,
    pub n_z: usize,
    #[serde(rename = "c")]
    pub cond: f64,
    #[serde(rename = "E")]
    pub level: f64,
}

impl InstanceDescriptor {
    pub fn new(test_case: TestCase, dim: usize, cond: f64, level: f64, all_integer: bool) -> Self {
        let (n_r, n_z) = if all_integer {
            (0, dim)
        } else {
            (dim / 2, dim - dim / 2)
        };
        InstanceDescriptor {
            test_case,
            dim,
            n_r,
            n_z,
            cond,
            level,
        }
    }

    pub fn all_integer(&self) -> bool {
        self.n_r == 0
    }

    /// Stable textual key, e.g. `TC0/D8/nr4/nz4/c10/E30`.
    pub fn key(&self) -> String {
        format!(
            "{}/D{}/nr{}/nz{}/c{}/E{}",
            self.test_case, self.dim, self.n_r, self.n_z, self.cond, self.level
        )
    }

    pub fn build(&self) -> Result<ProblemInstance> {
        if self.n_r + self.n_z != self.dim {
            return Err(invalid(format!(
                "split n_r={} n_z={} does not add up to D={}",
                self.n_r, self.n_z, self.dim
            )));
        }
        let all_integer = self.n_r == 0;
        if !all_integer && self.n_r != self.n_z {
            return Err(invalid("split must be n_r = n_z = D/2 or n_r = 0"));
        }
        make_instance(self.test_case, self.dim, self.cond, self.level, all_integer)
    }
}

/// Objective and constraint values at a point, plus the penalized cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub f: f64,
    pub g: f64,
    pub cost: f64,
}

impl Evaluation {
    pub fn feasible(&self, level: f64) -> bool {
        self.g <= level
    }
}

/// A concrete MIQCQP instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    objective: QuadraticForm,
    constraint: QuadraticForm,
    level: f64,
    n_r: usize,
    n_z: usize,
    test_case: TestCase,
    cond: f64,
}

impl ProblemInstance {
    pub fn new(
        objective: QuadraticForm,
        constraint: QuadraticForm,
        level: f64,
        n_r: usize,
        n_z: usize,
        test_case: TestCase,
        cond: f64,
    ) -> Result<Self> {
        let d = n_r + n_z;
        for form in [&objective, &constraint] {
            if form.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: form.dim(),
                });
            }
        }
        if !(level.is_finite() && level > 0.0) {
            return Err(invalid(format!(
                "constraint level must be positive, got {level}"
            )));
        }
        Ok(ProblemInstance {
            objective,
            constraint,
            level,
            n_r,
            n_z,
            test_case,
            cond,
        })
    }

    pub fn objective(&self) -> &QuadraticForm {
        &self.objective
    }

    pub fn constraint(&self) -> &QuadraticForm {
        &self.constraint
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.n_r + self.n_z
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn test_case(&self) -> TestCase {
        self.test_case
    }

    pub fn cond(&self) -> f64 {
        self.cond
    }

    /// 0-based positions of the integer coordinates (the trailing `n_z`).
    pub fn integer_indices(&self) -> Range<usize> {
        self.n_r..self.dim()
    }

    pub fn is_integer(&self, i: usize) -> bool {
        i >= self.n_r
    }

    pub fn descriptor(&self) -> InstanceDescriptor {
        InstanceDescriptor {
            test_case: self.test_case,
            dim: self.dim(),
            n_r: self.n_r,
            n_z: self.n_z,
            cond: self.cond,
            level: self.level,
        }
    }

    /// Same instance with both form scales multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        ProblemInstance::new(
            self.objective.rescaled(factor)?,
            self.constraint.rescaled(factor)?,
            self.level,
            self.n_r,
            self.n_z,
            self.test_case,
            self.cond,
        )
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval_objective(&self, x: &[f64]) -> Result<f64> {
        self.objective.value(x)
    }

    pub fn eval_constraint(&self, x: &[f64]) -> Result<f64> {
        self.constraint.value(x)
    }

    /// The quartic penalty added on top of `f`; zero whenever `g <= E`.
    pub fn penalty(&self, g: f64) -> f64 {
        let excess = g - self.level;
        if excess > 0.0 {
            let d = self.dim() as f64;
            PENALTY_WEIGHT * d * d * excess * excess
        } else {
            0.0
        }
    }

    pub fn eval_penalized_cost(&self, x: &[f64]) -> Result<f64> {
        Ok(self.evaluate(x)?.cost)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        self.check_len(x)?;
        Ok(self.evaluate_unchecked(x))
    }

    pub(crate) fn evaluate_unchecked(&self, x: &[f64]) -> Evaluation {
        let f = self.objective.value_unchecked(x);
        let g = self.constraint.value_unchecked(x);
        Evaluation {
            f,
            g,
            cost: f + self.penalty(g),
        }
    }
}

/// Alternating center `(a, -a, a, -a, ...)` of length `d`.
pub fn alternating_center(d: usize, a: f64) -> Vec<f64> {
    (0..d).map(|i| if i % 2 == 0 { a } else { -a }).collect()
}

fn check_even_dim(dim: usize, min: usize) -> Result<()> {
    if !dim.is_multiple_of(2) {
        return Err(invalid(format!("dimension must be even, got {dim}")));
    }
    if dim < min {
        return Err(invalid(format!("dimension must be >= {min}, got {dim}")));
    }
    Ok(())
}

fn split(dim: usize, all_integer: bool) -> (usize, usize) {
    if all_integer {
        (0, dim)
    } else {
        (dim / 2, dim / 2)
    }
}

fn family_hessian(kind: HessianKind, n: usize, c: f64) -> Result<HessianMatrix> {
    let block = match kind {
        HessianKind::Cigar => build_cigar(n, c)?,
        HessianKind::RotatedEllipse => build_rotated_ellipse(n, c)?,
    };
    Ok(block_concat(&block))
}

/// Builds a member of the instance family. Both forms carry the scale `1/c`.
///
/// `SPHERE` is accepted and delegates to [`make_sphere_instance`] semantics
/// (identity Hessians, unit scale); `c` is then only carried in the
/// descriptor.
pub fn make_instance(
    test_case: TestCase,
    dim: usize,
    cond: f64,
    level: f64,
    all_integer: bool,
) -> Result<ProblemInstance> {
    let Some((fk, gk)) = test_case.kinds() else {
        check_condition(cond)?;
        let mut inst = sphere_instance(dim, level, all_integer)?;
        inst.cond = cond;
        return Ok(inst);
    };
    check_even_dim(dim, 4)?;
    check_condition(cond)?;
    let n = dim / 2;
    let (n_r, n_z) = split(dim, all_integer);
    let scale = 1.0 / cond;
    let objective = QuadraticForm::new(
        family_hessian(fk, n, cond)?,
        alternating_center(dim, OBJECTIVE_CENTER_VALUE),
        scale,
    )?;
    let constraint = QuadraticForm::new(
        family_hessian(gk, n, cond)?,
        alternating_center(dim, CONSTRAINT_CENTER_VALUE),
        scale,
    )?;
    ProblemInstance::new(objective, constraint, level, n_r, n_z, test_case, cond)
}

/// Sphere constrained by sphere, mixed split `n_r = n_z = D/2`.
pub fn make_sphere_instance(dim: usize, level: f64) -> Result<ProblemInstance> {
    sphere_instance(dim, level, false)
}

/// Sphere constrained by sphere with a chosen split.
pub fn sphere_instance(dim: usize, level: f64, all_integer: bool) -> Result<ProblemInstance> {
    check_even_dim(dim, 2)?;
    let (n_r, n_z) = split(dim, all_integer);
    let id = HessianMatrix(DMatrix::identity(dim, dim));
    let objective = QuadraticForm::new(
        id.clone(),
        alternating_center(dim, OBJECTIVE_CENTER_VALUE),
        1.0,
    )?;
    let constraint = QuadraticForm::new(id, alternating_center(dim, CONSTRAINT_CENTER_VALUE), 1.0)?;
    ProblemInstance::new(
        objective,
        constraint,
        level,
        n_r,
        n_z,
        TestCase::Sphere,
        1.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    fn assert_mat_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() <= tol, "{a} vs {b}");
        }
    }

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v))
    }

    #[test]
    fn cigar_examples() {
        assert_eq!(
            build_cigar(2, 10.0).unwrap().as_matrix(),
            &diag(&[1.0, 10.0])
        );
        assert_eq!(build_cigar(1, 100.0).unwrap().as_matrix(), &diag(&[1.0]));
        assert_eq!(
            build_cigar(3, 1000.0).unwrap().as_matrix(),
            &diag(&[1.0, 1000.0, 1000.0])
        );
        assert!(build_cigar(0, 10.0).is_err());
        assert!(build_cigar(3, 0.5).is_err());
    }

    #[test]
    fn ellipse_examples() {
        assert_eq!(
            build_ellipse(2, 100.0).unwrap().as_matrix(),
            &diag(&[1.0, 100.0])
        );
        assert_mat_close(
            build_ellipse(3, 100.0).unwrap().as_matrix(),
            &diag(&[1.0, 10.0, 100.0]),
            1e-12,
        );
        assert_mat_close(
            build_ellipse(5, 1e4).unwrap().as_matrix(),
            &diag(&[1.0, 10.0, 100.0, 1000.0, 1e4]),
            1e-9,
        );
        assert!(build_ellipse(1, 10.0).is_err());
    }

    #[test]
    fn rotation_examples() {
        let r = build_plane_rotation(2, FRAC_PI_4).unwrap();
        let h = SQRT_2 / 2.0;
        assert_mat_close(&r, &DMatrix::from_row_slice(2, 2, &[h, -h, h, h]), 1e-15);

        let r0 = build_plane_rotation(4, 0.0).unwrap();
        assert_mat_close(&r0, &DMatrix::identity(4, 4), 0.0);

        let r4 = build_plane_rotation(4, FRAC_PI_4).unwrap();
        let (u, v) = alternating_basis(4);
        let ru = &r4 * &u;
        let expected = &u * FRAC_PI_4.cos() + &v * FRAC_PI_4.sin();
        assert!((ru - expected).amax() < 1e-15);
        assert!((&r4 * r4.transpose() - DMatrix::<f64>::identity(4, 4)).amax() <= 1e-12);
    }

    #[test]
    fn rotation_orthogonal_with_unit_determinant() {
        for n in 2..=12 {
            for theta in [0.1, FRAC_PI_4, 1.0, 2.5] {
                let r = build_plane_rotation(n, theta).unwrap();
                let err = (&r * r.transpose() - DMatrix::<f64>::identity(n, n)).amax();
                assert!(err <= 1e-12, "n={n} err={err}");
                assert!((r.determinant() - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn rotated_ellipse_examples() {
        let h = build_rotated_ellipse(2, 100.0).unwrap();
        assert_mat_close(
            h.as_matrix(),
            &DMatrix::from_row_slice(2, 2, &[50.5, -49.5, -49.5, 50.5]),
            1e-12,
        );
        assert_mat_close(
            build_rotated_ellipse(2, 1.0).unwrap().as_matrix(),
            &DMatrix::identity(2, 2),
            1e-15,
        );
        let ev = build_rotated_ellipse(4, 10.0).unwrap().eigenvalues();
        let expected = [1.0, 10f64.powf(1.0 / 3.0), 10f64.powf(2.0 / 3.0), 10.0];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rotated_ellipse_is_not_separable() {
        let h = build_rotated_ellipse(4, 1e3).unwrap();
        let m = h.as_matrix();
        assert!(m[(0, 1)].abs() > 1.0);
        // exactly symmetric after construction
        assert_eq!(m, &m.transpose());
    }

    #[test]
    fn block_concat_examples() {
        let h = build_cigar(2, 10.0).unwrap();
        assert_eq!(block_concat(&h).as_matrix(), &diag(&[1.0, 10.0, 1.0, 10.0]));
        let id = HessianMatrix::new(DMatrix::identity(2, 2)).unwrap();
        assert_eq!(
            block_concat(&id).as_matrix(),
            &DMatrix::<f64>::identity(4, 4)
        );

        let re = build_rotated_ellipse(3, 50.0).unwrap();
        let mut doubled: Vec<f64> = re.eigenvalues().iter().flat_map(|&e| [e, e]).collect();
        doubled.sort_by(f64::total_cmp);
        for (a, b) in block_concat(&re).eigenvalues().iter().zip(doubled) {
            assert!((a - b).abs() <= 1e-9 * b);
        }
    }

    #[test]
    fn hessian_validation() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(HessianMatrix::new(asym).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(HessianMatrix::new(indefinite).is_err());
        assert!(HessianMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn tc0_instance_shape() {
        let inst = make_instance(TestCase::Tc0, 4, 10.0, 30.0, false).unwrap();
        assert_eq!(
            inst.objective().hessian().as_matrix(),
            &diag(&[1.0, 10.0, 1.0, 10.0])
        );
        assert_eq!(inst.objective().scale(), 0.1);
        assert_eq!(inst.objective().center(), &[7.0, -7.0, 7.0, -7.0]);
        assert_eq!(inst.constraint().center(), &[-4.0, 4.0, -4.0, 4.0]);
        assert_eq!(inst.constraint().hessian(), inst.objective().hessian());
        assert_eq!((inst.n_r(), inst.n_z()), (2, 2));
        assert_eq!(inst.integer_indices(), 2..4);
    }

    #[test]
    fn tc3_uses_block_rotated_ellipse() {
        let inst = make_instance(TestCase::Tc3, 4, 100.0, 50.0, false).unwrap();
        let block = build_rotated_ellipse(2, 100.0).unwrap();
        let expected = block_concat(&block);
        assert_eq!(inst.objective().hessian(), &expected);
        assert_eq!(inst.constraint().hessian(), &expected);
    }

    #[test]
    fn test_case_hessian_pairing() {
        let c = 100.0;
        let cig = block_concat(&build_cigar(3, c).unwrap());
        let re = block_concat(&build_rotated_ellipse(3, c).unwrap());
        let tc1 = make_instance(TestCase::Tc1, 6, c, 10.0, false).unwrap();
        assert_eq!(tc1.objective().hessian(), &re);
        assert_eq!(tc1.constraint().hessian(), &cig);
        let tc2 = make_instance(TestCase::Tc2, 6, c, 10.0, false).unwrap();
        assert_eq!(tc2.objective().hessian(), &cig);
        assert_eq!(tc2.constraint().hessian(), &re);
    }

    #[test]
    fn make_instance_rejects_bad_input() {
        assert!(make_instance(TestCase::Tc0, 5, 10.0, 30.0, false).is_err());
        assert!(make_instance(TestCase::Tc0, 2, 10.0, 30.0, false).is_err());
        assert!(make_instance(TestCase::Tc0, 4, 10.0, 0.0, false).is_err());
        assert!(make_instance(TestCase::Tc0, 4, 0.1, 10.0, false).is_err());
        assert!("TC7".parse::<TestCase>().is_err());
        assert!(make_sphere_instance(3, 10.0).is_err());
    }

    #[test]
    fn all_integer_split() {
        let inst = make_instance(TestCase::Tc2, 8, 10.0, 30.0, true).unwrap();
        assert_eq!((inst.n_r(), inst.n_z()), (0, 8));
        assert_eq!(inst.integer_indices(), 0..8);
        let d = inst.descriptor();
        assert!(d.all_integer());
        assert_eq!(d.build().unwrap(), inst);
    }

    #[test]
    fn forms_vanish_at_their_centers() {
        for tc in TestCase::ALL_TC {
            let inst = make_instance(tc, 8, 1e3, 30.0, false).unwrap();
            let xi0 = alternating_center(8, 7.0);
            let xi1 = alternating_center(8, -4.0);
            assert_eq!(inst.eval_objective(&xi0).unwrap(), 0.0);
            assert_eq!(inst.eval_constraint(&xi1).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_coordinate_expansion() {
        let inst = make_instance(TestCase::Tc0, 4, 10.0, 30.0, false).unwrap();
        let x = [8.0, -7.0, 7.0, -7.0];
        assert!((inst.eval_objective(&x).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn sphere_examples() {
        let inst = make_sphere_instance(4, 10.0).unwrap();
        let xi0 = alternating_center(4, 7.0);
        assert_eq!(inst.eval_constraint(&xi0).unwrap(), 484.0);
        assert_eq!(inst.objective().scale(), 1.0);
        assert_eq!(inst.eval_penalized_cost(&xi0).unwrap(), 3.594816e10);

        let on_boundary = make_sphere_instance(4, 484.0).unwrap();
        let e = on_boundary.evaluate(&xi0).unwrap();
        assert_eq!(e.g, on_boundary.level());
        assert_eq!(e.cost, e.f);
        assert!(e.feasible(on_boundary.level()));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let inst = make_sphere_instance(4, 10.0).unwrap();
        assert!(matches!(
            inst.eval_objective(&[0.0; 3]),
            Err(Error::DimensionMismatch {
                expected: 4,
                found: 3
            })
        ));
        assert!(inst.eval_penalized_cost(&[0.0; 5]).is_err());
    }

    #[test]
    fn penalty_is_quadratic_across_the_boundary() {
        let inst = make_instance(TestCase::Tc3, 8, 100.0, 30.0, false).unwrap();
        let xi1 = alternating_center(8, -4.0);
        let dir: Vec<f64> = (0..8).map(|i| 1.0 + 0.1 * i as f64).collect();
        let probe: Vec<f64> = xi1.iter().zip(&dir).map(|(c, d)| c + d).collect();
        let t = (inst.level() / inst.eval_constraint(&probe).unwrap()).sqrt();
        let at =
            |h: f64| -> Vec<f64> { xi1.iter().zip(&dir).map(|(c, d)| c + (t + h) * d).collect() };
        let boundary = inst.evaluate(&at(0.0)).unwrap();
        assert!((boundary.g - inst.level()).abs() < 1e-9);
        let h = 1e-4;
        let p1 = inst.penalty(inst.eval_constraint(&at(h)).unwrap());
        let p2 = inst.penalty(inst.eval_constraint(&at(h / 2.0)).unwrap());
        assert!(p1 > 0.0);
        // O(h^2): halving h quarters the penalty
        assert!((p1 / p2 - 4.0).abs() < 0.01, "ratio {}", p1 / p2);
        assert_eq!(inst.penalty(inst.eval_constraint(&at(-h)).unwrap()), 0.0);
    }

    proptest! {
        #[test]
        fn penalized_cost_dominates_objective(
            tc in 0usize..4,
            logc in 0.0f64..6.0,
            level in 1.0f64..100.0,
            x in proptest::collection::vec(-20.0f64..20.0, 8),
        ) {
            let inst = make_instance(TestCase::ALL_TC[tc], 8, 10f64.powf(logc), level, false).unwrap();
            let e = inst.evaluate(&x).unwrap();
            prop_assert!(e.f >= 0.0 && e.g >= 0.0);
            prop_assert!(e.cost >= e.f);
            prop_assert_eq!(e.cost == e.f, e.g <= level);
        }

        #[test]
        fn hessians_symmetric_and_psd(n in 2usize..10, logc in 0.0f64..6.0) {
            let c = 10f64.powf(logc);
            for h in [build_cigar(n, c).unwrap(), build_rotated_ellipse(n, c).unwrap()] {
                let m = h.as_matrix();
                for i in 0..n {
                    for j in 0..n {
                        prop_assert!((m[(i, j)] - m[(j, i)]).abs() <= 1e-12);
                    }
                }
                let ev = h.eigenvalues();
                prop_assert!(ev[0] >= -1e-9 * ev[n - 1]);
            }
        }
    }
}
