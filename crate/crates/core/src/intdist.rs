//! Double-geometric integer mutations.
//!
//! A mutation is `g1 - g2` with `g1`, `g2` i.i.d. geometric on `{0, 1, ...}`
//! with success probability `p`. The law is symmetric about zero and is
//! parametrized either by `p` or by the mean step `S = E|z|_1` over `n_z`
//! coordinates.

use rand::distr::Distribution;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Result};

/// `p = 1 - (S/n)/(sqrt(1 + (S/n)^2) + 1)`.
pub fn p_from_mean_step(mean_step: f64, n_z: usize) -> Result<f64> {
    if !(mean_step >= 0.0 && mean_step.is_finite()) {
        return Err(invalid(format!("mean step must be >= 0, got {mean_step}")));
    }
    if n_z == 0 {
        return Err(invalid("n_z must be >= 1"));
    }
    let r = mean_step / n_z as f64;
    Ok(1.0 - r / ((1.0 + r * r).sqrt() + 1.0))
}

/// `S = n * 2(1 - p)/(p(2 - p))`, the inverse of [`p_from_mean_step`].
pub fn mean_step_from_p(p: f64, n_z: usize) -> Result<f64> {
    check_p(p)?;
    if n_z == 0 {
        return Err(invalid("n_z must be >= 1"));
    }
    Ok(n_z as f64 * 2.0 * (1.0 - p) / (p * (2.0 - p)))
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("p must lie in (0, 1], got {p}")));
    }
    Ok(())
}

/// Inverse-CDF geometric draw `floor(log(1-u)/log(1-p))` for `u` in `[0, 1)`.
///
/// `p = 1` is the degenerate law at zero.
pub fn sample_geometric(p: f64, u: f64) -> u64 {
    debug_assert!(p > 0.0 && p <= 1.0);
    debug_assert!((0.0..1.0).contains(&u));
    if p >= 1.0 {
        return 0;
    }
    let k = ((-u).ln_1p() / (-p).ln_1p()).floor();
    // u < 1 keeps the ratio finite; saturate anyway for p ~ 1e-300
    if k >= u64::MAX as f64 {
        u64::MAX
    } else {
        k as u64
    }
}

/// `Pr{z = k} = p (1-p)^|k| / (2 - p)`.
pub fn pmf(k: i64, p: f64) -> f64 {
    if p >= 1.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    p * (1.0 - p).powf(k.unsigned_abs() as f64) / (2.0 - p)
}

/// `Pr{z >= k}` for `k >= 1` (equal to `Pr{z <= -k}`).
pub fn upper_tail(k: u64, p: f64) -> f64 {
    if p >= 1.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (1.0 - p).powf(k as f64) / (2.0 - p)
}

/// `E|z| = 2(1-p)/(p(2-p))` for a single coordinate.
pub fn mean_abs(p: f64) -> f64 {
    2.0 * (1.0 - p) / (p * (2.0 - p))
}

/// The double-geometric law with parameter `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleGeometric {
    p: f64,
}

impl DoubleGeometric {
    pub fn new(p: f64) -> Result<Self> {
        check_p(p)?;
        Ok(DoubleGeometric { p })
    }

    /// Law whose per-coordinate mean step over `n_z` coordinates is
    /// `mean_step / n_z`.
    pub fn from_mean_step(mean_step: f64, n_z: usize) -> Result<Self> {
        DoubleGeometric::new(p_from_mean_step(mean_step, n_z)?)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Deterministic draw from two uniforms in `[0, 1)`.
    pub fn from_uniforms(&self, u1: f64, u2: f64) -> i64 {
        let g1 = sample_geometric(self.p, u1);
        let g2 = sample_geometric(self.p, u2);
        (g1 as i128 - g2 as i128).clamp(i64::MIN as i128, i64::MAX as i128) as i64
    }
}

impl Distribution<i64> for DoubleGeometric {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        if self.p >= 1.0 {
            return 0;
        }
        // `random::<f64>()` is uniform on [0, 1)
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        self.from_uniforms(u1, u2)
    }
}

/// Chi-square goodness-of-fit of integer samples against [`pmf`].
#[derive(Debug, Clone, PartialEq)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Bins are `(-inf, -k]`, each `k` in `-k_max..=k_max`, `[k, inf)`.
    pub k_max: u64,
    pub samples: usize,
}

/// Pearson chi-square test with bins `k` in `[-30, 30]` plus two tails.
///
/// The central range shrinks until each tail expects at least five counts,
/// so the asymptotic chi-square law applies.
pub fn chi_square_test(samples: &[i64], p: f64) -> Result<GoodnessOfFit> {
    check_p(p)?;
    if p >= 1.0 {
        return Err(invalid("degenerate law p = 1 has no spread to test"));
    }
    let n = samples.len();
    if n == 0 {
        return Err(invalid("no samples"));
    }
    let nf = n as f64;
    let mut k_max: u64 = 30;
    while k_max > 0 && nf * upper_tail(k_max + 1, p) < 5.0 {
        k_max -= 1;
    }
    let km = k_max as i64;
    let width = (2 * km + 1) as usize;
    let mut counts = vec![0u64; width + 2];
    for &z in samples {
        let idx = if z < -km {
            0
        } else if z > km {
            width + 1
        } else {
            (z + km) as usize + 1
        };
        counts[idx] += 1;
    }
    let tail = upper_tail(k_max + 1, p);
    let mut stat = 0.0;
    for (idx, &obs) in counts.iter().enumerate() {
        let prob = if idx == 0 || idx == width + 1 {
            tail
        } else {
            pmf(idx as i64 - 1 - km, p)
        };
        let exp = nf * prob;
        let d = obs as f64 - exp;
        stat += d * d / exp;
    }
    let dof = counts.len() - 1;
    let law = ChiSquared::new(dof as f64).map_err(|e| invalid(e.to_string()))?;
    Ok(GoodnessOfFit {
        statistic: stat,
        dof,
        p_value: law.sf(stat),
        k_max,
        samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn p_from_mean_step_examples() {
        assert_eq!(p_from_mean_step(0.0, 7).unwrap(), 1.0);
        let p = p_from_mean_step(1.0, 1).unwrap();
        assert!((p - (2.0 - 2f64.sqrt())).abs() < 1e-15);
        assert_eq!(p_from_mean_step(2.0, 2).unwrap(), p);
        assert!(p_from_mean_step(-0.1, 1).is_err());
    }

    #[test]
    fn mean_step_from_p_examples() {
        assert_eq!(mean_step_from_p(1.0, 5).unwrap(), 0.0);
        assert!((mean_step_from_p(2.0 - 2f64.sqrt(), 1).unwrap() - 1.0).abs() < 1e-14);
        assert!((mean_step_from_p(0.5, 1).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!(mean_step_from_p(0.0, 1).is_err());
        assert!(mean_step_from_p(1.5, 1).is_err());
    }

    #[test]
    fn geometric_examples() {
        assert_eq!(sample_geometric(1.0, 0.3), 0);
        assert_eq!(sample_geometric(0.5, 0.7), 1);
        assert_eq!(sample_geometric(0.5, 0.0), 0);
        // the hand value floor(log(0.3)/log(0.5)) = floor(1.737)
        assert!(((0.3f64).ln() / (0.5f64).ln() - 1.737).abs() < 1e-3);
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(pmf(0, 1.0), 1.0);
        assert_eq!(pmf(3, 1.0), 0.0);
        assert!((pmf(0, 0.5) - 1.0 / 3.0).abs() < 1e-16);
        let total: f64 = (-50..=50).map(|k| pmf(k, 0.5)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_law_is_constant_zero() {
        let law = DoubleGeometric::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| law.sample(&mut rng) == 0));
    }

    #[test]
    fn sampler_is_deterministic_in_its_uniforms() {
        let law = DoubleGeometric::new(0.3).unwrap();
        let a: Vec<i64> = law
            .sample_iter(ChaCha8Rng::seed_from_u64(9))
            .take(500)
            .collect();
        let b: Vec<i64> = law
            .sample_iter(ChaCha8Rng::seed_from_u64(9))
            .take(500)
            .collect();
        assert_eq!(a, b);
        assert_eq!(
            law.from_uniforms(0.7, 0.0),
            sample_geometric(0.3, 0.7) as i64
        );
    }

    #[test]
    fn empirical_moments() {
        let law = DoubleGeometric::new(0.5).unwrap();
        let n = 1_000_000;
        let samples: Vec<i64> = law
            .sample_iter(ChaCha8Rng::seed_from_u64(2024))
            .take(n)
            .collect();
        let mean = samples.iter().sum::<i64>() as f64 / n as f64;
        // Var(z) = 2(1-p)/p^2 = 4 at p = 0.5
        let se = (4.0 / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean}");
        let mean_abs_emp = samples.iter().map(|z| z.abs()).sum::<i64>() as f64 / n as f64;
        assert!((mean_abs_emp / (4.0 / 3.0) - 1.0).abs() < 0.02);
        let zeros = samples.iter().filter(|&&z| z == 0).count() as f64 / n as f64;
        assert!((zeros - 1.0 / 3.0).abs() < 0.002);
    }

    #[test]
    fn chi_square_detects_a_wrong_law() {
        let law = DoubleGeometric::new(0.3).unwrap();
        let samples: Vec<i64> = law
            .sample_iter(ChaCha8Rng::seed_from_u64(5))
            .take(100_000)
            .collect();
        assert!(chi_square_test(&samples, 0.3).unwrap().p_value > 0.001);
        assert!(chi_square_test(&samples, 0.35).unwrap().p_value < 1e-6);
    }

    #[test]
    fn chi_square_tail_bins_are_populated() {
        let fit = chi_square_test(&[0, 1, -1], 0.9).unwrap();
        assert!(fit.k_max < 30);
        let fit = chi_square_test(&vec![0; 1_000_000], 0.1).unwrap();
        assert_eq!(fit.k_max, 30);
        assert_eq!(fit.dof, 62);
    }

    proptest! {
        #[test]
        fn pmf_is_symmetric(k in -200i64..200, p in 0.001f64..1.0) {
            prop_assert_eq!(pmf(k, p), pmf(-k, p));
        }

        #[test]
        fn conversion_round_trip(s in 0.001f64..1000.0, n in 1usize..64) {
            let p = p_from_mean_step(s, n).unwrap();
            prop_assert!(p > 0.0 && p <= 1.0);
            let back = mean_step_from_p(p, n).unwrap();
            prop_assert!((back - s).abs() <= 1e-9 * s);
        }
    }
}
