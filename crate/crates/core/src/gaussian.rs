//! Multivariate Gaussian beliefs over the arm means.
//!
//! A [`GaussianBelief`] is validated and Cholesky-factorized once at
//! construction, so sampling, densities and divergences reuse the factor.
//! Factorization failures get a single retry with a jitter of
//! `1e-10 * trace(cov) / k` on the diagonal. An all-zero covariance is accepted
//! as a point mass at the mean.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative jitter added to the diagonal when the first factorization fails.
pub const CHOLESKY_JITTER: f64 = 1e-10;

/// Relative symmetry tolerance for covariance matrices.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Default Monte Carlo budget for best-arm probabilities with more than two arms.
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

const ARM_MARGINAL_SUM_TOLERANCE: f64 = 1e-9;

/// Multivariate normal belief `Norm(mean, cov)` over the k arm means.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    /// Lower Cholesky factor of `cov` (including jitter, if any was needed).
    factor: DMatrix<f64>,
    point_mass: bool,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let k = mean.len();
        if k == 0 {
            return Err(Error::param("mean", "belief must have at least one dimension"));
        }
        if cov.nrows() != k || cov.ncols() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: if cov.nrows() != k { cov.nrows() } else { cov.ncols() },
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::param("belief", "mean and covariance must be finite"));
        }

        let scale = cov.amax().max(1.0);
        let mut asymmetry: f64 = 0.0;
        for i in 0..k {
            for j in (i + 1)..k {
                asymmetry = asymmetry.max((cov[(i, j)] - cov[(j, i)]).abs());
            }
        }
        if asymmetry > SYMMETRY_TOLERANCE * scale {
            return Err(Error::NotSymmetric(asymmetry));
        }

        if cov.iter().all(|&v| v == 0.0) {
            return Ok(Self {
                mean,
                factor: DMatrix::zeros(k, k),
                cov,
                point_mass: true,
            });
        }

        let factor = cholesky_with_jitter(&cov)?;
        Ok(Self {
            mean,
            cov,
            factor,
            point_mass: false,
        })
    }

    pub fn from_slices(mean: &[f64], cov_row_major: &[f64]) -> Result<Self> {
        let k = mean.len();
        if cov_row_major.len() != k * k {
            return Err(Error::DimensionMismatch {
                expected: k * k,
                got: cov_row_major.len(),
            });
        }
        Self::new(
            DVector::from_column_slice(mean),
            DMatrix::from_row_slice(k, k, cov_row_major),
        )
    }

    /// `Norm(mean, variance * I)`.
    pub fn isotropic(mean: &[f64], variance: f64) -> Result<Self> {
        let k = mean.len();
        Self::new(
            DVector::from_column_slice(mean),
            DMatrix::from_diagonal_element(k, k, variance),
        )
    }

    /// Independent coordinates with the given variances.
    pub fn independent(mean: &[f64], variances: &[f64]) -> Result<Self> {
        if mean.len() != variances.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: variances.len(),
            });
        }
        Self::new(
            DVector::from_column_slice(mean),
            DMatrix::from_diagonal(&DVector::from_column_slice(variances)),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn is_point_mass(&self) -> bool {
        self.point_mass
    }

    pub fn into_parts(self) -> (DVector<f64>, DMatrix<f64>) {
        (self.mean, self.cov)
    }

    /// Draws `mean + L z` with `z` standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let k = self.dim();
        let z = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
        if self.point_mass {
            return self.mean.clone();
        }
        &self.mean + &self.factor * z
    }

    /// `ln det(cov)`; `-inf` for a point mass.
    pub fn log_det(&self) -> f64 {
        if self.point_mass {
            return f64::NEG_INFINITY;
        }
        2.0 * self.factor.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Inverse of the lower Cholesky factor.
    fn factor_inverse(&self) -> Result<DMatrix<f64>> {
        if self.point_mass {
            return Err(Error::NotPositiveDefinite("point-mass belief has no precision".into()));
        }
        let k = self.dim();
        self.factor
            .solve_lower_triangular(&DMatrix::identity(k, k))
            .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))
    }

    /// Precision matrix `cov^-1`.
    pub fn precision(&self) -> Result<DMatrix<f64>> {
        let inv = self.factor_inverse()?;
        Ok(inv.transpose() * inv)
    }

    /// Diagonal of the precision matrix, `(cov^-1)_ii`.
    pub fn precision_diagonal(&self) -> Result<DVector<f64>> {
        let inv = self.factor_inverse()?;
        // (L^-T L^-1)_ii is the squared norm of column i of L^-1.
        Ok(DVector::from_iterator(
            self.dim(),
            inv.column_iter().map(|c| c.norm_squared()),
        ))
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let k = self.dim();
        if x.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: x.len(),
            });
        }
        if self.point_mass {
            return Err(Error::NotPositiveDefinite("point-mass belief has no density".into()));
        }
        let diff = DVector::from_column_slice(x) - &self.mean;
        let white = self
            .factor
            .solve_lower_triangular(&diff)
            .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
        Ok(-0.5 * (white.norm_squared() + self.log_det() + k as f64 * (2.0 * std::f64::consts::PI).ln()))
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        self.log_density(x).map(f64::exp)
    }

    /// Same mean, covariance replaced. Used by the approximation maps.
    pub fn with_cov(&self, cov: DMatrix<f64>) -> Result<Self> {
        Self::new(self.mean.clone(), cov)
    }
}

fn cholesky_with_jitter(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = cov.clone().cholesky() {
        return Ok(chol.unpack());
    }
    let k = cov.nrows();
    let jitter = CHOLESKY_JITTER * cov.trace() / k as f64;
    if jitter > 0.0 {
        let mut jittered = cov.clone();
        for i in 0..k {
            jittered[(i, i)] += jitter;
        }
        if let Some(chol) = jittered.cholesky() {
            return Ok(chol.unpack());
        }
    }
    Err(Error::NotPositiveDefinite(format!(
        "Cholesky failed after jitter {jitter:e}"
    )))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Standard normal CDF through `erfc`, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// KL(p || q) between two Gaussians of equal dimension.
pub fn kl_gaussian(p: &GaussianBelief, q: &GaussianBelief) -> Result<f64> {
    let k = p.dim();
    if q.dim() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: q.dim(),
        });
    }
    if p.is_point_mass() || q.is_point_mass() {
        return Err(Error::NotPositiveDefinite("KL needs non-degenerate beliefs".into()));
    }
    let lq_inv = q.factor_inverse()?;
    // trace(Σq⁻¹ Σp) = ‖Lq⁻¹ Lp‖_F²
    let trace_term = (&lq_inv * p.cholesky_factor()).norm_squared();
    let mahalanobis = (&lq_inv * (q.mean() - p.mean())).norm_squared();
    let log_det_ratio = q.log_det() - p.log_det();
    Ok(0.5 * (trace_term - k as f64 + mahalanobis + log_det_ratio))
}

/// Discrete distribution over which arm is best (or which arm is chosen).
#[derive(Debug, Clone, PartialEq)]
pub struct ArmMarginal {
    probs: Vec<f64>,
}

impl ArmMarginal {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::param("probs", "empty distribution"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::param("probs", "entries must lie in [0, 1]"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > ARM_MARGINAL_SUM_TOLERANCE {
            return Err(Error::param("probs", format!("entries sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, arm: usize) -> f64 {
        self.probs[arm]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Posterior probability that each arm is the best one.
///
/// Two arms are handled in closed form through the distribution of the
/// difference `m1 - m2`; more arms fall back to Monte Carlo with `mc_samples`
/// draws.
pub fn best_arm_marginal<R: Rng + ?Sized>(
    belief: &GaussianBelief,
    mc_samples: usize,
    rng: &mut R,
) -> Result<ArmMarginal> {
    match belief.dim() {
        0 | 1 => Err(Error::param("belief", "best-arm probabilities need at least two arms")),
        2 => {
            let p1 = two_arm_best_probability(belief);
            ArmMarginal::new(vec![p1, 1.0 - p1])
        }
        _ => best_arm_marginal_mc(belief, mc_samples, rng),
    }
}

/// `P(m1 > m2)` for a two-arm belief, with the lowest-index tie-break when the
/// difference is degenerate.
pub fn two_arm_best_probability(belief: &GaussianBelief) -> f64 {
    debug_assert_eq!(belief.dim(), 2);
    let mean = belief.mean();
    let cov = belief.cov();
    let gap = mean[0] - mean[1];
    let var = cov[(0, 0)] + cov[(1, 1)] - 2.0 * cov[(0, 1)];
    let scale = cov[(0, 0)].abs().max(cov[(1, 1)].abs());
    if var <= 1e-14 * scale || var <= 0.0 {
        return if gap >= 0.0 { 1.0 } else { 0.0 };
    }
    normal_cdf(gap / var.sqrt())
}

/// Monte Carlo estimate of the best-arm probabilities for any number of arms.
pub fn best_arm_marginal_mc<R: Rng + ?Sized>(
    belief: &GaussianBelief,
    mc_samples: usize,
    rng: &mut R,
) -> Result<ArmMarginal> {
    if mc_samples == 0 {
        return Err(Error::param("mc_samples", "must be positive"));
    }
    let k = belief.dim();
    let mut counts = vec![0usize; k];
    for _ in 0..mc_samples {
        let draw = belief.sample(rng);
        counts[argmax(draw.as_slice())] += 1;
    }
    let n = mc_samples as f64;
    ArmMarginal::new(counts.into_iter().map(|c| c as f64 / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_covariance_samples_the_mean() {
        let b = GaussianBelief::from_slices(&[0.0, 0.0], &[0.0; 4]).unwrap();
        assert!(b.is_point_mass());
        assert_eq!(b.sample(&mut rng(3)).as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn sample_mean_converges() {
        let b = GaussianBelief::isotropic(&[5.0, 5.0], 1.0).unwrap();
        let mut r = rng(11);
        let n = 100_000;
        let mut acc = DVector::zeros(2);
        for _ in 0..n {
            acc += b.sample(&mut r);
        }
        acc /= n as f64;
        let tol = 3.0 / (n as f64).sqrt();
        for v in acc.iter() {
            assert!((v - 5.0).abs() < tol, "{v}");
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let b = GaussianBelief::from_slices(&[0.1, 0.9], &[0.25, 0.05, 0.05, 0.25]).unwrap();
        assert_eq!(b.sample(&mut rng(42)), b.sample(&mut rng(42)));
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        assert!(matches!(
            GaussianBelief::from_slices(&[0.0, 0.0], &[1.0, 0.5, 0.4, 1.0]),
            Err(Error::NotSymmetric(_))
        ));
        assert!(matches!(
            GaussianBelief::from_slices(&[0.0, 0.0], &[1.0, 2.0, 2.0, 1.0]),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(matches!(
            GaussianBelief::from_slices(&[0.0, 0.0], &[1.0; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn jitter_rescues_rank_deficient_covariance() {
        // Rank one: [[1,1],[1,1]].
        let b = GaussianBelief::from_slices(&[0.0, 0.0], &[1.0, 1.0, 1.0, 1.0]);
        assert!(b.is_ok());
    }

    #[test]
    fn kl_of_identical_beliefs_is_zero() {
        let b = GaussianBelief::from_slices(&[0.3, -1.0], &[2.0, 0.4, 0.4, 1.0]).unwrap();
        assert!(kl_gaussian(&b, &b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kl_of_scaled_covariances() {
        let sigma = [0.7, 0.2, 0.2, 0.4];
        let base = GaussianBelief::from_slices(&[1.0, 2.0], &sigma).unwrap();
        let shrunk = base.with_cov(base.cov() * 0.09).unwrap();
        let widened = base.with_cov(base.cov() * 20.25).unwrap();
        // ½(2c² − 2 − 2 ln c²) with c² = 0.09
        let expected_under = 0.5 * (0.18 - 2.0 - 0.0081f64.ln());
        assert!((kl_gaussian(&shrunk, &base).unwrap() - expected_under).abs() < 1e-12);
        assert!((kl_gaussian(&shrunk, &base).unwrap() - 1.49794).abs() < 1e-5);
        assert!((kl_gaussian(&base, &widened).unwrap() - 2.0575).abs() < 1e-4);
    }

    #[test]
    fn kl_dimension_mismatch() {
        let a = GaussianBelief::isotropic(&[0.0, 0.0], 1.0).unwrap();
        let b = GaussianBelief::isotropic(&[0.0, 0.0, 0.0], 1.0).unwrap();
        assert!(matches!(kl_gaussian(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn symmetric_two_arm_marginal() {
        let b = GaussianBelief::isotropic(&[0.0, 0.0], 1.0).unwrap();
        let m = best_arm_marginal(&b, 10, &mut rng(0)).unwrap();
        assert_eq!(m.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn motivating_prior_marginal() {
        let b = GaussianBelief::isotropic(&[0.1, 0.9], 0.25).unwrap();
        let m = best_arm_marginal(&b, 10, &mut rng(0)).unwrap();
        let expected = normal_cdf(-0.8 / 0.5f64.sqrt());
        assert!((m.prob(0) - expected).abs() < 1e-15);
        assert!((m.prob(0) - 0.1289).abs() < 1e-4);
    }

    #[test]
    fn separated_three_arms() {
        let b = GaussianBelief::isotropic(&[3.0, 0.0, 0.0], 0.01).unwrap();
        let m = best_arm_marginal(&b, 20_000, &mut rng(5)).unwrap();
        assert!(m.prob(0) > 0.999);
    }

    #[test]
    fn degenerate_difference_uses_lowest_index() {
        let b = GaussianBelief::from_slices(&[1.0, 1.0], &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(two_arm_best_probability(&b), 1.0);
        assert_eq!(argmax(&[2.0, 2.0, 1.0]), 0);
    }

    #[test]
    fn precision_diagonal_matches_inverse() {
        let b = GaussianBelief::from_slices(&[0.0, 0.0], &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let d = b.precision_diagonal().unwrap();
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((d[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn density_matches_closed_form() {
        let b = GaussianBelief::isotropic(&[0.0], 1.0).unwrap();
        let expected = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((b.density(&[1.0]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn arm_marginal_validation() {
        assert!(ArmMarginal::new(vec![0.5, 0.6]).is_err());
        assert!(ArmMarginal::new(vec![-0.1, 1.1]).is_err());
        assert!(ArmMarginal::new(vec![0.25, 0.75]).is_ok());
    }
}
