//! Exact conjugate update for a Gaussian prior and Gaussian rewards with
//! known noise.
//!
//! Observing arm `i` adds `e_i e_iᵀ / σ²` to the precision. The update is applied
//! in covariance form through the Sherman–Morrison identity, which is exact for
//! a rank-one precision change and costs O(k²) instead of two inversions:
//!
//! ```text
//! Σ' = Σ - Σe (Σe)ᵀ / (σ² + Σ_ii)
//! μ' = μ + Σe (r - μ_i) / (σ² + Σ_ii)
//! ```
//!
//! The covariance is re-symmetrized after every update.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gaussian::GaussianBelief;

/// Posterior after observing `reward` on `arm`.
pub fn update(belief: &GaussianBelief, arm: usize, reward: f64, noise_sd: f64) -> Result<GaussianBelief> {
    update_batch(belief, arm, 1, reward, noise_sd)
}

/// Posterior after `count` observations on `arm` whose average is `mean_reward`.
///
/// Equivalent to `count` single updates: n observations with noise σ carry the
/// same information as their mean observed with noise σ/√n.
pub fn update_batch(
    belief: &GaussianBelief,
    arm: usize,
    count: usize,
    mean_reward: f64,
    noise_sd: f64,
) -> Result<GaussianBelief> {
    let k = belief.dim();
    if arm >= k {
        return Err(Error::ArmOutOfRange { arm, arms: k });
    }
    if !(noise_sd > 0.0 && noise_sd.is_finite()) {
        return Err(Error::param("noise_sd", format!("must be positive, got {noise_sd}")));
    }
    if !mean_reward.is_finite() {
        return Err(Error::param("reward", "must be finite"));
    }
    if count == 0 {
        return Ok(belief.clone());
    }
    let noise_var = noise_sd * noise_sd / count as f64;

    let cov = belief.cov();
    let column = cov.column(arm).into_owned();
    let denom = noise_var + cov[(arm, arm)];
    let innovation = mean_reward - belief.mean()[arm];

    let mean = belief.mean() + &column * (innovation / denom);
    let mut next = cov - &column * column.transpose() / denom;
    symmetrize(&mut next);
    GaussianBelief::new(mean, next)
}

/// Replaces `m` with `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}
