//! Approximate posteriors used in place of the exact one.
//!
//! - covariance scaling `Norm(μ, c²Σ)` (over-dispersed for c > 1, under for c < 1)
//! - mean-field `Norm(μ, Diag(Σ⁻¹)⁻¹)`
//! - ensemble sampling with perturbed-observation updates
//! - two adversarial two-arm constructions that move posterior mass between
//!   the regions `Ω1 = {m1 > m2}` and `Ω2 = {m2 ≥ m1}`
//!
//! The adversarial constructions are realized at the level of arm choices:
//! the chosen arm is drawn from the region masses of the constructed density.
//! The densities themselves are available through [`over_construction_density`]
//! and [`under_construction_density`] for divergence checks on a grid.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::divergence::{alpha_div_masses, AlphaParam};
use crate::error::{Error, Result};
use crate::gaussian::{argmax, two_arm_best_probability, GaussianBelief};
use crate::posterior::symmetrize;
use crate::theory::{epsilon_from_z, r_from_epsilon};

/// ε budget for the under-exploring construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceBudget {
    pub alpha: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ApproximatorSpec {
    Exact,
    ScaledCov {
        c: f64,
    },
    MeanField,
    Ensemble {
        models: usize,
        /// Perturbation sd; the reward noise sd when absent.
        #[serde(default)]
        perturb_sd: Option<f64>,
    },
    AdversarialOver {
        alpha: f64,
        epsilon: f64,
    },
    /// Restriction to `Ω2`. With a budget, the restriction is relaxed toward
    /// the posterior whenever its arm-level divergence would exceed ε.
    AdversarialUnder {
        #[serde(default)]
        budget: Option<DivergenceBudget>,
    },
}

impl ApproximatorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ApproximatorSpec::Exact | ApproximatorSpec::MeanField => Ok(()),
            ApproximatorSpec::ScaledCov { c } => {
                if c > 0.0 && c.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("c", format!("scale must be positive, got {c}")))
                }
            }
            ApproximatorSpec::Ensemble { models, perturb_sd } => {
                if models == 0 {
                    return Err(Error::param("models", "an ensemble needs at least one model"));
                }
                match perturb_sd {
                    Some(sd) if !(sd >= 0.0 && sd.is_finite()) => {
                        Err(Error::param("perturb_sd", format!("must be non-negative, got {sd}")))
                    }
                    _ => Ok(()),
                }
            }
            ApproximatorSpec::AdversarialOver { alpha, epsilon } => r_from_epsilon(alpha, epsilon).map(|_| ()),
            ApproximatorSpec::AdversarialUnder { budget } => match budget {
                None => Ok(()),
                Some(DivergenceBudget { alpha, epsilon }) => {
                    if !(epsilon > 0.0) {
                        return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
                    }
                    epsilon_from_z(alpha, 1.0).map(|_| ())
                }
            },
        }
    }

    /// Short stable label, used to derive policy ids.
    pub fn label(&self) -> String {
        match self {
            ApproximatorSpec::Exact => "exact".into(),
            ApproximatorSpec::ScaledCov { c } => format!("scaled_cov({c})"),
            ApproximatorSpec::MeanField => "mean_field".into(),
            ApproximatorSpec::Ensemble { models, perturb_sd: None } => format!("ensemble({models})"),
            ApproximatorSpec::Ensemble {
                models,
                perturb_sd: Some(sd),
            } => format!("ensemble({models},{sd})"),
            ApproximatorSpec::AdversarialOver { alpha, epsilon } => format!("adversarial_over({alpha},{epsilon})"),
            ApproximatorSpec::AdversarialUnder { budget: None } => "adversarial_under".into(),
            ApproximatorSpec::AdversarialUnder {
                budget: Some(DivergenceBudget { alpha, epsilon }),
            } => format!("adversarial_under({alpha},{epsilon})"),
        }
    }

    /// Two-arm-only constructions.
    pub fn is_adversarial(&self) -> bool {
        matches!(
            self,
            ApproximatorSpec::AdversarialOver { .. } | ApproximatorSpec::AdversarialUnder { .. }
        )
    }

    /// Gaussian-valued maps that can be applied to a stored belief.
    pub fn project(&self, belief: &GaussianBelief) -> Result<GaussianBelief> {
        match *self {
            ApproximatorSpec::Exact => Ok(belief.clone()),
            ApproximatorSpec::ScaledCov { c } => scaled_cov_approx(belief, c),
            ApproximatorSpec::MeanField => mean_field_approx(belief),
            _ => Err(Error::param(
                "approximator",
                format!("{} is not a Gaussian projection", self.label()),
            )),
        }
    }
}

/// `Norm(μ, c²Σ)`.
pub fn scaled_cov_approx(belief: &GaussianBelief, c: f64) -> Result<GaussianBelief> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param("c", format!("scale must be positive, got {c}")));
    }
    if c == 1.0 {
        return Ok(belief.clone());
    }
    belief.with_cov(belief.cov() * (c * c))
}

/// `Norm(μ, Diag(Σ⁻¹)⁻¹)`: the diagonal Gaussian with the posterior's
/// conditional variances.
pub fn mean_field_approx(belief: &GaussianBelief) -> Result<GaussianBelief> {
    let precision_diag = belief.precision_diagonal()?;
    let variances = precision_diag.map(|p| 1.0 / p);
    belief.with_cov(DMatrix::from_diagonal(&variances))
}

/// Draw from the mean-field approximation without materializing it.
pub fn sample_mean_field<R: Rng + ?Sized>(belief: &GaussianBelief, rng: &mut R) -> Result<DVector<f64>> {
    let precision_diag = belief.precision_diagonal()?;
    Ok(DVector::from_iterator(
        belief.dim(),
        belief
            .mean()
            .iter()
            .zip(precision_diag.iter())
            .map(|(m, p)| m + rng.sample::<f64, _>(StandardNormal) / p.sqrt()),
    ))
}

/// M point models sharing one covariance.
///
/// Each model is regressed toward its own prior draw and sees every reward with
/// an independent Gaussian perturbation. In the Gaussian case the posterior
/// covariance does not depend on the rewards, so it is tracked once and the
/// per-model statistics reduce to the model vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    models: Vec<DVector<f64>>,
    cov: DMatrix<f64>,
    perturb_sd: Option<f64>,
    observations: usize,
}

impl EnsembleState {
    /// Draws `models` parameter vectors from `prior`.
    pub fn init<R: Rng + ?Sized>(
        prior: &GaussianBelief,
        models: usize,
        perturb_sd: Option<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        if models == 0 {
            return Err(Error::param("models", "an ensemble needs at least one model"));
        }
        Ok(Self {
            models: (0..models).map(|_| prior.sample(rng)).collect(),
            cov: prior.cov().clone(),
            perturb_sd,
            observations: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[DVector<f64>] {
        &self.models
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn observations(&self) -> usize {
        self.observations
    }

    /// Perturbed conjugate update of every model with the observation
    /// `(arm, reward)`.
    pub fn update<R: Rng + ?Sized>(&mut self, arm: usize, reward: f64, noise_sd: f64, rng: &mut R) -> Result<()> {
        let k = self.cov.nrows();
        if arm >= k {
            return Err(Error::ArmOutOfRange { arm, arms: k });
        }
        if !(noise_sd > 0.0) {
            return Err(Error::param("noise_sd", format!("must be positive, got {noise_sd}")));
        }
        let perturb_sd = self.perturb_sd.unwrap_or(noise_sd);
        let column = self.cov.column(arm).into_owned();
        let denom = noise_sd * noise_sd + self.cov[(arm, arm)];
        for model in &mut self.models {
            let w: f64 = perturb_sd * rng.sample::<f64, _>(StandardNormal);
            let innovation = reward + w - model[arm];
            model.axpy(innovation / denom, &column, 1.0);
        }
        self.cov -= &column * column.transpose() / denom;
        symmetrize(&mut self.cov);
        self.observations += 1;
        Ok(())
    }

    /// Greedy arm under a uniformly chosen model.
    pub fn act<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let m = rng.random_range(0..self.models.len());
        argmax(self.models[m].as_slice())
    }
}

fn require_two_arms(belief: &GaussianBelief) -> Result<()> {
    if belief.dim() != 2 {
        return Err(Error::param(
            "belief",
            format!("adversarial constructions are defined for two arms, got {}", belief.dim()),
        ));
    }
    Ok(())
}

/// Region masses `[Π1/r, 1 - Π1/r]` of the over-exploring construction.
pub fn over_construction_masses(pi1: f64, r: f64) -> [f64; 2] {
    let q1 = pi1 / r;
    [q1, 1.0 - q1]
}

/// Plays arm 0 with probability `Π1 / r`, where `r` is set so the construction
/// stays within `epsilon` of the posterior in α-divergence.
pub fn adversarial_over_choose<R: Rng + ?Sized>(
    belief: &GaussianBelief,
    alpha: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    require_two_arms(belief)?;
    let r = r_from_epsilon(alpha, epsilon)?;
    let [q1, _] = over_construction_masses(two_arm_best_probability(belief), r);
    Ok(if rng.random::<f64>() < q1 { 0 } else { 1 })
}

/// Density of the over-exploring construction: `π/r` on `Ω1` and
/// `π (1 - Π1/r) / (1 - Π1)` on `Ω2`.
pub fn over_construction_density(
    belief: &GaussianBelief,
    r: f64,
) -> Result<impl Fn(&[f64]) -> Result<f64> + '_> {
    require_two_arms(belief)?;
    if !(r >= 1.0) {
        return Err(Error::param("r", format!("must be at least 1, got {r}")));
    }
    let pi1 = two_arm_best_probability(belief);
    let pi2 = 1.0 - pi1;
    if pi2 <= 0.0 {
        return Err(Error::ConstructionUndefined("posterior puts no mass on the arm-2 region".into()));
    }
    let outside = (1.0 - pi1 / r) / pi2;
    Ok(move |m: &[f64]| {
        let density = belief.density(m)?;
        Ok(if m[0] > m[1] { density / r } else { density * outside })
    })
}

/// Arm-2 mass of the under-exploring construction when the arm-2 region has
/// posterior mass `pi2`.
///
/// Without a budget this is 1. With a budget, it is the largest `q ≥ pi2` with
/// `D_α([1-pi2, pi2], [1-q, q]) ≤ ε`, so the arm-choice distribution never
/// strays further than ε from the posterior's best-arm distribution.
pub fn under_construction_mass(pi2: f64, budget: Option<DivergenceBudget>) -> Result<f64> {
    if !(0.0..=1.0).contains(&pi2) {
        return Err(Error::param("pi2", format!("must lie in [0, 1], got {pi2}")));
    }
    let Some(DivergenceBudget { alpha, epsilon }) = budget else {
        return Ok(1.0);
    };
    if pi2 >= 1.0 {
        return Ok(1.0);
    }
    let alpha = AlphaParam::new(alpha)?;
    let posterior = [1.0 - pi2, pi2];
    let divergence = |q: f64| alpha_div_masses(&posterior, &[1.0 - q, q], alpha);
    if divergence(1.0)? <= epsilon {
        return Ok(1.0);
    }
    // The divergence is zero at q = pi2 and increases along [pi2, 1].
    let (mut lo, mut hi) = (pi2, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if divergence(mid)? <= epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Restriction to `Ω2`: always plays arm 1 (the second arm).
pub fn adversarial_under_choose(belief: &GaussianBelief) -> Result<usize> {
    require_two_arms(belief)?;
    let pi2 = 1.0 - two_arm_best_probability(belief);
    if pi2 <= 0.0 {
        return Err(Error::ConstructionUndefined("posterior puts no mass on the arm-2 region".into()));
    }
    Ok(1)
}

/// Budgeted form of [`adversarial_under_choose`]. Reduces to it when `budget`
/// is `None`.
pub fn adversarial_under_choose_budgeted<R: Rng + ?Sized>(
    belief: &GaussianBelief,
    budget: Option<DivergenceBudget>,
    rng: &mut R,
) -> Result<usize> {
    if budget.is_none() {
        return adversarial_under_choose(belief);
    }
    require_two_arms(belief)?;
    let pi2 = 1.0 - two_arm_best_probability(belief);
    let q2 = under_construction_mass(pi2, budget)?;
    Ok(if rng.random::<f64>() < q2 { 1 } else { 0 })
}

/// Density of the restriction: `π / Π2` on `Ω2`, zero elsewhere.
pub fn under_construction_density(belief: &GaussianBelief) -> Result<impl Fn(&[f64]) -> Result<f64> + '_> {
    require_two_arms(belief)?;
    let pi2 = 1.0 - two_arm_best_probability(belief);
    if pi2 <= 0.0 {
        return Err(Error::ConstructionUndefined("posterior puts no mass on the arm-2 region".into()));
    }
    Ok(move |m: &[f64]| {
        if m[1] >= m[0] {
            Ok(belief.density(m)? / pi2)
        } else {
            Ok(0.0)
        }
    })
}

/// α-divergence between the posterior and its restriction to a region of
/// mass `z`.
pub fn divergence_of_under_construction(z: f64, alpha: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("z must be positive, got {z}")));
    }
    epsilon_from_z(alpha, z)
}
