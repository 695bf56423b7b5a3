//! Declarative experiment configuration (TOML).
//!
//! ```toml
//! name = "motivating"
//! horizon = 100
//! replications = 1000
//! seed = 7
//! reward_sd = 0.2
//!
//! [instance]
//! kind = "fixed"            # or "from_prior": m* ~ prior, once per replication
//! means = [0.6, 0.5]
//!
//! [prior]
//! mean = [0.1, 0.9]         # a scalar broadcasts over `arms`
//! covariance = { kind = "scaled_identity", scale = 0.25 }
//! # covariance = { kind = "explicit", matrix = [[1.0, 0.0], [0.0, 1.0]] }
//! # covariance = { kind = "random_gram", seed = 3 }   # AᵀA/k, A ~ U[0,1)
//!
//! [[policies]]
//! kind = "exact_ts"
//!
//! [[policies]]
//! id = "Z_t"                # optional; defaults to a label derived from the spec
//! kind = "approx_ts"
//! approximator = { kind = "scaled_cov", c = 0.3 }
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::approximators::ApproximatorSpec;
use crate::error::{Error, Result};
use crate::gaussian::GaussianBelief;
use crate::policy::PolicySpec;

use super::seeds::derive_seed;

/// Tolerance on `Cov(M2, M1 - M2) = 0` for the restriction construction in
/// Bayesian experiments.
pub const INDEPENDENCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub horizon: usize,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    pub reward_sd: f64,
    pub instance: InstanceSpec,
    pub prior: PriorSpec,
    pub policies: Vec<PolicyEntry>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub dump_trajectories: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    Fixed { means: Vec<f64> },
    FromPrior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    #[serde(default)]
    pub arms: Option<usize>,
    pub mean: MeanSpec,
    pub covariance: CovarianceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeanSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceSpec {
    Explicit {
        matrix: Vec<Vec<f64>>,
    },
    ScaledIdentity {
        scale: f64,
    },
    /// `AᵀA / k` with `A` uniform on `[0, 1)`. Without a seed, one is derived
    /// from the experiment seed.
    RandomGram {
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(flatten)]
    pub spec: PolicySpec,
}

impl PolicyEntry {
    pub fn new(spec: PolicySpec) -> Self {
        Self { id: None, spec }
    }

    pub fn named(id: impl Into<String>, spec: PolicySpec) -> Self {
        Self {
            id: Some(id.into()),
            spec,
        }
    }

    pub fn id(&self) -> String {
        self.id.clone().unwrap_or_else(|| self.spec.default_id())
    }
}

/// Command-line overrides; `None` leaves the config value alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub dump_trajectories: bool,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(reps) = overrides.replications {
            self.replications = reps;
        }
        if let Some(out) = &overrides.output {
            self.output = Some(out.clone());
        }
        if let Some(threads) = overrides.threads {
            self.threads = Some(threads);
        }
        if overrides.dump_trajectories {
            self.dump_trajectories = true;
        }
    }

    pub fn policy_ids(&self) -> Vec<String> {
        self.policies.iter().map(PolicyEntry::id).collect()
    }

    /// Output path, defaulting to `<name>.csv`.
    pub fn output_path(&self) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{}.csv", self.name)))
    }

    /// Number of arms implied by the instance and prior.
    pub fn arms(&self) -> Result<usize> {
        let mut candidates: Vec<(&str, usize)> = Vec::new();
        if let InstanceSpec::Fixed { means } = &self.instance {
            candidates.push(("instance.means", means.len()));
        }
        if let Some(k) = self.prior.arms {
            candidates.push(("prior.arms", k));
        }
        if let MeanSpec::Vector(v) = &self.prior.mean {
            candidates.push(("prior.mean", v.len()));
        }
        if let CovarianceSpec::Explicit { matrix } = &self.prior.covariance {
            candidates.push(("prior.covariance", matrix.len()));
        }
        let Some(&(_, k)) = candidates.first() else {
            return Err(Error::config("prior.arms", "cannot infer the number of arms; set prior.arms"));
        };
        if let Some((field, other)) = candidates.iter().find(|(_, n)| *n != k) {
            return Err(Error::config(*field, format!("has {other} arms, expected {k}")));
        }
        if k < 2 {
            return Err(Error::config(candidates[0].0, "a bandit needs at least two arms"));
        }
        Ok(k)
    }

    /// Seed of the random prior covariance, when one is drawn.
    pub fn prior_seed(&self) -> Option<u64> {
        match self.prior.covariance {
            CovarianceSpec::RandomGram { seed } => Some(seed.unwrap_or_else(|| derive_seed(self.seed, 0, "prior"))),
            _ => None,
        }
    }

    pub fn resolve_prior(&self) -> Result<GaussianBelief> {
        let k = self.arms()?;
        let mean = match &self.prior.mean {
            MeanSpec::Scalar(m) => DVector::from_element(k, *m),
            MeanSpec::Vector(v) => DVector::from_column_slice(v),
        };
        let cov = match &self.prior.covariance {
            CovarianceSpec::Explicit { matrix } => {
                if matrix.iter().any(|row| row.len() != k) {
                    return Err(Error::config("prior.covariance.matrix", format!("rows must have {k} entries")));
                }
                DMatrix::from_fn(k, k, |i, j| matrix[i][j])
            }
            CovarianceSpec::ScaledIdentity { scale } => {
                if !(*scale > 0.0) {
                    return Err(Error::config("prior.covariance.scale", "must be positive"));
                }
                DMatrix::from_diagonal_element(k, k, *scale)
            }
            CovarianceSpec::RandomGram { .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.prior_seed().unwrap_or_default());
                let a = DMatrix::from_fn(k, k, |_, _| rng.random::<f64>());
                let mut cov = a.transpose() * &a / k as f64;
                crate::posterior::symmetrize(&mut cov);
                cov
            }
        };
        GaussianBelief::new(mean, cov).map_err(|e| Error::config("prior.covariance", e.to_string()))
    }

    /// Field-level validation of the whole config.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        if self.horizon < 1 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if self.replications < 1 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        if !(self.reward_sd > 0.0 && self.reward_sd.is_finite()) {
            return Err(Error::config("reward_sd", "must be positive"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be at least 1"));
        }
        if let InstanceSpec::Fixed { means } = &self.instance {
            if means.iter().any(|m| !m.is_finite()) {
                return Err(Error::config("instance.means", "must be finite"));
            }
        }
        let k = self.arms()?;
        let prior = self.resolve_prior()?;
        if self.policies.is_empty() {
            return Err(Error::config("policies", "at least one policy is required"));
        }
        let mut seen = BTreeSet::new();
        for (i, entry) in self.policies.iter().enumerate() {
            let field = format!("policies[{i}]");
            entry
                .spec
                .validate()
                .map_err(|e| Error::config(field.clone(), e.to_string()))?;
            let id = entry.id();
            if id.is_empty() {
                return Err(Error::config(format!("{field}.id"), "must not be empty"));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::config(format!("{field}.id"), format!("duplicate policy id `{id}`")));
            }
            if let Some(approximator) = entry.spec.approximator() {
                if approximator.is_adversarial() && k != 2 {
                    return Err(Error::config(field.clone(), "adversarial constructions need exactly two arms"));
                }
                if matches!(approximator, ApproximatorSpec::AdversarialUnder { .. })
                    && matches!(self.instance, InstanceSpec::FromPrior)
                {
                    let cov = prior.cov();
                    let dependence = cov[(0, 1)] - cov[(1, 1)];
                    if dependence.abs() > INDEPENDENCE_TOLERANCE {
                        return Err(Error::config(
                            "prior.covariance",
                            format!(
                                "the restriction construction needs Cov(M2, M1-M2) = 0 in Bayesian runs, got {dependence:e}"
                            ),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}
