//! Replicated simulation and aggregation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approximators::{scaled_cov_approx, ApproximatorSpec};
use crate::bandit::BanditInstance;
use crate::error::{Error, Result};
use crate::gaussian::{kl_gaussian, GaussianBelief};
use crate::policy::{Agent, PolicySpec, StepOutcome, Streams};

use super::config::{ExperimentConfig, InstanceSpec, PolicyEntry};
use super::seeds::derive_seed;

/// z-value of the normal-approximation 95% interval.
pub const CI_Z: f64 = 1.96;

pub const CI_METHOD: &str = "normal approximation: 1.96 * sample sd / sqrt(reps); 0 when reps = 1";

/// Everything a replication needs besides the policy.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub prior: GaussianBelief,
    pub instance: InstanceSpec,
    pub reward_sd: f64,
    pub horizon: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            prior: config.resolve_prior()?,
            instance: config.instance.clone(),
            reward_sd: config.reward_sd,
            horizon: config.horizon,
            seed: config.seed,
        })
    }

    /// A fixed-means scenario.
    pub fn fixed(prior: GaussianBelief, means: Vec<f64>, reward_sd: f64, horizon: usize, seed: u64) -> Self {
        Self {
            prior,
            instance: InstanceSpec::Fixed { means },
            reward_sd,
            horizon,
            seed,
        }
    }

    /// The true means of replication `rep`. Drawn from the prior in Bayesian
    /// scenarios, keyed only by the seed and `rep` so every policy faces the
    /// same instance.
    pub fn instance_for_replication(&self, rep: usize) -> Result<BanditInstance> {
        let means = match &self.instance {
            InstanceSpec::Fixed { means } => means.clone(),
            InstanceSpec::FromPrior => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, rep as u64, "instance"));
                self.prior.sample(&mut rng).as_slice().to_vec()
            }
        };
        if means.len() != self.prior.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.prior.dim(),
                got: means.len(),
            });
        }
        BanditInstance::new(means, self.reward_sd)
    }
}

pub fn replication_seed(base: u64, rep: usize, policy_id: &str) -> u64 {
    derive_seed(base, rep as u64, policy_id)
}

/// Summary of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    /// Cumulative pseudo-regret after steps `1..=T`.
    pub cumulative_regret: Vec<f64>,
    pub pulls: Vec<usize>,
    pub explored: usize,
}

/// Runs one trajectory of `spec`, calling `observer(agent, t, outcome)` after
/// every step.
pub fn simulate<F>(
    spec: &PolicySpec,
    scenario: &Scenario,
    instance: &BanditInstance,
    seed: u64,
    mut observer: F,
) -> Result<ReplicationResult>
where
    F: FnMut(&Agent, usize, &StepOutcome) -> Result<()>,
{
    let mut streams = Streams::from_seed(seed);
    let mut agent = Agent::new(spec.clone(), &scenario.prior, scenario.reward_sd, &mut streams)?;
    let gaps = (0..instance.arms()).map(|a| instance.gap(a)).collect::<Result<Vec<_>>>()?;
    let mut result = ReplicationResult {
        cumulative_regret: Vec::with_capacity(scenario.horizon),
        pulls: vec![0; instance.arms()],
        explored: 0,
    };
    let mut regret = 0.0;
    for t in 1..=scenario.horizon {
        let outcome = agent.step(instance, t, &mut streams)?;
        regret += gaps[outcome.arm];
        result.cumulative_regret.push(regret);
        result.pulls[outcome.arm] += 1;
        result.explored += usize::from(outcome.explored);
        observer(&agent, t, &outcome)?;
    }
    Ok(result)
}

pub fn run_replication(scenario: &Scenario, entry: &PolicyEntry, rep: usize) -> Result<ReplicationResult> {
    let instance = scenario.instance_for_replication(rep)?;
    let seed = replication_seed(scenario.seed, rep, &entry.id());
    simulate(&entry.spec, scenario, &instance, seed, |_, _, _| Ok(()))
}

/// Mean cumulative regret per step with its confidence half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    pub policy: String,
    pub mean: Vec<f64>,
    pub ci_half_width: Vec<f64>,
    pub reps: usize,
}

impl RegretCurve {
    /// Aggregates equal-length paths, summing in path order.
    pub fn from_paths(policy: impl Into<String>, paths: &[Vec<f64>]) -> Result<Self> {
        let reps = paths.len();
        if reps == 0 {
            return Err(Error::param("paths", "nothing to aggregate"));
        }
        let horizon = paths[0].len();
        if let Some(p) = paths.iter().find(|p| p.len() != horizon) {
            return Err(Error::DimensionMismatch {
                expected: horizon,
                got: p.len(),
            });
        }
        let n = reps as f64;
        let mut mean = vec![0.0; horizon];
        let mut ci_half_width = vec![0.0; horizon];
        for t in 0..horizon {
            let m = paths.iter().map(|p| p[t]).sum::<f64>() / n;
            mean[t] = m;
            if reps > 1 {
                let ss = paths.iter().map(|p| (p[t] - m).powi(2)).sum::<f64>();
                ci_half_width[t] = CI_Z * (ss / (n - 1.0)).sqrt() / n.sqrt();
            }
        }
        Ok(Self {
            policy: policy.into(),
            mean,
            ci_half_width,
            reps,
        })
    }

    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    pub fn final_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }

    pub fn final_ci(&self) -> f64 {
        self.ci_half_width.last().copied().unwrap_or(0.0)
    }

    /// True when the final intervals of `self` and `other` are disjoint and
    /// `self` is lower.
    pub fn separated_below(&self, other: &RegretCurve) -> bool {
        self.final_mean() + self.final_ci() < other.final_mean() - other.final_ci()
    }
}

/// All replications of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRuns {
    pub policy: String,
    pub spec: PolicySpec,
    pub replications: Vec<ReplicationResult>,
}

impl PolicyRuns {
    pub fn paths(&self) -> Vec<Vec<f64>> {
        self.replications.iter().map(|r| r.cumulative_regret.clone()).collect()
    }

    pub fn curve(&self) -> Result<RegretCurve> {
        RegretCurve::from_paths(&self.policy, &self.paths())
    }
}

/// Runs `reps` replications of every entry on a dedicated pool of `threads`
/// workers (`None` lets rayon decide). Output does not depend on `threads`.
pub fn run_scenario(
    scenario: &Scenario,
    entries: &[PolicyEntry],
    reps: usize,
    threads: Option<usize>,
) -> Result<Vec<PolicyRuns>> {
    if reps == 0 {
        return Err(Error::param("reps", "at least one replication is required"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    let tasks: Vec<(usize, usize)> = (0..entries.len())
        .flat_map(|p| (0..reps).map(move |r| (p, r)))
        .collect();
    let results: Vec<Result<ReplicationResult>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(p, r)| run_replication(scenario, &entries[p], r))
            .collect()
    });
    let mut results = results.into_iter();
    entries
        .iter()
        .map(|entry| {
            let replications = results.by_ref().take(reps).collect::<Result<Vec<_>>>()?;
            Ok(PolicyRuns {
                policy: entry.id(),
                spec: entry.spec.clone(),
                replications,
            })
        })
        .collect()
}

/// Divergence of an approximation from the exact posterior, where it is
/// available in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceNote {
    /// KL(exact ‖ approximate) at the prior.
    pub kl_exact_approx: f64,
    /// KL(approximate ‖ exact) at the prior.
    pub kl_approx_exact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetadata {
    pub id: String,
    pub spec: PolicySpec,
    pub divergence: Option<DivergenceNote>,
}

/// Run description written next to the regret table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub name: String,
    pub version: String,
    pub seed: u64,
    pub horizon: usize,
    pub replications: usize,
    pub reward_sd: f64,
    pub arms: usize,
    pub instance: InstanceSpec,
    pub prior_mean: Vec<f64>,
    pub prior_seed: Option<u64>,
    pub policies: Vec<PolicyMetadata>,
    pub ci_method: String,
    pub dump_trajectories: bool,
}

impl Metadata {
    pub fn describe(config: &ExperimentConfig, prior: &GaussianBelief) -> Result<Self> {
        let policies = config
            .policies
            .iter()
            .map(|entry| {
                let divergence = match entry.spec.approximator() {
                    Some(ApproximatorSpec::ScaledCov { c }) => {
                        let approx = scaled_cov_approx(prior, *c)?;
                        Some(DivergenceNote {
                            kl_exact_approx: kl_gaussian(prior, &approx)?,
                            kl_approx_exact: kl_gaussian(&approx, prior)?,
                        })
                    }
                    _ => None,
                };
                Ok(PolicyMetadata {
                    id: entry.id(),
                    spec: entry.spec.clone(),
                    divergence,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: config.name.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            horizon: config.horizon,
            replications: config.replications,
            reward_sd: config.reward_sd,
            arms: prior.dim(),
            instance: config.instance.clone(),
            prior_mean: prior.mean().as_slice().to_vec(),
            prior_seed: config.prior_seed(),
            policies,
            ci_method: CI_METHOD.to_string(),
            dump_trajectories: config.dump_trajectories,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<PolicyRuns>,
    pub curves: Vec<RegretCurve>,
    pub metadata: Metadata,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let scenario = Scenario::from_config(config)?;
    let runs = run_scenario(&scenario, &config.policies, config.replications, config.threads)?;
    let curves = runs.iter().map(PolicyRuns::curve).collect::<Result<Vec<_>>>()?;
    let metadata = Metadata::describe(config, &scenario.prior)?;
    Ok(ExperimentResult { runs, curves, metadata })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximators::ApproximatorSpec;

    fn scenario(horizon: usize) -> Scenario {
        let prior = GaussianBelief::from_slices(&[0.1, 0.9], &[0.25, 0.0, 0.0, 0.25]).unwrap();
        Scenario::fixed(prior, vec![0.6, 0.5], 0.2, horizon, 7)
    }

    fn entries() -> Vec<PolicyEntry> {
        vec![
            PolicyEntry::new(PolicySpec::ExactTs),
            PolicyEntry::new(PolicySpec::ApproxTs {
                approximator: ApproximatorSpec::ScaledCov { c: 0.3 },
            }),
        ]
    }

    #[test]
    fn aggregation_by_hand() {
        let curve = RegretCurve::from_paths("p", &[vec![0.0, 1.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(curve.mean, vec![0.0, 2.0]);
        let sd = 2f64.sqrt();
        assert!((curve.ci_half_width[1] - 1.96 * sd / 2f64.sqrt()).abs() < 1e-15);
        let single = RegretCurve::from_paths("p", &[vec![0.5]]).unwrap();
        assert_eq!(single.ci_half_width, vec![0.0]);
        assert!(RegretCurve::from_paths("p", &[vec![0.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let s = scenario(60);
        let a = run_scenario(&s, &entries(), 8, Some(1)).unwrap();
        let b = run_scenario(&s, &entries(), 8, Some(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn policies_are_isolated() {
        let s = scenario(60);
        let both = run_scenario(&s, &entries(), 4, Some(2)).unwrap();
        let alone = run_scenario(&s, &entries()[1..], 4, Some(2)).unwrap();
        assert_eq!(both[1], alone[0]);
    }

    #[test]
    fn regret_paths_are_consistent() {
        let s = scenario(50);
        let result = run_replication(&s, &entries()[0], 0).unwrap();
        assert_eq!(result.cumulative_regret.len(), 50);
        assert_eq!(result.pulls.iter().sum::<usize>(), 50);
        let expected = result.pulls[1] as f64 * 0.1;
        assert!((result.cumulative_regret[49] - expected).abs() < 1e-12);
        assert!(result.cumulative_regret.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn bayesian_instances_are_shared_across_policies() {
        let mut s = scenario(5);
        s.instance = InstanceSpec::FromPrior;
        let a = s.instance_for_replication(3).unwrap();
        assert_eq!(a, s.instance_for_replication(3).unwrap());
        assert_ne!(a, s.instance_for_replication(4).unwrap());
    }
}
