//! Decision policies built on top of the approximators.
//!
//! | policy               | action from                      | stored state evolves by              |
//! |----------------------|----------------------------------|--------------------------------------|
//! | `exact_ts`           | exact posterior sample           | conjugate update                     |
//! | `approx_ts`          | approximator                     | conjugate update (ensemble: its own) |
//! | `forced_exploration` | uniform arm w.p. `p_t`, else as `approx_ts` | as `approx_ts`            |
//! | `approx_sample`      | approximator                     | conjugate update                     |
//! | `approx_update`      | sample of the stored belief      | projection of the conjugate update   |
//!
//! Every agent draws from three independent streams (see [`Streams`]): action
//! randomness, reward noise and the exploration coin, so exploration counts
//! do not depend on what the approximator consumes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::approximators::{
    adversarial_over_choose, adversarial_under_choose_budgeted, sample_mean_field, ApproximatorSpec,
    EnsembleState,
};
use crate::bandit::BanditInstance;
use crate::error::{Error, Result};
use crate::gaussian::{argmax, GaussianBelief};
use crate::posterior;

/// Exploration probability `p_t = min(1, c / t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorationSchedule {
    pub rate_constant: f64,
}

impl ExplorationSchedule {
    pub fn new(rate_constant: f64) -> Result<Self> {
        let s = Self { rate_constant };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rate_constant > 0.0 && self.rate_constant.is_finite() {
            Ok(())
        } else {
            Err(Error::param(
                "rate_constant",
                format!("must be positive, got {}", self.rate_constant),
            ))
        }
    }

    /// `t` starts at 1.
    pub fn probability(&self, t: usize) -> f64 {
        debug_assert!(t >= 1);
        (self.rate_constant / t as f64).min(1.0)
    }

    /// `sum_{t=1..=horizon} p_t`.
    pub fn expected_forced_pulls(&self, horizon: usize) -> f64 {
        (1..=horizon).map(|t| self.probability(t)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    ExactTs,
    ApproxTs {
        approximator: ApproximatorSpec,
    },
    ForcedExploration {
        approximator: ApproximatorSpec,
        exploration: ExplorationSchedule,
    },
    ApproxSample {
        approximator: ApproximatorSpec,
    },
    ApproxUpdate {
        approximator: ApproximatorSpec,
    },
}

impl PolicySpec {
    pub fn approximator(&self) -> Option<&ApproximatorSpec> {
        match self {
            PolicySpec::ExactTs => None,
            PolicySpec::ApproxTs { approximator }
            | PolicySpec::ForcedExploration { approximator, .. }
            | PolicySpec::ApproxSample { approximator }
            | PolicySpec::ApproxUpdate { approximator } => Some(approximator),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.approximator() {
            a.validate()?;
        }
        match self {
            PolicySpec::ForcedExploration { exploration, .. } => exploration.validate(),
            PolicySpec::ApproxUpdate { approximator } if approximator.is_adversarial() => Err(Error::param(
                "approximator",
                "adversarial constructions act on arm choices and cannot be stored as a belief",
            )),
            _ => Ok(()),
        }
    }

    /// Label used when a config does not name the policy.
    pub fn default_id(&self) -> String {
        match self {
            PolicySpec::ExactTs => "exact_ts".into(),
            PolicySpec::ApproxTs { approximator } => approximator.label(),
            PolicySpec::ForcedExploration {
                approximator,
                exploration,
            } => format!("forced[{}/t]:{}", exploration.rate_constant, approximator.label()),
            PolicySpec::ApproxSample { approximator } => format!("approx_sample:{}", approximator.label()),
            PolicySpec::ApproxUpdate { approximator } => format!("approx_update:{}", approximator.label()),
        }
    }
}

/// The three random streams an agent consumes.
#[derive(Debug, Clone)]
pub struct Streams {
    pub action: ChaCha8Rng,
    pub reward: ChaCha8Rng,
    pub explore: ChaCha8Rng,
}

impl Streams {
    pub fn from_seed(seed: u64) -> Self {
        let stream = |id| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            action: stream(0),
            reward: stream(1),
            explore: stream(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub arm: usize,
    pub reward: f64,
    pub explored: bool,
}

#[derive(Debug, Clone)]
enum State {
    Belief(GaussianBelief),
    Ensemble(EnsembleState),
}

/// One policy running on one trajectory.
#[derive(Debug, Clone)]
pub struct Agent {
    spec: PolicySpec,
    noise_sd: f64,
    state: State,
}

impl Agent {
    /// Ensemble-backed policies draw their models from `prior` using the
    /// action stream.
    pub fn new(spec: PolicySpec, prior: &GaussianBelief, noise_sd: f64, streams: &mut Streams) -> Result<Self> {
        spec.validate()?;
        if !(noise_sd > 0.0) {
            return Err(Error::param("noise_sd", format!("must be positive, got {noise_sd}")));
        }
        if let Some(a) = spec.approximator() {
            if a.is_adversarial() && prior.dim() != 2 {
                return Err(Error::param("approximator", "adversarial constructions need exactly two arms"));
            }
        }
        let state = match (&spec, spec.approximator()) {
            (
                PolicySpec::ApproxTs { .. } | PolicySpec::ForcedExploration { .. } | PolicySpec::ApproxUpdate { .. },
                Some(ApproximatorSpec::Ensemble { models, perturb_sd }),
            ) => State::Ensemble(EnsembleState::init(prior, *models, *perturb_sd, &mut streams.action)?),
            (PolicySpec::ApproxUpdate { approximator }, _) => State::Belief(approximator.project(prior)?),
            _ => State::Belief(prior.clone()),
        };
        Ok(Self { spec, noise_sd, state })
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    /// The stored Gaussian belief; `None` for ensemble-backed agents.
    pub fn belief(&self) -> Option<&GaussianBelief> {
        match &self.state {
            State::Belief(b) => Some(b),
            State::Ensemble(_) => None,
        }
    }

    pub fn ensemble(&self) -> Option<&EnsembleState> {
        match &self.state {
            State::Ensemble(e) => Some(e),
            State::Belief(_) => None,
        }
    }

    /// Plays step `t` (1-based) against `instance`.
    pub fn step(&mut self, instance: &BanditInstance, t: usize, streams: &mut Streams) -> Result<StepOutcome> {
        if t == 0 {
            return Err(Error::param("t", "steps are numbered from 1"));
        }
        let k = instance.arms();
        let dim = match &self.state {
            State::Belief(b) => b.dim(),
            State::Ensemble(e) => e.cov().nrows(),
        };
        if dim != k {
            return Err(Error::DimensionMismatch { expected: dim, got: k });
        }

        let mut explored = false;
        if let PolicySpec::ForcedExploration { exploration, .. } = &self.spec {
            if streams.explore.random::<f64>() < exploration.probability(t) {
                explored = true;
            }
        }

        let arm = if explored {
            streams.explore.random_range(0..k)
        } else {
            self.choose(&mut streams.action)?
        };
        let reward = instance.pull(arm, &mut streams.reward)?;
        self.observe(arm, reward, &mut streams.action)?;
        Ok(StepOutcome { arm, reward, explored })
    }

    fn choose(&self, rng: &mut ChaCha8Rng) -> Result<usize> {
        match (&self.spec, &self.state) {
            (_, State::Ensemble(e)) => Ok(e.act(rng)),
            (PolicySpec::ExactTs | PolicySpec::ApproxUpdate { .. }, State::Belief(b)) => {
                Ok(argmax(b.sample(rng).as_slice()))
            }
            (
                PolicySpec::ApproxTs { approximator }
                | PolicySpec::ForcedExploration { approximator, .. }
                | PolicySpec::ApproxSample { approximator },
                State::Belief(b),
            ) => choose_with(approximator, b, rng),
        }
    }

    fn observe(&mut self, arm: usize, reward: f64, rng: &mut ChaCha8Rng) -> Result<()> {
        let noise_sd = self.noise_sd;
        match &mut self.state {
            State::Ensemble(e) => e.update(arm, reward, noise_sd, rng),
            State::Belief(b) => {
                let next = posterior::update(b, arm, reward, noise_sd)?;
                *b = match &self.spec {
                    PolicySpec::ApproxUpdate { approximator } => approximator.project(&next)?,
                    _ => next,
                };
                Ok(())
            }
        }
    }
}

/// Action of `approximator` given the exact `belief`.
///
/// An ensemble here is rebuilt from the belief at every call: M fresh draws
/// from the posterior, one of which is chosen uniformly.
pub fn choose_with<R: Rng + ?Sized>(approximator: &ApproximatorSpec, belief: &GaussianBelief, rng: &mut R) -> Result<usize> {
    match *approximator {
        ApproximatorSpec::Exact => Ok(argmax(belief.sample(rng).as_slice())),
        ApproximatorSpec::ScaledCov { c } => {
            // μ + c·Lz is a draw from Norm(μ, c²Σ) without refactorizing.
            let draw = belief.sample(rng);
            let scaled = belief.mean() + (draw - belief.mean()) * c;
            Ok(argmax(scaled.as_slice()))
        }
        ApproximatorSpec::MeanField => Ok(argmax(sample_mean_field(belief, rng)?.as_slice())),
        ApproximatorSpec::Ensemble { models, perturb_sd } => {
            Ok(EnsembleState::init(belief, models, perturb_sd, rng)?.act(rng))
        }
        ApproximatorSpec::AdversarialOver { alpha, epsilon } => adversarial_over_choose(belief, alpha, epsilon, rng),
        ApproximatorSpec::AdversarialUnder { budget } => adversarial_under_choose_budgeted(belief, budget, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximators::DivergenceBudget;

    fn motivating_prior() -> GaussianBelief {
        GaussianBelief::isotropic(&[0.1, 0.9], 0.25).unwrap()
    }

    fn motivating_instance() -> BanditInstance {
        BanditInstance::new(vec![0.6, 0.5], 0.2).unwrap()
    }

    fn run(spec: PolicySpec, seed: u64, horizon: usize) -> (Vec<StepOutcome>, Agent) {
        let mut streams = Streams::from_seed(seed);
        let inst = motivating_instance();
        let mut agent = Agent::new(spec, &motivating_prior(), inst.reward_sd(), &mut streams).unwrap();
        let outcomes = (1..=horizon).map(|t| agent.step(&inst, t, &mut streams).unwrap()).collect();
        (outcomes, agent)
    }

    #[test]
    fn schedule_saturates_early() {
        let s = ExplorationSchedule::new(50.0).unwrap();
        for t in 1..=50 {
            assert_eq!(s.probability(t), 1.0);
        }
        assert_eq!(s.probability(100), 0.5);
        assert!(ExplorationSchedule::new(0.0).is_err());
    }

    #[test]
    fn forced_exploration_at_saturation_is_uniform() {
        let spec = PolicySpec::ForcedExploration {
            approximator: ApproximatorSpec::AdversarialUnder { budget: None },
            exploration: ExplorationSchedule::new(200.0).unwrap(),
        };
        let (outcomes, _) = run(spec, 1, 200);
        assert!(outcomes.iter().all(|o| o.explored));
        let arm0 = outcomes.iter().filter(|o| o.arm == 0).count();
        // Binomial(200, 1/2) within 4 sd.
        assert!((arm0 as f64 - 100.0).abs() < 4.0 * 50f64.sqrt());
    }

    #[test]
    fn exact_ts_on_point_mass() {
        let prior = GaussianBelief::isotropic(&[1.0, 0.0], 1e-12).unwrap();
        let inst = BanditInstance::new(vec![1.0, 0.0], 1.0).unwrap();
        let mut streams = Streams::from_seed(2);
        let mut agent = Agent::new(PolicySpec::ExactTs, &prior, 1.0, &mut streams).unwrap();
        let n = 10_000;
        let best = (1..=n)
            .filter(|&t| agent.step(&inst, t, &mut streams).unwrap().arm == 0)
            .count();
        assert!(best as f64 / n as f64 >= 0.999);
    }

    #[test]
    fn under_construction_always_plays_second_arm() {
        let spec = PolicySpec::ApproxTs {
            approximator: ApproximatorSpec::AdversarialUnder { budget: None },
        };
        let (outcomes, _) = run(spec, 3, 300);
        assert!(outcomes.iter().all(|o| o.arm == 1));
    }

    #[test]
    fn approx_ts_and_approx_sample_share_belief_evolution() {
        for approximator in [
            ApproximatorSpec::ScaledCov { c: 0.3 },
            ApproximatorSpec::MeanField,
            ApproximatorSpec::AdversarialOver { alpha: 2.0, epsilon: 0.5 },
        ] {
            let (a, agent_a) = run(PolicySpec::ApproxTs { approximator: approximator.clone() }, 8, 60);
            let (b, agent_b) = run(PolicySpec::ApproxSample { approximator }, 8, 60);
            assert_eq!(a, b);
            assert_eq!(agent_a.belief(), agent_b.belief());
        }
    }

    #[test]
    fn approx_update_scales_the_stored_covariance() {
        let spec = PolicySpec::ApproxUpdate {
            approximator: ApproximatorSpec::ScaledCov { c: 2.0 },
        };
        let mut streams = Streams::from_seed(4);
        let prior = motivating_prior();
        let inst = motivating_instance();
        let mut agent = Agent::new(spec, &prior, 0.2, &mut streams).unwrap();
        // The stored belief starts as the projected prior.
        assert!((agent.belief().unwrap().cov()[(1, 1)] - 1.0).abs() < 1e-15);
        let before = agent.belief().unwrap().clone();
        let out = agent.step(&inst, 1, &mut streams).unwrap();
        let expected = posterior::update(&before, out.arm, out.reward, 0.2).unwrap();
        assert!((agent.belief().unwrap().cov() - expected.cov() * 4.0).amax() < 1e-14);
    }

    #[test]
    fn approx_update_rejects_adversarial() {
        let spec = PolicySpec::ApproxUpdate {
            approximator: ApproximatorSpec::AdversarialUnder { budget: None },
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn ensemble_agents_keep_no_exact_belief() {
        let spec = PolicySpec::ApproxTs {
            approximator: ApproximatorSpec::Ensemble { models: 2, perturb_sd: None },
        };
        let (_, agent) = run(spec.clone(), 5, 20);
        assert!(agent.belief().is_none());
        assert_eq!(agent.ensemble().unwrap().observations(), 20);
        let sample = PolicySpec::ApproxSample {
            approximator: ApproximatorSpec::Ensemble { models: 2, perturb_sd: None },
        };
        let (_, agent) = run(sample, 5, 20);
        assert!(agent.belief().is_some());
    }

    #[test]
    fn exploration_draws_do_not_depend_on_the_approximator() {
        let schedule = ExplorationSchedule::new(5.0).unwrap();
        let flags = |approximator| {
            let (out, _) = run(PolicySpec::ForcedExploration { approximator, exploration: schedule }, 12, 200);
            out.iter().map(|o| o.explored).collect::<Vec<_>>()
        };
        assert_eq!(
            flags(ApproximatorSpec::MeanField),
            flags(ApproximatorSpec::Ensemble { models: 3, perturb_sd: None })
        );
    }

    #[test]
    fn budgeted_under_policy_runs() {
        let spec = PolicySpec::ApproxTs {
            approximator: ApproximatorSpec::AdversarialUnder {
                budget: Some(DivergenceBudget { alpha: 0.0, epsilon: 1.0 }),
            },
        };
        let (out, _) = run(spec, 6, 50);
        assert_eq!(out.len(), 50);
    }

    #[test]
    fn default_ids_are_distinct() {
        let a = ApproximatorSpec::ScaledCov { c: 0.3 };
        let ids: Vec<String> = [
            PolicySpec::ExactTs,
            PolicySpec::ApproxTs { approximator: a.clone() },
            PolicySpec::ForcedExploration {
                approximator: a.clone(),
                exploration: ExplorationSchedule { rate_constant: 1.0 },
            },
            PolicySpec::ApproxSample { approximator: a.clone() },
            PolicySpec::ApproxUpdate { approximator: a },
        ]
        .iter()
        .map(PolicySpec::default_id)
        .collect();
        let mut unique = ids.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), ids.len());
    }
}
