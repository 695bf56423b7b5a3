//! k-armed Gaussian bandit and pseudo-regret accounting.
//!
//! Arms are zero-indexed throughout the crate.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::argmax;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    true_means: Vec<f64>,
    reward_sd: f64,
}

impl BanditInstance {
    pub fn new(true_means: Vec<f64>, reward_sd: f64) -> Result<Self> {
        if true_means.len() < 2 {
            return Err(Error::param("true_means", "a bandit needs at least two arms"));
        }
        if true_means.iter().any(|m| !m.is_finite()) {
            return Err(Error::param("true_means", "means must be finite"));
        }
        if !(reward_sd > 0.0 && reward_sd.is_finite()) {
            return Err(Error::param("reward_sd", format!("must be positive, got {reward_sd}")));
        }
        Ok(Self {
            true_means,
            reward_sd,
        })
    }

    pub fn arms(&self) -> usize {
        self.true_means.len()
    }

    pub fn true_means(&self) -> &[f64] {
        &self.true_means
    }

    pub fn reward_sd(&self) -> f64 {
        self.reward_sd
    }

    pub fn best_arm(&self) -> usize {
        argmax(&self.true_means)
    }

    pub fn best_mean(&self) -> f64 {
        self.true_means[self.best_arm()]
    }

    /// Gap `m*_best - m*_arm`.
    pub fn gap(&self, arm: usize) -> Result<f64> {
        self.check_arm(arm)?;
        Ok(self.best_mean() - self.true_means[arm])
    }

    fn check_arm(&self, arm: usize) -> Result<()> {
        if arm >= self.arms() {
            Err(Error::ArmOutOfRange {
                arm,
                arms: self.arms(),
            })
        } else {
            Ok(())
        }
    }

    /// Draws a reward `Norm(m*_arm, sd^2)`.
    pub fn pull<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> Result<f64> {
        self.check_arm(arm)?;
        let z: f64 = rng.sample(StandardNormal);
        Ok(self.true_means[arm] + self.reward_sd * z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub step: usize,
    pub arm: usize,
    pub reward: f64,
}

/// Pseudo-regret `T * m*_best - sum_t m*_{A_t}` of a trajectory.
pub fn cumulative_regret(instance: &BanditInstance, trajectory: &[HistoryRecord]) -> Result<f64> {
    let mut total = 0.0;
    for record in trajectory {
        total += instance.gap(record.arm)?;
    }
    Ok(total)
}

/// Checks that steps strictly increase and arms are in range.
pub fn validate_trajectory(instance: &BanditInstance, trajectory: &[HistoryRecord]) -> Result<()> {
    for pair in trajectory.windows(2) {
        if pair[1].step <= pair[0].step {
            return Err(Error::param(
                "trajectory",
                format!("step {} does not follow step {}", pair[1].step, pair[0].step),
            ));
        }
    }
    for record in trajectory {
        instance.check_arm(record.arm)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn records(arms: &[usize]) -> Vec<HistoryRecord> {
        arms.iter()
            .enumerate()
            .map(|(i, &arm)| HistoryRecord {
                step: i + 1,
                arm,
                reward: 0.0,
            })
            .collect()
    }

    #[test]
    fn noiseless_pull_returns_mean() {
        let inst = BanditInstance::new(vec![0.6, 0.5, -2.0], 1e-12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for arm in 0..3 {
            let r = inst.pull(arm, &mut rng).unwrap();
            assert!((r - inst.true_means()[arm]).abs() < 1e-9);
        }
    }

    #[test]
    fn pulls_have_the_right_mean() {
        let inst = BanditInstance::new(vec![0.6, 0.5], 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| inst.pull(0, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 0.6).abs() < 3.0 * 0.2 / (n as f64).sqrt());
    }

    #[test]
    fn pulls_are_deterministic_per_seed() {
        let inst = BanditInstance::new(vec![0.6, 0.5], 0.2).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|i| inst.pull(i % 2, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(4), draw(4));
    }

    #[test]
    fn pull_out_of_range() {
        let inst = BanditInstance::new(vec![0.6, 0.5], 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(inst.pull(2, &mut rng), Err(Error::ArmOutOfRange { arm: 2, arms: 2 })));
    }

    #[test]
    fn regret_examples() {
        let inst = BanditInstance::new(vec![0.6, 0.5], 0.2).unwrap();
        assert_eq!(cumulative_regret(&inst, &[]).unwrap(), 0.0);
        assert_eq!(cumulative_regret(&inst, &records(&[0; 50])).unwrap(), 0.0);
        let r = cumulative_regret(&inst, &records(&[1; 100])).unwrap();
        assert!((r - 10.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_instances() {
        assert!(BanditInstance::new(vec![1.0], 1.0).is_err());
        assert!(BanditInstance::new(vec![1.0, 0.0], 0.0).is_err());
        let inst = BanditInstance::new(vec![1.0, 0.0], 1.0).unwrap();
        let mut bad = records(&[0, 1]);
        bad[1].step = 1;
        assert!(validate_trajectory(&inst, &bad).is_err());
    }

    proptest! {
        #[test]
        fn regret_properties(
            means in prop::collection::vec(-5.0f64..5.0, 2..6),
            picks in prop::collection::vec(0usize..64, 0..80),
            shift in -10.0f64..10.0,
        ) {
            let k = means.len();
            let arms: Vec<usize> = picks.iter().map(|p| p % k).collect();
            let inst = BanditInstance::new(means.clone(), 1.0).unwrap();
            let shifted = BanditInstance::new(means.iter().map(|m| m + shift).collect(), 1.0).unwrap();
            let traj = records(&arms);

            let mut previous = 0.0;
            for len in 0..=traj.len() {
                let r = cumulative_regret(&inst, &traj[..len]).unwrap();
                prop_assert!(r >= 0.0);
                prop_assert!(r >= previous);
                previous = r;
            }
            let total = cumulative_regret(&inst, &traj).unwrap();
            let spread = means.iter().cloned().fold(f64::MIN, f64::max)
                - means.iter().cloned().fold(f64::MAX, f64::min);
            prop_assert!(total <= traj.len() as f64 * spread + 1e-9);
            let total_shifted = cumulative_regret(&shifted, &traj).unwrap();
            prop_assert!((total - total_shifted).abs() < 1e-9 * (1.0 + total));
        }
    }
}
