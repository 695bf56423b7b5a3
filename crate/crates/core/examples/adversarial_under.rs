//! The under-exploring construction: restricting the posterior to the region
//! where the worse arm looks best. Its best-arm mass never moves, so regret
//! grows linearly. Forced exploration around a budgeted restriction lets the
//! posterior concentrate again.
//!
//! `cargo run --release --example adversarial_under`

use approx_thompson::approximators::{divergence_of_under_construction, ApproximatorSpec, DivergenceBudget};
use approx_thompson::experiment::{run_scenario, simulate, PolicyEntry, Scenario};
use approx_thompson::gaussian::{two_arm_best_probability, GaussianBelief};
use approx_thompson::policy::{ExplorationSchedule, PolicySpec};

fn main() -> approx_thompson::Result<()> {
    // Cov(M2, M1 - M2) = 1 - 1 = 0: pulling arm 2 says nothing about which arm is better.
    let prior = GaussianBelief::from_slices(&[0.0, 0.0], &[2.0, 1.0, 1.0, 1.0])?;
    let pi2 = 1.0 - two_arm_best_probability(&prior);
    for alpha in [-1.0, 0.0, 0.5] {
        println!("D_{alpha}(posterior, restriction) = {:.4}", divergence_of_under_construction(pi2, alpha)?);
    }

    let scenario = Scenario::fixed(prior, vec![0.5, 0.0], 1.0, 5000, 23);
    let pure = PolicySpec::ApproxTs {
        approximator: ApproximatorSpec::AdversarialUnder { budget: None },
    };
    let instance = scenario.instance_for_replication(0)?;
    simulate(&pure, &scenario, &instance, 5, |agent, t, _| {
        if t == 1 || t % 1000 == 0 {
            let pi2 = 1.0 - two_arm_best_probability(agent.belief().expect("exact belief"));
            println!("restriction, t = {t:4}: P(arm 2 best) = {pi2:.6}");
        }
        Ok(())
    })?;

    let budgeted = ApproximatorSpec::AdversarialUnder {
        budget: Some(DivergenceBudget { alpha: 0.0, epsilon: 1.0 }),
    };
    let entries = [
        PolicyEntry::named("restriction", pure),
        PolicyEntry::named(
            "budgeted + forced 50/t",
            PolicySpec::ForcedExploration {
                approximator: budgeted,
                exploration: ExplorationSchedule::new(50.0)?,
            },
        ),
    ];
    for runs in run_scenario(&scenario, &entries, 50, None)? {
        let curve = runs.curve()?;
        println!("{:>24}: regret at T = 5000 is {:.1} ± {:.1}", curve.policy, curve.final_mean(), curve.final_ci());
    }
    Ok(())
}
