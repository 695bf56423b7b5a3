//! Fifty arms with a random prior covariance. Mean-field and ensemble
//! approximations with and without forced exploration at rate 50/t.
//!
//! `cargo run --release --example fifty_arms -- [replications]`

use approx_thompson::approximators::{mean_field_approx, ApproximatorSpec};
use approx_thompson::experiment::{run_experiment, CovarianceSpec, ExperimentConfig, InstanceSpec, MeanSpec, PolicyEntry, PriorSpec};
use approx_thompson::gaussian::kl_gaussian;
use approx_thompson::policy::{ExplorationSchedule, PolicySpec};

fn main() -> approx_thompson::Result<()> {
    let replications = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let exploration = ExplorationSchedule::new(50.0)?;
    let mut policies = vec![PolicyEntry::new(PolicySpec::ExactTs)];
    for approximator in [
        ApproximatorSpec::MeanField,
        ApproximatorSpec::Ensemble {
            models: 5,
            perturb_sd: None,
        },
    ] {
        policies.push(PolicyEntry::new(PolicySpec::ApproxTs {
            approximator: approximator.clone(),
        }));
        policies.push(PolicyEntry::new(PolicySpec::ForcedExploration { approximator, exploration }));
    }
    let config = ExperimentConfig {
        name: "fifty_arms".into(),
        horizon: 3000,
        replications,
        seed: 13,
        reward_sd: 1.0,
        instance: InstanceSpec::FromPrior,
        prior: PriorSpec {
            arms: Some(50),
            mean: MeanSpec::Scalar(0.0),
            covariance: CovarianceSpec::RandomGram { seed: None },
        },
        policies,
        output: None,
        threads: None,
        dump_trajectories: false,
    };
    config.validate()?;

    let prior = config.resolve_prior()?;
    let mean_field = mean_field_approx(&prior)?;
    println!(
        "prior: KL(mean-field || prior) = {:.3}, KL(prior || mean-field) = {:.3}",
        kl_gaussian(&mean_field, &prior)?,
        kl_gaussian(&prior, &mean_field)?
    );

    let result = run_experiment(&config)?;
    for curve in &result.curves {
        println!("{:>28}: {:8.2} ± {:6.2}", curve.policy, curve.final_mean(), curve.final_ci());
    }
    Ok(())
}
