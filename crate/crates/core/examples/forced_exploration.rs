//! Forced exploration at rate c/t around each approximation of the two-arm
//! example, plus ensemble sampling driven by the exact posterior.
//!
//! `cargo run --release --example forced_exploration`

use approx_thompson::approximators::ApproximatorSpec;
use approx_thompson::experiment::{run_scenario, PolicyEntry, Scenario};
use approx_thompson::gaussian::GaussianBelief;
use approx_thompson::policy::{ExplorationSchedule, PolicySpec};

fn main() -> approx_thompson::Result<()> {
    let prior = GaussianBelief::isotropic(&[0.1, 0.9], 0.25)?;
    let scenario = Scenario::fixed(prior, vec![0.6, 0.5], 0.2, 100, 11);
    let exploration = ExplorationSchedule::new(1.0)?;
    println!("expected forced pulls over 100 steps: {:.2}", exploration.expected_forced_pulls(100));

    let approximators = [
        ApproximatorSpec::ScaledCov { c: 4.5 },
        ApproximatorSpec::ScaledCov { c: 0.3 },
        ApproximatorSpec::Ensemble {
            models: 2,
            perturb_sd: None,
        },
    ];
    let mut entries = vec![PolicyEntry::new(PolicySpec::ExactTs)];
    for approximator in approximators {
        entries.push(PolicyEntry::new(PolicySpec::ApproxTs {
            approximator: approximator.clone(),
        }));
        entries.push(PolicyEntry::new(PolicySpec::ForcedExploration {
            approximator: approximator.clone(),
            exploration,
        }));
        entries.push(PolicyEntry::new(PolicySpec::ApproxSample { approximator }));
    }
    for runs in run_scenario(&scenario, &entries, 1000, None)? {
        let curve = runs.curve()?;
        let explored: usize = runs.replications.iter().map(|r| r.explored).sum();
        println!(
            "{:>36}: {:.3} ± {:.3}  (forced pulls per run {:.2})",
            curve.policy,
            curve.final_mean(),
            curve.final_ci(),
            explored as f64 / runs.replications.len() as f64
        );
    }
    Ok(())
}
