//! The over-exploring construction: an approximation within α-divergence ε
//! of every posterior that still pays linear regret.
//!
//! `cargo run --release --example adversarial_over`

use approx_thompson::approximators::{over_construction_masses, ApproximatorSpec};
use approx_thompson::experiment::{run_scenario, simulate, PolicyEntry, Scenario};
use approx_thompson::gaussian::{two_arm_best_probability, GaussianBelief};
use approx_thompson::policy::PolicySpec;
use approx_thompson::theory::{r_from_epsilon, regret_lower_bound};
use approx_thompson::validation::over_construction_grid_divergence;

fn main() -> approx_thompson::Result<()> {
    let (alpha, epsilon) = (2.0, 0.5);
    let r = r_from_epsilon(alpha, epsilon)?;
    println!("alpha = {alpha}, epsilon = {epsilon}: r = {r}");

    let prior = GaussianBelief::isotropic(&[0.1, 0.9], 0.25)?;
    let scenario = Scenario::fixed(prior, vec![0.6, 0.5], 0.2, 500, 17);
    let spec = PolicySpec::ApproxTs {
        approximator: ApproximatorSpec::AdversarialOver { alpha, epsilon },
    };
    let runs = run_scenario(&scenario, &[PolicyEntry::new(spec.clone())], 200, None)?;
    let curve = runs[0].curve()?;
    println!(
        "per-step regret {:.4} ± {:.4}, lower bound {:.4}",
        curve.final_mean() / 500.0,
        curve.final_ci() / 500.0,
        regret_lower_bound(alpha, epsilon, 0.1, 1.0)?
    );

    let instance = scenario.instance_for_replication(0)?;
    simulate(&spec, &scenario, &instance, 1, |agent, t, _| {
        if t % 100 == 0 {
            let belief = agent.belief().expect("exact belief");
            let pi1 = two_arm_best_probability(belief);
            let masses = over_construction_masses(pi1, r);
            let divergence = over_construction_grid_divergence(belief, alpha, epsilon)?;
            println!(
                "t = {t:3}: posterior best-arm mass {pi1:.6}, construction plays arm 0 w.p. {:.4}, gridded D = {divergence:.5}",
                masses[0]
            );
        }
        Ok(())
    })?;
    Ok(())
}
