//! Two arms, exact Thompson sampling against an over-dispersed and an
//! under-dispersed approximation of the same posterior.
//!
//! `cargo run --release --example motivating_example`

use approx_thompson::approximators::{scaled_cov_approx, ApproximatorSpec};
use approx_thompson::experiment::{run_scenario, PolicyEntry, Scenario};
use approx_thompson::gaussian::{kl_gaussian, GaussianBelief};
use approx_thompson::policy::PolicySpec;

fn main() -> approx_thompson::Result<()> {
    let prior = GaussianBelief::isotropic(&[0.1, 0.9], 0.25)?;
    for c in [4.5, 0.3] {
        let approx = scaled_cov_approx(&prior, c)?;
        println!(
            "c = {c}: KL(P||Q) = {:.4}, KL(Q||P) = {:.4}",
            kl_gaussian(&prior, &approx)?,
            kl_gaussian(&approx, &prior)?
        );
    }

    let scenario = Scenario::fixed(prior, vec![0.6, 0.5], 0.2, 100, 7);
    let entries = [
        PolicyEntry::named("exact", PolicySpec::ExactTs),
        PolicyEntry::named(
            "Q_t (c = 4.5)",
            PolicySpec::ApproxTs {
                approximator: ApproximatorSpec::ScaledCov { c: 4.5 },
            },
        ),
        PolicyEntry::named(
            "Z_t (c = 0.3)",
            PolicySpec::ApproxTs {
                approximator: ApproximatorSpec::ScaledCov { c: 0.3 },
            },
        ),
    ];
    for runs in run_scenario(&scenario, &entries, 1000, None)? {
        let curve = runs.curve()?;
        println!(
            "{:>14}: regret at T = 100 is {:.3} ± {:.3}",
            curve.policy,
            curve.final_mean(),
            curve.final_ci()
        );
    }
    Ok(())
}
