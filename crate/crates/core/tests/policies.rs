//! Statistical properties of whole trajectories.

use approx_thompson::approximators::ApproximatorSpec;
use approx_thompson::experiment::{replication_seed, run_scenario, simulate, PolicyEntry, Scenario};
use approx_thompson::gaussian::{two_arm_best_probability, GaussianBelief};
use approx_thompson::policy::{ExplorationSchedule, PolicySpec};

fn motivating(horizon: usize, seed: u64) -> Scenario {
    let prior = GaussianBelief::isotropic(&[0.1, 0.9], 0.25).unwrap();
    Scenario::fixed(prior, vec![0.6, 0.5], 0.2, horizon, seed)
}

fn decoupled(horizon: usize, seed: u64) -> Scenario {
    let prior = GaussianBelief::from_slices(&[0.0, 0.0], &[2.0, 1.0, 1.0, 1.0]).unwrap();
    Scenario::fixed(prior, vec![0.5, 0.0], 1.0, horizon, seed)
}

fn arm_frequencies(scenario: &Scenario, entry: PolicyEntry, reps: usize) -> Vec<f64> {
    let runs = run_scenario(scenario, &[entry], reps, None).unwrap();
    let mut pulls = vec![0usize; scenario.prior.dim()];
    for r in &runs[0].replications {
        for (total, n) in pulls.iter_mut().zip(&r.pulls) {
            *total += n;
        }
    }
    let total: usize = pulls.iter().sum();
    pulls.iter().map(|&n| n as f64 / total as f64).collect()
}

#[test]
fn large_ensembles_act_like_exact_thompson_sampling() {
    let scenario = motivating(50, 31);
    let exact = arm_frequencies(&scenario, PolicyEntry::new(PolicySpec::ExactTs), 400);
    let ensemble = arm_frequencies(
        &scenario,
        PolicyEntry::new(PolicySpec::ApproxTs {
            approximator: ApproximatorSpec::Ensemble {
                models: 512,
                perturb_sd: None,
            },
        }),
        400,
    );
    let tv = 0.5 * exact.iter().zip(&ensemble).map(|(a, b)| (a - b).abs()).sum::<f64>();
    assert!(tv <= 0.05, "exact {exact:?}, ensemble {ensemble:?}, tv {tv}");
}

#[test]
fn forced_pull_count_matches_schedule() {
    let (horizon, reps) = (1000, 200);
    let schedule = ExplorationSchedule::new(5.0).unwrap();
    let scenario = motivating(horizon, 37);
    let entry = PolicyEntry::new(PolicySpec::ForcedExploration {
        approximator: ApproximatorSpec::ScaledCov { c: 0.3 },
        exploration: schedule,
    });
    let runs = run_scenario(&scenario, &[entry], reps, None).unwrap();
    let mean = runs[0].replications.iter().map(|r| r.explored as f64).sum::<f64>() / reps as f64;
    let expected = schedule.expected_forced_pulls(horizon);
    let variance: f64 = (1..=horizon)
        .map(|t| {
            let p = schedule.probability(t);
            p * (1.0 - p)
        })
        .sum();
    let sd_of_mean = (variance / reps as f64).sqrt();
    assert!(
        (mean - expected).abs() <= 3.0 * sd_of_mean,
        "mean {mean}, expected {expected}, sd {sd_of_mean}"
    );
}

#[test]
fn forced_exploration_concentrates_the_posterior() {
    let scenario = decoupled(2000, 41);
    let instance = scenario.instance_for_replication(0).unwrap();
    for approximator in [
        ApproximatorSpec::AdversarialUnder { budget: None },
        ApproximatorSpec::ScaledCov { c: 0.3 },
    ] {
        let entry = PolicyEntry::new(PolicySpec::ForcedExploration {
            approximator,
            exploration: ExplorationSchedule::new(50.0).unwrap(),
        });
        let (mut early, mut late) = (Vec::new(), Vec::new());
        for rep in 0..60 {
            let seed = replication_seed(scenario.seed, rep, &entry.id());
            simulate(&entry.spec, &scenario, &instance, seed, |agent, t, _| {
                let best = two_arm_best_probability(agent.belief().unwrap());
                match t {
                    200 => early.push(best),
                    2000 => late.push(best),
                    _ => {}
                }
                Ok(())
            })
            .unwrap();
        }
        let median = |v: &mut Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        let (e, l) = (median(&mut early), median(&mut late));
        assert!(l > e, "{}: median {e} at t=200, {l} at t=2000", entry.id());
    }
}

#[test]
fn restriction_leaves_the_best_arm_mass_unchanged() {
    let scenario = decoupled(300, 43);
    let instance = scenario.instance_for_replication(0).unwrap();
    let spec = PolicySpec::ApproxTs {
        approximator: ApproximatorSpec::AdversarialUnder { budget: None },
    };
    let pi0 = two_arm_best_probability(&scenario.prior);
    let result = simulate(&spec, &scenario, &instance, 3, |agent, _, outcome| {
        assert_eq!(outcome.arm, 1);
        let pi = two_arm_best_probability(agent.belief().unwrap());
        assert!((pi - pi0).abs() < 1e-9, "{pi} vs {pi0}");
        Ok(())
    })
    .unwrap();
    assert_eq!(result.pulls, vec![0, 300]);
}

#[test]
fn nearly_noiseless_rewards_stop_regret_growth() {
    let prior = GaussianBelief::isotropic(&[0.0, 0.0], 1.0).unwrap();
    let scenario = Scenario::fixed(prior, vec![1.0, 0.0], 1e-6, 200, 47);
    let runs = run_scenario(&scenario, &[PolicyEntry::new(PolicySpec::ExactTs)], 1, Some(1)).unwrap();
    let path = &runs[0].replications[0].cumulative_regret;
    assert!(path[199] <= 2.0, "regret {}", path[199]);
    assert_eq!(path[199], path[99]);
    assert_eq!(runs[0].curve().unwrap().ci_half_width[199], 0.0);
}
