//! Invariant checks run by `approx-thompson validate`.
//!
//! Each check returns a named [`CheckOutcome`]. A check that cannot be
//! evaluated (a factorization or coverage failure) returns `Err` instead, so
//! callers can tell a numeric failure from a failed invariant.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::approximators::{
    divergence_of_under_construction, over_construction_density, under_construction_density, ApproximatorSpec,
};
use crate::divergence::{alpha_div_grid, alpha_div_masses, data_processing_check, AlphaParam, Grid, GridAxis, GriddedDensity, Partition};
use crate::error::Result;
use crate::experiment::output::{write_regret_csv, write_trajectories_csv};
use crate::experiment::{run_scenario, PolicyEntry, PolicyRuns, Scenario};
use crate::gaussian::{best_arm_marginal_mc, kl_gaussian, two_arm_best_probability, GaussianBelief};
use crate::policy::PolicySpec;
use crate::posterior;
use crate::theory::{epsilon_bound_from_r, r_from_epsilon};

/// Seed of the validation suite.
pub const VALIDATION_SEED: u64 = 20_240_607;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

fn a(alpha: f64) -> AlphaParam {
    AlphaParam::new(alpha).expect("literal alpha is finite")
}

fn random_belief<R: Rng>(k: usize, rng: &mut R) -> Result<GaussianBelief> {
    let mean = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
    let a = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.6);
    let cov = &a * a.transpose() + DMatrix::identity(k, k) * 0.3;
    GaussianBelief::new(mean, cov)
}

/// Integration grid for two-arm densities that jump across the tie line
/// `m1 = m2`.
///
/// Nodes live in coordinates `(ξ, v)` with `m1 - m2 = √2 s sinh(ξ)` and
/// `m1 + m2 = √2 v`. The `ξ` nodes sit at half-integer multiples of the
/// spacing, so no node lies on the tie line and each side is integrated by a
/// midpoint rule; spacing is finest next to the line. `s` is the length scale on which the belief's mass
/// near the tie line varies. Tabulated values include the Jacobian, so
/// masses and divergences computed on the grid are those of the original
/// densities.
#[derive(Debug, Clone)]
pub struct TieLineGrid {
    grid: Grid,
    scale: f64,
}

impl TieLineGrid {
    /// `ξ` spacing; the error at the jump is of order `h_ξ² / 24` relative to
    /// the mass near the tie line.
    pub const XI_STEP: f64 = 2e-3;
    pub const V_POINTS: usize = 201;

    pub fn around(belief: &GaussianBelief) -> Result<Self> {
        let (mu, cov) = (belief.mean(), belief.cov());
        if mu.len() != 2 {
            return Err(crate::Error::DimensionMismatch { expected: 2, got: mu.len() });
        }
        let sqrt2 = std::f64::consts::SQRT_2;
        let mu_u = (mu[0] - mu[1]) / sqrt2;
        let mu_v = (mu[0] + mu[1]) / sqrt2;
        let var_u = 0.5 * (cov[(0, 0)] + cov[(1, 1)] - 2.0 * cov[(0, 1)]);
        let var_v = 0.5 * (cov[(0, 0)] + cov[(1, 1)] + 2.0 * cov[(0, 1)]);
        let cov_uv = 0.5 * (cov[(0, 0)] - cov[(1, 1)]);
        let (sd_u, sd_v) = (var_u.sqrt(), var_v.sqrt());
        if !(sd_u > 0.0) {
            return Err(crate::Error::NotPositiveDefinite("belief is degenerate across the tie line".into()));
        }
        let scale = sd_u * (sd_u / mu_u.abs()).min(1.0);
        let reach = (mu_u.abs() + 10.0 * sd_u).max(20.0 * scale);
        let xi_max = (reach / scale).asinh();
        let half_steps = (xi_max / Self::XI_STEP).ceil() as usize;
        let xi_max = (half_steps as f64 - 0.5) * Self::XI_STEP;
        let drift = cov_uv.abs() / var_u * (reach + mu_u.abs());
        let v_half = 10.0 * sd_v + drift;
        let grid = Grid::new(vec![
            GridAxis::new(-xi_max, xi_max, 2 * half_steps)?,
            GridAxis::new(mu_v - v_half, mu_v + v_half, Self::V_POINTS)?,
        ])?;
        Ok(Self { grid, scale })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Tabulates `density(m)` times the Jacobian of the node map.
    pub fn tabulate(&self, density: impl Fn(&[f64]) -> Result<f64>) -> Result<GriddedDensity> {
        let sqrt2 = std::f64::consts::SQRT_2;
        let s = self.scale;
        self.grid.try_tabulate(|node| {
            let (xi, v) = (node[0], node[1]);
            let u = s * xi.sinh();
            let m = [(v + u) / sqrt2, (v - u) / sqrt2];
            Ok(density(&m)? * s * xi.cosh())
        })
    }

    pub fn mass(&self, density: &GriddedDensity) -> f64 {
        self.grid.integrate(density)
    }
}

/// Gridded `D_α(posterior, over-exploring construction)` for a divergence
/// budget `epsilon`.
pub fn over_construction_grid_divergence(belief: &GaussianBelief, alpha: f64, epsilon: f64) -> Result<f64> {
    let grid = TieLineGrid::around(belief)?;
    let r = r_from_epsilon(alpha, epsilon)?;
    let q = grid.tabulate(over_construction_density(belief, r)?)?;
    let p = grid.tabulate(|m| belief.density(m))?;
    alpha_div_grid(&p, &q, AlphaParam::new(alpha)?, grid.grid())
}

/// Gridded `D_α(posterior, restriction to the arm-2 region)` for each of
/// `alphas`.
pub fn under_construction_grid_divergences(belief: &GaussianBelief, alphas: &[f64]) -> Result<Vec<f64>> {
    let grid = TieLineGrid::around(belief)?;
    let q = grid.tabulate(under_construction_density(belief)?)?;
    let p = grid.tabulate(|m| belief.density(m))?;
    alphas
        .iter()
        .map(|&alpha| alpha_div_grid(&p, &q, AlphaParam::new(alpha)?, grid.grid()))
        .collect()
}

/// Closed-form Gaussian KL against known values and against a gridded
/// integral.
pub fn check_kl_oracles() -> Result<CheckOutcome> {
    let base = GaussianBelief::from_slices(&[1.0, 2.0], &[0.7, 0.2, 0.2, 0.4])?;
    let shrunk = base.with_cov(base.cov() * 0.09)?;
    let closed = kl_gaussian(&shrunk, &base)?;
    let formula = 0.5 * (0.18 - 2.0 - 0.0081f64.ln());
    let grid = Grid::cube(2, -3.0, 6.0, 601)?;
    let p = grid.try_tabulate(|m| shrunk.density(m))?;
    let q = grid.try_tabulate(|m| base.density(m))?;
    let gridded = alpha_div_grid(&p, &q, a(1.0), &grid)?;
    let passed = (closed - formula).abs() <= 1e-9 && (closed - 1.49794).abs() <= 1e-5 && (gridded - closed).abs() <= 1e-3;
    Ok(CheckOutcome::new(
        "kl_oracles",
        passed,
        format!("closed form {closed:.9}, formula {formula:.9}, grid {gridded:.9}"),
    ))
}

/// Coarse-graining never increases the divergence: random bivariate Gaussian
/// pairs, random four-region partitions, several orders.
pub fn check_data_processing(trials: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::cube(2, -16.0, 16.0, 161)?;
    let alphas = [-1.0, 0.0, 0.5, 1.0, 2.0];
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let p = random_belief(2, &mut rng)?;
        let q = random_belief(2, &mut rng)?;
        let (u, v): ([f64; 3], [f64; 3]) = (
            [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        );
        let partition = Partition::from_fn(&grid, 4, |x| {
            usize::from(u[0] * x[0] + u[1] * x[1] > u[2]) + 2 * usize::from(v[0] * x[0] + v[1] * x[1] > v[2])
        })?;
        let pd = grid.try_tabulate(|m| p.density(m))?;
        let qd = grid.try_tabulate(|m| q.density(m))?;
        for alpha in alphas {
            let margin = data_processing_check(&pd, &qd, &partition, a(alpha), &grid)?;
            if margin.is_finite() {
                worst = worst.min(margin);
            }
        }
    }
    Ok(CheckOutcome::new(
        "data_processing",
        worst >= -1e-6,
        format!("{trials} trials x {} orders, smallest margin {worst:e}", alphas.len()),
    ))
}

/// The general branch approaches both KL limits continuously.
pub fn check_alpha_continuity() -> Result<CheckOutcome> {
    let p = [0.7, 0.2, 0.1];
    let q = [0.3, 0.3, 0.4];
    let mut worst: f64 = 0.0;
    for (limit, near) in [(0.0, [1e-4, -1e-4]), (1.0, [1.0 + 1e-4, 1.0 - 1e-4])] {
        let at = alpha_div_masses(&p, &q, a(limit))?;
        for alpha in near {
            worst = worst.max((alpha_div_masses(&p, &q, a(alpha))? - at).abs());
        }
    }
    Ok(CheckOutcome::new(
        "alpha_continuity",
        worst < 1e-3,
        format!("largest change at 1e-4 from a KL limit {worst:e}"),
    ))
}

/// Relabeling arms commutes with the posterior update, permutes best-arm
/// probabilities and leaves divergences unchanged.
pub fn check_permutation_invariance(seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_div: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.random_range(2..8);
        let p: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
        let q: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
        let (sp, sq) = (p.iter().sum::<f64>(), q.iter().sum::<f64>());
        let p: Vec<f64> = p.iter().map(|v| v / sp).collect();
        let q: Vec<f64> = q.iter().map(|v| v / sq).collect();
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rng);
        let pp: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
        let qp: Vec<f64> = perm.iter().map(|&i| q[i]).collect();
        for alpha in [-1.0, 0.0, 0.5, 1.0, 2.0] {
            let d = alpha_div_masses(&p, &q, a(alpha))?;
            let dp = alpha_div_masses(&pp, &qp, a(alpha))?;
            worst_div = worst_div.max((d - dp).abs() / d.abs().max(1.0));
        }
    }

    let permute = |b: &GaussianBelief, perm: &[usize]| {
        let k = perm.len();
        GaussianBelief::new(
            DVector::from_fn(k, |i, _| b.mean()[perm[i]]),
            DMatrix::from_fn(k, k, |i, j| b.cov()[(perm[i], perm[j])]),
        )
    };
    let mut worst_update: f64 = 0.0;
    for _ in 0..50 {
        let k = rng.random_range(2..7);
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rng);
        let mut inverse = vec![0; k];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let mut plain = random_belief(k, &mut rng)?;
        let mut relabeled = permute(&plain, &perm)?;
        for _ in 0..30 {
            let arm = rng.random_range(0..k);
            let y = rng.random_range(-2.0..2.0);
            plain = posterior::update(&plain, arm, y, 0.5)?;
            relabeled = posterior::update(&relabeled, inverse[arm], y, 0.5)?;
        }
        let expected = permute(&plain, &perm)?;
        worst_update = worst_update
            .max((expected.mean() - relabeled.mean()).amax())
            .max((expected.cov() - relabeled.cov()).amax());
    }

    let belief = random_belief(3, &mut rng)?;
    let perm = [2, 0, 1];
    let permuted = permute(&belief, &perm)?;
    let draws = 200_000;
    let m = best_arm_marginal_mc(&belief, draws, &mut rng)?;
    let mp = best_arm_marginal_mc(&permuted, draws, &mut rng)?;
    let mut worst_z: f64 = 0.0;
    for (i, &j) in perm.iter().enumerate() {
        let (x, y) = (mp.prob(i), m.prob(j));
        let se = ((x * (1.0 - x) + y * (1.0 - y)) / draws as f64).sqrt().max(1e-12);
        worst_z = worst_z.max((x - y).abs() / se);
    }
    Ok(CheckOutcome::new(
        "permutation_invariance",
        worst_update <= 1e-9 && worst_div <= 1e-12 && worst_z <= 4.0,
        format!("posterior diff {worst_update:e}, divergence rel. diff {worst_div:e}, best-arm z-score {worst_z:.2}"),
    ))
}

/// `ε -> r -> ε` is the identity on the admissible domain.
pub fn check_r_round_trip() -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for alpha in [0.1, 0.25, 0.5, 0.75, 0.9, 1.0, 1.5, 2.0, 5.0] {
        let ceiling = if alpha < 1.0 { 1.0 / (alpha * (1.0 - alpha)) } else { 20.0 };
        for i in 1..100 {
            let eps = ceiling * i as f64 / 100.0;
            let back = epsilon_bound_from_r(alpha, r_from_epsilon(alpha, eps)?)?;
            worst = worst.max((back - eps).abs() / eps.max(1.0));
        }
    }
    Ok(CheckOutcome::new("r_round_trip", worst <= 1e-12, format!("largest relative error {worst:e}")))
}

/// Covariance-form updates agree with the precision form and do not depend
/// on observation order.
pub fn check_conjugate_update(seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let k = rng.random_range(2..6);
        let prior = random_belief(k, &mut rng)?;
        let noise_sd = rng.random_range(0.2..2.0);
        let obs: Vec<(usize, f64)> = (0..20).map(|_| (rng.random_range(0..k), rng.random_range(-2.0..2.0))).collect();

        let mut forward = prior.clone();
        for &(arm, y) in &obs {
            forward = posterior::update(&forward, arm, y, noise_sd)?;
        }
        let mut backward = prior.clone();
        for &(arm, y) in obs.iter().rev() {
            backward = posterior::update(&backward, arm, y, noise_sd)?;
        }

        let mut precision = prior.precision()?;
        let mut shift = &precision * prior.mean();
        for &(arm, y) in &obs {
            precision[(arm, arm)] += 1.0 / (noise_sd * noise_sd);
            shift[arm] += y / (noise_sd * noise_sd);
        }
        let cov = precision.try_inverse().expect("posterior precision is invertible");
        let mean = &cov * shift;
        worst = worst
            .max((forward.mean() - &mean).amax())
            .max((forward.cov() - &cov).amax())
            .max((forward.mean() - backward.mean()).amax())
            .max((forward.cov() - backward.cov()).amax());
    }
    Ok(CheckOutcome::new("conjugate_update", worst <= 1e-9, format!("largest discrepancy {worst:e}")))
}

/// Two-arm best-arm probability: closed form against Monte Carlo.
pub fn check_best_arm_mc(seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = 100_000;
    let mut worst_z: f64 = 0.0;
    for _ in 0..20 {
        let belief = random_belief(2, &mut rng)?;
        let exact = two_arm_best_probability(&belief);
        let mc = best_arm_marginal_mc(&belief, draws, &mut rng)?.prob(0);
        let se = (exact * (1.0 - exact) / draws as f64).sqrt().max(1e-12);
        worst_z = worst_z.max((mc - exact).abs() / se);
    }
    Ok(CheckOutcome::new("best_arm_mc", worst_z <= 4.5, format!("largest z-score {worst_z:.2}")))
}

/// Identical regret paths for one and several worker threads.
pub fn check_thread_determinism() -> Result<CheckOutcome> {
    let prior = GaussianBelief::isotropic(&[0.1, 0.9], 0.25)?;
    let scenario = Scenario::fixed(prior, vec![0.6, 0.5], 0.2, 100, VALIDATION_SEED);
    let entries = [
        PolicyEntry::new(PolicySpec::ExactTs),
        PolicyEntry::new(PolicySpec::ApproxTs {
            approximator: ApproximatorSpec::Ensemble {
                models: 2,
                perturb_sd: None,
            },
        }),
    ];
    let render = |threads| -> Result<Vec<u8>> {
        let runs = run_scenario(&scenario, &entries, 16, Some(threads))?;
        let curves = runs.iter().map(PolicyRuns::curve).collect::<Result<Vec<_>>>()?;
        let mut bytes = Vec::new();
        write_regret_csv(&mut bytes, &curves)?;
        write_trajectories_csv(&mut bytes, &runs)?;
        Ok(bytes)
    };
    let (one, four) = (render(1)?, render(4)?);
    Ok(CheckOutcome::new(
        "thread_determinism",
        one == four,
        format!("16 replications on 1 and 4 threads, {} bytes of output", one.len()),
    ))
}

/// The over-exploring construction stays within its divergence budget on a
/// grid.
pub fn check_over_construction(seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (alpha, epsilon) = (2.0, 0.5);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..5 {
        let belief = random_belief(2, &mut rng)?;
        worst = worst.max(over_construction_grid_divergence(&belief, alpha, epsilon)?);
    }
    Ok(CheckOutcome::new(
        "over_construction_budget",
        worst <= epsilon + 1e-3,
        format!("largest gridded D_2 {worst:.6} against budget {epsilon}"),
    ))
}

/// The restriction's gridded divergence matches its closed form, to 1e-3
/// relative to `max(1, |D|)`.
pub fn check_under_construction(seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphas = [-1.0, 0.0, 0.5];
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let belief = random_belief(2, &mut rng)?;
        let z = 1.0 - two_arm_best_probability(&belief);
        let gridded = under_construction_grid_divergences(&belief, &alphas)?;
        for (&alpha, g) in alphas.iter().zip(gridded) {
            let closed = divergence_of_under_construction(z, alpha)?;
            worst = worst.max((closed - g).abs() / closed.abs().max(1.0));
        }
    }
    Ok(CheckOutcome::new(
        "under_construction_divergence",
        worst <= 1e-3,
        format!("largest gridded-vs-closed-form gap {worst:e}"),
    ))
}

/// Runs every check in a fixed order.
pub fn run_validation_suite() -> Result<Vec<CheckOutcome>> {
    let seed = VALIDATION_SEED;
    Ok(vec![
        check_kl_oracles()?,
        check_data_processing(1000, seed)?,
        check_alpha_continuity()?,
        check_permutation_invariance(seed + 1)?,
        check_r_round_trip()?,
        check_conjugate_update(seed + 2)?,
        check_best_arm_mc(seed + 3)?,
        check_thread_determinism()?,
        check_over_construction(seed + 4)?,
        check_under_construction(seed + 5)?,
    ])
}
