//! α-divergences: discrete arm marginals, gridded Gaussians against the
//! closed-form KL, and the coarse-graining inequality.
//!
//! `cargo run --release --example divergences`

use approx_thompson::divergence::{alpha_div_discrete, alpha_div_grid, data_processing_check, AlphaParam, Grid, Partition};
use approx_thompson::gaussian::{best_arm_marginal, kl_gaussian, ArmMarginal, GaussianBelief};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> approx_thompson::Result<()> {
    let p = ArmMarginal::new(vec![0.8, 0.2])?;
    let q = ArmMarginal::new(vec![0.5, 0.5])?;
    for alpha in [-1.0, 0.0, 0.5, 1.0, 2.0] {
        println!("D_{alpha}([0.8, 0.2], [0.5, 0.5]) = {:.6}", alpha_div_discrete(&p, &q, AlphaParam::new(alpha)?)?);
    }

    let exact = GaussianBelief::from_slices(&[0.2, 0.0], &[0.5, 0.1, 0.1, 0.3])?;
    let approx = exact.with_cov(exact.cov() * 2.0)?;
    let grid = Grid::cube(2, -8.0, 8.0, 401)?;
    let pd = grid.try_tabulate(|m| exact.density(m))?;
    let qd = grid.try_tabulate(|m| approx.density(m))?;
    println!(
        "KL(P||Q): closed form {:.6}, grid {:.6}",
        kl_gaussian(&exact, &approx)?,
        alpha_div_grid(&pd, &qd, AlphaParam::new(1.0)?, &grid)?
    );

    // Coarse-graining to the best-arm regions can only lose divergence.
    let regions = Partition::from_fn(&grid, 2, |m| usize::from(m[1] >= m[0]))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pm = best_arm_marginal(&exact, 0, &mut rng)?;
    let qm = best_arm_marginal(&approx, 0, &mut rng)?;
    for alpha in [-1.0, 0.5, 2.0] {
        let a = AlphaParam::new(alpha)?;
        println!(
            "alpha = {alpha}: margin {:.6}, arm-level D {:.6}",
            data_processing_check(&pd, &qd, &regions, a, &grid)?,
            alpha_div_discrete(&pm, &qm, a)?
        );
    }
    Ok(())
}
