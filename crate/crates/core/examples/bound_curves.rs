//! Closed-form bounds: the regret lower bound L(ε) and the divergence ε(z) of
//! a restriction to a region of mass z, written as CSV.
//!
//! `cargo run --release --example bound_curves -- [out.csv]`

use std::fs::File;
use std::io::BufWriter;

use approx_thompson::experiment::output::write_bound_csv;
use approx_thompson::theory::{emit_bound_curves, epsilon_from_z, r_from_epsilon, regret_lower_bound, CurveSet};

fn main() -> approx_thompson::Result<()> {
    for (alpha, epsilon) in [(1.0, 0.1), (2.0, 0.5), (0.5, 2.0)] {
        println!("r({alpha}, {epsilon}) = {}", r_from_epsilon(alpha, epsilon)?);
    }
    for epsilon in [0.1, 1.0, 10.0] {
        println!("L(alpha = 2, eps = {epsilon}) = {:.5}", regret_lower_bound(2.0, epsilon, 0.1, 0.5)?);
    }
    for z in [0.5, 0.01, 1e-4] {
        println!("eps(alpha = 0, z = {z}) = {:.4}", epsilon_from_z(0.0, z)?);
    }

    let mut points = emit_bound_curves(&CurveSet::fig5())?;
    points.extend(emit_bound_curves(&CurveSet::fig6())?);
    let out = std::env::args().nth(1).unwrap_or_else(|| "bound_curves.csv".into());
    write_bound_csv(BufWriter::new(File::create(&out)?), &points)?;
    println!("{} rows written to {out}", points.len());
    Ok(())
}
