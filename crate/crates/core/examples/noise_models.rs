//! Sample the two noise models, check the pairing variance, the
//! test-function-free ratio of the uniform process and the regularity table.

use std::f64::consts::TAU;

use sfpme::grid::{Field, LatticeGrid};
use sfpme::noise::{
    noise_regularity_divergence, pair_with_test_function, rkhs_ratio_check, sample_increment,
    NoiseSpec,
};
use sfpme::stats;

fn main() -> sfpme::Result<()> {
    let grid = LatticeGrid::line(64, TAU)?;
    let one = Field::constant(grid, 1.0);
    let dt = 0.01;
    for spec in [NoiseSpec::white(1, 1), NoiseSpec::uniform(1, 1)] {
        let xs: Vec<f64> = (0..5000)
            .map(|s| pair_with_test_function(&sample_increment(&spec, &grid, dt, 0, s)?, &one))
            .collect::<sfpme::Result<_>>()?;
        println!("{:?}: Var <dW, 1> = {:.5} +- {:.5}", spec.kind, stats::variance(&xs), stats::variance_std_error(&xs));
    }
    println!("white-noise prediction dt |D| = {:.5}", dt * TAU);

    let phis: Vec<Field> =
        (1..=4).map(|j| Field::from_fn(grid, |p| (-(p[0] * j as f64).powi(2)).exp())).collect();
    let ratios = rkhs_ratio_check(&NoiseSpec::uniform(2, 1), &grid, dt, 0, 1.0, &phis)?;
    println!("uniform-noise ratios: {ratios:?}");

    let table = noise_regularity_divergence(1, &[-1.0, -0.25, 0.0], &[32, 64, 128, 256], 100, 3)?;
    for row in &table.rows {
        let norms: Vec<String> = row.rms_norm.iter().map(|v| format!("{v:.3}")).collect();
        println!("gamma {:5}: {} -> {}", row.gamma, norms.join(" "), if row.bounded { "bounded" } else { "divergent" });
    }
    Ok(())
}
