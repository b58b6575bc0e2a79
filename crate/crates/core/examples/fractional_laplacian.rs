//! Apply `(-D)^{alpha/2}` on the periodic lattice, check plane waves and
//! the duality identity, and print Sobolev norms of a smooth cutoff.

use std::f64::consts::TAU;

use sfpme::grid::{Field, LatticeGrid};
use sfpme::spectral::{
    cutoff_test_function, plancherel_duality_residual, sobolev_norm, FracLaplacian, SobolevIndex,
};

fn main() -> sfpme::Result<()> {
    let grid = LatticeGrid::line(128, TAU)?;
    let wave = Field::from_fn(grid, |p| (3.0 * p[0]).sin());
    for alpha in [0.5, 1.0, 1.5, 2.0] {
        let op = FracLaplacian::new(alpha, grid)?;
        let out = op.apply(&wave)?;
        let ratio = out.values()[17] / wave.values()[17];
        println!("alpha {alpha}: eigenvalue {ratio:.12} (exact {:.12})", 3f64.powf(alpha));
    }

    let f = cutoff_test_function(grid, 1.0)?;
    let g = Field::from_fn(grid, |p| (-p[0] * p[0]).exp());
    println!("duality residual at alpha 0.6: {:.2e}", plancherel_duality_residual(0.6, &f, &g)?);
    for gamma in [-1.0, 0.0, 1.0, 2.0] {
        println!("|phi|_H^{gamma} = {:.6}", sobolev_norm(SobolevIndex::inhomogeneous(gamma), &f)?);
    }
    Ok(())
}
