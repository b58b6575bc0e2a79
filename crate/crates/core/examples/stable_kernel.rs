//! Evaluate the alpha-stable heat kernel, fit its power tail and compare the
//! linear flow with the kernel semigroup.

use std::f64::consts::TAU;

use sfpme::grid::LatticeGrid;
use sfpme::kernel::{fit_profile_tail, semigroup_solve, two_sided_bound, StableKernel};
use sfpme::spectral::cutoff_test_function;

fn main() -> sfpme::Result<()> {
    for (alpha, dim) in [(0.5, 1), (1.0, 1), (1.5, 1), (1.5, 2)] {
        let k = StableKernel::new(alpha, dim)?;
        let mut x = vec![0.0; dim];
        print!("alpha {alpha} d {dim}:");
        for r in [0.0, 1.0, 10.0] {
            x[0] = r;
            let p = k.eval(1.0, &x)?;
            print!("  p(1,{r}) = {p:.6e} (ratio to bound {:.3})", p / two_sided_bound(alpha, dim, 1.0, r));
        }
        let tail = fit_profile_tail(&k)?;
        println!("\n  tail exponent {:.4}, expected {}", tail.fit.slope, tail.expected);
    }

    let grid = LatticeGrid::line(128, TAU)?;
    let u0 = cutoff_test_function(grid, 1.0)?;
    let u = semigroup_solve(&StableKernel::new(1.5, 1)?, &u0, 0.5)?;
    println!("semigroup at t = 0.5: mass {:.12} -> {:.12}, peak {:.4}", u0.integral(), u.integral(), u.max_abs());
    Ok(())
}
