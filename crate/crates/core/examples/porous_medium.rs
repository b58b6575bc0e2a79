//! One stochastic path of the fractional porous medium equation, with the
//! weak-form residual of the computed path.

use std::f64::consts::TAU;

use sfpme::grid::{Field, LatticeGrid};
use sfpme::noise::NoiseSpec;
use sfpme::solver::{
    evolve, weak_form_residual, SeparableTest, SfpmeProblem, SigmaSpec, SnapshotPolicy,
    SolverConfig, TimeProfile,
};
use sfpme::spectral::cutoff_test_function;

fn main() -> sfpme::Result<()> {
    let grid = LatticeGrid::line(128, TAU)?;
    let u0 = cutoff_test_function(grid, 1.0)?.map(|v| v + 0.1);
    let problem = SfpmeProblem::new(1.5, 2.0, u0, SigmaSpec::Linear(0.3), NoiseSpec::white(11, 1))?;
    let cfg = SolverConfig::new(1e-3, 0.5).with_snapshots(SnapshotPolicy::Every(1));
    let traj = evolve(&problem, &cfg, 0)?;
    for k in (0..traj.times.len()).step_by(100) {
        println!(
            "t = {:.2}  mass {:.6}  |u|^2 {:.6}  max {:.4}",
            traj.times[k], traj.mass.f_u[k], traj.sq_norms[k], traj.max_abs[k]
        );
    }
    let psi = SeparableTest {
        space: Field::from_fn(grid, |p| p[0].cos() + 0.5 * p[0].sin()),
        time: TimeProfile::Bump { start: 0.0, end: 0.5 },
    };
    println!("weak-form residual {:.3e}", weak_form_residual(&traj, &problem, &psi)?);
    Ok(())
}
