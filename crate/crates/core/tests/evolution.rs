use std::f64::consts::TAU;

use sfpme::analysis::{
    contraction_check, mass_distribution_test, mass_identity_check, mass_identity_tolerance,
    run_ensemble,
};
use sfpme::grid::{Field, LatticeGrid};
use sfpme::kernel::{semigroup_solve, StableKernel};
use sfpme::noise::NoiseSpec;
use sfpme::solver::{
    evolve, weak_form_residual, SeparableTest, SfpmeProblem, SigmaSpec, SnapshotPolicy,
    SolverConfig, TimeProfile,
};
use sfpme::spectral::cutoff_test_function;
use sfpme::stats;

fn line(n: usize) -> LatticeGrid {
    LatticeGrid::line(n, TAU).unwrap()
}

fn sup_diff(a: &Field, b: &Field) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn linear_problem_follows_the_semigroup_at_first_order() {
    let g = line(128);
    let bump = cutoff_test_function(g, 1.0).unwrap();
    let u0 = bump.scaled(1.0 / bump.integral());
    let exact = semigroup_solve(&StableKernel::new(1.0, 1).unwrap(), &u0, 1.0).unwrap();
    let p = SfpmeProblem::new(1.0, 1.0, u0, SigmaSpec::Zero, NoiseSpec::white(0, 1)).unwrap();
    let err = |dt: f64| {
        let traj = evolve(&p, &SolverConfig::new(dt, 1.0), 0).unwrap();
        sup_diff(traj.final_field().unwrap(), &exact)
    };
    let (e1, e2, e4) = (err(1e-3), err(5e-4), err(2.5e-4));
    assert!(e1 < 1e-4, "{e1}");
    for (a, b) in [(e1, e2), (e2, e4)] {
        assert!((a / b).log2() >= 0.9, "order {}", (a / b).log2());
    }
}

/// Second-order finite differences for `u_t = (u^2)_xx` with tiny explicit
/// steps.
fn porous_reference(u0: &[f64], dx: f64, t_end: f64) -> Vec<f64> {
    let n = u0.len();
    let dt = 0.1 * dx * dx / (2.0 * u0.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let steps = (t_end / dt).ceil() as usize;
    let dt = t_end / steps as f64;
    let mut u = u0.to_vec();
    let mut w = vec![0.0; n];
    for _ in 0..steps {
        for i in 0..n {
            let (l, r) = ((i + n - 1) % n, (i + 1) % n);
            w[i] = u[i] + dt * (u[l] * u[l] - 2.0 * u[i] * u[i] + u[r] * u[r]) / (dx * dx);
        }
        std::mem::swap(&mut u, &mut w);
    }
    u
}

#[test]
fn porous_medium_matches_finite_differences() {
    let g = line(128);
    let u0 = Field::from_fn(g, |p| 1.0 + 0.5 * p[0].cos());
    let p = SfpmeProblem::new(2.0, 2.0, u0.clone(), SigmaSpec::Zero, NoiseSpec::white(0, 1)).unwrap();
    let traj = evolve(&p, &SolverConfig::new(1e-4, 0.1), 0).unwrap();
    // Refine the reference on a 4x finer lattice and restrict.
    let fine = line(512);
    let f0: Vec<f64> = (0..512).map(|i| 1.0 + 0.5 * fine.coordinate(i).cos()).collect();
    let reference = porous_reference(&f0, fine.spacing(), 0.1);
    let coarse: Vec<f64> = (0..128).map(|i| reference[4 * i]).collect();
    let reference = Field::new(g, coarse).unwrap();
    let e = sup_diff(traj.final_field().unwrap(), &reference);
    assert!(e < 1e-3, "{e}");
}

#[test]
fn mass_identity_across_equations() {
    let g = line(64);
    let u0 = cutoff_test_function(g, 1.0).unwrap();
    let cfg = SolverConfig::new(1e-3, 0.2).with_snapshots(SnapshotPolicy::Off);
    for alpha in [0.8, 1.5, 2.0] {
        for m in [0.5, 1.0, 2.0] {
            for sigma in [SigmaSpec::One, SigmaSpec::Linear(2.0)] {
                let p = SfpmeProblem::new(alpha, m, u0.clone(), sigma.clone(), NoiseSpec::white(3, 1)).unwrap();
                for path in 0..3 {
                    let traj = evolve(&p, &cfg, path).unwrap();
                    let r = mass_identity_check(&traj);
                    assert!(r < mass_identity_tolerance(traj.mass.f_u0), "{alpha} {m} {sigma:?}: {r}");
                }
            }
        }
    }
}

#[test]
fn additive_mass_increments_are_gaussian_per_step() {
    let g = line(64);
    let p = SfpmeProblem::new(
        1.5,
        2.0,
        cutoff_test_function(g, 1.0).unwrap(),
        SigmaSpec::One,
        NoiseSpec::white(12, 1),
    )
    .unwrap();
    let dt = 1e-3;
    let traj = evolve(&p, &SolverConfig::new(dt, 1.0), 0).unwrap();
    let inc: Vec<f64> = traj.mass.f_u.windows(2).map(|w| w[1] - w[0]).collect();
    let noise: Vec<f64> = traj.mass.noise_integral.windows(2).map(|w| w[1] - w[0]).collect();
    for (a, b) in inc.iter().zip(&noise) {
        assert!((a - b).abs() < 1e-12);
    }
    let sd = (dt * TAU).sqrt();
    let (_, pval) = stats::ks_test(&inc, |x| stats::normal_cdf(x, 0.0, sd));
    assert!(pval > 0.01, "{pval}");
}

#[test]
fn additive_mass_variance_over_ensemble() {
    let g = line(64);
    let p = SfpmeProblem::new(
        1.5,
        2.0,
        cutoff_test_function(g, 1.0).unwrap(),
        SigmaSpec::One,
        NoiseSpec::white(13, 1),
    )
    .unwrap();
    let stats = run_ensemble(&p, &SolverConfig::new(1e-3, 1.0), 500, 4).unwrap();
    let v = *stats.var_mass.last().unwrap();
    let hw = *stats.hw_var_mass.last().unwrap();
    assert!((v - TAU).abs() <= 3.0 * hw / stats::Z95, "{v} +- {hw}");
}

#[test]
fn planar_mass_law() {
    let g = LatticeGrid::new(2, 16, TAU).unwrap();
    let u0 = cutoff_test_function(g, 1.0).unwrap();
    let p = SfpmeProblem::new(1.5, 2.0, u0, SigmaSpec::One, NoiseSpec::white(21, 2)).unwrap();
    let law = mass_distribution_test(&p, &SolverConfig::new(5e-3, 0.25), 400, 4).unwrap();
    assert!((law.variance - 0.25 * TAU * TAU).abs() < 1e-12);
    assert!(law.p_value > 0.01, "{}", law.p_value);
}

fn weak_residuals(noise: NoiseSpec) -> Vec<f64> {
    let g = line(64);
    let u0 = cutoff_test_function(g, 1.0).unwrap().map(|v| v + 0.2);
    let p = SfpmeProblem::new(1.5, 2.0, u0, SigmaSpec::One, noise).unwrap();
    let psi = SeparableTest {
        space: Field::from_fn(g, |x| x[0].sin() + x[0].cos() + 0.5 * (2.0 * x[0]).cos()),
        time: TimeProfile::Bump { start: 0.0, end: 1.0 },
    };
    [8u32, 4, 2, 1]
        .iter()
        .map(|&r| {
            let cfg = SolverConfig::new(1e-3 * r as f64, 1.0)
                .with_noise_refinement(r)
                .with_snapshots(SnapshotPolicy::Every(1));
            let traj = evolve(&p, &cfg, 0).unwrap();
            weak_form_residual(&traj, &p, &psi).unwrap()
        })
        .collect()
}

#[test]
fn weak_form_residual_halves_with_the_step() {
    let r = weak_residuals(NoiseSpec::uniform(5, 1));
    for w in r.windows(2) {
        assert!(w[0] / w[1] >= 1.9, "{r:?}");
    }
}

#[test]
fn weak_form_residual_decays_under_white_noise() {
    let r = weak_residuals(NoiseSpec::white(5, 1));
    assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
    assert!(r[0] / r[3] >= 4.0, "{r:?}");
}

#[test]
fn heat_flow_satisfies_weak_form() {
    let g = line(128);
    let p = SfpmeProblem::new(
        2.0,
        1.0,
        Field::from_fn(g, |x| 1.0 + 0.5 * x[0].cos()),
        SigmaSpec::Zero,
        NoiseSpec::white(0, 1),
    )
    .unwrap();
    let cfg = SolverConfig::new(1e-3, 1.0).with_snapshots(SnapshotPolicy::Every(1));
    let traj = evolve(&p, &cfg, 0).unwrap();
    let psi = SeparableTest {
        space: Field::from_fn(g, |x| x[0].sin() + x[0].cos() + 0.5 * (2.0 * x[0]).cos()),
        time: TimeProfile::Bump { start: 0.0, end: 1.0 },
    };
    let r = weak_form_residual(&traj, &p, &psi).unwrap();
    assert!(r < 1e-3, "{r}");
}

#[test]
fn contraction_for_the_heat_operator() {
    let g = line(64);
    let u0 = cutoff_test_function(g, 1.0).unwrap();
    let bumped = u0.axpy(1.0, &Field::from_fn(g, |p| 0.05 * (-4.0 * (p[0] - 0.5).powi(2)).exp())).unwrap();
    let noise = NoiseSpec::white(17, 1);
    let a = SfpmeProblem::new(2.0, 1.0, u0, SigmaSpec::Linear(0.5), noise).unwrap();
    let b = SfpmeProblem::new(2.0, 1.0, bumped, SigmaSpec::Linear(0.5), noise).unwrap();
    let rep = contraction_check(&a, &b, &SolverConfig::new(1e-3, 0.5), 200, 4).unwrap();
    assert!(rep.holds(), "worst excess {}", rep.worst_excess());
}
