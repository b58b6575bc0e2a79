use std::f64::consts::TAU;

use proptest::prelude::*;
use sfpme::analysis::{mass_identity_check, mass_identity_tolerance, reverse_holder_calibrate};
use sfpme::config::RunConfig;
use sfpme::grid::{Field, LatticeGrid};
use sfpme::kernel::{semigroup_solve, StableKernel};
use sfpme::noise::{pair_with_test_function, sample_increment, NoiseSpec};
use sfpme::snapshot;
use sfpme::solver::{evolve, SfpmeProblem, SigmaSpec, SnapshotPolicy, SolverConfig};
use sfpme::spectral::{plancherel_duality_residual, FracLaplacian};
use sfpme::Error;

fn trig_field(grid: LatticeGrid, coeffs: &[(f64, f64)]) -> Field {
    Field::from_fn(grid, |p| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| a * (k as f64 * p[0] + p[1]).cos() + b * (k as f64 * p[0]).sin())
            .sum()
    })
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn duality_holds(alpha in 0.05..2.0f64, dim in 1usize..=2, f in coeffs(), g in coeffs()) {
        let grid = LatticeGrid::new(dim, 32, TAU).unwrap();
        let r = plancherel_duality_residual(alpha, &trig_field(grid, &f), &trig_field(grid, &g)).unwrap();
        prop_assert!(r < 1e-10);
    }

    #[test]
    fn operator_is_linear_and_nonnegative(alpha in 0.05..2.0f64, f in coeffs(), g in coeffs(), s in -3.0..3.0f64) {
        let grid = LatticeGrid::line(64, 5.0).unwrap();
        let (f, g) = (trig_field(grid, &f), trig_field(grid, &g));
        let op = FracLaplacian::new(alpha, grid).unwrap();
        let combined = op.apply(&f.axpy(s, &g).unwrap()).unwrap();
        let separate = op.apply(&f).unwrap().axpy(s, &op.apply(&g).unwrap()).unwrap();
        for (a, b) in combined.values().iter().zip(separate.values()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert!(op.apply(&f).unwrap().inner(&f).unwrap() >= -1e-10);
    }

    #[test]
    fn semigroup_composes(alpha in 0.1..=2.0f64, t in 0.01..1.0f64, s in 0.01..1.0f64, f in coeffs()) {
        let grid = LatticeGrid::line(64, TAU).unwrap();
        let k = StableKernel::new(alpha, 1).unwrap();
        let u0 = trig_field(grid, &f);
        let once = semigroup_solve(&k, &u0, t + s).unwrap();
        let twice = semigroup_solve(&k, &semigroup_solve(&k, &u0, t).unwrap(), s).unwrap();
        for (a, b) in once.values().iter().zip(twice.values()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!((once.integral() - u0.integral()).abs() < 1e-12);
    }

    #[test]
    fn snapshot_round_trip(
        dim in 1usize..=2,
        log_n in 3u32..6,
        length in 0.1..100.0f64,
        alpha in 0.01..=2.0f64,
        m in 0.1..4.0f64,
        t in 0.0..10.0f64,
        seed in any::<u64>(),
    ) {
        let grid = LatticeGrid::new(dim, 1 << log_n, length).unwrap();
        let f = Field::from_fn(grid, |p| (p[0] * seed as f64).sin() * 1e3 + p[1]).with_time(t);
        let back = snapshot::decode(&snapshot::encode(&f, alpha, m)).unwrap();
        prop_assert_eq!(back.field, f);
        prop_assert_eq!(back.alpha, alpha);
        prop_assert_eq!(back.m, m);
    }

    #[test]
    fn pairing_is_linear_in_the_test_function(seed in any::<u64>(), step in 0u64..1000, a in -2.0..2.0f64) {
        let grid = LatticeGrid::line(32, TAU).unwrap();
        let inc = sample_increment(&NoiseSpec::white(seed, 1), &grid, 0.01, 0, step).unwrap();
        let phi = Field::from_fn(grid, |p| p[0].cos());
        let psi = Field::from_fn(grid, |p| (-p[0] * p[0]).exp());
        let lhs = pair_with_test_function(&inc, &phi.axpy(a, &psi).unwrap()).unwrap();
        let rhs = pair_with_test_function(&inc, &phi).unwrap() + a * pair_with_test_function(&inc, &psi).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn reverse_holder_never_exceeds_volume(f in coeffs(), shift in 2.5..10.0f64) {
        let grid = LatticeGrid::line(64, 3.0).unwrap();
        let field = trig_field(grid, &f).map(|v| v + shift * 5.0);
        let c = reverse_holder_calibrate(&[field]).unwrap().c;
        prop_assert!(c > 0.0 && c <= 3.0 * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mass_identity_is_exact(
        alpha in 0.3..=2.0f64,
        m in 0.3..3.0f64,
        lambda in -2.0..2.0f64,
        seed in any::<u64>(),
        additive in any::<bool>(),
        uniform in any::<bool>(),
    ) {
        let grid = LatticeGrid::line(32, TAU).unwrap();
        let u0 = Field::from_fn(grid, |p| 1.0 + 0.3 * p[0].cos());
        let sigma = if additive { SigmaSpec::One } else { SigmaSpec::Linear(lambda) };
        let noise = if uniform { NoiseSpec::uniform(seed, 1) } else { NoiseSpec::white(seed, 1) };
        let p = SfpmeProblem::new(alpha, m, u0, sigma, noise).unwrap();
        let cfg = SolverConfig::new(1e-3, 0.05).with_snapshots(SnapshotPolicy::Off);
        match evolve(&p, &cfg, 0) {
            Ok(traj) => prop_assert!(mass_identity_check(&traj) < mass_identity_tolerance(traj.mass.f_u0)),
            Err(f) => prop_assert!(matches!(f.error, Error::BlowUp { .. }), "{}", f.error),
        }
    }

    #[test]
    fn config_range_checks(alpha in -1.0..4.0f64, dt in 1e-4..0.1f64) {
        let text = format!("[problem]\nalpha = {alpha}\n[solver]\ndt = {dt}\nt_end = {}\n", dt * 10.0);
        match RunConfig::parse(&text) {
            Ok(c) => {
                prop_assert!(alpha > 0.0 && alpha <= 2.0);
                prop_assert_eq!(c.alpha, alpha);
            }
            Err(Error::Config { line, message }) => {
                prop_assert_eq!(line, 2);
                prop_assert!(message.contains("alpha"));
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }
}
