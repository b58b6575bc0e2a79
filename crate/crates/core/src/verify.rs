//! The property suite run by `sfpme verify`: reduced-size versions of the
//! acceptance checks, one per claim.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::analysis::{
    calibrate_c, contraction_check, early_snapshots, gronwall_envelope_check, mass_identity_check,
    mass_identity_tolerance, run_paths, EnsembleStats, GronwallEnvelope,
};
use crate::error::Result;
use crate::grid::{Field, LatticeGrid};
use crate::kernel::{fit_profile_tail, StableKernel};
use crate::noise::{noise_regularity_divergence, rkhs_ratio_check, NoiseSpec};
use crate::solver::{SfpmeProblem, SigmaSpec, SnapshotPolicy, SolverConfig};
use crate::spectral::{cutoff_test_function, plancherel_duality_residual, FracLaplacian};

#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    /// Corrupt one entry of the operator symbol before the spectral claim.
    pub tamper_symbol: bool,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

pub struct Claim {
    pub key: &'static str,
    pub run: fn(&Options) -> Result<Outcome>,
}

pub const CLAIMS: &[Claim] = &[
    Claim { key: "spectral", run: spectral },
    Claim { key: "plancherel", run: plancherel },
    Claim { key: "kernel", run: kernel },
    Claim { key: "regularity", run: regularity },
    Claim { key: "rkhs", run: rkhs },
    Claim { key: "mass", run: mass },
    Claim { key: "contraction", run: contraction },
    Claim { key: "gronwall", run: gronwall },
];

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

/// Plane waves are eigenfunctions with eigenvalue `|k|^alpha`.
fn spectral(opts: &Options) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for dim in [1, 2] {
        let grid = LatticeGrid::new(dim, 64, TAU)?;
        for alpha in [0.5, 1.0, 1.5, 2.0] {
            let mut op = FracLaplacian::new(alpha, grid)?;
            if opts.tamper_symbol {
                let s = op.symbol()[1];
                op.tamper_symbol(1, s + 0.5);
            }
            for k in [[1i32, 0], [3, 0], [2, 5], [0, 7]] {
                if dim == 1 && k[1] != 0 {
                    continue;
                }
                let lam = ((k[0] * k[0] + k[1] * k[1]) as f64).powf(alpha / 2.0);
                let f = Field::from_fn(grid, |p| (k[0] as f64 * p[0] + k[1] as f64 * p[1]).cos());
                let got = op.apply(&f)?;
                let err = got
                    .values()
                    .iter()
                    .zip(f.values())
                    .map(|(g, v)| (g - lam * v).abs())
                    .fold(0.0, f64::max);
                worst = worst.max(err / lam.max(1.0));
            }
        }
    }
    outcome(worst < 1e-12, format!("max relative eigen-error {worst:.3e} (tol 1e-12)"))
}

fn smooth_random(grid: LatticeGrid, rng: &mut ChaCha8Rng) -> Field {
    let coeffs: Vec<(f64, f64, f64)> = (0..8)
        .map(|_| (StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    Field::from_fn(grid, |p| {
        coeffs
            .iter()
            .enumerate()
            .map(|(j, (a, b, c))| {
                let k = j as f64;
                a * (k * p[0]).cos() + b * (k * p[0] + p[1]).sin() + c * (-(p[0] * p[0]) * (1.0 + k)).exp()
            })
            .sum()
    })
}

/// `<(-D)^{a/2} f, g> = <(-D)^{a/4} f, (-D)^{a/4} g>` on random pairs.
fn plancherel(_: &Options) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for (i, dim) in (0..20).map(|i| (i, 1 + i % 2)) {
        let grid = LatticeGrid::new(dim, 64, TAU)?;
        let f = smooth_random(grid, &mut rng);
        let g = smooth_random(grid, &mut rng);
        let alpha = [0.5, 1.0, 1.5, 2.0][i % 4];
        worst = worst.max(plancherel_duality_residual(alpha, &f, &g)?);
    }
    outcome(worst < 1e-10, format!("max duality residual {worst:.3e} over 20 pairs (tol 1e-10)"))
}

/// Quadrature against the Cauchy closed forms, and the power tail.
fn kernel(_: &Options) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for dim in [1, 2] {
        let k = StableKernel::new(1.0, dim)?;
        for r in [0.0, 0.3, 1.0, 4.0, 25.0] {
            let mut x = vec![0.0; dim];
            x[0] = r;
            let exact = k.eval(1.0, &x)?;
            worst = worst.max((k.quadrature_eval(1.0, r)? - exact).abs() / exact);
        }
    }
    let tail = fit_profile_tail(&StableKernel::new(1.5, 1)?)?;
    outcome(
        worst < 1e-9 && tail.relative_error() <= 0.05,
        format!(
            "closed-form rel error {worst:.3e} (tol 1e-9); tail {:.4} vs {:.4}",
            tail.fit.slope, tail.expected
        ),
    )
}

/// Bounded versus divergent discrete noise norms on the line.
fn regularity(_: &Options) -> Result<Outcome> {
    let gammas = [-1.5, -1.0, 0.0, 0.5];
    let table = noise_regularity_divergence(1, &gammas, &[32, 64, 128, 256], 64, 5)?;
    let wrong: Vec<String> = table
        .rows
        .iter()
        .filter(|r| r.bounded != r.continuum_bounded(1))
        .map(|r| format!("{}", r.gamma))
        .collect();
    outcome(
        wrong.is_empty(),
        if wrong.is_empty() {
            format!("{} exponents classified correctly", gammas.len())
        } else {
            format!("misclassified gamma: {}", wrong.join(", "))
        },
    )
}

/// For the spatially uniform process the normalised pairing does not depend
/// on the test function.
fn rkhs(_: &Options) -> Result<Outcome> {
    let grid = LatticeGrid::line(64, TAU)?;
    let phis: Vec<Field> = (0..5)
        .map(|j| {
            let w = 0.3 + 0.2 * j as f64;
            Field::from_fn(grid, |p| (-(p[0] - 0.1 * j as f64).powi(2) / w).exp() + 0.1 * j as f64)
        })
        .collect();
    let spec = NoiseSpec::uniform(3, 1);
    let mut worst: f64 = 0.0;
    for path in 0..3 {
        let r = rkhs_ratio_check(&spec, &grid, 0.01, path, 1.0, &phis)?;
        let hi = r.iter().copied().fold(0.0, f64::max);
        let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
        worst = worst.max((hi - lo) / hi.max(1e-300));
    }
    outcome(worst < 1e-10, format!("max relative ratio spread {worst:.3e} (tol 1e-10)"))
}

/// Exact discrete mass identity on a grid of equations.
fn mass(_: &Options) -> Result<Outcome> {
    let grid = LatticeGrid::line(32, TAU)?;
    let u0 = cutoff_test_function(grid, 1.0)?;
    let cfg = SolverConfig::new(1e-3, 0.05).with_snapshots(SnapshotPolicy::Off);
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for alpha in [0.8, 1.5, 2.0] {
        for m in [0.5, 1.0, 2.0] {
            let p = SfpmeProblem::new(alpha, m, u0.clone(), SigmaSpec::One, NoiseSpec::white(1, 1))?;
            for path in 0..2 {
                let traj = crate::solver::evolve(&p, &cfg, path)?;
                let r = mass_identity_check(&traj);
                pass &= r <= mass_identity_tolerance(traj.mass.f_u0);
                worst = worst.max(r);
            }
        }
    }
    outcome(pass, format!("max residual {worst:.3e} over 9 equations"))
}

/// Coupled estimate for two nearby initial data, and the zero-perturbation
/// control.
fn contraction(opts: &Options) -> Result<Outcome> {
    let grid = LatticeGrid::line(32, TAU)?;
    let u0 = cutoff_test_function(grid, 1.0)?;
    let bumped = u0.axpy(1.0, &Field::from_fn(grid, |p| 0.05 * (-4.0 * (p[0] - 0.5).powi(2)).exp()))?;
    let noise = NoiseSpec::white(7, 1);
    let a = SfpmeProblem::new(1.5, 2.0, u0.clone(), SigmaSpec::Linear(0.5), noise)?;
    let b = SfpmeProblem::new(1.5, 2.0, bumped, SigmaSpec::Linear(0.5), noise)?;
    let cfg = SolverConfig::new(1e-3, 0.25);
    let rep = contraction_check(&a, &b, &cfg, 64, opts.workers)?;
    let control = contraction_check(&a, &a, &cfg, 4, opts.workers)?;
    let zero = control.lhs.iter().chain(&control.rhs).all(|&v| v == 0.0);
    outcome(
        rep.holds() && zero,
        format!("worst excess {:.3e}; zero control exact: {zero}", rep.worst_excess()),
    )
}

/// Second-moment envelope on a reduced version of the standard run.
fn gronwall(opts: &Options) -> Result<Outcome> {
    let grid = LatticeGrid::line(64, TAU)?;
    let u0 = cutoff_test_function(grid, 1.0)?;
    let p = SfpmeProblem::new(1.5, 1.0, u0.clone(), SigmaSpec::Linear(0.5), NoiseSpec::white(2024, 1))?;
    let cfg = SolverConfig::new(2e-3, 1.0);
    let run = run_paths(&p, &cfg, 100, opts.workers)?;
    let stats = EnsembleStats::from_run(&run)?;
    let cal = calibrate_c(&u0, &early_snapshots(&run, 0.1))?;
    let env = GronwallEnvelope { lip: 0.5, c_const: cal.c, u0_l1: u0.l1_norm() };
    let rep = gronwall_envelope_check(&stats, &env)?;
    outcome(
        rep.passed(),
        format!(
            "C = {:.4}; dominated {}; late slope {:.4} vs bound {:.4}",
            cal.c,
            rep.dominated(),
            rep.late_fit.slope,
            rep.rate_bound
        ),
    )
}
