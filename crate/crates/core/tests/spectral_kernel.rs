mod common;

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sfpme::grid::{Field, LatticeGrid};
use sfpme::kernel::{
    fit_profile_tail, semigroup_solve, two_sided_bound_check, StableKernel,
};
use sfpme::spectral::{
    cutoff_scaling_residual, plancherel_duality_residual, FracLaplacian,
};

use common::{kernel_mass, line_density_oracle, line_tail_mass_series, wrapped_cauchy};

fn band_limited(grid: LatticeGrid, modes: usize, rng: &mut ChaCha8Rng) -> Field {
    let c: Vec<(f64, f64)> =
        (0..=modes).map(|_| (StandardNormal.sample(rng), StandardNormal.sample(rng))).collect();
    Field::from_fn(grid, |p| {
        c.iter().enumerate().map(|(k, (a, b))| a * (k as f64 * p[0]).cos() + b * (k as f64 * p[0]).sin()).sum()
    })
}

/// `sum_k |xi_k|^alpha Re(f_hat conj g_hat) dx / n` with a naive DFT.
fn direct_spectral_pairing(alpha: f64, f: &Field, g: &Field) -> f64 {
    let n = f.values().len();
    let dx = f.grid().spacing();
    let dft = |v: &[f64], k: usize| {
        v.iter().enumerate().fold((0.0, 0.0), |(re, im), (j, x)| {
            let th = -TAU * (k * j) as f64 / n as f64;
            (re + x * th.cos(), im + x * th.sin())
        })
    };
    let mut acc = 0.0;
    for k in 0..n {
        let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let xi = TAU * signed / f.grid().side_length();
        let (fr, fi) = dft(f.values(), k);
        let (gr, gi) = dft(g.values(), k);
        acc += xi.abs().powf(alpha) * (fr * gr + fi * gi);
    }
    acc * dx / n as f64
}

#[test]
fn plane_waves_are_exact_eigenfunctions() {
    for dim in [1, 2] {
        for n in [64, 256] {
            let grid = LatticeGrid::new(dim, n, TAU).unwrap();
            for alpha in [0.5, 1.0, 1.5, 2.0] {
                let op = FracLaplacian::new(alpha, grid).unwrap();
                // Rounding in the top modes is amplified by the largest
                // symbol, so exactness is measured against the operator norm.
                let norm = op.symbol().iter().copied().fold(0.0, f64::max);
                for (a, b) in [(1i32, 0i32), (4, 0), (3, 2), (0, 9), (17, 5)] {
                    let (a, b) = if dim == 1 { (a + b, 0) } else { (a, b) };
                    let lam = ((a * a + b * b) as f64).powf(alpha / 2.0);
                    let f = Field::from_fn(grid, |p| (a as f64 * p[0] + b as f64 * p[1]).sin());
                    let got = op.apply(&f).unwrap();
                    for (g, v) in got.values().iter().zip(f.values()) {
                        assert!((g - lam * v).abs() <= 1e-12 * norm, "d={dim} n={n} a={alpha} k=({a},{b})");
                    }
                }
            }
        }
    }
}

#[test]
fn duality_matches_direct_spectral_sum() {
    let grid = LatticeGrid::line(64, TAU).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let f = band_limited(grid, 20, &mut rng);
    let g = band_limited(grid, 20, &mut rng);
    let op = FracLaplacian::new(0.6, grid).unwrap();
    let lhs = op.apply(&f).unwrap().inner(&g).unwrap();
    let oracle = direct_spectral_pairing(0.6, &f, &g);
    assert!((lhs - oracle).abs() < 1e-10 * (1.0 + oracle.abs()), "{lhs} vs {oracle}");
    assert!(plancherel_duality_residual(0.6, &f, &g).unwrap() < 1e-10);
}

#[test]
fn duality_on_hundred_seeded_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..100 {
        let dim = 1 + i % 2;
        let grid = LatticeGrid::new(dim, 64, TAU).unwrap();
        let f = band_limited(grid, 24, &mut rng);
        let g = band_limited(grid, 24, &mut rng);
        let alpha = 0.1 + 1.9 * (i as f64 / 99.0);
        assert!(plancherel_duality_residual(alpha, &f, &g).unwrap() < 1e-10);
    }
}

#[test]
fn cutoff_scaling_converges_under_refinement() {
    let r1 = cutoff_scaling_residual(1.0, 2.0, LatticeGrid::line(512, 10.0).unwrap()).unwrap();
    assert!(r1 < 1e-3, "{r1}");
    let line = |n| LatticeGrid::line(n, 20.0).unwrap();
    let coarse = cutoff_scaling_residual(1.5, 4.0, line(512)).unwrap();
    let fine = cutoff_scaling_residual(1.5, 4.0, line(1024)).unwrap();
    assert!(fine < 1e-3 && fine <= coarse, "{fine} vs {coarse}");
    assert_eq!(cutoff_scaling_residual(0.7, 1.0, line(256)).unwrap(), 0.0);
}

#[test]
fn stable_density_matches_real_axis_quadrature() {
    let k = StableKernel::new(1.5, 1).unwrap();
    for x in [0.0, 0.4, 1.3, 3.0] {
        let oracle = line_density_oracle(1.5, x, 1e-12);
        let got = k.eval(1.0, &[x]).unwrap();
        assert!((got - oracle).abs() < 1e-6, "x={x}: {got} vs {oracle}");
    }
    let k = StableKernel::new(0.7, 1).unwrap();
    let oracle = line_density_oracle(0.7, 0.5, 1e-12);
    assert!((k.eval(1.0, &[0.5]).unwrap() - oracle).abs() < 1e-6);
}

#[test]
fn closed_forms_against_quadrature() {
    for dim in [1, 2] {
        let cauchy = StableKernel::new(1.0, dim).unwrap();
        let gauss = StableKernel::new(2.0, dim).unwrap();
        for r in [0.0, 0.2, 1.0, 3.5, 12.0] {
            let mut x = vec![0.0; dim];
            x[0] = r;
            let exact = cauchy.eval(0.7, &x).unwrap();
            assert!((cauchy.quadrature_eval(0.7, r).unwrap() - exact).abs() <= 1e-9 * exact);
            if r < 4.0 {
                let exact = gauss.eval(0.7, &x).unwrap();
                assert!((gauss.quadrature_eval(0.7, r).unwrap() - exact).abs() <= 1e-9 * exact.max(1e-3));
            }
        }
    }
}

#[test]
fn densities_carry_unit_mass() {
    for (alpha, dim) in [(1.5, 1), (1.5, 2)] {
        let m = kernel_mass(&StableKernel::new(alpha, dim).unwrap(), 400.0);
        assert!((m - 1.0).abs() < 1e-6, "alpha={alpha} d={dim}: {m}");
    }
    // Heavy tail on the line: the far field comes from the convergent series.
    let k = StableKernel::new(0.5, 1).unwrap();
    let r: f64 = 50.0;
    let body = common::simpson(|s| 2.0 * k.profile(s.exp()).unwrap() * s.exp(), -14.0, r.ln(), 100)
        + 2.0 * k.profile(0.0).unwrap() * (-14f64).exp();
    let m = body + line_tail_mass_series(0.5, r, 60);
    assert!((m - 1.0).abs() < 1e-6, "{m}");
}

#[test]
fn tail_exponents() {
    for (alpha, dim) in [(0.5, 1), (1.5, 1), (0.5, 2), (1.5, 2)] {
        let fit = fit_profile_tail(&StableKernel::new(alpha, dim).unwrap()).unwrap();
        assert!(fit.relative_error() <= 0.05, "({alpha},{dim}): {}", fit.fit.slope);
    }
}

#[test]
fn two_sided_bound_spread() {
    let k = StableKernel::new(1.5, 1).unwrap();
    let ts: Vec<f64> = (0..10).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 9.0)).collect();
    let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![10f64.powf(-2.0 + 4.0 * i as f64 / 19.0)]).collect();
    let (lo, hi) = two_sided_bound_check(&k, &ts, &xs).unwrap();
    assert!(lo > 0.0 && hi / lo < 10.0, "{lo} {hi}");
}

#[test]
fn cauchy_semigroup_matches_wrapped_convolution() {
    let grid = LatticeGrid::line(256, TAU).unwrap();
    let u0 = Field::from_fn(grid, |p| (-p[0] * p[0] / (2.0 * 0.1f64.powi(2))).exp());
    let k = StableKernel::new(1.0, 1).unwrap();
    let u = semigroup_solve(&k, &u0, 1.0).unwrap();
    let dx = grid.spacing();
    for i in (0..256).step_by(5) {
        let xi = grid.coordinate(i);
        let conv: f64 = (0..256).map(|j| wrapped_cauchy(1.0, xi - grid.coordinate(j)) * u0.values()[j] * dx).sum();
        assert!((u.values()[i] - conv).abs() < 1e-4, "x={xi}");
    }
    // The wrapped kernel itself has unit mass.
    let mass: f64 = (0..256).map(|j| wrapped_cauchy(1.0, grid.coordinate(j)) * dx).sum();
    assert!((mass - 1.0).abs() < 1e-12);
}
