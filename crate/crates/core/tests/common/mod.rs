//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use sfpme::kernel::StableKernel;

/// Composite Simpson rule with `2 * half` panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, half: usize) -> f64 {
    let n = 2 * half;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// `(1/pi) int_0^inf cos(xi x) exp(-xi^alpha) dxi` by plain trapezoid sums on
/// the real axis after `xi = s^2`, halving the step until two successive
/// results agree to `tol`.
pub fn line_density_oracle(alpha: f64, x: f64, tol: f64) -> f64 {
    // exp(-s^(2 alpha)) is below 1e-300 beyond this point.
    let s_max = 690f64.powf(1.0 / (2.0 * alpha));
    let g = |s: f64| 2.0 * s * (s * s * x).cos() * (-(s * s).powf(alpha)).exp();
    let mut n = 1024usize;
    let mut prev = f64::NAN;
    loop {
        let h = s_max / n as f64;
        let sum: f64 = (1..n).map(|i| g(i as f64 * h)).sum::<f64>() + 0.5 * g(s_max);
        let cur = sum * h / PI;
        if (cur - prev).abs() < tol || n > 1 << 24 {
            return cur;
        }
        prev = cur;
        n *= 2;
    }
}

/// Total mass of `p(1, .)`: radial Simpson in `log r` up to `r_max`, plus the
/// far-field remainder from the leading power tail fitted at `r_max`.
pub fn kernel_mass(k: &StableKernel, r_max: f64) -> f64 {
    kernel_mass_with(k, r_max, 100)
}

/// [`kernel_mass`] with `2 * half` Simpson panels.
pub fn kernel_mass_with(k: &StableKernel, r_max: f64, half: usize) -> f64 {
    let d = k.dim as f64;
    let shell = |r: f64| match k.dim {
        1 => 2.0,
        _ => 2.0 * PI * r,
    };
    let r_min: f64 = 1e-6;
    let body = simpson(
        |s| {
            let r = s.exp();
            k.profile(r).unwrap() * shell(r) * r
        },
        r_min.ln(),
        r_max.ln(),
        half,
    );
    let core = k.profile(0.0).unwrap() * shell(r_min) * r_min / d.max(1.0);
    let c = k.profile(r_max).unwrap() * r_max.powf(d + k.alpha);
    let tail = c * shell(1.0) * r_max.powf(-k.alpha) / k.alpha;
    body + core + tail
}

/// The one-dimensional far-field series of the stable density (convergent
/// for `alpha < 1`): `(1/pi) sum_k (-1)^{k+1} Gamma(k alpha + 1)/k! sin(k pi alpha/2) r^{-(k alpha + 1)}`,
/// integrated over `|x| > r`.
pub fn line_tail_mass_series(alpha: f64, r: f64, terms: usize) -> f64 {
    let mut acc = 0.0;
    let mut fact = 1.0;
    for k in 1..=terms {
        fact *= k as f64;
        let ka = k as f64 * alpha;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        acc += sign * libm::tgamma(ka + 1.0) / fact * (k as f64 * PI * alpha / 2.0).sin() * r.powf(-ka) / ka;
    }
    2.0 * acc / PI
}

/// Periodic Poisson kernel: the Cauchy density wrapped onto `[-pi, pi)`.
pub fn wrapped_cauchy(t: f64, x: f64) -> f64 {
    t.sinh() / (2.0 * PI * (t.cosh() - x.cos()))
}
