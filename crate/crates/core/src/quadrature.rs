//! Trapezoid-type quadratures with step-halving convergence control.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

/// Half-width of the truncated transformed line; `exp(pi/2 sinh 5)` ~ 1e50.
const T_MAX: f64 = 5.0;
const H0: f64 = 0.125;
const MIN_LEVELS: usize = 2;

/// `int_0^inf f(x) dx` by the exp-sinh substitution
/// `x = scale * exp(pi/2 sinh t)` followed by the trapezoid rule in `t`,
/// halving the step until successive estimates agree to
/// `rel_tol * |S| + 1e-14 * int |f|`.
///
/// `max_nodes` caps the number of nodes on the finest lattice.
pub fn exp_sinh(
    f: impl Fn(f64) -> Complex64,
    scale: f64,
    rel_tol: f64,
    max_nodes: usize,
) -> Result<Complex64> {
    let node = |t: f64| -> (Complex64, f64) {
        let e = (0.5 * std::f64::consts::PI * t.sinh()).exp();
        let x = scale * e;
        if x == 0.0 || !x.is_finite() {
            return (Complex64::new(0.0, 0.0), 0.0);
        }
        let w = scale * 0.5 * std::f64::consts::PI * t.cosh() * e;
        let v = f(x) * w;
        if v.re.is_finite() && v.im.is_finite() {
            (v, v.norm())
        } else {
            (Complex64::new(0.0, 0.0), 0.0)
        }
    };

    let mut h = H0;
    let k_max = (T_MAX / h) as i64;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    for k in -k_max..=k_max {
        let (v, a) = node(k as f64 * h);
        sum += v;
        abs_sum += a;
    }
    let mut estimate = sum * h;
    let mut nodes = (2 * k_max + 1) as usize;
    let mut level = 0;
    loop {
        // Refine: add the midpoints.
        let k_max = (T_MAX / h) as i64;
        let mut mid = Complex64::new(0.0, 0.0);
        for k in -k_max..k_max {
            let (v, a) = node((k as f64 + 0.5) * h);
            mid += v;
            abs_sum += a;
        }
        nodes += (2 * k_max) as usize;
        sum += mid;
        h *= 0.5;
        let refined = sum * h;
        level += 1;
        let diff = (refined - estimate).norm();
        let tol = rel_tol * refined.norm() + 1e-14 * abs_sum * h;
        estimate = refined;
        if level >= MIN_LEVELS && diff <= tol {
            return Ok(estimate);
        }
        if 2 * nodes > max_nodes {
            return Err(Error::Accuracy(format!(
                "exp-sinh quadrature did not converge: change {diff:e} above tolerance {tol:e} at {nodes} nodes"
            )));
        }
    }
}

/// `int_0^inf g(u) du` for a smooth even integrand `g` that decays at
/// infinity, by the trapezoid rule on the full line (spectrally accurate for
/// even analytic integrands), halving the step until converged.
pub fn even_trapezoid(g: impl Fn(f64) -> f64, rel_tol: f64, max_nodes: usize) -> Result<f64> {
    let mut h = 0.25;
    let tail_sum = |h: f64, odd_only: bool| -> (f64, usize) {
        let mut s = 0.0;
        let mut count = 0;
        let mut small = 0;
        let mut k = 1usize;
        loop {
            if !odd_only || k % 2 == 1 {
                let v = g(k as f64 * h);
                count += 1;
                s += v;
                if v.abs() <= 1e-18 * s.abs() || v == 0.0 {
                    small += 1;
                    if small >= 3 {
                        break;
                    }
                } else {
                    small = 0;
                }
                if count > max_nodes {
                    break;
                }
            }
            k += 1;
        }
        (s, count)
    };
    let g0 = g(0.0);
    let (s, mut nodes) = tail_sum(h, false);
    let mut total = 0.5 * g0 + s;
    let mut estimate = h * total;
    for _ in 0..20 {
        h *= 0.5;
        let (odd, c) = tail_sum(h, true);
        nodes += c;
        total += odd;
        let refined = h * total;
        if (refined - estimate).abs() <= rel_tol * refined.abs() {
            return Ok(refined);
        }
        estimate = refined;
        if nodes > max_nodes {
            break;
        }
    }
    Err(Error::Accuracy(format!(
        "even trapezoid did not converge within {max_nodes} nodes"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_sinh_gamma_integrals() {
        // int_0^inf x^{-1/2} e^{-x} dx = sqrt(pi), endpoint singularity included.
        let v = exp_sinh(|x| Complex64::new(x.powf(-0.5) * (-x).exp(), 0.0), 1.0, 1e-13, 1 << 16)
            .unwrap();
        assert!((v.re - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        // Algebraic decay: int_0^inf 1/(1+x)^2 dx = 1.
        let v = exp_sinh(|x| Complex64::new((1.0 + x).powi(-2), 0.0), 1.0, 1e-13, 1 << 16).unwrap();
        assert!((v.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exp_sinh_reports_non_convergence() {
        let r = exp_sinh(|x| Complex64::new((50.0 * x).cos() / (1.0 + x), 0.0), 1.0, 1e-14, 64);
        assert!(matches!(r, Err(Error::Accuracy(_))));
    }

    #[test]
    fn even_trapezoid_gaussian() {
        let v = even_trapezoid(|u| (-u * u).exp(), 1e-14, 1 << 16).unwrap();
        assert!((v - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-14);
    }
}
