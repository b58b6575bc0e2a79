//! The isotropic alpha-stable transition density `p(t, x)`, i.e. the inverse
//! Fourier transform of `exp(-|xi|^alpha t)`, and the homogeneous linear
//! problem it solves.
//!
//! Numerical inversion, `d = 1`: `p(t, r) = (1/pi) Re int_0^inf exp(i xi r - t xi^alpha) dxi`.
//! The ray of integration is rotated to `xi = rho e^{i theta}` with
//! `0 < theta < pi / (2 alpha)`; on that ray both factors decay exponentially so
//! the far field (where the real-axis integrand oscillates many thousand times)
//! costs no more than the origin. The remaining endpoint cusp `rho^alpha` is
//! absorbed by the exp-sinh substitution.
//!
//! `d = 2`: the one-dimensional marginal of the planar density is the
//! one-dimensional density with the same `alpha`, so the planar profile is the
//! inverse Abel transform `p_2(r) = -(1/pi) int_0^inf p_1'(r cosh u) du`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use libm::tgamma as gamma;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::quadrature::{even_trapezoid, exp_sinh};
use crate::spectral::FourierTransform;
use crate::stats::{linear_fit, LinearFit};

const REL_TOL: f64 = 1e-13;

/// Evaluator for the stable density with `alpha` in `(0, 2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableKernel {
    pub alpha: f64,
    pub dim: usize,
    /// Largest transformed-trapezoid lattice the quadrature may refine to.
    pub quadrature_resolution: usize,
}

impl StableKernel {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 2], got {alpha}")));
        }
        if dim != 1 && dim != 2 {
            return Err(Error::Domain(format!("dimension must be 1 or 2, got {dim}")));
        }
        Ok(Self { alpha, dim, quadrature_resolution: 1 << 15 })
    }

    fn rotation(&self) -> f64 {
        0.6 * (0.5 * PI).min(0.5 * PI / self.alpha)
    }

    /// `Re int_ray exp(i z r - t z^alpha) (i z)^deriv dz`, with `z = rho e^{i theta}`.
    fn rotated_integral(&self, t: f64, r: f64, deriv: bool) -> Result<f64> {
        let theta = self.rotation();
        let dir = Complex64::from_polar(1.0, theta);
        let rot_alpha = Complex64::from_polar(1.0, self.alpha * theta);
        let alpha = self.alpha;
        let integrand = move |rho: f64| {
            let z = dir * rho;
            let expo = Complex64::new(0.0, r) * z - rot_alpha * (t * rho.powf(alpha));
            if expo.re < -745.0 {
                return Complex64::new(0.0, 0.0);
            }
            let v = expo.exp() * dir;
            if deriv {
                v * Complex64::new(0.0, 1.0) * z
            } else {
                v
            }
        };
        let mut scale = t.powf(-1.0 / alpha);
        if r > 0.0 {
            scale = scale.min(1.0 / (r * theta.sin()));
        }
        Ok(exp_sinh(integrand, scale, REL_TOL, self.quadrature_resolution)?.re)
    }

    fn line_density(&self, t: f64, r: f64) -> Result<f64> {
        Ok(self.rotated_integral(t, r.abs(), false)? / PI)
    }

    fn line_density_derivative(&self, t: f64, r: f64) -> Result<f64> {
        Ok(self.rotated_integral(t, r, true)? / PI)
    }

    fn planar_density(&self, t: f64, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Ok(gamma(2.0 / self.alpha) / (2.0 * PI * self.alpha * t.powf(2.0 / self.alpha)));
        }
        // Errors inside the closure are surfaced after the outer integral.
        let failure = std::cell::RefCell::new(None);
        let integral = even_trapezoid(
            |u| match self.line_density_derivative(t, r * u.cosh()) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            1e-12,
            self.quadrature_resolution,
        )?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(-integral / PI)
    }

    /// Density at radius `r` by numerical inversion, skipping the closed forms.
    pub fn quadrature_eval(&self, t: f64, r: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("kernel time must be positive, got {t}")));
        }
        match self.dim {
            1 => self.line_density(t, r),
            _ => self.planar_density(t, r.abs()),
        }
    }

    /// `p(t, x)`; `x` must have `dim` components.
    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Domain(format!(
                "point has {} components, kernel dimension is {}",
                x.len(),
                self.dim
            )));
        }
        if !(t > 0.0) {
            return Err(Error::Domain(format!("kernel time must be positive, got {t}")));
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let d = self.dim as i32;
        if self.alpha == 2.0 {
            return Ok((4.0 * PI * t).powf(-0.5 * d as f64) * (-r * r / (4.0 * t)).exp());
        }
        if self.alpha == 1.0 {
            let base = t / (t * t + r * r);
            return Ok(match d {
                1 => base / PI,
                _ => base / (2.0 * PI * (t * t + r * r).sqrt()),
            });
        }
        self.quadrature_eval(t, r)
    }

    /// `p(1, r)`; the profile `F` of the self-similar form.
    pub fn profile(&self, r: f64) -> Result<f64> {
        let mut x = vec![0.0; self.dim];
        x[0] = r;
        self.eval(1.0, &x)
    }
}

pub fn kernel_eval(k: &StableKernel, t: f64, x: &[f64]) -> Result<f64> {
    k.eval(t, x)
}

/// Far-field window `[r_lo, r_hi]` for tail fits at `t = 1`.
///
/// The first correction to the power tail is smaller by a factor `r^{-alpha}`,
/// so for `alpha < 1` the window moves out to keep that correction under a
/// few percent.
pub fn tail_window(alpha: f64) -> (f64, f64) {
    let lo = 10f64.powf(1f64.max(1.0 / alpha));
    (lo, 10.0 * lo)
}

/// Detailed result of a tail fit.
#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub window: (f64, f64),
    pub fit: LinearFit,
    /// `-(d + alpha)`.
    pub expected: f64,
}

impl TailFit {
    pub fn relative_error(&self) -> f64 {
        ((self.fit.slope - self.expected) / self.expected).abs()
    }
}

pub fn fit_profile_tail(k: &StableKernel) -> Result<TailFit> {
    if k.alpha >= 2.0 {
        return Err(Error::Unsupported(
            "Gaussian kernel has no power tail; exponent undefined at alpha = 2".into(),
        ));
    }
    let window = tail_window(k.alpha);
    let (lo, hi) = (window.0.ln(), window.1.ln());
    let count = 16;
    let mut xs = Vec::with_capacity(count);
    let mut ys = Vec::with_capacity(count);
    for i in 0..count {
        let lr = lo + (hi - lo) * i as f64 / (count - 1) as f64;
        xs.push(lr);
        ys.push(k.profile(lr.exp())?.ln());
    }
    Ok(TailFit { window, fit: linear_fit(&xs, &ys), expected: -(k.dim as f64 + k.alpha) })
}

/// Least-squares slope of `log p(1, r)` against `log r` in the far field.
pub fn profile_tail_exponent(k: &StableKernel) -> Result<f64> {
    Ok(fit_profile_tail(k)?.fit.slope)
}

/// `t^{-d/alpha} min t |x|^{-(d+alpha)}`.
pub fn two_sided_bound(alpha: f64, dim: usize, t: f64, r: f64) -> f64 {
    let d = dim as f64;
    let near = t.powf(-d / alpha);
    if r == 0.0 {
        return near;
    }
    near.min(t * r.powf(-(d + alpha)))
}

/// Empirical `(c_lo, c_hi)`: extreme ratios `p(t, x) / bound(t, x)` over
/// every `(t, x)` pair of the two sample lists.
pub fn two_sided_bound_check(
    k: &StableKernel,
    t_samples: &[f64],
    x_samples: &[Vec<f64>],
) -> Result<(f64, f64)> {
    if k.alpha >= 2.0 {
        return Err(Error::Unsupported("two-sided power bound requires alpha < 2".into()));
    }
    if t_samples.is_empty() || x_samples.is_empty() {
        return Err(Error::Precondition("bound check needs nonempty samples".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for &t in t_samples {
        for x in x_samples {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ratio = k.eval(t, x)? / two_sided_bound(k.alpha, k.dim, t, r);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    Ok((lo, hi))
}

/// `u(t) = p(t) * u0` on the periodic lattice: `u_hat = exp(-|xi|^alpha t) u0_hat`.
pub fn semigroup_solve(k: &StableKernel, u0: &Field, t: f64) -> Result<Field> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("semigroup time must be nonnegative, got {t}")));
    }
    if u0.grid().dim() != k.dim {
        return Err(Error::GridMismatch("kernel and field dimensions differ".into()));
    }
    u0.ensure_finite("semigroup initial data")?;
    let fft = FourierTransform::new(*u0.grid());
    let decay: Vec<f64> = u0
        .grid()
        .wavenumber_magnitudes()
        .into_iter()
        .map(|m| if m == 0.0 { 1.0 } else { (-m.powf(k.alpha) * t).exp() })
        .collect();
    let values = fft.multiply(u0.values(), &decay);
    Ok(Field::new(*u0.grid(), values)?.with_time(u0.time() + t))
}
