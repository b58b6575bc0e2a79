//! Time stepping for `du = -(-D)^{alpha/2} u^m dt + sigma(u) dW` on the
//! periodic lattice.
//!
//! Two schemes are provided: explicit Euler-Maruyama and a semi-implicit
//! spectral scheme that treats a linearisation `a u` of the flux implicitly.
//! Noise always enters at the left endpoint (Ito).

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Field, LatticeGrid};
use crate::noise::{sample_aggregated_increment, NoiseIncrement, NoiseSpec};
use crate::spectral::{FourierTransform, FracLaplacian};
use crate::stats::pairwise_sum;

/// Solutions with `|u|` above this are declared blown up.
pub const BLOW_UP_THRESHOLD: f64 = 1e8;

/// Noise coefficient `sigma(u)`.
#[derive(Clone)]
pub enum SigmaSpec {
    Zero,
    /// `sigma = 1`: additive noise. Does not vanish at zero.
    One,
    /// `sigma(u) = lambda u`.
    Linear(f64),
    /// Audited Lipschitz function with `sigma(0) = 0`.
    CustomLipschitz { f: Arc<dyn Fn(f64) -> f64 + Send + Sync>, lip: f64 },
}

impl std::fmt::Debug for SigmaSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SigmaSpec::Zero => write!(f, "Zero"),
            SigmaSpec::One => write!(f, "One"),
            SigmaSpec::Linear(l) => write!(f, "Linear({l})"),
            SigmaSpec::CustomLipschitz { lip, .. } => write!(f, "CustomLipschitz(lip = {lip})"),
        }
    }
}

impl PartialEq for SigmaSpec {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (SigmaSpec::Zero, SigmaSpec::Zero) | (SigmaSpec::One, SigmaSpec::One) => true,
            (SigmaSpec::Linear(a), SigmaSpec::Linear(b)) => a == b,
            (
                SigmaSpec::CustomLipschitz { f: a, lip: la },
                SigmaSpec::CustomLipschitz { f: b, lip: lb },
            ) => Arc::ptr_eq(a, b) && la == lb,
            _ => false,
        }
    }
}

impl SigmaSpec {
    /// Wraps `f` after checking `sigma(0) = 0` and the Lipschitz bound on
    /// 10^4 random pairs, half spread over `[-10, 10]` and half at close range.
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static, lip: f64) -> Result<Self> {
        if !(lip >= 0.0 && lip.is_finite()) {
            return Err(Error::Domain(format!("Lipschitz constant must be nonnegative, got {lip}")));
        }
        if f(0.0) != 0.0 {
            return Err(Error::Domain(format!("sigma(0) = {} but must vanish", f(0.0))));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5349_474d_41);
        for i in 0..10_000 {
            let x: f64 = rng.random_range(-10.0..10.0);
            let y = if i % 2 == 0 {
                rng.random_range(-10.0..10.0)
            } else {
                let scale = 10f64.powf(rng.random_range(-6.0..0.0));
                x + scale * rng.random_range(-1.0..1.0)
            };
            if x == y {
                continue;
            }
            let ratio = (f(x) - f(y)).abs() / (x - y).abs();
            if !(ratio <= lip * (1.0 + 1e-9)) {
                return Err(Error::Domain(format!(
                    "Lipschitz audit failed: |sigma(x) - sigma(y)| / |x - y| = {ratio} at ({x}, {y}) exceeds {lip}"
                )));
            }
        }
        Ok(SigmaSpec::CustomLipschitz { f: Arc::new(f), lip })
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            SigmaSpec::Zero => 0.0,
            SigmaSpec::One => 1.0,
            SigmaSpec::Linear(l) => l * u,
            SigmaSpec::CustomLipschitz { f, .. } => f(u),
        }
    }

    pub fn lip_constant(&self) -> f64 {
        match self {
            SigmaSpec::Zero | SigmaSpec::One => 0.0,
            SigmaSpec::Linear(l) => l.abs(),
            SigmaSpec::CustomLipschitz { lip, .. } => *lip,
        }
    }

    /// Whether `sigma(0) = 0` holds, which `One` violates.
    pub fn vanishes_at_zero(&self) -> bool {
        !matches!(self, SigmaSpec::One)
    }
}

/// Full problem statement.
#[derive(Debug, Clone, PartialEq)]
pub struct SfpmeProblem {
    pub alpha: f64,
    pub m: f64,
    pub grid: LatticeGrid,
    pub u0: Field,
    pub sigma: SigmaSpec,
    pub noise: NoiseSpec,
}

impl SfpmeProblem {
    pub fn new(
        alpha: f64,
        m: f64,
        u0: Field,
        sigma: SigmaSpec,
        noise: NoiseSpec,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 2], got {alpha}")));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!("m must be positive, got {m}")));
        }
        u0.ensure_finite("initial data")?;
        if noise.dim != u0.grid().dim() {
            return Err(Error::GridMismatch("noise and initial data dimensions differ".into()));
        }
        Ok(Self { alpha, m, grid: *u0.grid(), u0, sigma, noise })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ExplicitEM,
    SemiImplicitSpectral,
}

/// Which fields a trajectory keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotPolicy {
    /// Every `ceil(t_end / (100 dt))`-th step.
    Auto,
    Every(usize),
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// 2/3 rule for integer `m`, padding for non-integer `m`.
    pub dealias: bool,
    pub cfl_safety: f64,
    pub snapshots: SnapshotPolicy,
    /// Each step's increment is the sum of this many sub-increments; see
    /// [`crate::noise::sample_aggregated_increment`].
    pub noise_refinement: u32,
}

impl SolverConfig {
    /// Semi-implicit scheme, dealiasing on, safety 0.5, automatic snapshots.
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            scheme: Scheme::SemiImplicitSpectral,
            dealias: true,
            cfl_safety: 0.5,
            snapshots: SnapshotPolicy::Auto,
            noise_refinement: 1,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_snapshots(mut self, policy: SnapshotPolicy) -> Self {
        self.snapshots = policy;
        self
    }

    pub fn with_dealias(mut self, on: bool) -> Self {
        self.dealias = on;
        self
    }

    pub fn with_noise_refinement(mut self, r: u32) -> Self {
        self.noise_refinement = r;
        self
    }

    /// Number of steps; `t_end` must be a whole multiple of `dt`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::Precondition(format!(
                "t_end = {} is shorter than dt = {}",
                self.t_end, self.dt
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Domain(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety)));
        }
        if self.noise_refinement == 0 {
            return Err(Error::Domain("noise refinement must be at least 1".into()));
        }
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::Precondition(format!(
                "t_end = {} is not a whole number of steps dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(n as usize)
    }

    fn snapshot_stride(&self, steps: usize) -> Option<usize> {
        match self.snapshots {
            SnapshotPolicy::Off => None,
            SnapshotPolicy::Every(k) => Some(k.max(1)),
            SnapshotPolicy::Auto => Some(steps.div_ceil(100).max(1)),
        }
    }
}

/// Mass process `F_u(t) = int u dx` together with the accumulated noise
/// integral `int_0^t int sigma(u) W(dx, ds)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassProcessRecord {
    pub times: Vec<f64>,
    pub f_u: Vec<f64>,
    pub noise_integral: Vec<f64>,
    pub f_u0: f64,
}

/// Output of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub path_id: u64,
    /// Every step time, starting at 0.
    pub times: Vec<f64>,
    /// Thinned fields; each carries its own time tag.
    pub snapshots: Vec<Field>,
    /// Step indices of `snapshots`.
    pub snapshot_steps: Vec<usize>,
    pub mass: MassProcessRecord,
    /// Lattice `|u|^2_{L^2}` at every step.
    pub sq_norms: Vec<f64>,
    /// `max |u|` at every step (monitored, not asserted).
    pub max_abs: Vec<f64>,
    pub config: SolverConfig,
}

impl Trajectory {
    pub fn final_field(&self) -> Option<&Field> {
        match self.snapshot_steps.last() {
            Some(&k) if k + 1 == self.times.len() => self.snapshots.last(),
            _ => None,
        }
    }
}

/// Failed evolution, with everything recorded up to the failure.
#[derive(Debug, Clone)]
pub struct EvolveFailure {
    pub error: Error,
    pub partial: Trajectory,
}

impl From<Box<EvolveFailure>> for Error {
    fn from(f: Box<EvolveFailure>) -> Self {
        f.error
    }
}

fn is_integer(m: f64) -> bool {
    m.fract() == 0.0
}

/// Pointwise odd power with optional dealiasing, reusing transforms.
#[derive(Debug, Clone)]
struct PowerMap {
    m: f64,
    dealias: bool,
    fft: FourierTransform,
    padded: Option<FourierTransform>,
}

impl PowerMap {
    fn new(m: f64, dealias: bool, fft: FourierTransform) -> Result<Self> {
        let padded = if dealias && m != 1.0 && !is_integer(m) {
            let g = fft.grid();
            Some(FourierTransform::new(LatticeGrid::new(
                g.dim(),
                2 * g.points_per_dim(),
                g.side_length(),
            )?))
        } else {
            None
        };
        Ok(Self { m, dealias, fft, padded })
    }

    fn odd_power(&self, v: f64) -> f64 {
        if self.m == 2.0 {
            v * v.abs()
        } else {
            v.signum() * v.abs().powf(self.m)
        }
    }

    /// Nonlinearity in Fourier space (already dealiased when enabled).
    fn spectrum(&self, u: &[f64]) -> Vec<Complex64> {
        if self.m == 1.0 || !self.dealias {
            let w: Vec<f64> = if self.m == 1.0 {
                u.to_vec()
            } else {
                u.iter().map(|&v| self.odd_power(v)).collect()
            };
            return self.fft.forward(&w);
        }
        match &self.padded {
            None => {
                let w: Vec<f64> = u.iter().map(|&v| self.odd_power(v)).collect();
                let mut s = self.fft.forward(&w);
                two_thirds_truncate(self.fft.grid(), &mut s);
                s
            }
            Some(pad) => {
                let g = self.fft.grid();
                let fine = pad.inverse(pad_spectrum(g, &self.fft.forward(u)));
                let w: Vec<f64> = fine.iter().map(|&v| self.odd_power(v)).collect();
                truncate_spectrum(g, &pad.forward(&w))
            }
        }
    }

    fn apply(&self, u: &[f64]) -> Vec<f64> {
        if self.m == 1.0 {
            return u.to_vec();
        }
        if !self.dealias {
            return u.iter().map(|&v| self.odd_power(v)).collect();
        }
        self.fft.inverse(self.spectrum(u))
    }
}

/// Zero every mode with `|k| > n/3` on any axis.
fn two_thirds_truncate(grid: &LatticeGrid, spectrum: &mut [Complex64]) {
    let cut = grid.points_per_dim() as i64 / 3;
    for (s, k) in spectrum.iter_mut().zip(grid.mode_indices()) {
        if k[0].abs() > cut || k[1].abs() > cut {
            *s = Complex64::new(0.0, 0.0);
        }
    }
}

fn wrap(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Spectrum of the trigonometric interpolant on the doubled lattice. The
/// Nyquist coefficient is split evenly between `+n/2` and `-n/2`.
fn pad_spectrum(grid: &LatticeGrid, s: &[Complex64]) -> Vec<Complex64> {
    let n = grid.points_per_dim();
    let half = (n / 2) as i64;
    let scale = (1u32 << grid.dim()) as f64;
    let axis = |k: i64| -> Option<(usize, f64)> {
        if k.abs() > half {
            None
        } else {
            Some((wrap(k, n), if k.abs() == half { 0.5 } else { 1.0 }))
        }
    };
    let fine = LatticeGrid::new(grid.dim(), 2 * n, grid.side_length()).expect("doubled lattice");
    fine.mode_indices()
        .into_iter()
        .map(|k| match grid.dim() {
            1 => match axis(k[0]) {
                Some((i, w)) => s[i] * (w * scale),
                None => Complex64::new(0.0, 0.0),
            },
            _ => match (axis(k[0]), axis(k[1])) {
                (Some((i, wi)), Some((j, wj))) => s[i * n + j] * (wi * wj * scale),
                _ => Complex64::new(0.0, 0.0),
            },
        })
        .collect()
}

/// Keep modes `|k| < n/2` of a doubled-lattice spectrum; Nyquist is dropped.
fn truncate_spectrum(grid: &LatticeGrid, fine: &[Complex64]) -> Vec<Complex64> {
    let n = grid.points_per_dim();
    let half = (n / 2) as i64;
    let scale = 1.0 / (1u32 << grid.dim()) as f64;
    grid.mode_indices()
        .into_iter()
        .map(|k| {
            if k[0].abs() == half || k[1].abs() == half {
                return Complex64::new(0.0, 0.0);
            }
            let idx = match grid.dim() {
                1 => wrap(k[0], 2 * n),
                _ => wrap(k[0], 2 * n) * 2 * n + wrap(k[1], 2 * n),
            };
            fine[idx] * scale
        })
        .collect()
}

/// `sign(u) |u|^m` pointwise. With `dealias`, integer `m` is followed by the
/// 2/3 rule and non-integer `m` is evaluated on a doubled lattice and
/// truncated back. `m = 1` returns `f` unchanged.
pub fn power_nonlinearity(f: &Field, m: f64, dealias: bool) -> Result<Field> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Domain(format!("m must be positive, got {m}")));
    }
    f.ensure_finite("nonlinearity input")?;
    let map = PowerMap::new(m, dealias, FourierTransform::new(*f.grid()))?;
    Ok(Field::new(*f.grid(), map.apply(f.values()))?.with_time(f.time()))
}

/// Reusable stepping state for one problem/configuration pair.
#[derive(Debug, Clone)]
pub struct Stepper {
    problem: SfpmeProblem,
    cfg: SolverConfig,
    lap: FracLaplacian,
    power: PowerMap,
    max_symbol: f64,
}

impl Stepper {
    pub fn new(problem: &SfpmeProblem, cfg: &SolverConfig) -> Result<Self> {
        cfg.steps()?;
        let lap = FracLaplacian::new(problem.alpha, problem.grid)?;
        let power = PowerMap::new(problem.m, cfg.dealias, lap.transform().clone())?;
        let max_symbol = lap.symbol().iter().fold(0.0f64, |a, &b| a.max(b));
        Ok(Self { problem: problem.clone(), cfg: *cfg, lap, power, max_symbol })
    }

    /// Swap in a different operator, e.g. one with a tampered symbol.
    #[doc(hidden)]
    pub fn with_operator(mut self, lap: FracLaplacian) -> Self {
        self.max_symbol = lap.symbol().iter().fold(0.0f64, |a, &b| a.max(b));
        self.power.fft = lap.transform().clone();
        self.lap = lap;
        self
    }

    pub fn operator(&self) -> &FracLaplacian {
        &self.lap
    }

    /// Linearisation slope `a = m max_j max(|u_j|, 1e-3 max|u|)^{m-1}`.
    /// For `m >= 1` this is `m max|u|^{m-1}`; the floor keeps it finite for
    /// `m < 1`.
    pub fn linearisation(&self, u: &[f64]) -> f64 {
        let m = self.problem.m;
        let top = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if top == 0.0 || m == 1.0 {
            return m;
        }
        if m > 1.0 {
            m * top.powf(m - 1.0)
        } else {
            m * (1e-3 * top).powf(m - 1.0)
        }
    }

    /// Largest stable explicit step for the state `u`.
    pub fn stable_dt(&self, u: &[f64]) -> f64 {
        self.cfg.cfl_safety / (self.linearisation(u) * self.max_symbol)
    }

    /// Advance one step. Returns the new values and `sum_j sigma(u_j) inc_j`.
    pub fn advance(&self, u: &[f64], t: f64, inc: &NoiseIncrement) -> Result<(Vec<f64>, f64)> {
        let dt = self.cfg.dt;
        if (inc.dt() - dt).abs() > 1e-12 * dt {
            return Err(Error::Precondition(format!(
                "increment length {} differs from dt = {dt}",
                inc.dt()
            )));
        }
        self.problem.grid.ensure_same(inc.grid(), "noise increment")?;
        let forcing: Vec<f64> = u
            .iter()
            .zip(inc.values())
            .map(|(&v, &w)| self.problem.sigma.eval(v) * w)
            .collect();
        let noise_mass = pairwise_sum(&forcing);
        let cell = self.problem.grid.cell_volume();
        let symbol = self.lap.symbol();
        let fft = self.lap.transform();

        let next = match self.cfg.scheme {
            Scheme::ExplicitEM => {
                let limit = self.stable_dt(u);
                if dt > limit {
                    return Err(Error::StepSize { dt, suggested: limit });
                }
                let mut flux = self.power.spectrum(u);
                for (c, &s) in flux.iter_mut().zip(symbol) {
                    *c *= s;
                }
                let flux = fft.inverse(flux);
                u.iter()
                    .zip(&flux)
                    .zip(&forcing)
                    .map(|((&v, &l), &f)| v - dt * l + f / cell)
                    .collect::<Vec<f64>>()
            }
            Scheme::SemiImplicitSpectral => {
                let a = self.linearisation(u);
                let u_hat = fft.forward(u);
                let n_hat = self.power.spectrum(u);
                let f_hat = fft.forward(&forcing);
                let spec: Vec<Complex64> = u_hat
                    .iter()
                    .zip(&n_hat)
                    .zip(&f_hat)
                    .zip(symbol)
                    .map(|(((&uh, &nh), &fh), &s)| {
                        (uh + fh / cell - (nh - uh * a) * (dt * s)) / (1.0 + dt * a * s)
                    })
                    .collect();
                fft.inverse(spec)
            }
        };
        if next.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP_THRESHOLD) {
            return Err(Error::BlowUp { t: t + dt });
        }
        Ok((next, noise_mass))
    }
}

/// One step from `u` at time `t` with the given increment.
pub fn step(
    problem: &SfpmeProblem,
    cfg: &SolverConfig,
    u: &Field,
    t: f64,
    inc: &NoiseIncrement,
) -> Result<Field> {
    problem.grid.ensure_same(u.grid(), "step input")?;
    u.ensure_finite("step input")?;
    let stepper = Stepper::new(problem, cfg)?;
    let (values, _) = stepper.advance(u.values(), t, inc)?;
    Ok(Field::new(problem.grid, values)?.with_time(t + cfg.dt))
}

/// Running record for one path.
struct Recorder {
    traj: Trajectory,
    stride: Option<usize>,
    steps: usize,
    acc: f64,
    comp: f64,
}

impl Recorder {
    fn new(problem: &SfpmeProblem, cfg: &SolverConfig, path_id: u64, steps: usize) -> Self {
        let f_u0 = problem.u0.integral();
        let traj = Trajectory {
            path_id,
            times: Vec::with_capacity(steps + 1),
            snapshots: Vec::new(),
            snapshot_steps: Vec::new(),
            mass: MassProcessRecord {
                times: Vec::with_capacity(steps + 1),
                f_u: Vec::with_capacity(steps + 1),
                noise_integral: Vec::with_capacity(steps + 1),
                f_u0,
            },
            sq_norms: Vec::with_capacity(steps + 1),
            max_abs: Vec::with_capacity(steps + 1),
            config: *cfg,
        };
        let mut r = Self { traj, stride: cfg.snapshot_stride(steps), steps, acc: 0.0, comp: 0.0 };
        r.record(0, &problem.u0);
        r
    }

    /// Kahan accumulation of the noise integral.
    fn add_noise(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.acc + y;
        self.comp = (t - self.acc) - y;
        self.acc = t;
    }

    fn record(&mut self, k: usize, u: &Field) {
        let t = u.time();
        let tr = &mut self.traj;
        tr.times.push(t);
        tr.mass.times.push(t);
        tr.mass.f_u.push(u.integral());
        tr.mass.noise_integral.push(self.acc);
        tr.sq_norms.push(u.l2_norm_sq());
        tr.max_abs.push(u.max_abs());
        if let Some(s) = self.stride {
            if k % s == 0 || k == self.steps {
                tr.snapshots.push(u.clone());
                tr.snapshot_steps.push(k);
            }
        }
    }
}

fn fail(error: Error, rec: Recorder) -> Box<EvolveFailure> {
    Box::new(EvolveFailure { error, partial: rec.traj })
}

/// Integrate one path from `u0` to `t_end`.
pub fn evolve(
    problem: &SfpmeProblem,
    cfg: &SolverConfig,
    path_id: u64,
) -> std::result::Result<Trajectory, Box<EvolveFailure>> {
    let empty = |e: Error| {
        Box::new(EvolveFailure {
            error: e,
            partial: Recorder::new(problem, cfg, path_id, 0).traj,
        })
    };
    let steps = cfg.steps().map_err(empty)?;
    let stepper = Stepper::new(problem, cfg).map_err(empty)?;
    evolve_with(&stepper, problem, cfg, path_id, steps)
}

/// [`evolve`] with a prepared stepper (e.g. one carrying a modified
/// operator).
pub fn evolve_with(
    stepper: &Stepper,
    problem: &SfpmeProblem,
    cfg: &SolverConfig,
    path_id: u64,
    steps: usize,
) -> std::result::Result<Trajectory, Box<EvolveFailure>> {
    let mut rec = Recorder::new(problem, cfg, path_id, steps);
    let mut u = problem.u0.values().to_vec();
    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let inc = match sample_aggregated_increment(
            &problem.noise,
            &problem.grid,
            cfg.dt,
            path_id,
            k as u64,
            cfg.noise_refinement,
        ) {
            Ok(i) => i,
            Err(e) => return Err(fail(e, rec)),
        };
        match stepper.advance(&u, t, &inc) {
            Ok((next, noise_mass)) => {
                u = next;
                rec.add_noise(noise_mass);
                let field = Field::new(problem.grid, u.clone())
                    .expect("lattice size")
                    .with_time((k + 1) as f64 * cfg.dt);
                rec.record(k + 1, &field);
            }
            Err(e) => return Err(fail(e, rec)),
        }
    }
    Ok(rec.traj)
}

/// Two solutions driven by one noise path.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRun {
    pub first: Trajectory,
    pub second: Trajectory,
    /// Lattice `|u1 - u2|^2_{L^2}` at every step.
    pub dist_sq: Vec<f64>,
}

/// Two solutions driven by the same increments. The problems must agree in
/// everything except the initial data.
pub fn evolve_coupled(
    first: &SfpmeProblem,
    second: &SfpmeProblem,
    cfg: &SolverConfig,
    path_id: u64,
) -> Result<CoupledRun> {
    if first.noise != second.noise {
        return Err(Error::Precondition(
            "coupled solutions must share the noise specification".into(),
        ));
    }
    if first.alpha != second.alpha || first.m != second.m || first.sigma != second.sigma {
        return Err(Error::Precondition("coupled problems differ beyond initial data".into()));
    }
    first.grid.ensure_same(&second.grid, "coupled problems")?;
    let steps = cfg.steps()?;
    let stepper = Stepper::new(first, cfg)?;
    let mut r1 = Recorder::new(first, cfg, path_id, steps);
    let mut r2 = Recorder::new(second, cfg, path_id, steps);
    let mut u1 = first.u0.values().to_vec();
    let mut u2 = second.u0.values().to_vec();
    let mut dist_sq = Vec::with_capacity(steps + 1);
    let dist = |a: &[f64], b: &[f64]| {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
        pairwise_sum(&d) * first.grid.cell_volume()
    };
    dist_sq.push(dist(&u1, &u2));
    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let inc = sample_aggregated_increment(
            &first.noise,
            &first.grid,
            cfg.dt,
            path_id,
            k as u64,
            cfg.noise_refinement,
        )?;
        let (n1, m1) = stepper.advance(&u1, t, &inc)?;
        let (n2, m2) = stepper.advance(&u2, t, &inc)?;
        u1 = n1;
        u2 = n2;
        r1.add_noise(m1);
        r2.add_noise(m2);
        let tk = (k + 1) as f64 * cfg.dt;
        r1.record(k + 1, &Field::new(first.grid, u1.clone())?.with_time(tk));
        r2.record(k + 1, &Field::new(first.grid, u2.clone())?.with_time(tk));
        dist_sq.push(dist(&u1, &u2));
    }
    Ok(CoupledRun { first: r1.traj, second: r2.traj, dist_sq })
}

/// Time factor of a separable test function.
#[derive(Clone)]
pub enum TimeProfile {
    /// `exp(1 - 1/(1 - s^2))` with `s` mapping `[start, end]` onto `[-1, 1]`,
    /// zero outside.
    Bump { start: f64, end: f64 },
    /// Value and derivative at `t`.
    Custom(Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>),
}

impl std::fmt::Debug for TimeProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TimeProfile::Bump { start, end } => write!(f, "Bump({start}, {end})"),
            TimeProfile::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl TimeProfile {
    /// `(value, derivative)` at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self {
            TimeProfile::Bump { start, end } => {
                let half = 0.5 * (end - start);
                let s = (t - 0.5 * (start + end)) / half;
                if s.abs() >= 1.0 {
                    return (0.0, 0.0);
                }
                let q = 1.0 - s * s;
                let v = (1.0 - 1.0 / q).exp();
                (v, v * (-2.0 * s / (q * q)) / half)
            }
            TimeProfile::Custom(f) => f(t),
        }
    }
}

/// `psi(x, t) = space(x) * time(t)`.
#[derive(Debug, Clone)]
pub struct SeparableTest {
    pub space: Field,
    pub time: TimeProfile,
}

/// `|LHS - RHS|` of the weak form
/// `int int u psi_t = int int L^{1/2} u^m L^{1/2} psi + int <M, psi_t> dt`,
/// where `L = (-D)^{alpha/2}` and `M(t) = int_0^t sigma(u) W(ds)` is rebuilt
/// from the replayed increments. All time integrals are left Riemann sums on
/// the step grid. Needs a trajectory that kept every step.
pub fn weak_form_residual(
    traj: &Trajectory,
    problem: &SfpmeProblem,
    psi: &SeparableTest,
) -> Result<f64> {
    problem.grid.ensure_same(psi.space.grid(), "test function")?;
    let cfg = &traj.config;
    let steps = traj.times.len() - 1;
    let t_end = steps as f64 * cfg.dt;
    let (b0, _) = psi.time.eval(0.0);
    let (b1, _) = psi.time.eval(t_end);
    if b0 != 0.0 || b1 != 0.0 {
        return Err(Error::Precondition(
            "test function must vanish at both ends of the time interval".into(),
        ));
    }
    if traj.snapshot_steps.len() != steps + 1 {
        return Err(Error::Precondition("weak form needs a snapshot at every step".into()));
    }
    if psi.space.values().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let lap = FracLaplacian::new(problem.alpha, problem.grid)?;
    let half = FracLaplacian::new(problem.alpha / 2.0, problem.grid)?;
    let power = PowerMap::new(problem.m, cfg.dealias, lap.transform().clone())?;
    let phi_half = half.apply(&psi.space)?;
    let cell = problem.grid.cell_volume();

    let mut lhs = Vec::with_capacity(steps);
    let mut flux = Vec::with_capacity(steps);
    let mut noise = Vec::with_capacity(steps);
    let mut m_field = vec![0.0; problem.grid.len()];
    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let (b, db) = psi.time.eval(t);
        let u = &traj.snapshots[k];
        lhs.push(u.inner(&psi.space)? * db);
        let nl = Field::new(problem.grid, power.apply(u.values()))?;
        flux.push(half.apply(&nl)?.inner(&phi_half)? * b);
        let mf = Field::new(problem.grid, m_field.clone())?;
        noise.push(mf.inner(&psi.space)? * db);
        let inc = sample_aggregated_increment(
            &problem.noise,
            &problem.grid,
            cfg.dt,
            traj.path_id,
            k as u64,
            cfg.noise_refinement,
        )?;
        for ((acc, &v), &w) in m_field.iter_mut().zip(u.values()).zip(inc.values()) {
            *acc += problem.sigma.eval(v) * w / cell;
        }
    }
    let lhs = pairwise_sum(&lhs) * cfg.dt;
    let rhs = (pairwise_sum(&flux) + pairwise_sum(&noise)) * cfg.dt;
    Ok((lhs - rhs).abs())
}
