//! Lattice noise: space-time white noise and the spatially uniform Wiener
//! process `W(x, t) = (2 pi)^{-d/4} B(t)`.
//!
//! Increments are cell integrals `W(cell x [t, t + dt])`. Every draw comes
//! from a ChaCha stream keyed by `(seed, path, step, kind)`, so any increment
//! can be replayed from its coordinates alone and concurrent paths never share
//! generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{Field, LatticeGrid};
use crate::spectral::{weighted_spectral_sq, FourierTransform, SobolevIndex};
use crate::stats::{self, pairwise_sum};

const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    SpaceTimeWhite,
    UniformWiener,
}

impl NoiseKind {
    fn stream_tag(self) -> u64 {
        match self {
            NoiseKind::SpaceTimeWhite => 0x5754_4e57,
            NoiseKind::UniformWiener => 0x5755_4e49,
        }
    }
}

/// Noise model plus master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
    pub dim: usize,
}

impl NoiseSpec {
    pub fn white(seed: u64, dim: usize) -> Self {
        Self { kind: NoiseKind::SpaceTimeWhite, seed, dim }
    }

    pub fn uniform(seed: u64, dim: usize) -> Self {
        Self { kind: NoiseKind::UniformWiener, seed, dim }
    }

    /// Generator positioned at the start of the stream for `(path, step)`.
    pub fn stream(&self, path: u64, step: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&path.to_le_bytes());
        key[16..24].copy_from_slice(&step.to_le_bytes());
        key[24..].copy_from_slice(&self.kind.stream_tag().to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}

/// Cell-integrated increment over one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    grid: LatticeGrid,
    dt: f64,
    values: Vec<f64>,
    delta_b: Option<f64>,
}

impl NoiseIncrement {
    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Cell integrals, row-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The scalar Brownian increment behind a uniform increment.
    pub fn delta_b(&self) -> Option<f64> {
        self.delta_b
    }

    /// Increment density `inc / dx^d`.
    pub fn density(&self) -> Vec<f64> {
        let v = self.grid.cell_volume();
        self.values.iter().map(|x| x / v).collect()
    }
}

fn check_spec(spec: &NoiseSpec, grid: &LatticeGrid, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("noise time step must be positive, got {dt}")));
    }
    if spec.dim != grid.dim() {
        return Err(Error::GridMismatch(format!(
            "noise is {}-dimensional, lattice is {}-dimensional",
            spec.dim,
            grid.dim()
        )));
    }
    Ok(())
}

fn draw(spec: &NoiseSpec, grid: &LatticeGrid, dt: f64, path: u64, step: u64) -> NoiseIncrement {
    let mut rng = spec.stream(path, step);
    match spec.kind {
        NoiseKind::SpaceTimeWhite => {
            let sd = (dt * grid.cell_volume()).sqrt();
            let values = (0..grid.len())
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sd * z
                })
                .collect::<Vec<f64>>();
            NoiseIncrement { grid: *grid, dt, values, delta_b: None }
        }
        NoiseKind::UniformWiener => {
            let z: f64 = StandardNormal.sample(&mut rng);
            let db = z * dt.sqrt();
            let cell = uniform_amplitude(grid.dim()) * db * grid.cell_volume();
            NoiseIncrement { grid: *grid, dt, values: vec![cell; grid.len()], delta_b: Some(db) }
        }
    }
}

/// `(2 pi)^{-d/4}`.
fn uniform_amplitude(dim: usize) -> f64 {
    TAU.powf(-(dim as f64) / 4.0)
}

/// Increment for step `step` of path `path`.
pub fn sample_increment(
    spec: &NoiseSpec,
    grid: &LatticeGrid,
    dt: f64,
    path: u64,
    step: u64,
) -> Result<NoiseIncrement> {
    check_spec(spec, grid, dt)?;
    Ok(draw(spec, grid, dt, path, step))
}

/// Increment over `[step dt, (step + 1) dt]` built by summing `refinement`
/// sub-increments of length `dt / refinement`. Runs at `dt` and
/// `dt / refinement` therefore see the same Brownian path, which is what a
/// self-convergence study in `dt` needs. `refinement = 1` is
/// [`sample_increment`].
pub fn sample_aggregated_increment(
    spec: &NoiseSpec,
    grid: &LatticeGrid,
    dt: f64,
    path: u64,
    step: u64,
    refinement: u32,
) -> Result<NoiseIncrement> {
    check_spec(spec, grid, dt)?;
    if refinement == 0 {
        return Err(Error::Domain("noise refinement must be at least 1".into()));
    }
    if refinement == 1 {
        return Ok(draw(spec, grid, dt, path, step));
    }
    let r = refinement as u64;
    let fine_dt = dt / refinement as f64;
    let mut acc = draw(spec, grid, fine_dt, path, step * r);
    for j in 1..r {
        let next = draw(spec, grid, fine_dt, path, step * r + j);
        for (a, b) in acc.values.iter_mut().zip(&next.values) {
            *a += b;
        }
        if let (Some(a), Some(b)) = (acc.delta_b.as_mut(), next.delta_b) {
            *a += b;
        }
    }
    acc.dt = dt;
    Ok(acc)
}

/// Riemann pairing `sum_cells inc * phi`.
pub fn pair_with_test_function(inc: &NoiseIncrement, phi: &Field) -> Result<f64> {
    inc.grid.ensure_same(phi.grid(), "noise pairing")?;
    let prod: Vec<f64> = inc.values.iter().zip(phi.values()).map(|(a, b)| a * b).collect();
    Ok(pairwise_sum(&prod))
}

/// Accumulated density `W(., steps dt)` of one path.
pub fn accumulated_field(
    spec: &NoiseSpec,
    grid: &LatticeGrid,
    dt: f64,
    path: u64,
    steps: u64,
) -> Result<Field> {
    check_spec(spec, grid, dt)?;
    let mut acc = vec![0.0; grid.len()];
    for s in 0..steps {
        let inc = draw(spec, grid, dt, path, s);
        for (a, b) in acc.iter_mut().zip(&inc.values) {
            *a += b;
        }
    }
    let v = grid.cell_volume();
    acc.iter_mut().for_each(|a| *a /= v);
    Ok(Field::new(*grid, acc)?.with_time(steps as f64 * dt))
}

/// `B(steps dt)` of the scalar driver behind the uniform noise.
pub fn brownian_value(spec: &NoiseSpec, dt: f64, path: u64, steps: u64) -> Result<f64> {
    if spec.kind != NoiseKind::UniformWiener {
        return Err(Error::Unsupported("white noise has no scalar driver".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("noise time step must be positive, got {dt}")));
    }
    let mut b = 0.0;
    for s in 0..steps {
        let z: f64 = StandardNormal.sample(&mut spec.stream(path, s));
        b += z * dt.sqrt();
    }
    Ok(b)
}

/// Covariance `K_t(phi, psi) = E <W(t), phi> <W(t), psi>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceFunctional {
    pub kind: NoiseKind,
    pub time: f64,
}

impl CovarianceFunctional {
    pub fn new(kind: NoiseKind, time: f64) -> Result<Self> {
        if !(time >= 0.0 && time.is_finite()) {
            return Err(Error::Domain(format!("covariance time must be nonnegative, got {time}")));
        }
        Ok(Self { kind, time })
    }

    /// Uniform noise: `(2 pi)^{-d/2} t (int phi)(int psi)`.
    /// White noise: `t <phi, psi>`.
    pub fn eval(&self, phi: &Field, psi: &Field) -> Result<f64> {
        phi.grid().ensure_same(psi.grid(), "covariance arguments")?;
        match self.kind {
            NoiseKind::UniformWiener => {
                let d = phi.grid().dim() as f64;
                Ok(TAU.powf(-d / 2.0) * self.time * phi.integral() * psi.integral())
            }
            NoiseKind::SpaceTimeWhite => Ok(self.time * phi.inner(psi)?),
        }
    }

    /// A constant `C` with `|K(phi, psi)| <= C |phi|_{H^1} |psi|_{H^1}` on
    /// `grid`: `|int phi| <= L^{d/2} |phi|_{L^2} <= L^{d/2} |phi|_{H^1}`, so
    /// `C = (2 pi)^{-d/2} t L^d` works for the uniform noise.
    pub fn h1_bound_constant(&self, grid: &LatticeGrid) -> Result<f64> {
        match self.kind {
            NoiseKind::UniformWiener => {
                Ok(TAU.powf(-(grid.dim() as f64) / 2.0) * self.time * grid.volume())
            }
            NoiseKind::SpaceTimeWhite => Ok(self.time),
        }
    }
}

/// `|<W(t), phi>| / sqrt(K_t(phi, phi))` for each `phi`, on one sampled path
/// of the uniform noise with step `dt`. All ratios equal `|B(t)| / sqrt(t)`.
pub fn rkhs_ratio_check(
    spec: &NoiseSpec,
    grid: &LatticeGrid,
    dt: f64,
    path: u64,
    t: f64,
    phis: &[Field],
) -> Result<Vec<f64>> {
    if spec.kind == NoiseKind::SpaceTimeWhite {
        return Err(Error::Unsupported(
            "white noise pairing admits no phi-independent constant".into(),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("ratio time must be positive, got {t}")));
    }
    let steps = (t / dt).round();
    if (steps * dt - t).abs() > 1e-9 * t {
        return Err(Error::Precondition(format!("t = {t} is not a multiple of dt = {dt}")));
    }
    let w = accumulated_field(spec, grid, dt, path, steps as u64)?;
    let cov = CovarianceFunctional::new(spec.kind, t)?;
    phis.iter()
        .enumerate()
        .map(|(i, phi)| {
            let k = cov.eval(phi, phi)?;
            if phi.integral().abs() <= 1e-12 * phi.l1_norm() {
                return Err(Error::Precondition(format!("test function {i} has zero integral")));
            }
            Ok(w.inner(phi)?.abs() / k.sqrt())
        })
        .collect()
}

/// One row of the regularity table.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityRow {
    pub gamma: f64,
    /// `sqrt(E |density|^2_{H^gamma})` estimated per resolution.
    pub rms_norm: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Exact `sqrt(sum_k (1 + |k|^2)^gamma)` per resolution.
    pub closed_form: Vec<f64>,
    /// Classification of the sampled sequence.
    pub bounded: bool,
    /// Classification of the closed-form sequence.
    pub oracle_bounded: bool,
}

impl RegularityRow {
    /// Classification predicted by the continuum threshold `-d/2`.
    pub fn continuum_bounded(&self, d_total: usize) -> bool {
        self.gamma < -(d_total as f64) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityTable {
    pub d_total: usize,
    pub resolutions: Vec<usize>,
    pub samples: usize,
    pub rows: Vec<RegularityRow>,
}

/// Sequence counts as bounded when its last successive ratio is within 10%
/// of one.
pub fn is_bounded_sequence(values: &[f64]) -> bool {
    match values {
        [.., a, b] => (b / a - 1.0).abs() < 0.1,
        _ => true,
    }
}

/// `sqrt(sum_k (1 + |k|^2)^gamma)` over the `n^d` lattice modes: the exact
/// root-mean-square `H^gamma` norm of unit white-noise density on `[-pi, pi)^d`.
pub fn regularity_closed_form(d_total: usize, gamma: f64, n: usize) -> f64 {
    let k: Vec<f64> = (0..n)
        .map(|i| if i < n / 2 { i as f64 } else { i as f64 - n as f64 })
        .collect();
    let terms: Vec<f64> = match d_total {
        1 => k.iter().map(|a| (1.0 + a * a).powf(gamma)).collect(),
        _ => k
            .iter()
            .flat_map(|a| k.iter().map(move |b| (1.0 + a * a + b * b).powf(gamma)))
            .collect(),
    };
    pairwise_sum(&terms).sqrt()
}

/// Sum fine cells into a coarser lattice by an integer factor per axis.
fn coarsen(values: &[f64], dim: usize, n_fine: usize, n_coarse: usize) -> Vec<f64> {
    let f = n_fine / n_coarse;
    match dim {
        1 => values.chunks(f).map(pairwise_sum).collect(),
        _ => {
            let mut out = vec![0.0; n_coarse * n_coarse];
            for i in 0..n_fine {
                for j in 0..n_fine {
                    out[(i / f) * n_coarse + j / f] += values[i * n_fine + j];
                }
            }
            out
        }
    }
}

/// Discrete `H^gamma` norms of unit-time white noise on `[-pi, pi)^d_total`
/// at increasing resolutions. Each sample is drawn once on the finest lattice
/// and summed into the coarser cells, so all resolutions see the same
/// realisation.
pub fn noise_regularity_divergence(
    d_total: usize,
    gammas: &[f64],
    resolutions: &[usize],
    samples: usize,
    seed: u64,
) -> Result<RegularityTable> {
    if resolutions.is_empty() || resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("resolutions must be nonempty and increasing".into()));
    }
    if samples < 2 {
        return Err(Error::Precondition("need at least two samples".into()));
    }
    let finest = *resolutions.last().unwrap();
    let fine_grid = LatticeGrid::new(d_total, finest, TAU)?;
    let grids = resolutions
        .iter()
        .map(|&n| {
            if finest % n != 0 {
                return Err(Error::Domain(format!("resolution {n} does not divide {finest}")));
            }
            LatticeGrid::new(d_total, n, TAU)
        })
        .collect::<Result<Vec<_>>>()?;
    let ffts: Vec<FourierTransform> = grids.iter().map(|g| FourierTransform::new(*g)).collect();
    let spec = NoiseSpec::white(seed, d_total);

    // sq[g][r][s]: squared norm for gamma g, resolution r, sample s.
    let mut sq = vec![vec![Vec::with_capacity(samples); grids.len()]; gammas.len()];
    for s in 0..samples {
        let inc = draw(&spec, &fine_grid, 1.0, s as u64, 0);
        for (r, grid) in grids.iter().enumerate() {
            let cells = coarsen(&inc.values, d_total, finest, grid.points_per_dim());
            let v = grid.cell_volume();
            let density: Vec<f64> = cells.iter().map(|c| c / v).collect();
            let spectrum = ffts[r].forward(&density);
            for (g, &gamma) in gammas.iter().enumerate() {
                let idx = SobolevIndex::inhomogeneous(gamma);
                sq[g][r].push(weighted_spectral_sq(grid, &spectrum, idx));
            }
        }
    }

    let rows = gammas
        .iter()
        .zip(&sq)
        .map(|(&gamma, per_res)| {
            let mut rms_norm = Vec::new();
            let mut std_error = Vec::new();
            for xs in per_res {
                let m = stats::mean(xs);
                rms_norm.push(m.sqrt());
                std_error.push(stats::std_error(xs) / (2.0 * m.sqrt()));
            }
            let closed_form: Vec<f64> = resolutions
                .iter()
                .map(|&n| regularity_closed_form(d_total, gamma, n))
                .collect();
            RegularityRow {
                gamma,
                bounded: is_bounded_sequence(&rms_norm),
                oracle_bounded: is_bounded_sequence(&closed_form),
                rms_norm,
                std_error,
                closed_form,
            }
        })
        .collect();
    Ok(RegularityTable { d_total, resolutions: resolutions.to_vec(), samples, rows })
}
