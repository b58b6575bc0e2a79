//! Monte Carlo ensembles and the checks built on them: the mass identity,
//! the law of the mass increment, the coupled contraction estimate and the
//! exponential second-moment envelope.
//!
//! Paths run on a dedicated worker pool and are collected in path order, and
//! every reduction is a pairwise sum over that order, so results do not depend
//! on the worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::noise::NoiseKind;
use crate::solver::{
    evolve, evolve_coupled, CoupledRun, SfpmeProblem, SigmaSpec, SnapshotPolicy, SolverConfig, Trajectory,
};
pub use crate::solver::MassProcessRecord;
use crate::stats::{self, linear_fit, LinearFit, Z95};

/// Paths of one ensemble, in path order, plus the ones that failed.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub trajectories: Vec<Trajectory>,
    /// `(path id, error)` for every path that did not finish.
    pub failures: Vec<(u64, Error)>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Configuration(format!("cannot start worker pool: {e}")))
}

fn check_failures(failures: &[(u64, Error)], total: usize) -> Result<()> {
    // Numerical failures other than blow-up are not excused by the 1% rule.
    if let Some((_, e)) = failures.iter().find(|(_, e)| !matches!(e, Error::BlowUp { .. })) {
        return Err(e.clone());
    }
    if failures.len() * 100 > total {
        return Err(Error::TooManyBlowUps { failed: failures.len(), total });
    }
    Ok(())
}

/// Evolve paths `0..n_paths` on `workers` threads.
pub fn run_paths(
    problem: &SfpmeProblem,
    cfg: &SolverConfig,
    n_paths: usize,
    workers: usize,
) -> Result<EnsembleRun> {
    run_paths_keeping(problem, cfg, n_paths, workers, f64::INFINITY)
}

/// [`run_paths`], discarding each path's snapshots later than `keep_until`
/// as soon as the path finishes.
pub fn run_paths_keeping(
    problem: &SfpmeProblem,
    cfg: &SolverConfig,
    n_paths: usize,
    workers: usize,
    keep_until: f64,
) -> Result<EnsembleRun> {
    cfg.steps()?;
    let results: Vec<_> = pool(workers)?.install(|| {
        (0..n_paths as u64)
            .into_par_iter()
            .map(|p| {
                let r = evolve(problem, cfg, p).map(|mut t| {
                    let keep = t.snapshots.iter().take_while(|f| f.time() <= keep_until).count();
                    t.snapshots.truncate(keep);
                    t.snapshot_steps.truncate(keep);
                    t
                });
                (p, r)
            })
            .collect()
    });
    let mut trajectories = Vec::with_capacity(n_paths);
    let mut failures = Vec::new();
    for (p, r) in results {
        match r {
            Ok(t) => trajectories.push(t),
            Err(f) => failures.push((p, f.error)),
        }
    }
    check_failures(&failures, n_paths)?;
    Ok(EnsembleRun { trajectories, failures })
}

/// Step indices at which ensemble statistics are reported: every
/// `ceil(steps / 100)`-th step plus the last.
pub fn checkpoints(steps: usize) -> Vec<usize> {
    let stride = steps.div_ceil(100).max(1);
    let mut ks: Vec<usize> = (0..=steps).step_by(stride).collect();
    if *ks.last().unwrap() != steps {
        ks.push(steps);
    }
    ks
}

/// Per-checkpoint moment estimates with 95% half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean_mass: Vec<f64>,
    pub var_mass: Vec<f64>,
    /// Estimates of `E |u(t)|^2_{L^2}`.
    pub mean_sq_norm: Vec<f64>,
    pub hw_mean_mass: Vec<f64>,
    pub hw_var_mass: Vec<f64>,
    pub hw_mean_sq_norm: Vec<f64>,
    /// Paths that entered the statistics.
    pub n_paths: usize,
    /// Paths excluded after blowing up.
    pub blown_up: Vec<u64>,
}

impl EnsembleStats {
    pub fn from_run(run: &EnsembleRun) -> Result<Self> {
        let trajs = &run.trajectories;
        if trajs.len() < 2 {
            return Err(Error::Precondition(format!(
                "statistics need at least two completed paths, have {}",
                trajs.len()
            )));
        }
        let steps = trajs[0].times.len() - 1;
        let ks = checkpoints(steps);
        let mut s = EnsembleStats {
            times: Vec::with_capacity(ks.len()),
            mean_mass: Vec::with_capacity(ks.len()),
            var_mass: Vec::with_capacity(ks.len()),
            mean_sq_norm: Vec::with_capacity(ks.len()),
            hw_mean_mass: Vec::with_capacity(ks.len()),
            hw_var_mass: Vec::with_capacity(ks.len()),
            hw_mean_sq_norm: Vec::with_capacity(ks.len()),
            n_paths: trajs.len(),
            blown_up: run.failures.iter().map(|(p, _)| *p).collect(),
        };
        for &k in &ks {
            let mass: Vec<f64> = trajs.iter().map(|t| t.mass.f_u[k]).collect();
            let sq: Vec<f64> = trajs.iter().map(|t| t.sq_norms[k]).collect();
            s.times.push(trajs[0].times[k]);
            s.mean_mass.push(stats::mean(&mass));
            s.var_mass.push(stats::variance(&mass));
            s.mean_sq_norm.push(stats::mean(&sq));
            s.hw_mean_mass.push(Z95 * stats::std_error(&mass));
            s.hw_var_mass.push(Z95 * stats::variance_std_error(&mass));
            s.hw_mean_sq_norm.push(Z95 * stats::std_error(&sq));
        }
        Ok(s)
    }

    /// `sqrt(E |u|^2)` and its half-width by the delta method.
    pub fn root_mean_sq_norm(&self) -> (Vec<f64>, Vec<f64>) {
        self.mean_sq_norm
            .iter()
            .zip(&self.hw_mean_sq_norm)
            .map(|(&m, &h)| {
                let r = m.sqrt();
                (r, if r > 0.0 { h / (2.0 * r) } else { 0.0 })
            })
            .unzip()
    }
}

/// Run `n_paths` paths and reduce them to checkpoint statistics.
pub fn run_ensemble(
    problem: &SfpmeProblem,
    cfg: &SolverConfig,
    n_paths: usize,
    workers: usize,
) -> Result<EnsembleStats> {
    if n_paths < 2 {
        return Err(Error::Precondition(format!("an ensemble needs at least two paths, got {n_paths}")));
    }
    let light = cfg.with_snapshots(SnapshotPolicy::Off);
    EnsembleStats::from_run(&run_paths(problem, &light, n_paths, workers)?)
}

/// `max_k |F_u[k] - F_u0 - noise_integral[k]|`.
pub fn mass_identity_check(traj: &Trajectory) -> f64 {
    let m = &traj.mass;
    m.f_u
        .iter()
        .zip(&m.noise_integral)
        .fold(0.0, |acc, (f, n)| acc.max((f - m.f_u0 - n).abs()))
}

/// Tolerance of the mass identity for initial mass `f_u0`.
pub fn mass_identity_tolerance(f_u0: f64) -> f64 {
    1e-10 * (1.0 + f_u0.abs())
}

/// Result of the Kolmogorov-Smirnov check on the mass increment.
#[derive(Debug, Clone, PartialEq)]
pub struct MassLawTest {
    /// `F_u(T) - F_u(0)` per path.
    pub samples: Vec<f64>,
    /// `T L^d`.
    pub variance: f64,
    pub statistic: f64,
    pub p_value: f64,
}

/// Exact variance of `F_u(t) - F_u(0)` under additive noise: `t L^d` for
/// white noise, `(2 pi)^{-d/2} t L^{2d}` for the uniform process.
pub fn mass_increment_variance(problem: &SfpmeProblem, t: f64) -> f64 {
    let v = problem.grid.volume();
    match problem.noise.kind {
        NoiseKind::SpaceTimeWhite => t * v,
        NoiseKind::UniformWiener => {
            std::f64::consts::TAU.powf(-(problem.grid.dim() as f64) / 2.0) * t * v * v
        }
    }
}

/// KS test of `F_u(T) - F_u(0)` against its exact centred Gaussian law
/// (`N(0, T L^d)` for white noise) under additive noise.
pub fn mass_distribution_test(
    problem: &SfpmeProblem,
    cfg: &SolverConfig,
    n_paths: usize,
    workers: usize,
) -> Result<MassLawTest> {
    if !matches!(problem.sigma, SigmaSpec::One) {
        return Err(Error::Precondition("the mass law is exact only for sigma = 1".into()));
    }
    if n_paths < 200 {
        return Err(Error::Precondition(format!("need at least 200 paths, got {n_paths}")));
    }
    let light = cfg.with_snapshots(SnapshotPolicy::Off);
    mass_law_from_run(problem, &run_paths(problem, &light, n_paths, workers)?)
}

/// The KS mass-law test on the paths of an existing run.
pub fn mass_law_from_run(problem: &SfpmeProblem, run: &EnsembleRun) -> Result<MassLawTest> {
    if !matches!(problem.sigma, SigmaSpec::One) {
        return Err(Error::Precondition("the mass law is exact only for sigma = 1".into()));
    }
    if run.trajectories.len() < 2 {
        return Err(Error::Precondition("the mass law needs at least two finished paths".into()));
    }
    let samples: Vec<f64> = run
        .trajectories
        .iter()
        .map(|t| t.mass.f_u.last().unwrap() - t.mass.f_u0)
        .collect();
    let t_end = run.trajectories[0].times.last().copied().unwrap();
    let variance = mass_increment_variance(problem, t_end);
    let sd = variance.sqrt();
    let (statistic, p_value) = stats::ks_test(&samples, |x| stats::normal_cdf(x, 0.0, sd));
    Ok(MassLawTest { samples, variance, statistic, p_value })
}

/// Both sides of the coupled estimate
/// `E |Delta int (u1 - u2)|^2 <= Lip^2 int_0^t E |u1 - u2|^2 ds`
/// at each checkpoint, where `Delta` is the change since `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Standard error of the per-path difference `lhs - rhs`.
    pub diff_std_error: Vec<f64>,
    pub n_paths: usize,
}

impl ContractionReport {
    /// `lhs <= rhs + 3 SE` at every checkpoint.
    pub fn holds(&self) -> bool {
        self.worst_excess() <= 0.0
    }

    /// `max_k (lhs - rhs - 3 SE)`; nonpositive when the estimate holds.
    pub fn worst_excess(&self) -> f64 {
        self.lhs
            .iter()
            .zip(&self.rhs)
            .zip(&self.diff_std_error)
            .map(|((l, r), se)| l - r - 3.0 * se)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Coupled runs of `first` and `second` on paths `0..n_paths`.
/// `second` must share the noise specification and start within
/// `0.1 |u0|_{L^2}` of `first`.
pub fn contraction_check(
    first: &SfpmeProblem,
    second: &SfpmeProblem,
    cfg: &SolverConfig,
    n_paths: usize,
    workers: usize,
) -> Result<ContractionReport> {
    if first.noise != second.noise {
        return Err(Error::Precondition(
            "coupled runs must be driven by the same noise (seed and kind)".into(),
        ));
    }
    if n_paths < 2 {
        return Err(Error::Precondition(format!("need at least two paths, got {n_paths}")));
    }
    let gap = second.u0.axpy(-1.0, &first.u0)?.l2_norm();
    if gap > 0.1 * first.u0.l2_norm() {
        return Err(Error::Precondition(format!(
            "perturbation norm {gap} exceeds 0.1 |u0| = {}",
            0.1 * first.u0.l2_norm()
        )));
    }
    let steps = cfg.steps()?;
    let light = cfg.with_snapshots(SnapshotPolicy::Off);
    let pairs: Vec<Result<CoupledRun>> = pool(workers)?.install(|| {
        (0..n_paths as u64)
            .into_par_iter()
            .map(|p| evolve_coupled(first, second, &light, p))
            .collect()
    });
    let mut done = Vec::with_capacity(n_paths);
    let mut failures = Vec::new();
    for (p, r) in pairs.into_iter().enumerate() {
        match r {
            Ok(pair) => done.push(pair),
            Err(e) => failures.push((p as u64, e)),
        }
    }
    check_failures(&failures, n_paths)?;

    // Per path: squared mass-difference increment and the left Riemann sum
    // of |u1 - u2|^2.
    let lip2 = first.sigma.lip_constant().powi(2);
    let dt = cfg.dt;
    let ks = checkpoints(steps);
    let mut lhs_paths = vec![Vec::with_capacity(done.len()); ks.len()];
    let mut rhs_paths = vec![Vec::with_capacity(done.len()); ks.len()];
    for run in &done {
        let (a, b) = (&run.first, &run.second);
        let d0 = a.mass.f_u[0] - b.mass.f_u[0];
        let mut running = Vec::with_capacity(steps + 1);
        let mut acc = 0.0;
        running.push(0.0);
        for j in 0..steps {
            acc += run.dist_sq[j];
            running.push(acc);
        }
        for (c, &k) in ks.iter().enumerate() {
            let inc = a.mass.f_u[k] - b.mass.f_u[k] - d0;
            lhs_paths[c].push(inc * inc);
            rhs_paths[c].push(lip2 * dt * running[k]);
        }
    }
    let mut report = ContractionReport {
        times: ks.iter().map(|&k| k as f64 * dt).collect(),
        lhs: Vec::with_capacity(ks.len()),
        rhs: Vec::with_capacity(ks.len()),
        diff_std_error: Vec::with_capacity(ks.len()),
        n_paths: done.len(),
    };
    for c in 0..ks.len() {
        let diff: Vec<f64> = lhs_paths[c].iter().zip(&rhs_paths[c]).map(|(l, r)| l - r).collect();
        report.lhs.push(stats::mean(&lhs_paths[c]));
        report.rhs.push(stats::mean(&rhs_paths[c]));
        report.diff_std_error.push(stats::std_error(&diff));
    }
    Ok(report)
}

/// Result of the reverse-Hoelder calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct ReverseHolder {
    /// Largest `C` with `C int f^2 <= (int f)^2` on every sample.
    pub c: f64,
    /// Index of the sample attaining the minimum.
    pub argmin: usize,
    /// Set when some sample has zero integral but nonzero energy.
    pub diagnostic: Option<String>,
}

/// `C = min_f (int f)^2 / int f^2` over the sample; identically zero fields
/// are skipped. A constant on a box of volume `V` gives `C = V`.
pub fn reverse_holder_calibrate(fields: &[Field]) -> Result<ReverseHolder> {
    let mut best: Option<(f64, usize)> = None;
    for (i, f) in fields.iter().enumerate() {
        let e = f.l2_norm_sq();
        if e == 0.0 {
            continue;
        }
        let mass = f.integral();
        // Lattice integrals of mean-zero data land at rounding level.
        if mass.abs() <= 1e-12 * f.l1_norm() {
            return Ok(ReverseHolder {
                c: 0.0,
                argmin: i,
                diagnostic: Some(format!(
                    "sample {i} has zero integral and positive energy {e:e}; no C > 0 exists"
                )),
            });
        }
        let c = mass * mass / e;
        if best.is_none_or(|(b, _)| c < b) {
            best = Some((c, i));
        }
    }
    match best {
        Some((c, argmin)) => Ok(ReverseHolder { c, argmin, diagnostic: None }),
        None => Err(Error::Precondition("calibration needs a nonzero field".into())),
    }
}

/// `(1 / sqrt C) |u0|_{L^1} exp(Lip t / sqrt C)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallEnvelope {
    pub lip: f64,
    pub c_const: f64,
    pub u0_l1: f64,
}

impl GronwallEnvelope {
    pub fn eval(&self, t: f64) -> f64 {
        let s = self.c_const.sqrt();
        self.u0_l1 / s * (self.lip * t / s).exp()
    }

    /// Growth rate `Lip / sqrt C`.
    pub fn rate(&self) -> f64 {
        self.lip / self.c_const.sqrt()
    }
}

/// How `C` was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub c: f64,
    /// `(int u0)^2 / int u0^2`.
    pub from_initial: f64,
    /// Reverse-Hoelder constant over the early snapshots.
    pub from_snapshots: ReverseHolder,
}

/// `C = min((int u0)^2 / int u0^2, reverse_holder(early))`.
pub fn calibrate_c(u0: &Field, early: &[Field]) -> Result<Calibration> {
    let initial = reverse_holder_calibrate(std::slice::from_ref(u0))?;
    let snaps = reverse_holder_calibrate(early)?;
    Ok(Calibration { c: initial.c.min(snaps.c), from_initial: initial.c, from_snapshots: snaps })
}

/// Outcome of the envelope comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport {
    pub times: Vec<f64>,
    pub root_mean_sq: Vec<f64>,
    pub envelope: Vec<f64>,
    /// `envelope - sqrt(E |u|^2)`.
    pub margins: Vec<f64>,
    /// 95% half-width of `sqrt(E |u|^2)`.
    pub half_widths: Vec<f64>,
    /// Least-squares fit of `log sqrt(E |u|^2)` over the second half of the run.
    pub late_fit: LinearFit,
    pub rate_bound: f64,
}

impl GronwallReport {
    pub fn dominated(&self) -> bool {
        self.margins.iter().zip(&self.half_widths).all(|(m, h)| *m >= -h)
    }

    pub fn slope_ok(&self) -> bool {
        self.late_fit.slope <= self.rate_bound + Z95 * self.late_fit.slope_se
    }

    pub fn passed(&self) -> bool {
        self.dominated() && self.slope_ok()
    }
}

/// Compare `sqrt(E |u(t)|^2)` with the envelope at every checkpoint.
pub fn gronwall_envelope_check(
    stats: &EnsembleStats,
    env: &GronwallEnvelope,
) -> Result<GronwallReport> {
    if !(env.c_const > 0.0 && env.c_const.is_finite()) {
        return Err(Error::Configuration(format!(
            "envelope constant C must be calibrated to a positive value, got {}",
            env.c_const
        )));
    }
    let (root, half_widths) = stats.root_mean_sq_norm();
    let envelope: Vec<f64> = stats.times.iter().map(|&t| env.eval(t)).collect();
    let margins = envelope.iter().zip(&root).map(|(e, r)| e - r).collect();
    let t_end = *stats.times.last().unwrap();
    let (tx, ly): (Vec<f64>, Vec<f64>) = stats
        .times
        .iter()
        .zip(&root)
        .filter(|(t, _)| **t >= 0.5 * t_end)
        .map(|(t, r)| (*t, r.ln()))
        .unzip();
    if tx.len() < 3 {
        return Err(Error::Precondition("late window needs at least three checkpoints".into()));
    }
    Ok(GronwallReport {
        times: stats.times.clone(),
        root_mean_sq: root,
        envelope,
        margins,
        half_widths,
        late_fit: linear_fit(&tx, &ly),
        rate_bound: env.rate(),
    })
}

/// Snapshots of all paths taken at or before `t_max`.
pub fn early_snapshots(run: &EnsembleRun, t_max: f64) -> Vec<Field> {
    run.trajectories
        .iter()
        .flat_map(|t| t.snapshots.iter().filter(|f| f.time() <= t_max).cloned())
        .collect()
}

/// Mean of `F_u` within three standard errors of `F_u0` at every checkpoint.
pub fn mean_mass_is_martingale(stats: &EnsembleStats, f_u0: f64) -> bool {
    stats
        .mean_mass
        .iter()
        .zip(&stats.hw_mean_mass)
        .all(|(m, hw)| (m - f_u0).abs() <= 3.0 * hw / Z95 + 1e-12 * (1.0 + f_u0.abs()))
}
