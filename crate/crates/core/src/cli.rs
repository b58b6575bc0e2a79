//! Command implementations behind the `sfpme` binary.
//!
//! Each command writes its report to the given stream and returns a process
//! exit code: 0 pass, 1 check failure, 2 usage or configuration problem,
//! 3 numerical failure. Every float is printed with 17 significant digits
//! so outputs are byte-stable for fixed seeds.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::analysis::{
    calibrate_c, checkpoints, early_snapshots, gronwall_envelope_check, mass_identity_check,
    mass_identity_tolerance, mass_law_from_run, mean_mass_is_martingale, run_paths_keeping,
    EnsembleStats, GronwallEnvelope,
};
use crate::config::{RunConfig, SigmaKind};
use crate::error::{Error, Result};
use crate::kernel::{fit_profile_tail, two_sided_bound, StableKernel};
use crate::snapshot;
use crate::solver::{evolve, SnapshotPolicy, Trajectory};
use crate::verify;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable consulted for the worker count when neither the
/// command line nor the config sets one.
pub const WORKERS_ENV: &str = "SFPME_WORKERS";

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BlowUp { .. }
        | Error::TooManyBlowUps { .. }
        | Error::NonFinite(_)
        | Error::Accuracy(_) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn report_error(err: &mut dyn Write, e: &Error) -> i32 {
    let _ = writeln!(err, "error: {e}");
    exit_code(e)
}

/// `--workers`, then the config, then the environment, then 1.
pub fn resolve_workers(flag: Option<usize>, config: Option<usize>) -> usize {
    flag.or(config)
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&w| w > 0)
        .unwrap_or(1)
}

fn load(path: &Path, ov: &Overrides) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(w) = ov.workers {
        cfg.workers = Some(w);
    }
    if let Some(o) = &ov.out {
        cfg.out_dir = o.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

fn mass_csv(traj: &Trajectory) -> String {
    let mut s = String::from("t,mass,noise_integral,sq_norm,max_abs\n");
    for k in 0..traj.times.len() {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            num(traj.times[k]),
            num(traj.mass.f_u[k]),
            num(traj.mass.noise_integral[k]),
            num(traj.sq_norms[k]),
            num(traj.max_abs[k])
        ));
    }
    s
}

fn write_trajectory(dir: &Path, traj: &Trajectory, alpha: f64, m: f64) -> Result<()> {
    let snaps = dir.join("snapshots");
    fs::create_dir_all(&snaps)?;
    write_file(&dir.join("mass.csv"), mass_csv(traj).as_bytes())?;
    for (f, k) in traj.snapshots.iter().zip(&traj.snapshot_steps) {
        write_file(&snaps.join(format!("step_{k:08}.bin")), &snapshot::encode(f, alpha, m))?;
    }
    Ok(())
}

/// Run the configured path, write `mass.csv` and `snapshots/`, and check the
/// discrete mass identity.
pub fn cmd_simulate(config: &Path, ov: &Overrides, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match simulate(config, ov, out, err) {
        Ok(code) => code,
        Err(e) => report_error(err, &e),
    }
}

fn simulate(config: &Path, ov: &Overrides, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = load(config, ov)?;
    let problem = cfg.problem()?;
    let dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&dir)?;
    let traj = match evolve(&problem, &cfg.solver(), cfg.path) {
        Ok(t) => t,
        Err(f) => {
            // Keep whatever was recorded before the failure.
            if !f.partial.times.is_empty() {
                write_trajectory(&dir, &f.partial, cfg.alpha, cfg.m)?;
            }
            return Err(f.error);
        }
    };
    write_trajectory(&dir, &traj, cfg.alpha, cfg.m)?;
    let residual = mass_identity_check(&traj);
    let tol = mass_identity_tolerance(traj.mass.f_u0);
    let pass = residual <= tol;
    writeln!(out, "path {} steps {}", cfg.path, traj.times.len() - 1)?;
    writeln!(out, "mass identity residual {} tolerance {}", num(residual), num(tol))?;
    writeln!(out, "mass identity {}", if pass { "PASS" } else { "FAIL" })?;
    if !pass {
        writeln!(err, "mass identity residual exceeds tolerance")?;
    }
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

/// Run the configured ensemble, write `ensemble.csv` and `summary.txt`, and
/// report every applicable check.
pub fn cmd_ensemble(config: &Path, ov: &Overrides, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match ensemble(config, ov, out) {
        Ok(code) => code,
        Err(e) => report_error(err, &e),
    }
}

struct Check {
    name: &'static str,
    pass: bool,
    /// Key and value, the value already rendered as a literal.
    detail: Vec<(&'static str, String)>,
}

fn ensemble(config: &Path, ov: &Overrides, out: &mut dyn Write) -> Result<i32> {
    let cfg = load(config, ov)?;
    if cfg.n_paths < 2 {
        return Err(Error::Precondition(format!(
            "an ensemble needs at least two paths, got n_paths = {}",
            cfg.n_paths
        )));
    }
    let problem = cfg.problem()?;
    let workers = resolve_workers(None, cfg.workers);
    let t_early = 0.1 * cfg.t_end;
    let lip = problem.sigma.lip_constant();
    let gronwall_on = cfg.sigma == SigmaKind::Linear && lip > 0.0;
    let solver = if gronwall_on {
        cfg.solver().with_snapshots(SnapshotPolicy::Auto)
    } else {
        cfg.solver().with_snapshots(SnapshotPolicy::Off)
    };
    let run = run_paths_keeping(&problem, &solver, cfg.n_paths, workers, t_early)?;
    let stats = EnsembleStats::from_run(&run)?;
    let f_u0 = problem.u0.integral();

    let mut checks = vec![Check {
        name: "martingale",
        pass: mean_mass_is_martingale(&stats, f_u0),
        detail: vec![],
    }];
    if cfg.sigma == SigmaKind::One && cfg.n_paths >= 200 {
        let law = mass_law_from_run(&problem, &run)?;
        checks.push(Check {
            name: "mass_law",
            pass: law.p_value > 0.01,
            detail: vec![
                ("ks_statistic", num(law.statistic)),
                ("p_value", num(law.p_value)),
                ("variance", num(law.variance)),
            ],
        });
    }

    let (root, hw) = stats.root_mean_sq_norm();
    let nan = || vec![f64::NAN; stats.times.len()];
    let (mut envelope, mut margin) = (nan(), nan());
    if gronwall_on {
        let cal = calibrate_c(&problem.u0, &early_snapshots(&run, t_early))?;
        let env = GronwallEnvelope { lip, c_const: cal.c, u0_l1: problem.u0.l1_norm() };
        let rep = gronwall_envelope_check(&stats, &env)?;
        envelope = rep.envelope.clone();
        margin = rep.margins.clone();
        let mut detail = vec![
            ("c", num(cal.c)),
            ("c_initial", num(cal.from_initial)),
            ("c_snapshots", num(cal.from_snapshots.c)),
            ("late_slope", num(rep.late_fit.slope)),
            ("late_slope_se", num(rep.late_fit.slope_se)),
            ("rate_bound", num(rep.rate_bound)),
            ("dominated", rep.dominated().to_string()),
        ];
        if let Some(d) = &cal.from_snapshots.diagnostic {
            detail.push(("diagnostic", format!("{d:?}")));
        }
        checks.push(Check { name: "gronwall", pass: rep.passed(), detail });
    }

    let dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&dir)?;
    let mut csv = String::from("t,mean_mass,var_mass,sqrt_mean_sq_norm,envelope,margin,ci_half_width\n");
    for i in 0..stats.times.len() {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            num(stats.times[i]),
            num(stats.mean_mass[i]),
            num(stats.var_mass[i]),
            num(root[i]),
            num(envelope[i]),
            num(margin[i]),
            num(hw[i])
        ));
    }
    write_file(&dir.join("ensemble.csv"), csv.as_bytes())?;

    let all = checks.iter().all(|c| c.pass);
    let mut s = String::from("{\n");
    s.push_str(&format!("  \"n_paths\": {},\n", stats.n_paths));
    s.push_str(&format!("  \"blown_up\": {},\n", stats.blown_up.len()));
    s.push_str(&format!("  \"seed\": {},\n", cfg.seed));
    s.push_str(&format!("  \"checkpoints\": {},\n", checkpoints(cfg.solver().steps()?).len()));
    s.push_str("  \"checks\": {\n");
    for (i, c) in checks.iter().enumerate() {
        s.push_str(&format!("    \"{}\": {{\n      \"result\": \"{}\"", c.name, verdict(c.pass)));
        for (k, v) in &c.detail {
            s.push_str(&format!(",\n      \"{k}\": {v}"));
        }
        s.push_str(if i + 1 < checks.len() { "\n    },\n" } else { "\n    }\n" });
    }
    s.push_str("  },\n");
    s.push_str(&format!("  \"result\": \"{}\"\n}}\n", verdict(all)));
    write_file(&dir.join("summary.txt"), s.as_bytes())?;
    out.write_all(s.as_bytes())?;
    Ok(if all { EXIT_PASS } else { EXIT_FAIL })
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

/// Kernel values on the `(t, x)` grid as CSV, followed by the tail fit and
/// two-sided bound ratios. In two dimensions `x` is a radius.
pub fn cmd_kernel(
    alpha: f64,
    dim: usize,
    ts: &[f64],
    xs: &[f64],
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    match kernel(alpha, dim, ts, xs, out, err) {
        Ok(code) => code,
        Err(e) => report_error(err, &e),
    }
}

fn kernel(
    alpha: f64,
    dim: usize,
    ts: &[f64],
    xs: &[f64],
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    if ts.is_empty() || xs.is_empty() {
        return Err(Error::Precondition("need at least one t and one x".into()));
    }
    let k = StableKernel::new(alpha, dim)?;
    let gaussian = alpha == 2.0;
    let mut ratios = Vec::new();
    writeln!(out, "t,x,p,bound_ratio")?;
    for &t in ts {
        for &x in xs {
            let mut point = vec![0.0; dim];
            point[0] = x;
            let p = k.eval(t, &point)?;
            let ratio = if gaussian { f64::NAN } else { p / two_sided_bound(alpha, dim, t, x.abs()) };
            if !gaussian {
                ratios.push(ratio);
            }
            writeln!(out, "{},{},{},{}", num(t), num(x), num(p), num(ratio))?;
        }
    }
    if gaussian {
        writeln!(
            err,
            "notice: alpha = 2 is the Gaussian kernel, which has no power tail; tail fit and bound check skipped"
        )?;
        return Ok(EXIT_PASS);
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    writeln!(err, "bound ratio min {} max {} spread {}", num(lo), num(hi), num(hi / lo))?;
    let fit = fit_profile_tail(&k)?;
    let pass = fit.relative_error() <= 0.05;
    writeln!(
        err,
        "tail exponent {} expected {} relative error {} on r in [{}, {}]: {}",
        num(fit.fit.slope),
        num(fit.expected),
        num(fit.relative_error()),
        num(fit.window.0),
        num(fit.window.1),
        if pass { "PASS" } else { "FAIL" }
    )?;
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

/// Run the built-in property suite and print one row per claim.
pub fn cmd_verify(only: Option<&str>, tamper: bool, workers: usize, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let claims: Vec<&verify::Claim> = match only {
        Some(name) => match verify::CLAIMS.iter().find(|c| c.key == name) {
            Some(c) => vec![c],
            None => {
                let keys: Vec<&str> = verify::CLAIMS.iter().map(|c| c.key).collect();
                let _ = writeln!(err, "error: unknown claim '{name}'; known claims: {}", keys.join(", "));
                return EXIT_USAGE;
            }
        },
        None => verify::CLAIMS.iter().collect(),
    };
    let opts = verify::Options { tamper_symbol: tamper, workers };
    let mut failed = Vec::new();
    let mut numerical = false;
    let _ = writeln!(out, "{:<12} {:<6} detail", "claim", "result");
    for c in claims {
        let (label, detail) = match (c.run)(&opts) {
            Ok(o) if o.pass => ("pass", o.detail),
            Ok(o) => {
                failed.push(c.key);
                ("FAIL", o.detail)
            }
            Err(e) => {
                failed.push(c.key);
                numerical |= exit_code(&e) == EXIT_NUMERICAL;
                ("ERROR", e.to_string())
            }
        };
        let _ = writeln!(out, "{:<12} {:<6} {}", c.key, label, detail);
    }
    if failed.is_empty() {
        let _ = writeln!(out, "all claims verified");
        EXIT_PASS
    } else {
        let _ = writeln!(err, "failed claims: {}", failed.join(", "));
        if numerical {
            EXIT_NUMERICAL
        } else {
            EXIT_FAIL
        }
    }
}
