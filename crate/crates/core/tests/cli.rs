use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_sfpme");

fn sfpme(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("SFPME_WORKERS").output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const STOCHASTIC: &str = "\
[problem]
n = 64
alpha = 1.5
m = 2
sigma = linear
lambda = 0.5
noise = white
initial = bump

[solver]
dt = 2e-3
t_end = 0.5
snapshots = 50

[ensemble]
n_paths = 60
seed = 99
path = 3
";

#[test]
fn simulate_without_noise_conserves_mass() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "heat.cfg",
        "[problem]\nn = 64\nsigma = zero\ninitial = gaussian\n[solver]\ndt = 1e-2\nt_end = 0.5\n",
    );
    let out = dir.path().join("out");
    let o = sfpme(&["simulate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let stdout = text(&o.stdout);
    let residual: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("mass identity residual "))
        .and_then(|r| r.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(residual < 1e-12);
    let csv = fs::read_to_string(out.join("mass.csv")).unwrap();
    assert!(csv.starts_with("t,mass,noise_integral,sq_norm,max_abs\n") && csv.ends_with('\n'));
    assert_eq!(csv.lines().count(), 52);
    let snaps = fs::read_dir(out.join("snapshots")).unwrap().count();
    assert!(snaps > 1);
}

#[test]
fn out_of_range_parameter_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "# bad\n[problem]\nalpha = 2.5\n");
    let o = sfpme(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = text(&o.stderr);
    assert!(err.contains("line 3") && err.contains("alpha"), "{err}");

    let cfg = write_config(dir.path(), "typo.cfg", "[solver]\ntend = 1\n");
    let o = sfpme(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("tend"));
}

#[test]
fn blow_up_exits_numerical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "wild.cfg",
        "[problem]\nn = 32\nalpha = 0.2\nsigma = linear\nlambda = 30\n[solver]\ndt = 1e-2\nt_end = 1\n",
    );
    let out = dir.path().join("o");
    let o = sfpme(&["simulate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(text(&o.stderr).contains("blew up"));
    // The record up to the failure is kept.
    assert!(fs::read_to_string(out.join("mass.csv")).unwrap().lines().count() > 2);
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "s.cfg", STOCHASTIC);
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|n| {
            let out = dir.path().join(n);
            let o = sfpme(&["simulate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
            (tree(&out), o.stdout)
        })
        .collect();
    assert!(!runs[0].0.is_empty());
    assert_eq!(runs[0], runs[1]);
    // A different seed changes the path.
    let out = dir.path().join("c");
    sfpme(&["simulate", cfg.to_str().unwrap(), "--seed", "100", "--out", out.to_str().unwrap()]);
    assert_ne!(tree(&out), runs[0].0);
}

#[test]
fn ensemble_is_independent_of_worker_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "e.cfg", STOCHASTIC);
    let mut outputs = Vec::new();
    for w in ["1", "4", "8"] {
        let out = dir.path().join(format!("w{w}"));
        let o = sfpme(&["ensemble", cfg.to_str().unwrap(), "--workers", w, "--out", out.to_str().unwrap()]);
        assert!(matches!(o.status.code(), Some(0 | 1)), "{}", text(&o.stderr));
        outputs.push((tree(&out), o.stdout, o.status.code()));
    }
    // Through the environment as well.
    let out = dir.path().join("env");
    let o = Command::new(BIN)
        .args(["ensemble", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("SFPME_WORKERS", "3")
        .output()
        .unwrap();
    outputs.push((tree(&out), o.stdout, o.status.code()));
    for o in &outputs[1..] {
        assert_eq!(o, &outputs[0]);
    }
    let files: Vec<&str> = outputs[0].0.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(files, ["ensemble.csv", "summary.txt"]);
    let csv = text(&outputs[0].0[0].1);
    assert!(csv.starts_with("t,mean_mass,var_mass,sqrt_mean_sq_norm,envelope,margin,ci_half_width\n"));
    let summary = text(&outputs[0].0[1].1);
    assert!(summary.contains("\"martingale\"") && summary.contains("\"gronwall\""));
}

#[test]
fn single_path_ensemble_is_refused() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "one.cfg", "[ensemble]\nn_paths = 1\n");
    let o = sfpme(&["ensemble", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("at least two paths"));
}

#[test]
fn additive_ensemble_reports_mass_law() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "add.cfg",
        "[problem]\nn = 32\nm = 2\nsigma = one\n[solver]\ndt = 5e-3\nt_end = 0.5\n[ensemble]\nn_paths = 200\nseed = 4\n",
    );
    let out = dir.path().join("o");
    let o = sfpme(&["ensemble", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stdout));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("\"mass_law\"") && !summary.contains("\"gronwall\""));
}

#[test]
fn kernel_tables() {
    let o = sfpme(&["kernel", "--alpha", "1", "--dim", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = text(&o.stdout);
    assert!(csv.starts_with("t,x,p,bound_ratio\n"));
    let first: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((first[2] - 1.0 / std::f64::consts::PI).abs() < 1e-15);
    assert!(text(&o.stderr).contains("tail exponent -1.99"));

    let o = sfpme(&["kernel", "--alpha", "2", "--t", "0.5,1", "--x", "0,1,2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(text(&o.stdout).lines().count(), 7);
    assert!(text(&o.stderr).contains("notice"));

    let o = sfpme(&["kernel", "--alpha", "1.5", "--dim", "2", "--x", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));

    let o = sfpme(&["kernel", "--alpha", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_filters_and_detects_tampering() {
    let o = sfpme(&["verify", "--only", "mass"]);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<String> = text(&o.stdout).lines().map(String::from).collect();
    assert!(rows.iter().any(|r| r.starts_with("mass ")));
    assert!(!rows.iter().any(|r| r.starts_with("spectral")));

    let o = sfpme(&["verify", "--only", "spectral", "--tamper-symbol"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("spectral"));

    let o = sfpme(&["verify", "--only", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes_on_defaults() {
    let o = sfpme(&["verify", "--workers", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stdout));
}
