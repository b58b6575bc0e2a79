//! Plain-text run configuration.
//!
//! ```text
//! # comment
//! [problem]
//! dim = 1
//! n = 128
//! length = 2pi
//! alpha = 1.5
//! m = 1
//! sigma = linear      # zero | one | linear
//! lambda = 0.5
//! noise = white       # white | uniform
//! initial = bump      # bump | gaussian | constant
//! amplitude = 1
//! radius = 1
//!
//! [solver]
//! dt = 1e-3
//! t_end = 2
//! scheme = semi-implicit   # or explicit
//! dealias = true
//! cfl_safety = 0.5
//! snapshots = auto         # auto | off | <stride>
//!
//! [ensemble]
//! n_paths = 500
//! seed = 2024
//! path = 0                 # path simulated by `simulate`
//! workers = 4
//!
//! [output]
//! dir = out
//! ```
//!
//! Every key is optional and falls back to the value shown above (except
//! `workers`, which falls back to `SFPME_WORKERS` and then 1). Unknown
//! sections and keys are errors, reported with their line number.

use crate::error::{Error, Result};
use crate::grid::{Field, LatticeGrid};
use crate::noise::{NoiseKind, NoiseSpec};
use crate::solver::{Scheme, SfpmeProblem, SigmaSpec, SnapshotPolicy, SolverConfig};
use crate::spectral::cutoff_test_function;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaKind {
    Zero,
    One,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    /// Smooth plateau of height `amplitude`, 1 inside `radius`, 0 beyond
    /// `2 radius`.
    Bump,
    /// `amplitude exp(-|x|^2 / (2 radius^2))`.
    Gaussian,
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub alpha: f64,
    pub m: f64,
    pub sigma: SigmaKind,
    pub lambda: f64,
    pub noise: NoiseKind,
    pub initial: InitialKind,
    pub amplitude: f64,
    pub radius: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub dealias: bool,
    pub cfl_safety: f64,
    pub snapshots: SnapshotPolicy,
    pub n_paths: usize,
    pub seed: u64,
    pub path: u64,
    pub workers: Option<usize>,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n: 128,
            length: std::f64::consts::TAU,
            alpha: 1.5,
            m: 1.0,
            sigma: SigmaKind::Linear,
            lambda: 0.5,
            noise: NoiseKind::SpaceTimeWhite,
            initial: InitialKind::Bump,
            amplitude: 1.0,
            radius: 1.0,
            dt: 1e-3,
            t_end: 2.0,
            scheme: Scheme::SemiImplicitSpectral,
            dealias: true,
            cfl_safety: 0.5,
            snapshots: SnapshotPolicy::Auto,
            n_paths: 500,
            seed: 2024,
            path: 0,
            workers: None,
            out_dir: "out".into(),
        }
    }
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

/// Real number, optionally a multiple of pi: `3.5`, `pi`, `2pi`, `0.5*pi`.
fn parse_real(v: &str) -> Option<f64> {
    let v = v.trim();
    if let Some(head) = v.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        let c = if head.is_empty() { 1.0 } else { head.parse::<f64>().ok()? };
        return Some(c * std::f64::consts::PI);
    }
    v.parse::<f64>().ok()
}

fn positive(line: usize, key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(err(line, format!("{key} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut section: Option<String> = None;
        let mut seen: Vec<(String, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, format!("malformed section header '{content}'")))?
                    .trim();
                if !matches!(name, "problem" | "solver" | "ensemble" | "output") {
                    return Err(err(line, format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected key = value, got '{content}'")))?;
            let key = key.trim();
            let value = value.trim();
            let sec = section
                .as_deref()
                .ok_or_else(|| err(line, format!("key '{key}' appears before any section")))?;
            let qualified = format!("{sec}.{key}");
            if let Some((_, first)) = seen.iter().find(|(k, _)| *k == qualified) {
                return Err(err(line, format!("{qualified} already set on line {first}")));
            }
            seen.push((qualified.clone(), line));
            c.set(sec, key, value, line)?;
        }
        c.validate()?;
        Ok(c)
    }

    fn set(&mut self, sec: &str, key: &str, value: &str, line: usize) -> Result<()> {
        let real = |v: &str| {
            parse_real(v).ok_or_else(|| err(line, format!("{key}: '{v}' is not a number")))
        };
        let int = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| err(line, format!("{key}: '{v}' is not a nonnegative integer")))
        };
        match (sec, key) {
            ("problem", "dim") => {
                let d = int(value)? as usize;
                if d != 1 && d != 2 {
                    return Err(err(line, format!("dim must be 1 or 2, got {d}")));
                }
                self.dim = d;
            }
            ("problem", "n") => {
                let n = int(value)? as usize;
                if n < 8 || !n.is_power_of_two() {
                    return Err(err(line, format!("n must be a power of two >= 8, got {n}")));
                }
                self.n = n;
            }
            ("problem", "length") => self.length = positive(line, key, real(value)?)?,
            ("problem", "alpha") => {
                let a = real(value)?;
                if !(a > 0.0 && a <= 2.0) {
                    return Err(err(line, format!("alpha must lie in (0, 2], got {a}")));
                }
                self.alpha = a;
            }
            ("problem", "m") => self.m = positive(line, key, real(value)?)?,
            ("problem", "sigma") => {
                self.sigma = match value {
                    "zero" => SigmaKind::Zero,
                    "one" => SigmaKind::One,
                    "linear" => SigmaKind::Linear,
                    other => {
                        return Err(err(line, format!("sigma must be zero, one or linear, got '{other}'")))
                    }
                }
            }
            ("problem", "lambda") => {
                let l = real(value)?;
                if !l.is_finite() {
                    return Err(err(line, "lambda must be finite"));
                }
                self.lambda = l;
            }
            ("problem", "noise") => {
                self.noise = match value {
                    "white" => NoiseKind::SpaceTimeWhite,
                    "uniform" => NoiseKind::UniformWiener,
                    other => return Err(err(line, format!("noise must be white or uniform, got '{other}'"))),
                }
            }
            ("problem", "initial") => {
                self.initial = match value {
                    "bump" => InitialKind::Bump,
                    "gaussian" => InitialKind::Gaussian,
                    "constant" => InitialKind::Constant,
                    other => {
                        return Err(err(
                            line,
                            format!("initial must be bump, gaussian or constant, got '{other}'"),
                        ))
                    }
                }
            }
            ("problem", "amplitude") => {
                let a = real(value)?;
                if !a.is_finite() {
                    return Err(err(line, "amplitude must be finite"));
                }
                self.amplitude = a;
            }
            ("problem", "radius") => self.radius = positive(line, key, real(value)?)?,
            ("solver", "dt") => self.dt = positive(line, key, real(value)?)?,
            ("solver", "t_end") => self.t_end = positive(line, key, real(value)?)?,
            ("solver", "scheme") => {
                self.scheme = match value {
                    "explicit" => Scheme::ExplicitEM,
                    "semi-implicit" => Scheme::SemiImplicitSpectral,
                    other => {
                        return Err(err(line, format!("scheme must be explicit or semi-implicit, got '{other}'")))
                    }
                }
            }
            ("solver", "dealias") => {
                self.dealias = match value {
                    "true" => true,
                    "false" => false,
                    other => return Err(err(line, format!("dealias must be true or false, got '{other}'"))),
                }
            }
            ("solver", "cfl_safety") => {
                let s = real(value)?;
                if !(s > 0.0 && s <= 1.0) {
                    return Err(err(line, format!("cfl_safety must lie in (0, 1], got {s}")));
                }
                self.cfl_safety = s;
            }
            ("solver", "snapshots") => {
                self.snapshots = match value {
                    "auto" => SnapshotPolicy::Auto,
                    "off" => SnapshotPolicy::Off,
                    v => {
                        let k = int(v)? as usize;
                        if k == 0 {
                            return Err(err(line, "snapshots stride must be at least 1"));
                        }
                        SnapshotPolicy::Every(k)
                    }
                }
            }
            ("ensemble", "n_paths") => self.n_paths = int(value)? as usize,
            ("ensemble", "seed") => self.seed = int(value)?,
            ("ensemble", "path") => self.path = int(value)?,
            ("ensemble", "workers") => {
                let w = int(value)? as usize;
                if w == 0 {
                    return Err(err(line, "workers must be at least 1"));
                }
                self.workers = Some(w);
            }
            ("output", "dir") => {
                if value.is_empty() {
                    return Err(err(line, "dir must not be empty"));
                }
                self.out_dir = value.to_string();
            }
            _ => return Err(err(line, format!("unknown key '{key}' in [{sec}]"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let n = (self.t_end / self.dt).round();
        if n < 1.0 || (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::Configuration(format!(
                "t_end = {} must be a positive whole number of steps dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.initial == InitialKind::Bump && 4.0 * self.radius >= self.length {
            return Err(Error::Configuration(format!(
                "bump radius {} needs 4 radius < length {}",
                self.radius, self.length
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<LatticeGrid> {
        LatticeGrid::new(self.dim, self.n, self.length)
    }

    pub fn initial_field(&self) -> Result<Field> {
        let g = self.grid()?;
        Ok(match self.initial {
            InitialKind::Bump => cutoff_test_function(g, self.radius)?.scaled(self.amplitude),
            InitialKind::Gaussian => {
                let w2 = 2.0 * self.radius * self.radius;
                Field::from_fn(g, |p| self.amplitude * (-(p[0] * p[0] + p[1] * p[1]) / w2).exp())
            }
            InitialKind::Constant => Field::constant(g, self.amplitude),
        })
    }

    pub fn sigma_spec(&self) -> SigmaSpec {
        match self.sigma {
            SigmaKind::Zero => SigmaSpec::Zero,
            SigmaKind::One => SigmaSpec::One,
            SigmaKind::Linear => SigmaSpec::Linear(self.lambda),
        }
    }

    pub fn problem(&self) -> Result<SfpmeProblem> {
        let noise = NoiseSpec { kind: self.noise, seed: self.seed, dim: self.dim };
        SfpmeProblem::new(self.alpha, self.m, self.initial_field()?, self.sigma_spec(), noise)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            dt: self.dt,
            t_end: self.t_end,
            scheme: self.scheme,
            dealias: self.dealias,
            cfl_safety: self.cfl_safety,
            snapshots: self.snapshots,
            noise_refinement: 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_file() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn parses_sections_and_comments() {
        let c = RunConfig::parse(
            "# run\n[problem]\nalpha = 0.8   # rough\nlength = 2pi\nsigma = one\n\n[solver]\ndt=0.01\nt_end=1\nsnapshots = 5\n[ensemble]\nworkers = 3\n",
        )
        .unwrap();
        assert_eq!(c.alpha, 0.8);
        assert_eq!(c.length, std::f64::consts::TAU);
        assert_eq!(c.sigma, SigmaKind::One);
        assert_eq!(c.snapshots, SnapshotPolicy::Every(5));
        assert_eq!(c.workers, Some(3));
    }

    #[test]
    fn range_errors_name_key_and_line() {
        match RunConfig::parse("[problem]\n\nalpha = 2.5\n") {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("alpha"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            RunConfig::parse("[problem]\nn = 100\n"),
            Err(Error::Config { line: 2, .. })
        ));
    }

    #[test]
    fn unknown_keys_and_sections_fail() {
        assert!(matches!(RunConfig::parse("[problem]\nalhpa = 1\n"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(RunConfig::parse("[plots]\n"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(RunConfig::parse("alpha = 1\n"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(
            RunConfig::parse("[solver]\ndt = 0.1\ndt = 0.2\n"),
            Err(Error::Config { line: 3, .. })
        ));
    }

    #[test]
    fn real_number_forms() {
        assert_eq!(parse_real("pi"), Some(std::f64::consts::PI));
        assert_eq!(parse_real("0.5*pi"), Some(0.5 * std::f64::consts::PI));
        assert_eq!(parse_real("1e-3"), Some(1e-3));
        assert_eq!(parse_real("two"), None);
    }

    #[test]
    fn step_count_must_be_whole() {
        assert!(matches!(
            RunConfig::parse("[solver]\ndt = 0.3\nt_end = 1\n"),
            Err(Error::Configuration(_))
        ));
    }
}
