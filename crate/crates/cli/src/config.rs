//! Flat `key = value` experiment files.
//!
//! Lines are `key = value`; `#` starts a comment. Lists are comma separated,
//! points inside a list of points are separated by `;`.

use std::fmt;
use std::path::{Path, PathBuf};

use shockflow_core::fixtures::{fixture, FIXTURE_NAMES};
use shockflow_core::legendre::HamiltonianModel;
use shockflow_core::linalg::SmallMatrix;
use shockflow_core::{Initial64, Model64, Vec64};

/// Every key the parser accepts.
pub const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "fixture",
    "output",
    "rng_seed",
    "hamiltonian.kind",
    "hamiltonian.exponent",
    "hamiltonian.matrix",
    "limit.cluster_tol",
    "solve.times",
    "solve.points",
    "particles.seeds",
    "particles.T",
    "particles.dt",
    "particles.merge_tol",
    "viscous.mu_ladder",
    "viscous.N",
    "viscous.T",
    "viscous.dt",
    "viscous.field_interval",
    "viscous.particle_dt",
    "viscous.seeds",
    "anomaly.seed",
    "anomaly.window",
    "sde.epsilon_ladder",
    "sde.paths",
    "sde.dt",
    "sde.T",
    "sde.seed_point",
    "sde.saved_paths",
    "bench.instances",
    "bench.tol",
    "bench.oracle",
];

pub const EXPERIMENTS: [&str; 6] = ["solve", "particles", "viscous-compare", "anomaly", "sde", "admissible-bench"];

/// Rejected configuration, naming the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { key: key.into(), reason: reason.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.key, self.reason)
    }
}

impl std::error::Error for ConfigError {}

type Parsed<T> = Result<T, ConfigError>;

/// Raw entries in file order.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub entries: Vec<(String, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Parsed<Self> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::new(format!("line {}", no + 1), "expected `key = value`"));
            };
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::new(key, "unknown key"));
            }
            if entries.iter().any(|(k, _)| *k == key) {
                return Err(ConfigError::new(key, "given more than once"));
            }
            entries.push((key, value));
        }
        Ok(Self { entries })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn number(key: &str, s: &str) -> Parsed<f64> {
    let x: f64 = s.trim().parse().map_err(|_| ConfigError::new(key, format!("{s:?} is not a number")))?;
    if !x.is_finite() {
        return Err(ConfigError::new(key, "must be finite"));
    }
    Ok(x)
}

fn numbers(key: &str, s: &str) -> Parsed<Vec<f64>> {
    let xs: Vec<f64> = s.split(',').map(|p| number(key, p)).collect::<Parsed<_>>()?;
    if xs.is_empty() {
        return Err(ConfigError::new(key, "empty list"));
    }
    Ok(xs)
}

fn integer(key: &str, s: &str) -> Parsed<usize> {
    s.trim().parse().map_err(|_| ConfigError::new(key, format!("{s:?} is not a non-negative integer")))
}

fn positive(key: &str, x: f64) -> Parsed<f64> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err(ConfigError::new(key, format!("must be positive, got {x}")))
    }
}

fn points(key: &str, s: &str, dim: usize) -> Parsed<Vec<Vec64>> {
    let groups: Vec<&str> = s.split(';').map(str::trim).filter(|g| !g.is_empty()).collect();
    let mut out = Vec::new();
    for g in &groups {
        let xs = numbers(key, g)?;
        if dim == 1 && groups.len() == 1 {
            out.extend(xs.iter().map(|&x| Vec64::scalar(x)));
        } else if xs.len() == dim {
            out.push(Vec64::from_slice(&xs));
        } else {
            return Err(ConfigError::new(
                key,
                format!("point {g:?} has {} components, the fixture has {dim}", xs.len()),
            ));
        }
    }
    if out.is_empty() {
        return Err(ConfigError::new(key, "no points given"));
    }
    Ok(out)
}

/// Accessor that applies defaults.
struct Reader<'a> {
    raw: &'a RawConfig,
}

impl Reader<'_> {
    fn f64_or(&self, key: &str, default: f64) -> Parsed<f64> {
        self.raw.get(key).map_or(Ok(default), |s| number(key, s))
    }

    fn positive_or(&self, key: &str, default: f64) -> Parsed<f64> {
        positive(key, self.f64_or(key, default)?)
    }

    fn opt_positive(&self, key: &str) -> Parsed<Option<f64>> {
        self.raw.get(key).map(|s| number(key, s).and_then(|x| positive(key, x))).transpose()
    }

    fn usize_or(&self, key: &str, default: usize) -> Parsed<usize> {
        self.raw.get(key).map_or(Ok(default), |s| integer(key, s))
    }

    fn list_or(&self, key: &str, default: &[f64]) -> Parsed<Vec<f64>> {
        self.raw.get(key).map_or(Ok(default.to_vec()), |s| numbers(key, s))
    }

    fn points_or(&self, key: &str, dim: usize, default: impl FnOnce() -> Vec<Vec64>) -> Parsed<Vec<Vec64>> {
        self.raw.get(key).map_or_else(|| Ok(default()), |s| points(key, s, dim))
    }
}

#[derive(Debug, Clone)]
pub struct SolveParams {
    pub times: Vec<f64>,
    pub points: usize,
}

#[derive(Debug, Clone)]
pub struct ParticleParams {
    pub seeds: Vec<Vec64>,
    pub horizon: f64,
    pub dt: f64,
    pub merge_tol: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ViscousParams {
    pub mu_ladder: Vec<f64>,
    pub n: usize,
    pub horizon: f64,
    pub dt: Option<f64>,
    pub field_interval: f64,
    pub particle_dt: f64,
    pub seeds: Vec<Vec64>,
}

#[derive(Debug, Clone)]
pub struct AnomalyParams {
    pub seed: Vec64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct SdeParams {
    pub epsilon_ladder: Vec<f64>,
    pub paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed_point: Vec64,
    pub saved_paths: usize,
}

#[derive(Debug, Clone)]
pub struct BenchParams {
    pub instances: usize,
    pub tol: f64,
    pub oracle: bool,
}

/// Experiment-specific settings.
#[derive(Debug, Clone)]
pub enum Experiment {
    Solve(SolveParams),
    Particles(ParticleParams),
    ViscousCompare(ViscousParams),
    Anomaly(ViscousParams, AnomalyParams),
    Sde(SdeParams),
    AdmissibleBench(BenchParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Solve(_) => "solve",
            Experiment::Particles(_) => "particles",
            Experiment::ViscousCompare(_) => "viscous-compare",
            Experiment::Anomaly(..) => "anomaly",
            Experiment::Sde(_) => "sde",
            Experiment::AdmissibleBench(_) => "admissible-bench",
        }
    }
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub raw: RawConfig,
    pub fixture: Option<String>,
    pub ic: Option<Initial64>,
    pub model: Option<Model64>,
    pub output: PathBuf,
    pub rng_seed: u64,
    pub cluster_tol: Option<f64>,
    pub experiment: Experiment,
}

impl ExperimentConfig {
    /// Reads and validates `path`; a relative `output` is taken relative to the file.
    pub fn load(path: &Path) -> Parsed<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_raw(RawConfig::parse(&text)?, base)
    }

    pub fn from_raw(raw: RawConfig, base: &Path) -> Parsed<Self> {
        let r = Reader { raw: &raw };
        let kind = raw.get("experiment").ok_or_else(|| ConfigError::new("experiment", "missing"))?;
        if !EXPERIMENTS.contains(&kind) {
            return Err(ConfigError::new("experiment", format!("{kind:?} is not one of {}", EXPERIMENTS.join(", "))));
        }
        let output = raw.get("output").ok_or_else(|| ConfigError::new("output", "missing"))?;
        let output = base.join(output);
        let rng_seed = raw.get("rng_seed").map_or(Ok(0), |s| {
            s.parse::<u64>().map_err(|_| ConfigError::new("rng_seed", "must be an unsigned integer"))
        })?;
        let cluster_tol = r.opt_positive("limit.cluster_tol")?;

        if kind == "admissible-bench" {
            let params = BenchParams {
                instances: r.usize_or("bench.instances", 200)?,
                tol: r.positive_or("bench.tol", 1e-9)?,
                oracle: match raw.get("bench.oracle").unwrap_or("true") {
                    "true" => true,
                    "false" => false,
                    other => return Err(ConfigError::new("bench.oracle", format!("{other:?} is not true or false"))),
                },
            };
            if params.instances == 0 {
                return Err(ConfigError::new("bench.instances", "must be positive"));
            }
            return Ok(Self {
                raw: raw.clone(),
                fixture: None,
                ic: None,
                model: None,
                output,
                rng_seed,
                cluster_tol,
                experiment: Experiment::AdmissibleBench(params),
            });
        }

        let name = raw.get("fixture").ok_or_else(|| ConfigError::new("fixture", "missing"))?;
        if !FIXTURE_NAMES.contains(&name) {
            return Err(ConfigError::new(
                "fixture",
                format!("unknown fixture {name:?}; known: {}", FIXTURE_NAMES.join(", ")),
            ));
        }
        let ic = fixture::<f64>(name).map_err(|e| ConfigError::new("fixture", e.to_string()))?.ic;
        let dim = ic.dim();
        let model = hamiltonian(&r, dim)?;

        let default_seeds = || -> Vec<Vec64> {
            match dim {
                1 => (0..11).map(|i| Vec64::scalar(-1.0 + 0.2 * i as f64)).collect(),
                _ => (0..5)
                    .flat_map(|i| {
                        (0..5).map(move |j| Vec64::from_slice(&[-1.0 + 0.5 * i as f64, -1.0 + 0.5 * j as f64]))
                    })
                    .collect(),
            }
        };
        let viscous = |r: &Reader| -> Parsed<ViscousParams> {
            if dim > 2 {
                return Err(ConfigError::new("fixture", "viscous experiments support one and two dimensions"));
            }
            let mu_ladder = r.list_or("viscous.mu_ladder", &[0.08, 0.04, 0.02, 0.01])?;
            for &mu in &mu_ladder {
                positive("viscous.mu_ladder", mu)
                    .map_err(|_| ConfigError::new("viscous.mu_ladder", format!("mu must be positive, got {mu}")))?;
            }
            let n = r.usize_or("viscous.N", if dim == 1 { 2048 } else { 128 })?;
            if n < 8 {
                return Err(ConfigError::new("viscous.N", "need at least 8 nodes per axis"));
            }
            Ok(ViscousParams {
                mu_ladder,
                n,
                horizon: r.positive_or("viscous.T", 1.0)?,
                dt: r.opt_positive("viscous.dt")?,
                field_interval: r.positive_or("viscous.field_interval", 0.1)?,
                particle_dt: r.positive_or("viscous.particle_dt", 1e-3)?,
                seeds: r.points_or("viscous.seeds", dim, default_seeds)?,
            })
        };

        let experiment = match kind {
            "solve" => {
                let times = r.list_or("solve.times", &[0.5, 1.0])?;
                for &t in &times {
                    positive("solve.times", t)?;
                }
                let points = r.usize_or("solve.points", if dim == 1 { 257 } else { 65 })?;
                if points < 2 {
                    return Err(ConfigError::new("solve.points", "need at least two points per axis"));
                }
                if dim > 2 {
                    return Err(ConfigError::new("fixture", "grid output supports one and two dimensions"));
                }
                Experiment::Solve(SolveParams { times, points })
            }
            "particles" => {
                let horizon = r.positive_or("particles.T", 1.0)?;
                let dt = r.positive_or("particles.dt", 1e-3)?;
                if dt > horizon {
                    return Err(ConfigError::new("particles.dt", "step exceeds the horizon"));
                }
                Experiment::Particles(ParticleParams {
                    seeds: r.points_or("particles.seeds", dim, default_seeds)?,
                    horizon,
                    dt,
                    merge_tol: r.opt_positive("particles.merge_tol")?,
                })
            }
            "viscous-compare" => Experiment::ViscousCompare(viscous(&r)?),
            "anomaly" => {
                let v = viscous(&r)?;
                let seed = r.points_or("anomaly.seed", dim, || vec![Vec64::zeros(dim)])?;
                if seed.len() != 1 {
                    return Err(ConfigError::new("anomaly.seed", "exactly one point"));
                }
                let w = r.list_or("anomaly.window", &[0.5 * v.horizon, v.horizon])?;
                if w.len() != 2 || !(w[0] >= 0.0 && w[0] < w[1] && w[1] <= v.horizon) {
                    return Err(ConfigError::new("anomaly.window", "need `from, to` with 0 <= from < to <= viscous.T"));
                }
                Experiment::Anomaly(v, AnomalyParams { seed: seed[0], window: (w[0], w[1]) })
            }
            _ => {
                let epsilon_ladder = r.list_or("sde.epsilon_ladder", &[0.1, 0.05])?;
                for &e in &epsilon_ladder {
                    if e < 0.0 {
                        return Err(ConfigError::new(
                            "sde.epsilon_ladder",
                            format!("epsilon must be non-negative, got {e}"),
                        ));
                    }
                }
                let dt = r.positive_or("sde.dt", 1e-3)?;
                if dt > 1e-3 {
                    return Err(ConfigError::new("sde.dt", "must not exceed 1e-3"));
                }
                let paths = r.usize_or("sde.paths", 400)?;
                if paths < 2 {
                    return Err(ConfigError::new("sde.paths", "need at least two paths"));
                }
                let seed = r.points_or("sde.seed_point", dim, || vec![Vec64::zeros(dim)])?;
                if seed.len() != 1 {
                    return Err(ConfigError::new("sde.seed_point", "exactly one point"));
                }
                Experiment::Sde(SdeParams {
                    epsilon_ladder,
                    paths,
                    dt,
                    horizon: r.positive_or("sde.T", 1.0)?,
                    seed_point: seed[0],
                    saved_paths: r.usize_or("sde.saved_paths", 8)?,
                })
            }
        };
        Ok(Self {
            raw: raw.clone(),
            fixture: Some(name.to_string()),
            ic: Some(ic),
            model: Some(model),
            output,
            rng_seed,
            cluster_tol,
            experiment,
        })
    }
}

fn hamiltonian(r: &Reader, dim: usize) -> Parsed<Model64> {
    let kind = r.raw.get("hamiltonian.kind").unwrap_or("quadratic");
    let built = match kind {
        "quadratic" => HamiltonianModel::quadratic(dim),
        "power-law" => {
            let a = r
                .raw
                .get("hamiltonian.exponent")
                .ok_or_else(|| ConfigError::new("hamiltonian.exponent", "required for power-law"))?;
            let a = number("hamiltonian.exponent", a)?;
            if a <= 1.0 {
                return Err(ConfigError::new("hamiltonian.exponent", format!("must exceed 1, got {a}")));
            }
            HamiltonianModel::power_law(dim, a)
        }
        "cosh-sum" => HamiltonianModel::cosh_sum(dim),
        "anisotropic" => {
            let m = r
                .raw
                .get("hamiltonian.matrix")
                .ok_or_else(|| ConfigError::new("hamiltonian.matrix", "required for anisotropic"))?;
            let entries = numbers("hamiltonian.matrix", m)?;
            if entries.len() != dim * dim {
                return Err(ConfigError::new("hamiltonian.matrix", format!("need {} row-major entries", dim * dim)));
            }
            let a = SmallMatrix::from_row_major(&entries)
                .ok_or_else(|| ConfigError::new("hamiltonian.matrix", "not a square matrix of size 1 to 3"))?;
            HamiltonianModel::anisotropic(a)
        }
        other => {
            return Err(ConfigError::new(
                "hamiltonian.kind",
                format!("{other:?} is not one of quadratic, anisotropic, power-law, cosh-sum"),
            ))
        }
    };
    built.map_err(|e| ConfigError::new("hamiltonian", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Parsed<ExperimentConfig> {
        ExperimentConfig::from_raw(RawConfig::parse(text)?, Path::new("/tmp"))
    }

    #[test]
    fn comments_and_defaults() {
        let c = load("experiment = anomaly # trailing\nfixture = neg-abs\noutput = out\n").unwrap();
        let Experiment::Anomaly(v, a) = c.experiment else { panic!() };
        assert_eq!(v.mu_ladder, vec![0.08, 0.04, 0.02, 0.01]);
        assert_eq!(a.window, (0.5, 1.0));
        assert_eq!(c.output, Path::new("/tmp/out"));
    }

    #[test]
    fn rejections_name_the_key() {
        let cases = [
            ("experiment = solve\nfixture = neg-abs\noutput = o\nsolve.speed = 2\n", "solve.speed"),
            (
                "experiment = anomaly\nfixture = neg-abs\noutput = o\nviscous.mu_ladder = 0.1,-0.01\n",
                "viscous.mu_ladder",
            ),
            ("experiment = solve\nfixture = nope\noutput = o\n", "fixture"),
            ("experiment = sde\nfixture = neg-abs\noutput = o\nsde.dt = 0.01\n", "sde.dt"),
            (
                "experiment = solve\nfixture = neg-abs\noutput = o\nhamiltonian.kind = power-law\n",
                "hamiltonian.exponent",
            ),
            ("experiment = solve\noutput = o\n", "fixture"),
            ("experiment = solve\nexperiment = sde\n", "experiment"),
        ];
        for (text, key) in cases {
            assert_eq!(load(text).unwrap_err().key, key, "{text}");
        }
    }

    #[test]
    fn point_lists() {
        assert_eq!(points("k", "-0.5, 0.2", 1).unwrap().len(), 2);
        assert_eq!(points("k", "-0.5; 0.2; 1", 1).unwrap().len(), 3);
        let p = points("k", "0.4,0.1; -0.3,0.2", 2).unwrap();
        assert_eq!(p[1].as_slice(), &[-0.3, 0.2]);
        assert!(points("k", "0.4,0.1,3", 2).is_err());
    }
}
