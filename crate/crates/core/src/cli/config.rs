//! Experiment configuration: a JSON file and command-line flags merged into
//! one validated [`ExperimentConfig`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{Resolution, DEFAULT_OBSERVE_EVERY};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::stochastic::DEFAULT_DT;

/// Default output directory when neither the file nor `--out` names one.
pub const DEFAULT_OUT: &str = "fvlab-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ConeMath,
    Qsd,
    Harnack,
    Excursion,
    Extinction,
    Polyhedral,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::ConeMath,
        ExperimentKind::Qsd,
        ExperimentKind::Harnack,
        ExperimentKind::Excursion,
        ExperimentKind::Extinction,
        ExperimentKind::Polyhedral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ConeMath => "cone-math",
            ExperimentKind::Qsd => "qsd",
            ExperimentKind::Harnack => "harnack",
            ExperimentKind::Excursion => "excursion",
            ExperimentKind::Extinction => "extinction",
            ExperimentKind::Polyhedral => "polyhedral",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name).ok_or_else(|| {
            let known: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
            Error::config("experiment", format!("unknown experiment {name:?}; expected one of {}", known.join(", ")))
        })
    }
}

/// Unvalidated settings as they appear in a config file or on the command
/// line. Every field is optional so that sources can be layered.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<String>,
    pub domain: Option<serde_json::Value>,
    pub n: Option<usize>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub burn_in: Option<f64>,
    pub n_paths: Option<usize>,
    pub n_reps: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub observe_every: Option<f64>,
    pub bins: Option<usize>,
    pub n_small: Option<usize>,
    pub pairs: Option<usize>,
    pub target: Option<serde_json::Value>,
    pub query_points: Option<Vec<Vec<f64>>>,
    pub epsilon: Option<f64>,
    pub n_chains: Option<usize>,
    pub chain_length: Option<usize>,
    pub resolution: Option<String>,
    pub p: Option<Vec<f64>>,
    pub d: Option<Vec<usize>>,
    pub n_values: Option<Vec<usize>>,
}

macro_rules! layer {
    ($base:ident, $top:ident; $($f:ident),*) => {
        RawConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl RawConfig {
    /// Reads a JSON config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))
    }

    /// Fields set in `top` win over those in `self`.
    pub fn overlay(self, top: RawConfig) -> RawConfig {
        let base = self;
        layer!(base, top; experiment, domain, n, dt, horizon, burn_in, n_paths, n_reps, seed, out, threads,
            observe_every, bins, n_small, pairs, target, query_points, epsilon, n_chains, chain_length,
            resolution, p, d, n_values)
    }
}

/// A validated configuration. Optional fields are filled with
/// experiment-specific defaults at dispatch time.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub domain: Option<Domain>,
    pub n: usize,
    pub dt: f64,
    pub horizon: f64,
    pub burn_in: f64,
    pub n_paths: usize,
    pub n_reps: usize,
    pub seed: Option<u64>,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
    pub observe_every: f64,
    pub bins: Option<usize>,
    pub n_small: Option<usize>,
    pub pairs: usize,
    pub target: Option<Domain>,
    pub query_points: Option<Vec<Vec<f64>>>,
    pub epsilon: Option<f64>,
    pub n_chains: Option<usize>,
    pub chain_length: usize,
    pub resolution: Resolution,
    pub p: Vec<f64>,
    pub d: Vec<usize>,
    pub n_values: Vec<usize>,
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

fn positive_int(field: &str, v: usize) -> Result<usize> {
    if v > 0 {
        Ok(v)
    } else {
        Err(Error::config(field, "must be positive"))
    }
}

fn domain_field(field: &str, v: Option<serde_json::Value>) -> Result<Option<Domain>> {
    v.map(|v| serde_json::from_value::<Domain>(v).map_err(|e| Error::config(field, e.to_string()))).transpose()
}

/// Layers `flags` over the optional config file and validates the result.
/// The seed is mandatory for every stochastic experiment.
pub fn parse_config(file: Option<&Path>, flags: RawConfig) -> Result<ExperimentConfig> {
    let raw = match file {
        Some(path) => RawConfig::from_file(path)?.overlay(flags),
        None => flags,
    };
    validate(raw)
}

pub fn validate(raw: RawConfig) -> Result<ExperimentConfig> {
    let name = raw.experiment.ok_or_else(|| Error::config("experiment", "missing"))?;
    let experiment = ExperimentKind::parse(&name)?;
    if experiment != ExperimentKind::ConeMath && raw.seed.is_none() {
        return Err(Error::config("seed", "missing; every stochastic run needs an explicit seed"));
    }
    let horizon = positive("horizon", raw.horizon.unwrap_or(10.0))?;
    let burn_in = match raw.burn_in {
        Some(b) if !(b >= 0.0 && b < horizon) => {
            return Err(Error::config("burnIn", format!("must lie in [0, horizon), got {b}")))
        }
        Some(b) => b,
        None => horizon / 5.0,
    };
    let resolution = match raw.resolution.as_deref() {
        None => match experiment {
            ExperimentKind::Polyhedral => Resolution::Sequential,
            _ => Resolution::Strict,
        },
        Some("strict") => Resolution::Strict,
        Some("sequential") => Resolution::Sequential,
        Some(other) => {
            return Err(Error::config("resolution", format!("expected \"strict\" or \"sequential\", got {other:?}")))
        }
    };
    let n = positive_int("n", raw.n.unwrap_or(100))?;
    if n < 2 {
        return Err(Error::config("n", "need at least 2 particles"));
    }
    for &d in raw.d.iter().flatten() {
        if d < 2 {
            return Err(Error::config("d", format!("dimension must be at least 2, got {d}")));
        }
    }
    for &p in raw.p.iter().flatten() {
        positive("p", p)?;
    }
    for &nv in raw.n_values.iter().flatten() {
        if nv < 2 {
            return Err(Error::config("nValues", format!("population must be at least 2, got {nv}")));
        }
    }
    let n_reps_default = if experiment == ExperimentKind::Extinction { 10_000 } else { 100 };
    Ok(ExperimentConfig {
        experiment,
        domain: domain_field("domain", raw.domain)?,
        n,
        dt: positive("dt", raw.dt.unwrap_or(DEFAULT_DT))?,
        horizon,
        burn_in,
        n_paths: positive_int("nPaths", raw.n_paths.unwrap_or(10_000))?,
        n_reps: positive_int("nReps", raw.n_reps.unwrap_or(n_reps_default))?,
        seed: raw.seed,
        out: raw.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        threads: raw.threads.map(|t| positive_int("threads", t)).transpose()?,
        observe_every: positive("observeEvery", raw.observe_every.unwrap_or(DEFAULT_OBSERVE_EVERY))?,
        bins: raw.bins.map(|b| positive_int("bins", b)).transpose()?,
        n_small: raw.n_small.map(|v| positive_int("nSmall", v)).transpose()?,
        pairs: positive_int("pairs", raw.pairs.unwrap_or(10))?,
        target: domain_field("target", raw.target)?,
        query_points: raw.query_points,
        epsilon: raw.epsilon.map(|e| positive("epsilon", e)).transpose()?,
        n_chains: raw.n_chains,
        chain_length: positive_int("chainLength", raw.chain_length.unwrap_or(300))?,
        resolution,
        p: raw.p.unwrap_or_default(),
        d: raw.d.unwrap_or_default(),
        n_values: raw.n_values.unwrap_or_default(),
    })
}
