//! Runs a configured experiment and writes `summary.json` plus CSV tables.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::json;

use super::config::{ExperimentConfig, ExperimentKind};
use crate::cone::{lipschitz_threshold, theta_pd};
use crate::engine::jump_log_csv;
use crate::error::{Error, Result};
use crate::experiments::{
    default_target, excursion_tail_experiment, extinction_experiment, harnack_experiment, polyhedral_experiment,
    qsd_experiment, qsd_n_comparison, Criterion, ExtinctionConfig, PolyhedralConfig, QsdConfig, TailConfig,
};
use crate::geometry::{l_shape, Domain, Shape};
use crate::stochastic::PathConfig;

/// Exit status for a run whose criteria all passed.
pub const EXIT_PASS: i32 = 0;
/// Exit status when at least one criterion failed.
pub const EXIT_FAIL: i32 = 1;
/// Exit status for configuration or runtime errors.
pub const EXIT_ERROR: i32 = 2;

/// Everything a run produces, before anything touches the filesystem.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub criteria: Vec<Criterion>,
    pub summary: serde_json::Value,
    /// `(file name, contents)` of the CSV tables.
    pub tables: Vec<(String, String)>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

fn finish(cfg: &ExperimentConfig, criteria: Vec<Criterion>, report: impl Serialize, tables: Vec<(String, String)>) -> Result<Outcome> {
    let pass = criteria.iter().all(|c| c.pass);
    let summary = json!({
        "experiment": cfg.experiment.name(),
        "seed": cfg.seed,
        "pass": pass,
        "criteria": criteria,
        "config": cfg,
        "report": serde_json::to_value(report).map_err(|e| Error::Io(e.to_string()))?,
    });
    Ok(Outcome { criteria, summary, tables })
}

fn seed(cfg: &ExperimentConfig) -> Result<u64> {
    cfg.seed.ok_or_else(|| Error::config("seed", "missing"))
}

/// Query points used when the config lists none: 19 points across the
/// middle of a bounded domain, or radii 0.4, 0.2, 0.1 along a wedge axis.
pub fn default_query_points(domain: &Domain) -> Result<Vec<Vec<f64>>> {
    if let Shape::Wedge2D { vertex, axis, .. } = domain.shape() {
        let n = axis[0].hypot(axis[1]);
        return Ok([0.4, 0.2, 0.1].iter().map(|r| vec![vertex[0] + r * axis[0] / n, vertex[1] + r * axis[1] / n]).collect());
    }
    let (lo, hi) = domain.bounding_box().ok_or(Error::UnsupportedDomain("default query points"))?;
    let center = domain.reference_point();
    let mut points = Vec::new();
    for k in 1..20 {
        let mut x = center.clone();
        x[0] = lo[0] + (hi[0] - lo[0]) * 0.05 * k as f64;
        if domain.contains(&x)? {
            points.push(x);
        }
    }
    Ok(points)
}

fn harnack_target(domain: &Domain) -> Result<Domain> {
    match domain.shape() {
        Shape::Wedge2D { vertex, axis, half_angle } => {
            let n = axis[0].hypot(axis[1]);
            let r = 0.75 * half_angle.min(PI / 2.0).sin();
            Domain::ball(vec![vertex[0] + axis[0] / n, vertex[1] + axis[1] / n], r)
        }
        _ => default_target(domain),
    }
}

fn cone_math(cfg: &ExperimentConfig) -> Result<Outcome> {
    let ds = if cfg.d.is_empty() { vec![2] } else { cfg.d.clone() };
    let ps = if cfg.p.is_empty() && cfg.n_values.is_empty() { vec![2.0] } else { cfg.p.clone() };
    let mut csv = String::from("p,d,theta,threshold\n");
    let mut rows = Vec::new();
    for &d in &ds {
        for &p in &ps {
            let theta = theta_pd(p, d)?;
            let threshold = (1.0 / theta.tan()).max(0.0);
            rows.push((p, d, theta, threshold));
        }
        for &n in &cfg.n_values {
            let p = 2.0 - 2.0 / n as f64;
            rows.push((p, d, theta_pd(p, d)?, lipschitz_threshold(n, d)?));
        }
    }
    for (p, d, theta, threshold) in &rows {
        let _ = writeln!(csv, "{p},{d},{theta},{threshold}");
    }
    let mut criteria = Vec::new();
    let planar: Vec<f64> = rows.iter().filter(|r| r.1 == 2).map(|r| (r.2 - PI / (2.0 * r.0)).abs()).collect();
    if !planar.is_empty() {
        let err = planar.iter().copied().fold(0.0, f64::max);
        criteria.push(Criterion::new("theta_planar_closed_form", err, "max |theta - pi/(2p)| <= 1e-8", err <= 1e-8));
    }
    let quadratic: Vec<f64> = rows
        .iter()
        .filter(|r| r.0 == 2.0)
        .map(|r| (r.2 - (1.0 / (r.1 as f64).sqrt()).acos()).abs())
        .collect();
    if !quadratic.is_empty() {
        let err = quadratic.iter().copied().fold(0.0, f64::max);
        criteria.push(Criterion::new("theta_p2_closed_form", err, "max |theta - acos(1/sqrt d)| <= 1e-10", err <= 1e-10));
    }
    let report: Vec<_> = rows.iter().map(|(p, d, theta, t)| json!({"p": p, "d": d, "theta": theta, "threshold": t})).collect();
    finish(cfg, criteria, report, vec![("cone_math.csv".into(), csv)])
}

/// Runs the experiment without writing anything.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    if cfg.experiment == ExperimentKind::ConeMath {
        return cone_math(cfg);
    }
    let seed = seed(cfg)?;
    let path = PathConfig::new(cfg.dt, cfg.horizon)?;
    match cfg.experiment {
        ExperimentKind::ConeMath => unreachable!(),
        ExperimentKind::Qsd => {
            let domain = cfg.domain.clone().unwrap_or(Domain::interval(0.0, 1.0)?);
            let mut qc = QsdConfig::new(&domain, cfg.n, cfg.burn_in);
            qc.observe_every = cfg.observe_every;
            if let Some(b) = cfg.bins {
                qc.bins_per_axis = b;
            }
            let report = qsd_experiment(&domain, &qc, &path, seed)?;
            let mut criteria = report.criteria();
            let mut tables = vec![("histogram.csv".to_string(), report.to_csv())];
            let comparison = match cfg.n_small {
                Some(small) => {
                    let c = qsd_n_comparison(&domain, &qc, small, cfg.n, cfg.pairs, &path, seed)?;
                    criteria.extend(c.criteria());
                    tables.push(("n_comparison.csv".into(), c.to_csv()));
                    Some(c)
                }
                None => None,
            };
            finish(cfg, criteria, json!({"estimate": report, "comparison": comparison}), tables)
        }
        ExperimentKind::Harnack => {
            let domain = cfg.domain.clone().unwrap_or(Domain::interval(0.0, 1.0)?);
            let target = match &cfg.target {
                Some(t) => t.clone(),
                None => harnack_target(&domain)?,
            };
            let points = match &cfg.query_points {
                Some(q) => q.clone(),
                None => default_query_points(&domain)?,
            };
            let report = harnack_experiment(&domain, &target, &points, cfg.n_paths, &path, seed)?;
            finish(cfg, report.criteria(), &report, vec![("harnack.csv".into(), report.to_csv())])
        }
        ExperimentKind::Excursion => {
            let domain = cfg.domain.clone().unwrap_or(Domain::half_plane());
            let eps = cfg.epsilon.unwrap_or(10.0 * cfg.dt.sqrt());
            let report = excursion_tail_experiment(&domain, &TailConfig::new(eps, cfg.n_paths), &path, seed)?;
            finish(cfg, report.criteria(), &report, vec![("survival.csv".into(), report.to_csv())])
        }
        ExperimentKind::Extinction => {
            let mut ec = ExtinctionConfig::new(cfg.n_reps, cfg.dt);
            if let Some(c) = cfg.n_chains {
                ec.n_chains = c.min(cfg.n_reps);
            }
            ec.chain_length = cfg.chain_length;
            let report = extinction_experiment(&ec, seed)?;
            finish(cfg, report.criteria(), &report, vec![("replicas.csv".into(), report.to_csv())])
        }
        ExperimentKind::Polyhedral => {
            let domain = cfg.domain.clone().unwrap_or_else(l_shape);
            let pc = PolyhedralConfig { n_reps: cfg.n_reps, resolution: cfg.resolution };
            let report = polyhedral_experiment(&domain, &path, &pc, seed)?;
            let tables = vec![
                ("replicas.csv".into(), report.to_csv()),
                ("jumps.csv".into(), jump_log_csv(&report.first_log, domain.dim())),
            ];
            finish(cfg, report.criteria(), &report, tables)
        }
    }
}

/// Writes `summary.json` and the tables into the configured directory.
pub fn write_outputs(cfg: &ExperimentConfig, outcome: &Outcome) -> Result<()> {
    std::fs::create_dir_all(&cfg.out)?;
    let summary = serde_json::to_string_pretty(&outcome.summary).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(cfg.out.join("summary.json"), summary + "\n")?;
    for (name, contents) in &outcome.tables {
        std::fs::write(cfg.out.join(name), contents)?;
    }
    Ok(())
}

/// Runs on a pool of `cfg.threads` workers (all cores by default).
pub fn run_with_threads(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(|| run(cfg)),
        None => run(cfg),
    }
}

/// Runs, writes outputs and maps the result to an exit status.
pub fn dispatch(cfg: &ExperimentConfig) -> i32 {
    match run_with_threads(cfg).and_then(|o| write_outputs(cfg, &o).map(|()| o)) {
        Ok(o) if o.pass() => EXIT_PASS,
        Ok(_) => EXIT_FAIL,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
