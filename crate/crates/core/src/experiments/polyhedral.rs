//! Two-particle runs in polygons: inter-jump times should stay stationary
//! and jump counts grow linearly, in contrast with the counterexample.

use serde::Serialize;

use super::stats::replicate;
use super::{classify_collapse, tag, CollapseFit, Criterion};
use crate::engine::{fv_step_with, FvState, JumpRecord, Resolution};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::stochastic::{PathConfig, RngStream};

/// Accepted relative deviation of `J(T) / J(T/2)` from 2.
pub const GROWTH_TOLERANCE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyhedralConfig {
    pub n_reps: usize,
    pub resolution: Resolution,
}

impl PolyhedralConfig {
    pub fn new(n_reps: usize) -> Self {
        Self { n_reps, resolution: Resolution::Sequential }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaSummary {
    pub jumps: u64,
    /// Jumps in the first half of the horizon.
    pub jumps_half: u64,
    pub min_gap: f64,
    pub collapse: Option<CollapseFit>,
    pub coincidences: u64,
    /// Mean and max over inter-jump intervals of `max |X_t - xi_i|`.
    pub mean_v: f64,
    pub max_v: f64,
    /// Time of a simultaneous extinction that ended the run early.
    pub extinct_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyhedralReport {
    pub n_reps: usize,
    pub horizon: f64,
    pub resolution: Resolution,
    pub collapsing: usize,
    /// Total `J(T)` over total `J(T/2)` across completed replicas.
    pub growth_ratio: f64,
    pub mean_jumps: f64,
    pub min_gap: f64,
    pub extinctions: usize,
    pub extinction_frequency: f64,
    /// Coincident steps per unit of simulated time.
    pub coincidence_rate: f64,
    pub replicas: Vec<ReplicaSummary>,
    #[serde(skip)]
    pub first_log: Vec<JumpRecord>,
}

impl PolyhedralReport {
    pub fn criteria(&self) -> Vec<Criterion> {
        vec![
            Criterion::new("collapsing_replicas", self.collapsing as f64, "== 0", self.collapsing == 0),
            Criterion::new(
                "jump_growth_ratio",
                self.growth_ratio,
                format!("|ratio / 2 - 1| <= {GROWTH_TOLERANCE}"),
                (self.growth_ratio / 2.0 - 1.0).abs() <= GROWTH_TOLERANCE,
            ),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("replica,jumps,jumps_half,min_gap,slope,collapsing,coincidences,mean_v,max_v,extinct_at\n");
        for (i, r) in self.replicas.iter().enumerate() {
            let (slope, coll) = r.collapse.map_or((String::new(), String::new()), |c| (c.slope.to_string(), c.collapsing.to_string()));
            let ext = r.extinct_at.map_or(String::new(), |t| t.to_string());
            s.push_str(&format!(
                "{i},{},{},{},{slope},{coll},{},{},{},{ext}\n",
                r.jumps, r.jumps_half, r.min_gap, r.coincidences, r.mean_v, r.max_v
            ));
        }
        s
    }
}

fn run_replica(domain: &Domain, cfg: &PathConfig, pc: &PolyhedralConfig, rng: &mut RngStream) -> Result<(ReplicaSummary, Vec<JumpRecord>)> {
    let mut state = FvState::replicated(domain, &domain.reference_point(), 2)?;
    let steps = cfg.steps();
    let half = steps / 2;
    let mut jumps_half = 0;
    let mut log: Vec<JumpRecord> = Vec::new();
    let mut v_values = Vec::new();
    let mut v_cur: Option<(Vec<f64>, f64)> = None;
    let mut extinct_at = None;
    for s in 1..=steps {
        match fv_step_with(&mut state, domain, cfg.dt, pc.resolution, rng) {
            Ok(jumps) => {
                if let Some(last) = jumps.last() {
                    if let Some((_, v)) = v_cur.take() {
                        v_values.push(v);
                    }
                    v_cur = Some((last.xi.clone(), 0.0));
                }
                log.extend(jumps);
                if let Some((xi, v)) = v_cur.as_mut() {
                    for i in 0..state.n() {
                        let dist = state.position(i).iter().zip(xi.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                        *v = v.max(dist);
                    }
                }
            }
            Err(Error::SimultaneousExtinction { t, .. }) => {
                extinct_at = Some(t);
                break;
            }
            Err(e) => return Err(e),
        }
        if s == half {
            jumps_half = state.jump_count();
        }
    }
    let logs: Vec<f64> = log.windows(2).map(|w| (w[1].tau - w[0].tau).ln()).collect();
    let min_gap = log.windows(2).map(|w| w[1].tau - w[0].tau).fold(f64::INFINITY, f64::min);
    let n_v = v_values.len().max(1) as f64;
    let summary = ReplicaSummary {
        jumps: state.jump_count(),
        jumps_half,
        min_gap,
        collapse: classify_collapse(&logs),
        coincidences: state.coincidences(),
        mean_v: v_values.iter().sum::<f64>() / n_v,
        max_v: v_values.iter().copied().fold(0.0, f64::max),
        extinct_at,
    };
    Ok((summary, log))
}

/// Runs `n_reps` independent two-particle systems from the domain's
/// reference point up to the horizon.
pub fn polyhedral_experiment(domain: &Domain, cfg: &PathConfig, pc: &PolyhedralConfig, seed: u64) -> Result<PolyhedralReport> {
    if pc.n_reps == 0 {
        return Err(Error::OutOfRange("need at least one replica".into()));
    }
    domain.bounding_box().ok_or(Error::UnsupportedDomain("polyhedral runs (needs a bounded domain)"))?;
    let mut runs = replicate(pc.n_reps, |r| {
        let mut rng = RngStream::for_replica(seed, tag::POLYHEDRAL, r as u64);
        let (summary, log) = run_replica(domain, cfg, pc, &mut rng)?;
        Ok((summary, if r == 0 { log } else { Vec::new() }))
    })?;
    let first_log = std::mem::take(&mut runs[0].1);
    let replicas: Vec<ReplicaSummary> = runs.into_iter().map(|r| r.0).collect();
    let completed: Vec<&ReplicaSummary> = replicas.iter().filter(|r| r.extinct_at.is_none()).collect();
    let full: u64 = completed.iter().map(|r| r.jumps).sum();
    let halves: u64 = completed.iter().map(|r| r.jumps_half).sum();
    let extinctions = replicas.len() - completed.len();
    let simulated: f64 = replicas.iter().map(|r| r.extinct_at.unwrap_or(cfg.horizon)).sum();
    Ok(PolyhedralReport {
        n_reps: pc.n_reps,
        horizon: cfg.horizon,
        resolution: pc.resolution,
        collapsing: replicas.iter().filter(|r| r.collapse.is_some_and(|c| c.collapsing)).count(),
        growth_ratio: if halves > 0 { full as f64 / halves as f64 } else { f64::NAN },
        mean_jumps: replicas.iter().map(|r| r.jumps as f64).sum::<f64>() / replicas.len() as f64,
        min_gap: replicas.iter().map(|r| r.min_gap).fold(f64::INFINITY, f64::min),
        extinctions,
        extinction_frequency: extinctions as f64 / replicas.len() as f64,
        coincidence_rate: replicas.iter().map(|r| r.coincidences as f64).sum::<f64>() / simulated,
        replicas,
        first_log,
    })
}
