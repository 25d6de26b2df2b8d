//! The finite-extinction counterexample: two particles driven by
//! `dX = dW - 5/(2X) dt` on `(0, inf)`, jumping onto each other at zero.
//!
//! By Brownian scaling the whole jump sequence follows from i.i.d. copies of
//! `(sigma, alpha)`, the first absorption time and the survivor's position
//! for the pair started at `(1, 1)`:
//! `tau_{i+1} = tau_i + xi_i^2 sigma_{i+1}`, `xi_{i+1} = alpha_{i+1} xi_i`.

use serde::Serialize;

use super::stats::{mean_se, ols, replicate, Estimate};
use super::{classify_collapse, tag, CollapseFit, Criterion};
use crate::error::{Error, Result};
use crate::stochastic::{absorption_floor, repulsive_move, repulsive_substep, RngStream};

/// Least fraction of chains the classifier must call collapsing.
pub const MIN_COLLAPSING: f64 = 0.95;

/// Accepted gap between the fitted increment ratio and `E[alpha^2]`.
pub const RATIO_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtinctionConfig {
    /// Independent pairs for the moment estimates.
    pub n_reps: usize,
    /// Time step of the SDE integrator.
    pub dt: f64,
    /// Replicas extended to full jump chains for the collapse classifier.
    pub n_chains: usize,
    pub chain_length: usize,
    /// Jumps per replica used for the aggregate increment-ratio fit.
    pub ratio_depth: usize,
}

impl ExtinctionConfig {
    pub fn new(n_reps: usize, dt: f64) -> Self {
        Self { n_reps, dt, n_chains: 1000.min(n_reps), chain_length: 300, ratio_depth: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtinctionReport {
    pub n_reps: usize,
    pub sigma: Estimate,
    pub alpha2: Estimate,
    pub alpha4: Estimate,
    /// `E[sigma] / (1 - E[alpha^2])`, infinite when `E[alpha^2] >= 1`.
    pub tau_infinity_bound: f64,
    /// `exp` of the slope of `log mean(tau_{i+1} - tau_i)` against `i`.
    pub increment_ratio: f64,
    pub collapsing_fraction: f64,
    #[serde(skip)]
    pub pairs: Vec<(f64, f64)>,
    #[serde(skip)]
    pub chains: Vec<CollapseFit>,
}

impl ExtinctionReport {
    pub fn criteria(&self) -> Vec<Criterion> {
        let (s, a2, a4) = (self.sigma, self.alpha2, self.alpha4);
        vec![
            Criterion::new("sigma_mean", s.mean, "E[sigma] <= 0.25 + 3 SE", s.mean <= 0.25 + 3.0 * s.se),
            Criterion::new("alpha4_mean", a4.mean, "E[alpha^4] <= 1 + 3 SE", a4.mean <= 1.0 + 3.0 * a4.se),
            Criterion::new("alpha2_mean", a2.mean, "E[alpha^2] <= 1 - 3 SE", a2.mean <= 1.0 - 3.0 * a2.se),
            Criterion::new(
                "collapsing_fraction",
                self.collapsing_fraction,
                format!(">= {MIN_COLLAPSING}"),
                self.collapsing_fraction >= MIN_COLLAPSING,
            ),
            Criterion::new(
                "increment_ratio",
                self.increment_ratio,
                format!("|ratio - E[alpha^2]| <= {RATIO_TOLERANCE}"),
                (self.increment_ratio - a2.mean).abs() <= RATIO_TOLERANCE,
            ),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("replica,sigma,alpha,chain_slope,collapsing\n");
        for (i, (sigma, alpha)) in self.pairs.iter().enumerate() {
            match self.chains.get(i) {
                Some(c) => s.push_str(&format!("{i},{sigma},{alpha},{},{}\n", c.slope, c.collapsing)),
                None => s.push_str(&format!("{i},{sigma},{alpha},,\n")),
            }
        }
        s
    }
}

/// First absorption time of the pair started at `(1, 1)` and the survivor's
/// position then. Both particles share each sub-step, which shrinks as
/// either nears zero.
pub fn sample_pair(dt: f64, rng: &mut RngStream) -> Result<(f64, f64)> {
    if !(dt > 0.0) {
        return Err(Error::OutOfRange(format!("dt must be positive, got {dt}")));
    }
    let floor = absorption_floor(dt);
    let mut x = [1.0f64, 1.0];
    let mut t = 0.0;
    loop {
        let h = repulsive_substep(x[0], dt).min(repulsive_substep(x[1], dt));
        let (z0, z1) = (rng.normal(), rng.normal());
        match (repulsive_move(x[0], h, z0, floor), repulsive_move(x[1], h, z1, floor)) {
            (Ok(a), Ok(b)) => {
                x = [a, b];
                t += h;
            }
            (Err(f), Ok(b)) => return Ok((t + f * h, b)),
            (Ok(a), Err(f)) => return Ok((t + f * h, a)),
            (Err(f0), Err(f1)) => {
                // both reach zero within one sub-step: the earlier one dies
                return Ok(if f0 <= f1 { (t + f0 * h, x[1]) } else { (t + f1 * h, x[0]) });
            }
        }
    }
}

/// `log(tau_{i+1} - tau_i)` for the first `len` jumps, given the first pair
/// and a stream for the rest.
fn log_increments(first: (f64, f64), len: usize, dt: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(len);
    let mut log_xi2 = 0.0;
    let mut pair = first;
    for i in 0..len {
        if i > 0 {
            pair = sample_pair(dt, rng)?;
        }
        out.push(log_xi2 + pair.0.ln());
        log_xi2 += 2.0 * pair.1.ln();
    }
    Ok(out)
}

pub fn extinction_experiment(cfg: &ExtinctionConfig, seed: u64) -> Result<ExtinctionReport> {
    if cfg.n_reps < 2 || cfg.ratio_depth < 2 || cfg.n_chains > cfg.n_reps {
        return Err(Error::OutOfRange("need n_reps >= 2, ratio_depth >= 2 and n_chains <= n_reps".into()));
    }
    let per_replica = replicate(cfg.n_reps, |r| {
        let first = sample_pair(cfg.dt, &mut RngStream::for_replica(seed, tag::EXTINCTION, r as u64))?;
        let len = if r < cfg.n_chains { cfg.chain_length.max(cfg.ratio_depth) } else { cfg.ratio_depth };
        let logs = log_increments(first, len, cfg.dt, &mut RngStream::for_replica(seed, tag::CHAIN, r as u64))?;
        let fit = if r < cfg.n_chains { classify_collapse(&logs[..cfg.chain_length.min(logs.len())]) } else { None };
        Ok((first, logs[..cfg.ratio_depth].to_vec(), fit))
    })?;
    let pairs: Vec<(f64, f64)> = per_replica.iter().map(|r| r.0).collect();
    let sigma = mean_se(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let alpha2 = mean_se(&pairs.iter().map(|p| p.1 * p.1).collect::<Vec<_>>());
    let alpha4 = mean_se(&pairs.iter().map(|p| p.1.powi(4)).collect::<Vec<_>>());
    let n = cfg.n_reps as f64;
    let depth: Vec<f64> = (0..cfg.ratio_depth).map(|i| i as f64).collect();
    let log_means: Vec<f64> =
        (0..cfg.ratio_depth).map(|i| (per_replica.iter().map(|r| r.1[i].exp()).sum::<f64>() / n).ln()).collect();
    let increment_ratio = ols(&depth, &log_means).slope.exp();
    let chains: Vec<CollapseFit> = per_replica.iter().filter_map(|r| r.2).collect();
    let collapsing_fraction = if chains.is_empty() {
        f64::NAN
    } else {
        chains.iter().filter(|c| c.collapsing).count() as f64 / chains.len() as f64
    };
    let tau_infinity_bound = if alpha2.mean < 1.0 { sigma.mean / (1.0 - alpha2.mean) } else { f64::INFINITY };
    Ok(ExtinctionReport {
        n_reps: cfg.n_reps,
        sigma,
        alpha2,
        alpha4,
        tau_infinity_bound,
        increment_ratio,
        collapsing_fraction,
        pairs,
        chains,
    })
}
