//! Time-averaged Fleming-Viot empirical measure against the normalized
//! first Dirichlet eigenfunction.

use serde::Serialize;

use super::stats::replicate;
use super::{tag, Criterion};
use crate::engine::{eigenfunction_reference, qsd_estimate, BinGrid, Histogram, DEFAULT_OBSERVE_EVERY};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::stochastic::{PathConfig, RngStream};

/// Least fraction of matched seed pairs on which the larger population must
/// be closer to the eigenfunction.
pub const MIN_WIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QsdConfig {
    pub n: usize,
    pub burn_in: f64,
    pub bins_per_axis: usize,
    pub observe_every: f64,
    /// Largest accepted L1 distance to the reference.
    pub l1_max: f64,
}

impl QsdConfig {
    /// Defaults: 50 bins and tolerance 0.08 in one dimension, 10 bins per
    /// axis and tolerance 0.15 otherwise.
    pub fn new(domain: &Domain, n: usize, burn_in: f64) -> Self {
        let (bins_per_axis, l1_max) = if domain.dim() == 1 { (50, 0.08) } else { (10, 0.15) };
        Self { n, burn_in, bins_per_axis, observe_every: DEFAULT_OBSERVE_EVERY, l1_max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QsdReport {
    pub n: usize,
    pub l1: f64,
    pub l1_max: f64,
    #[serde(skip)]
    pub histogram: Histogram,
    #[serde(skip)]
    pub reference: Vec<f64>,
}

impl QsdReport {
    pub fn criteria(&self) -> Vec<Criterion> {
        vec![Criterion::new("l1_to_eigenfunction", self.l1, format!("< {}", self.l1_max), self.l1 < self.l1_max)]
    }

    /// Histogram CSV with the bin-averaged reference mass appended.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (i, line) in self.histogram.to_csv().lines().enumerate() {
            out.push_str(line);
            if i == 0 {
                out.push_str(",reference\n");
            } else {
                out.push_str(&format!(",{}\n", self.reference[i - 1]));
            }
        }
        out
    }
}

fn estimate(domain: &Domain, qc: &QsdConfig, n: usize, cfg: &PathConfig, rng: &mut RngStream) -> Result<QsdReport> {
    let reference_fn = eigenfunction_reference(domain)?;
    let grid = BinGrid::cover(domain, qc.bins_per_axis)?;
    let histogram = qsd_estimate(domain, n, cfg, qc.burn_in, &grid, qc.observe_every, rng)?;
    let reference = reference_fn.bin_masses(&grid);
    let l1 = histogram.l1_distance(&reference);
    Ok(QsdReport { n, l1, l1_max: qc.l1_max, histogram, reference })
}

pub fn qsd_experiment(domain: &Domain, qc: &QsdConfig, cfg: &PathConfig, seed: u64) -> Result<QsdReport> {
    estimate(domain, qc, qc.n, cfg, &mut RngStream::for_replica(seed, tag::QSD, 0))
}

/// L1 distances for a small and a large population on matched streams.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NComparison {
    pub n_small: usize,
    pub n_large: usize,
    pub l1_small: Vec<f64>,
    pub l1_large: Vec<f64>,
    /// Pairs on which the large population is closer.
    pub wins: usize,
}

impl NComparison {
    pub fn criteria(&self) -> Vec<Criterion> {
        let pairs = self.l1_small.len();
        let need = (MIN_WIN_FRACTION * pairs as f64).ceil() as usize;
        vec![Criterion::new(
            "larger_n_closer",
            self.wins as f64,
            format!(">= {need} of {pairs} pairs"),
            self.wins >= need,
        )]
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("pair,l1_n{},l1_n{}\n", self.n_small, self.n_large);
        for (i, (a, b)) in self.l1_small.iter().zip(&self.l1_large).enumerate() {
            s.push_str(&format!("{i},{a},{b}\n"));
        }
        s
    }
}

/// Runs `pairs` seed-matched estimates at populations `n_small` and
/// `n_large`; pair `j` uses the same stream for both sizes.
pub fn qsd_n_comparison(
    domain: &Domain,
    qc: &QsdConfig,
    n_small: usize,
    n_large: usize,
    pairs: usize,
    cfg: &PathConfig,
    seed: u64,
) -> Result<NComparison> {
    if pairs == 0 {
        return Err(Error::OutOfRange("need at least one seed pair".into()));
    }
    let l1 = replicate(2 * pairs, |k| {
        let n = if k % 2 == 0 { n_small } else { n_large };
        let mut rng = RngStream::for_replica(seed, tag::QSD, 1 + (k / 2) as u64);
        Ok(estimate(domain, qc, n, cfg, &mut rng)?.l1)
    })?;
    let l1_small: Vec<f64> = l1.iter().step_by(2).copied().collect();
    let l1_large: Vec<f64> = l1.iter().skip(1).step_by(2).copied().collect();
    let wins = l1_small.iter().zip(&l1_large).filter(|(s, l)| l < s).count();
    Ok(NComparison { n_small, n_large, l1_small, l1_large, wins })
}
