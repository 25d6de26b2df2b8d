//! Survival tail of the exit time from a cone started near its vertex.

use serde::Serialize;

use super::stats::{log_grid, mean_se, ols, replicate};
use super::{tag, Criterion};
use crate::cone::invert_theta;
use crate::error::{Error, Result};
use crate::geometry::{Domain, Shape};
use crate::stochastic::{sample_exit_time, PathConfig, RngStream};

/// Largest censored fraction for which a tail fit is still reported.
pub const DEFAULT_CENSOR_CAP: f64 = 0.5;

/// Accepted deviation of the fitted exponent, relative to `p/2`.
pub const RELATIVE_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailConfig {
    /// Start offset from the vertex along the axis.
    pub epsilon: f64,
    pub n_paths: usize,
    pub censor_cap: f64,
    /// Log-spaced survival evaluation points in the fit window.
    pub fit_points: usize,
    /// Batches for the batch-means standard error.
    pub batches: usize,
}

impl TailConfig {
    pub fn new(epsilon: f64, n_paths: usize) -> Self {
        Self { epsilon, n_paths, censor_cap: DEFAULT_CENSOR_CAP, fit_points: 20, batches: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    /// Homogeneity index of the cone and the predicted exponent `-p/2`.
    pub p: f64,
    pub predicted: f64,
    pub exponent: f64,
    pub se: f64,
    pub fit_range: (f64, f64),
    pub censored_fraction: f64,
    /// Survival curve on the fit grid: `(t, S(t))`.
    pub survival: Vec<(f64, f64)>,
}

impl TailReport {
    pub fn criteria(&self) -> Vec<Criterion> {
        let tol = RELATIVE_TOLERANCE * self.predicted.abs();
        vec![Criterion::new(
            "tail_exponent",
            self.exponent,
            format!("|exponent - ({:.4})| <= {tol:.4}", self.predicted),
            (self.exponent - self.predicted).abs() <= tol,
        )]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,survival\n");
        for (t, v) in &self.survival {
            s.push_str(&format!("{t},{v}\n"));
        }
        s
    }
}

/// Vertex, unit axis and homogeneity index of a wedge or cone.
fn cone_geometry(domain: &Domain) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    match domain.shape() {
        Shape::Wedge2D { vertex, axis, half_angle } => {
            let n = axis[0].hypot(axis[1]);
            Ok((vertex.to_vec(), vec![axis[0] / n, axis[1] / n], invert_theta(*half_angle, 2)?))
        }
        Shape::Cone(spec) => {
            let mut axis = vec![0.0; spec.d];
            axis[spec.d - 1] = 1.0;
            Ok((vec![0.0; spec.d], axis, spec.p))
        }
        _ => Err(Error::UnsupportedDomain("excursion tail (needs a wedge or cone)")),
    }
}

fn survival_slope(times: &[f64], grid: &[f64]) -> Option<(f64, Vec<f64>)> {
    let n = times.len() as f64;
    let surv: Vec<f64> = grid.iter().map(|t| times.iter().filter(|&&x| x > *t).count() as f64 / n).collect();
    if surv.iter().any(|&s| s <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = grid.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = surv.iter().map(|s| s.ln()).collect();
    Some((ols(&lx, &ly).slope, surv))
}

/// Exit times from the point at distance `epsilon` along the axis, with the
/// log-log survival slope fitted on `[4 eps^2, horizon / 10]`.
pub fn excursion_tail_experiment(domain: &Domain, tail: &TailConfig, cfg: &PathConfig, seed: u64) -> Result<TailReport> {
    let (vertex, axis, p) = cone_geometry(domain)?;
    let eps = tail.epsilon;
    let window = (4.0 * eps * eps, cfg.horizon / 10.0);
    if !(eps > 0.0) || window.0 >= window.1 {
        return Err(Error::OutOfRange(format!(
            "fit window [4 eps^2, horizon/10] = [{}, {}] is empty",
            window.0, window.1
        )));
    }
    if tail.fit_points < 2 || tail.batches < 2 || tail.n_paths < tail.batches {
        return Err(Error::OutOfRange("need at least 2 fit points, 2 batches and one path per batch".into()));
    }
    let x0: Vec<f64> = vertex.iter().zip(&axis).map(|(v, a)| v + eps * a).collect();
    let samples = replicate(tail.n_paths, |k| {
        let mut rng = RngStream::for_replica(seed, tag::EXCURSION, k as u64);
        sample_exit_time(domain, &x0, cfg, &mut rng)
    })?;
    let censored = samples.iter().filter(|s| s.censored).count() as f64 / tail.n_paths as f64;
    if censored > tail.censor_cap {
        return Err(Error::InvalidFit { fraction: censored, cap: tail.censor_cap });
    }
    let times: Vec<f64> = samples.iter().map(|s| s.time).collect();
    let grid = log_grid(window.0, window.1, tail.fit_points);
    let no_fit = || Error::InvalidFit { fraction: censored, cap: tail.censor_cap };
    let (exponent, surv) = survival_slope(&times, &grid).ok_or_else(no_fit)?;
    let size = tail.n_paths / tail.batches;
    let mut batch_slopes = Vec::with_capacity(tail.batches);
    for b in 0..tail.batches {
        batch_slopes.push(survival_slope(&times[b * size..(b + 1) * size], &grid).ok_or_else(no_fit)?.0);
    }
    Ok(TailReport {
        p,
        predicted: -p / 2.0,
        exponent,
        se: mean_se(&batch_slopes).se,
        fit_range: window,
        censored_fraction: censored,
        survival: grid.into_iter().zip(surv).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn erf_oracle_slope(eps: f64, grid: &[f64]) -> f64 {
        // Half-plane from height eps: S(t) = erf(eps / sqrt(2t)).
        let lx: Vec<f64> = grid.iter().map(|t| t.ln()).collect();
        let ly: Vec<f64> = grid.iter().map(|t| statrs::function::erf::erf(eps / (2.0 * t).sqrt()).ln()).collect();
        ols(&lx, &ly).slope
    }

    #[test]
    fn half_plane_matches_reflection_oracle() {
        let cfg = PathConfig::new(0.01, 400.0).unwrap();
        let r = excursion_tail_experiment(&Domain::half_plane(), &TailConfig::new(1.0, 4000), &cfg, 3).unwrap();
        assert!((r.p - 1.0).abs() < 1e-9);
        let grid: Vec<f64> = r.survival.iter().map(|s| s.0).collect();
        let oracle = erf_oracle_slope(1.0, &grid);
        assert!((r.exponent - oracle).abs() < 4.0 * r.se + 0.01, "{} vs {oracle} (se {})", r.exponent, r.se);
        assert!(r.survival.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn censoring_cap_is_enforced() {
        // Half-plane from height 0.2: about 8% of paths survive to t = 4.
        let cfg = PathConfig::new(1e-3, 4.0).unwrap();
        let mut tail = TailConfig::new(0.2, 200);
        tail.censor_cap = 0.0;
        assert!(matches!(excursion_tail_experiment(&Domain::half_plane(), &tail, &cfg, 1), Err(Error::InvalidFit { .. })));
        let wedge = Domain::wedge([0.0, 0.0], [0.0, 1.0], PI / 4.0).unwrap();
        let r = excursion_tail_experiment(&wedge, &TailConfig::new(0.2, 2000), &cfg, 1).unwrap();
        assert!((r.p - 2.0).abs() < 1e-8);
    }

    #[test]
    fn bounded_domain_is_rejected() {
        let cfg = PathConfig::new(0.01, 100.0).unwrap();
        let d = Domain::interval(0.0, 1.0).unwrap();
        assert!(matches!(
            excursion_tail_experiment(&d, &TailConfig::new(0.1, 10), &cfg, 1),
            Err(Error::UnsupportedDomain(_))
        ));
    }
}
