//! Boundary Harnack comparison of the hitting probability of an interior set
//! with the mean exit time.

use serde::Serialize;

use super::stats::{mean_se, ols, Estimate, LineFit};
use super::{tag, Criterion};
use crate::cone::invert_theta;
use crate::error::{Error, Result};
use crate::geometry::{Domain, Shape};
use crate::stochastic::{sample_hit_then_exit, PathConfig, RngStream};

/// Largest spread of the ratio across interior points still accepted as
/// comparable.
pub const MAX_RATIO_SPAN: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackPoint {
    pub x: Vec<f64>,
    /// Probability of reaching the target before the boundary.
    pub f: Estimate,
    /// Mean exit time, with censored paths counted at the horizon.
    pub g: Estimate,
    pub ratio: f64,
    pub ratio_se: f64,
    pub censored_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackReport {
    pub n_paths: usize,
    pub points: Vec<HarnackPoint>,
    /// Largest over smallest ratio; infinite when some point never hit.
    pub ratio_span: f64,
    /// For wedges: fit of `log(f/g)` against `log |x - vertex|`, and the
    /// slope `p - 2` that sharpness predicts.
    pub radial_fit: Option<LineFit>,
    pub predicted_slope: Option<f64>,
}

impl HarnackReport {
    /// Comparability for bounded domains, radial sharpness for wedges.
    pub fn criteria(&self) -> Vec<Criterion> {
        let mut out = Vec::new();
        match (self.radial_fit, self.predicted_slope) {
            (Some(fit), Some(p)) => out.push(Criterion::new(
                "wedge_ratio_slope",
                fit.slope,
                format!("|slope - {p:.3}| <= 1"),
                (fit.slope - p).abs() <= 1.0,
            )),
            _ => out.push(Criterion::new(
                "ratio_span",
                self.ratio_span,
                format!("span < {MAX_RATIO_SPAN}"),
                self.ratio_span < MAX_RATIO_SPAN,
            )),
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let d = self.points.first().map_or(0, |p| p.x.len());
        let mut s: String = (0..d).map(|k| format!("x_{k},")).collect();
        s.push_str("f,f_se,g,g_se,ratio,ratio_se,censored_fraction\n");
        for p in &self.points {
            for v in &p.x {
                s.push_str(&format!("{v},"));
            }
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                p.f.mean, p.f.se, p.g.mean, p.g.se, p.ratio, p.ratio_se, p.censored_fraction
            ));
        }
        s
    }
}

/// A centered ball (or interval/box) of diameter `diam(D) / 4`.
pub fn default_target(domain: &Domain) -> Result<Domain> {
    let diam = domain.diameter().ok_or(Error::UnsupportedDomain("default target of an unbounded domain"))?;
    let c = domain.reference_point();
    match domain.shape() {
        Shape::Interval { .. } => Domain::interval(c[0] - diam / 8.0, c[0] + diam / 8.0),
        Shape::Box { .. } => {
            let half = diam / (8.0 * (c.len() as f64).sqrt());
            Domain::cuboid(c.iter().map(|v| v - half).collect(), c.iter().map(|v| v + half).collect())
        }
        _ => {
            let r = (diam / 8.0).min(0.9 * domain.dist_to_boundary(&c)?);
            Domain::ball(c, r)
        }
    }
}

fn target_inside(domain: &Domain, target: &Domain) -> Result<bool> {
    Ok(match target.shape() {
        Shape::Interval { a, b } => domain.contains(&[*a])? && domain.contains(&[*b])?,
        Shape::Box { lo, hi } => {
            let d = lo.len();
            let mut ok = true;
            for mask in 0..(1usize << d) {
                let corner: Vec<f64> = (0..d).map(|k| if mask >> k & 1 == 1 { hi[k] } else { lo[k] }).collect();
                ok &= domain.contains(&corner)?;
            }
            ok
        }
        Shape::Ball { center, radius } => domain.contains(center)? && domain.dist_to_boundary(center)? > *radius,
        Shape::Polygon2D { vertices } => {
            let mut ok = true;
            for v in vertices {
                ok &= domain.contains(v)?;
            }
            ok
        }
        _ => return Err(Error::UnsupportedDomain("target set")),
    })
}

/// Estimates `f(x) = P^x(T_A < T_D)` and `g(x) = E^x T_D` from the same
/// paths at every query point.
pub fn harnack_experiment(
    domain: &Domain,
    target: &Domain,
    query_points: &[Vec<f64>],
    n_paths: usize,
    cfg: &PathConfig,
    seed: u64,
) -> Result<HarnackReport> {
    if n_paths < 2 {
        return Err(Error::OutOfRange(format!("need at least 2 paths per point, got {n_paths}")));
    }
    if target.dim() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: target.dim() });
    }
    if !target_inside(domain, target)? {
        return Err(Error::InvalidDomain("target set must lie inside the domain".into()));
    }
    for x in query_points {
        if !domain.contains(x)? {
            return Err(Error::OutsideDomain);
        }
    }
    let samples = super::stats::replicate(query_points.len() * n_paths, |k| {
        let mut rng = RngStream::for_replica(seed, tag::HARNACK, k as u64);
        sample_hit_then_exit(domain, target, &query_points[k / n_paths], cfg, &mut rng)
    })?;
    let points: Vec<HarnackPoint> = query_points
        .iter()
        .zip(samples.chunks(n_paths))
        .map(|(x, chunk)| {
            let n = chunk.len() as f64;
            let hits = chunk.iter().filter(|s| s.hit_target).count() as f64;
            let fm = hits / n;
            let f = Estimate { mean: fm, se: (fm * (1.0 - fm) / n).sqrt() };
            let times: Vec<f64> = chunk.iter().map(|s| s.exit.time).collect();
            let g = mean_se(&times);
            let ratio = f.mean / g.mean;
            let ratio_se = ratio * ((f.se / f.mean).powi(2) + (g.se / g.mean).powi(2)).sqrt();
            let censored = chunk.iter().filter(|s| s.exit.censored).count() as f64 / n;
            HarnackPoint { x: x.clone(), f, g, ratio, ratio_se, censored_fraction: censored }
        })
        .collect();
    let ratios: Vec<f64> = points.iter().map(|p| p.ratio).collect();
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio_span = if min > 0.0 { max / min } else { f64::INFINITY };
    let (radial_fit, predicted_slope) = match domain.shape() {
        Shape::Wedge2D { vertex, half_angle, .. } if points.len() >= 2 && min > 0.0 => {
            let lr: Vec<f64> = points.iter().map(|p| (p.x[0] - vertex[0]).hypot(p.x[1] - vertex[1]).ln()).collect();
            let ly: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
            (Some(ols(&lr, &ly)), Some(invert_theta(*half_angle, 2)? - 2.0))
        }
        _ => (None, None),
    };
    Ok(HarnackReport { n_paths, points, ratio_span, radial_fit, predicted_slope })
}
