//! Seeded random streams, Brownian stepping with exit detection, the
//! repulsive-drift SDE, and single-path exit-time sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{bridge_prob, Domain};

/// Default Brownian time step for unit-diameter domains.
pub const DEFAULT_DT: f64 = 1e-4;

/// Bridge probabilities below `exp(-BRIDGE_CUTOFF)` are under the resolution
/// of a 53-bit uniform, so the draw is skipped.
const BRIDGE_CUTOFF: f64 = 37.0;

/// Refinement zone and factor used when `substep_near_boundary` is set.
const NEAR_ZONE: f64 = 3.0;
const NEAR_SPLIT: usize = 4;

/// A reproducible random stream: `(seed, stream)` fixes every draw.
///
/// Backed by ChaCha8 with its native 64-bit stream selector, so distinct
/// stream ids give independent sequences from one seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Stream for replica `index` of the sub-experiment labelled `tag`.
    pub fn for_replica(seed: u64, tag: u32, index: u64) -> Self {
        Self::new(seed, ((tag as u64) << 40) | (index & ((1 << 40) - 1)))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform index in `0..n`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

/// Time discretization of a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Split steps starting within `3 sqrt(dt)` of the boundary into four.
    pub substep_near_boundary: bool,
}

impl PathConfig {
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::OutOfRange(format!("dt must be positive, got {dt}")));
        }
        if !(horizon > dt && horizon.is_finite()) {
            return Err(Error::OutOfRange(format!("horizon {horizon} must exceed dt {dt}")));
        }
        Ok(Self { dt, horizon, substep_near_boundary: false })
    }

    pub fn with_substeps(mut self, on: bool) -> Self {
        self.substep_near_boundary = on;
        self
    }

    /// Number of whole steps covering the horizon.
    pub fn steps(&self) -> u64 {
        (self.horizon / self.dt).ceil() as u64
    }
}

/// Independent `N(0, dt)` coordinates.
pub fn gaussian_increment(rng: &mut RngStream, d: usize, dt: f64) -> Vec<f64> {
    let s = dt.sqrt();
    (0..d).map(|_| s * rng.normal()).collect()
}

/// Result of one boundary-checked Brownian step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Step {
    /// Still inside; carries the new boundary distance.
    Inside(f64),
    /// Hit the boundary at this fraction of the step.
    Hit(f64),
}

/// Advances `x` by one Brownian increment into `out`, flagging a boundary hit
/// by exact segment crossing or, failing that, by one bridge draw.
#[inline]
pub(crate) fn brownian_step(
    domain: &Domain,
    x: &[f64],
    dist_x: f64,
    dt: f64,
    rng: &mut RngStream,
    out: &mut [f64],
) -> Step {
    let s = dt.sqrt();
    for (o, xi) in out.iter_mut().zip(x) {
        *o = xi + s * rng.normal();
    }
    if let Some(lambda) = domain.exit_fraction(x, out) {
        return Step::Hit(lambda);
    }
    let dist_y = domain.boundary_distance(out);
    let exponent = 2.0 * dist_x * dist_y / dt;
    if exponent < BRIDGE_CUTOFF && rng.uniform() < bridge_prob(dist_x, dist_y, dt) {
        return Step::Hit(0.5);
    }
    Step::Inside(dist_y)
}

/// A step of length `dt`, refined near the boundary when configured.
/// `x` is updated in place; `scratch` must have the same length.
#[inline]
pub(crate) fn refined_step(
    domain: &Domain,
    x: &mut [f64],
    dist_x: f64,
    cfg: &PathConfig,
    rng: &mut RngStream,
    scratch: &mut [f64],
) -> Step {
    let dt = cfg.dt;
    if !cfg.substep_near_boundary || dist_x >= NEAR_ZONE * dt.sqrt() {
        let step = brownian_step(domain, x, dist_x, dt, rng, scratch);
        if let Step::Inside(_) = step {
            x.copy_from_slice(scratch);
        }
        return step;
    }
    let h = dt / NEAR_SPLIT as f64;
    let mut dist = dist_x;
    for j in 0..NEAR_SPLIT {
        match brownian_step(domain, x, dist, h, rng, scratch) {
            Step::Hit(lambda) => return Step::Hit((j as f64 + lambda) / NEAR_SPLIT as f64),
            Step::Inside(d) => {
                x.copy_from_slice(scratch);
                dist = d;
            }
        }
    }
    Step::Inside(dist)
}

/// First exit time of one path, or the horizon with `censored` set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitSample {
    pub time: f64,
    pub censored: bool,
}

pub fn sample_exit_time(domain: &Domain, x0: &[f64], cfg: &PathConfig, rng: &mut RngStream) -> Result<ExitSample> {
    if !domain.contains(x0)? {
        return Err(Error::OutsideDomain);
    }
    let mut x = x0.to_vec();
    let mut scratch = vec![0.0; x.len()];
    let mut dist = domain.boundary_distance(&x);
    let steps = cfg.steps();
    for n in 0..steps {
        match refined_step(domain, &mut x, dist, cfg, rng, &mut scratch) {
            Step::Inside(d) => dist = d,
            Step::Hit(lambda) => {
                let time = (n as f64 + lambda) * cfg.dt;
                if time < cfg.horizon {
                    return Ok(ExitSample { time, censored: false });
                }
                break;
            }
        }
    }
    Ok(ExitSample { time: cfg.horizon, censored: true })
}

/// Path statistics for the two-set problem: did the path reach `target`
/// before leaving `domain`, and when did it leave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitExitSample {
    pub hit_target: bool,
    pub exit: ExitSample,
}

/// Runs one path until it exits `domain` (or the horizon), recording whether
/// it touched the closed set `target` first. Target entries are detected the
/// same way as exits: exact crossing, then a bridge draw on the exterior
/// distance.
pub fn sample_hit_then_exit(
    domain: &Domain,
    target: &Domain,
    x0: &[f64],
    cfg: &PathConfig,
    rng: &mut RngStream,
) -> Result<HitExitSample> {
    if !domain.contains(x0)? {
        return Err(Error::OutsideDomain);
    }
    if !target.supports_target() {
        return Err(Error::UnsupportedDomain("target set"));
    }
    let dt = cfg.dt;
    let mut x = x0.to_vec();
    let mut y = vec![0.0; x.len()];
    let mut dist = domain.boundary_distance(&x);
    let mut dist_target = target.exterior_distance(&x)?;
    let mut hit_target = dist_target == 0.0;
    let steps = cfg.steps();
    let s = dt.sqrt();
    for n in 0..steps {
        for (o, xi) in y.iter_mut().zip(&x) {
            *o = xi + s * rng.normal();
        }
        let mut exit_at = domain.exit_fraction(&x, &y);
        let dist_y = if exit_at.is_none() { domain.boundary_distance(&y) } else { 0.0 };
        if exit_at.is_none() && 2.0 * dist * dist_y / dt < BRIDGE_CUTOFF && rng.uniform() < bridge_prob(dist, dist_y, dt) {
            exit_at = Some(0.5);
        }
        if !hit_target {
            let mut enter_at = target.entry_fraction(&x, &y);
            let dt_y = target.exterior_distance(&y)?;
            if enter_at.is_none()
                && 2.0 * dist_target * dt_y / dt < BRIDGE_CUTOFF
                && rng.uniform() < bridge_prob(dist_target, dt_y, dt)
            {
                enter_at = Some(0.5);
            }
            if let Some(e) = enter_at {
                if exit_at.is_none_or(|x| e < x) {
                    hit_target = true;
                }
            }
            dist_target = dt_y;
        }
        if let Some(lambda) = exit_at {
            let time = (n as f64 + lambda) * dt;
            if time < cfg.horizon {
                return Ok(HitExitSample { hit_target, exit: ExitSample { time, censored: false } });
            }
            break;
        }
        std::mem::swap(&mut x, &mut y);
        dist = dist_y;
    }
    Ok(HitExitSample { hit_target, exit: ExitSample { time: cfg.horizon, censored: true } })
}

/// Drift coefficient of `dX = dW - (5/2) dt / X`.
pub const REPULSIVE_DRIFT: f64 = 2.5;

/// Below this level a repulsive-drift particle is declared absorbed; the
/// expected remaining time to zero is of order `x^2 / 5`.
pub(crate) fn absorption_floor(dt: f64) -> f64 {
    1e-3 * dt.sqrt()
}

/// Largest admissible sub-step at position `x` for base step `dt`.
#[inline]
pub(crate) fn repulsive_substep(x: f64, dt: f64) -> f64 {
    if x < 10.0 * dt.sqrt() {
        (x / 10.0).powi(2)
    } else {
        dt
    }
}

/// One Euler-Maruyama move of length `h` with a precomputed standard normal.
/// Returns the new position, or the fraction of `h` at which it reached 0.
#[inline]
pub(crate) fn repulsive_move(x: f64, h: f64, z: f64, floor: f64) -> std::result::Result<f64, f64> {
    let next = x + h.sqrt() * z - REPULSIVE_DRIFT / x * h;
    if next <= 0.0 {
        Err(x / (x - next))
    } else if next < floor {
        Err(1.0)
    } else {
        Ok(next)
    }
}

/// Outcome of one repulsive-SDE step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SdeStep {
    Alive(f64),
    /// Absorbed at zero, this long after the start of the step.
    Absorbed { after: f64 },
}

/// Advances `dX = dW - 5/(2X) dt` by `dt` with absorption at zero.
///
/// Near zero the step is cut into sub-steps no longer than `(x/10)^2`, which
/// keeps Euler from jumping over the singular drift.
pub fn sde_step_repulsive(x: f64, dt: f64, rng: &mut RngStream) -> Result<SdeStep> {
    if !(x > 0.0) {
        return Err(Error::OutOfRange(format!("repulsive SDE needs x > 0, got {x}")));
    }
    if !(dt > 0.0) {
        return Err(Error::OutOfRange(format!("dt must be positive, got {dt}")));
    }
    let floor = absorption_floor(dt);
    let mut x = x;
    let mut elapsed = 0.0;
    loop {
        let remaining = dt - elapsed;
        let h = repulsive_substep(x, dt).min(remaining);
        match repulsive_move(x, h, rng.normal(), floor) {
            Err(frac) => return Ok(SdeStep::Absorbed { after: elapsed + frac * h }),
            Ok(next) => x = next,
        }
        if h >= remaining {
            return Ok(SdeStep::Alive(x));
        }
        elapsed += h;
    }
}
