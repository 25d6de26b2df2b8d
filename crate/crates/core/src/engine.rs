//! The Fleming-Viot particle system: `N` Brownian particles in `D`; when one
//! hits the boundary it jumps onto a uniformly chosen other particle, so the
//! population stays at `N`.
//!
//! Also holds the empirical-measure histogram, the time-averaged QSD
//! estimator, and the analytic Dirichlet ground states it is compared to.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Shape};
use crate::special::{bessel_j_first_zero, bessel_j_scaled};
use crate::stochastic::{brownian_step, PathConfig, RngStream, Step};

/// Default spacing of observation times for time averages.
pub const DEFAULT_OBSERVE_EVERY: f64 = 0.01;

/// Positions of `N` particles (flat, `N * d`), the clock and the jump count.
#[derive(Debug, Clone, PartialEq)]
pub struct FvState {
    dim: usize,
    positions: Vec<f64>,
    // distance of each particle to the boundary, kept in sync with positions
    dist: Vec<f64>,
    t: f64,
    jump_count: u64,
    last_tau: f64,
    coincidences: u64,
}

/// What to do when every particle is flagged within one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    /// Report [`Error::SimultaneousExtinction`].
    #[default]
    Strict,
    /// Replay the step as a time-ordered sequence of deaths: the earliest
    /// crossing dies first, copies a donor at that instant (interpolated on
    /// the donor's chord) and moves on with fresh increments for the rest of
    /// the step. The event is counted in [`FvState::coincidences`].
    Sequential,
}

// Events allowed inside one sequentially resolved step before giving up.
const MAX_EVENTS_PER_STEP: usize = 10_000;

/// One branching event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpRecord {
    /// 1-based jump index.
    pub k: u64,
    pub tau: f64,
    pub dying: usize,
    pub donor: usize,
    /// Jump point: the donor's position, now shared by both particles.
    pub xi: Vec<f64>,
}

impl FvState {
    pub fn new(domain: &Domain, points: &[Vec<f64>]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::OutOfRange(format!("need at least 2 particles, got {}", points.len())));
        }
        let dim = domain.dim();
        let mut positions = Vec::with_capacity(points.len() * dim);
        let mut dist = Vec::with_capacity(points.len());
        for p in points {
            dist.push(domain.dist_to_boundary(p)?);
            positions.extend_from_slice(p);
        }
        Ok(Self { dim, positions, dist, t: 0.0, jump_count: 0, last_tau: f64::NEG_INFINITY, coincidences: 0 })
    }

    /// All `n` particles at the same point.
    pub fn replicated(domain: &Domain, x: &[f64], n: usize) -> Result<Self> {
        Self::new(domain, &vec![x.to_vec(); n])
    }

    pub fn n(&self) -> usize {
        self.dist.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn jump_count(&self) -> u64 {
        self.jump_count
    }

    /// Steps in which every particle was flagged and the step was resolved
    /// sequentially.
    pub fn coincidences(&self) -> u64 {
        self.coincidences
    }

    fn record_jump(&mut self, tau: f64, dying: usize, donor: usize, xi: Vec<f64>) -> JumpRecord {
        let tau = if tau <= self.last_tau { self.last_tau.next_up() } else { tau };
        self.last_tau = tau;
        self.jump_count += 1;
        JumpRecord { k: self.jump_count, tau, dying, donor, xi }
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// Flat `N * d` coordinate array.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.positions.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }
}

/// Advances every particle by one step of length `dt` and resolves the
/// boundary hits.
///
/// Hits are processed in order of crossing fraction (bridge hits count as
/// the step midpoint, ties by index). A dying particle copies a donor drawn
/// uniformly from the other particles that hold an interior position at that
/// moment: those not flagged this step and those already relocated. If all
/// `N` particles are flagged the state is left untouched and
/// [`Error::SimultaneousExtinction`] is returned.
pub fn fv_step(state: &mut FvState, domain: &Domain, dt: f64, rng: &mut RngStream) -> Result<Vec<JumpRecord>> {
    fv_step_with(state, domain, dt, Resolution::Strict, rng)
}

/// [`fv_step`] with an explicit policy for steps in which every particle is
/// flagged.
pub fn fv_step_with(
    state: &mut FvState,
    domain: &Domain,
    dt: f64,
    resolution: Resolution,
    rng: &mut RngStream,
) -> Result<Vec<JumpRecord>> {
    let n = state.n();
    let d = state.dim;
    let mut next = vec![0.0; n * d];
    let mut next_dist = vec![0.0; n];
    let mut flagged: Vec<(f64, usize)> = Vec::new();
    for i in 0..n {
        let x = &state.positions[i * d..(i + 1) * d];
        let out = &mut next[i * d..(i + 1) * d];
        match brownian_step(domain, x, state.dist[i], dt, rng, out) {
            Step::Inside(dist) => next_dist[i] = dist,
            Step::Hit(lambda) => flagged.push((lambda, i)),
        }
    }
    if flagged.len() == n {
        return match resolution {
            Resolution::Strict => Err(Error::SimultaneousExtinction { n, t: state.t + dt }),
            Resolution::Sequential => resolve_sequentially(state, domain, dt, next, &flagged, rng),
        };
    }
    let mut jumps = Vec::with_capacity(flagged.len());
    if !flagged.is_empty() {
        flagged.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut pending = vec![false; n];
        for &(_, i) in &flagged {
            pending[i] = true;
        }
        let mut candidates = Vec::with_capacity(n);
        for &(lambda, dying) in &flagged {
            candidates.clear();
            candidates.extend((0..n).filter(|&k| k != dying && !pending[k]));
            let donor = candidates[rng.below(candidates.len())];
            next.copy_within(donor * d..(donor + 1) * d, dying * d);
            next_dist[dying] = next_dist[donor];
            pending[dying] = false;
            let xi = next[donor * d..(donor + 1) * d].to_vec();
            jumps.push(state.record_jump(state.t + lambda * dt, dying, donor, xi));
        }
    }
    state.positions = next;
    state.dist = next_dist;
    state.t += dt;
    Ok(jumps)
}

// Piece of a particle's path inside the current step, as step fractions.
struct Segment {
    start: f64,
    from: Vec<f64>,
    to: Vec<f64>,
    death: Option<f64>,
}

impl Segment {
    fn at(&self, frac: f64) -> Vec<f64> {
        let w = if self.start < 1.0 { (frac - self.start) / (1.0 - self.start) } else { 0.0 };
        self.from.iter().zip(&self.to).map(|(a, b)| a + w * (b - a)).collect()
    }
}

fn resolve_sequentially(
    state: &mut FvState,
    domain: &Domain,
    dt: f64,
    ends: Vec<f64>,
    flagged: &[(f64, usize)],
    rng: &mut RngStream,
) -> Result<Vec<JumpRecord>> {
    let n = state.n();
    let d = state.dim;
    let mut segs: Vec<Segment> = (0..n)
        .map(|i| Segment {
            start: 0.0,
            from: state.position(i).to_vec(),
            to: ends[i * d..(i + 1) * d].to_vec(),
            death: None,
        })
        .collect();
    for &(lambda, i) in flagged {
        segs[i].death = Some(lambda);
    }
    let mut jumps = Vec::new();
    let mut scratch = vec![0.0; d];
    for _ in 0..MAX_EVENTS_PER_STEP {
        let next_death = segs
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.death.map(|e| (e, i)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let Some((when, dying)) = next_death else {
            let mut positions = Vec::with_capacity(n * d);
            let mut dist = Vec::with_capacity(n);
            for s in &segs {
                dist.push(domain.boundary_distance(&s.to));
                positions.extend_from_slice(&s.to);
            }
            state.positions = positions;
            state.dist = dist;
            state.t += dt;
            state.coincidences += 1;
            return Ok(jumps);
        };
        let mut donor = rng.below(n - 1);
        if donor >= dying {
            donor += 1;
        }
        let mut xi = segs[donor].at(when);
        if !domain.inside(&xi) {
            xi = segs[donor].from.clone();
        }
        let rest = (1.0 - when) * dt;
        let dist_xi = domain.boundary_distance(&xi);
        let death = if rest > 0.0 {
            match brownian_step(domain, &xi, dist_xi, rest, rng, &mut scratch) {
                Step::Hit(l) => Some(when + l * (1.0 - when)),
                Step::Inside(_) => None,
            }
        } else {
            scratch.copy_from_slice(&xi);
            None
        };
        jumps.push(state.record_jump(state.t + when * dt, dying, donor, xi.clone()));
        segs[dying] = Segment { start: when, from: xi, to: scratch.clone(), death };
    }
    Err(Error::SimultaneousExtinction { n, t: state.t + dt })
}

/// Jump log as CSV: `k,tau,dying,donor,xi_0,...,xi_{d-1}`.
pub fn jump_log_csv(jumps: &[JumpRecord], dim: usize) -> String {
    let mut s = String::from("k,tau,dying,donor");
    for k in 0..dim {
        let _ = write!(s, ",xi_{k}");
    }
    s.push('\n');
    for j in jumps {
        let _ = write!(s, "{},{},{},{}", j.k, j.tau, j.dying, j.donor);
        for v in &j.xi {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// State snapshot at an observation time.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FvRun {
    pub jumps: Vec<JumpRecord>,
    pub observations: Vec<Observation>,
    pub final_state: FvState,
}

/// Converts an observation spacing in time units to a step stride.
pub fn observation_stride(every: f64, dt: f64) -> u64 {
    ((every / dt).round() as u64).max(1)
}

/// Runs the system to the horizon, calling `observe` every `stride` steps
/// (including time 0). Returns the full jump log.
pub fn drive<F>(
    state: &mut FvState,
    domain: &Domain,
    cfg: &PathConfig,
    resolution: Resolution,
    rng: &mut RngStream,
    stride: u64,
    mut observe: F,
) -> Result<Vec<JumpRecord>>
where
    F: FnMut(u64, &FvState) -> Result<()>,
{
    let mut log = Vec::new();
    let steps = cfg.steps();
    observe(0, state)?;
    for s in 1..=steps {
        log.extend(fv_step_with(state, domain, cfg.dt, resolution, rng)?);
        if s % stride == 0 {
            observe(s, state)?;
        }
    }
    Ok(log)
}

/// Runs the system from `x0` and records snapshots every `observe_every`
/// time units.
pub fn run_fv(domain: &Domain, x0: &[Vec<f64>], cfg: &PathConfig, observe_every: f64, rng: &mut RngStream) -> Result<FvRun> {
    let mut state = FvState::new(domain, x0)?;
    let stride = observation_stride(observe_every, cfg.dt);
    let mut observations = Vec::new();
    let jumps = drive(&mut state, domain, cfg, Resolution::Strict, rng, stride, |_, s| {
        observations.push(Observation { t: s.t(), positions: s.positions().to_vec() });
        Ok(())
    })?;
    Ok(FvRun { jumps, observations, final_state: state })
}

/// Regular rectangular grid of bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub bins: Vec<usize>,
}

impl BinGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, bins: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != bins.len() || lo.is_empty() {
            return Err(Error::OutOfRange("bin grid dimensions disagree".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) || bins.contains(&0) {
            return Err(Error::OutOfRange("bin grid needs lo < hi and at least one bin per axis".into()));
        }
        Ok(Self { lo, hi, bins })
    }

    /// Grid over the domain's bounding box with `per_axis` bins on each axis.
    pub fn cover(domain: &Domain, per_axis: usize) -> Result<Self> {
        let (lo, hi) = domain.bounding_box().ok_or(Error::UnsupportedDomain("histogram grid (unbounded)"))?;
        let d = lo.len();
        Self::new(lo, hi, vec![per_axis; d])
    }

    pub fn len(&self) -> usize {
        self.bins.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.bins.len()
    }

    fn width(&self, k: usize) -> f64 {
        (self.hi[k] - self.lo[k]) / self.bins[k] as f64
    }

    /// Flat bin index (last axis fastest); points on the upper face belong to
    /// the last bin.
    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for k in 0..self.dim() {
            if !(x[k] >= self.lo[k] && x[k] <= self.hi[k]) {
                return None;
            }
            let b = (((x[k] - self.lo[k]) / self.width(k)) as usize).min(self.bins[k] - 1);
            idx = idx * self.bins[k] + b;
        }
        Some(idx)
    }

    /// Lower and upper corners of bin `idx`.
    pub fn bounds(&self, idx: usize) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut coords = vec![0; d];
        let mut rest = idx;
        for k in (0..d).rev() {
            coords[k] = rest % self.bins[k];
            rest /= self.bins[k];
        }
        let lo = (0..d).map(|k| self.lo[k] + coords[k] as f64 * self.width(k)).collect();
        let hi = (0..d).map(|k| self.lo[k] + (coords[k] + 1) as f64 * self.width(k)).collect();
        (lo, hi)
    }
}

/// Binned probability measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub grid: BinGrid,
    pub masses: Vec<f64>,
}

impl Histogram {
    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        self.masses.iter().zip(other).map(|(a, b)| (a - b).abs()).sum()
    }

    /// `bin_lo_0..,bin_hi_0..,mass` rows.
    pub fn to_csv(&self) -> String {
        let d = self.grid.dim();
        let mut out = String::new();
        let lo: Vec<String> = (0..d).map(|k| format!("bin_lo_{k}")).collect();
        let hi: Vec<String> = (0..d).map(|k| format!("bin_hi_{k}")).collect();
        let _ = writeln!(out, "{},{},mass", lo.join(","), hi.join(","));
        for (i, m) in self.masses.iter().enumerate() {
            let (l, h) = self.grid.bounds(i);
            for v in l.iter().chain(&h) {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{m}");
        }
        out
    }
}

/// Running bin counts over many snapshots.
#[derive(Debug, Clone)]
pub(crate) struct CountAccumulator {
    grid: BinGrid,
    counts: Vec<u64>,
    samples: u64,
}

impl CountAccumulator {
    pub(crate) fn new(grid: BinGrid) -> Self {
        let len = grid.len();
        Self { grid, counts: vec![0; len], samples: 0 }
    }

    pub(crate) fn add(&mut self, state: &FvState) -> Result<()> {
        for i in 0..state.n() {
            let b = self.grid.index_of(state.position(i)).ok_or(Error::OutsideGrid { index: i })?;
            self.counts[b] += 1;
        }
        self.samples += state.n() as u64;
        Ok(())
    }

    pub(crate) fn finish(self) -> Histogram {
        let total = self.samples.max(1) as f64;
        let masses = self.counts.iter().map(|&c| c as f64 / total).collect();
        Histogram { grid: self.grid, masses }
    }
}

/// Empirical measure of one state: mass `1/N` per particle.
pub fn empirical_measure(state: &FvState, grid: &BinGrid) -> Result<Histogram> {
    if grid.dim() != state.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: state.dim() });
    }
    let mut acc = CountAccumulator::new(grid.clone());
    acc.add(state)?;
    Ok(acc.finish())
}

/// Time-averaged empirical measure over the observation times in
/// `[burn_in, horizon]`, all particles started at the domain's reference
/// point.
pub fn qsd_estimate(
    domain: &Domain,
    n: usize,
    cfg: &PathConfig,
    burn_in: f64,
    grid: &BinGrid,
    observe_every: f64,
    rng: &mut RngStream,
) -> Result<Histogram> {
    if !(burn_in >= 0.0 && burn_in < cfg.horizon) {
        return Err(Error::OutOfRange(format!("burn-in {burn_in} must lie in [0, horizon)")));
    }
    let mut state = FvState::replicated(domain, &domain.reference_point(), n)?;
    let stride = observation_stride(observe_every, cfg.dt);
    let first = (burn_in / cfg.dt).ceil() as u64;
    let mut acc = CountAccumulator::new(grid.clone());
    drive(&mut state, domain, cfg, Resolution::Strict, rng, stride, |step, s| if step >= first { acc.add(s) } else { Ok(()) })?;
    Ok(acc.finish())
}

/// The first Dirichlet eigenfunction normalized to a probability density.
#[derive(Debug, Clone, PartialEq)]
pub enum Eigenfunction {
    Interval { a: f64, b: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Radial profile `(j r/R)^{-nu} J_nu(j r/R)`, `nu = d/2 - 1`, divided by `norm`.
    Ball { center: Vec<f64>, radius: f64, nu: f64, zero: f64, norm: f64 },
}

fn sine_bump(x: f64, a: f64, b: f64) -> f64 {
    let len = b - a;
    if x <= a || x >= b {
        0.0
    } else {
        PI / (2.0 * len) * (PI * (x - a) / len).sin()
    }
}

// Integral of the normalized sine bump over [u, v].
fn sine_bump_mass(u: f64, v: f64, a: f64, b: f64) -> f64 {
    let len = b - a;
    let u = u.clamp(a, b);
    let v = v.clamp(a, b);
    0.5 * ((PI * (u - a) / len).cos() - (PI * (v - a) / len).cos())
}

fn unit_sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / statrs::function::gamma::gamma(d as f64 / 2.0)
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub(crate) fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

impl Eigenfunction {
    pub fn density(&self, x: &[f64]) -> f64 {
        match self {
            Eigenfunction::Interval { a, b } => sine_bump(x[0], *a, *b),
            Eigenfunction::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).map(|(v, (l, h))| sine_bump(*v, *l, *h)).product(),
            Eigenfunction::Ball { center, radius, nu, zero, norm } => {
                let r = x.iter().zip(center).map(|(v, c)| (v - c) * (v - c)).sum::<f64>().sqrt();
                if r >= *radius {
                    0.0
                } else {
                    bessel_j_scaled(*nu, zero * r / radius) / norm
                }
            }
        }
    }

    /// Mass of the density in each bin of `grid`.
    pub fn bin_masses(&self, grid: &BinGrid) -> Vec<f64> {
        (0..grid.len())
            .map(|i| {
                let (lo, hi) = grid.bounds(i);
                match self {
                    Eigenfunction::Interval { a, b } => sine_bump_mass(lo[0], hi[0], *a, *b),
                    Eigenfunction::Box { lo: blo, hi: bhi } => (0..lo.len())
                        .map(|k| sine_bump_mass(lo[k], hi[k], blo[k], bhi[k]))
                        .product(),
                    Eigenfunction::Ball { .. } => self.midpoint_mass(&lo, &hi, 12),
                }
            })
            .collect()
    }

    fn midpoint_mass(&self, lo: &[f64], hi: &[f64], per_axis: usize) -> f64 {
        let d = lo.len();
        let cells = per_axis.pow(d as u32);
        let vol: f64 = lo.iter().zip(hi).map(|(l, h)| (h - l) / per_axis as f64).product();
        let mut x = vec![0.0; d];
        let mut total = 0.0;
        for c in 0..cells {
            let mut rest = c;
            for k in 0..d {
                let j = rest % per_axis;
                rest /= per_axis;
                x[k] = lo[k] + (j as f64 + 0.5) * (hi[k] - lo[k]) / per_axis as f64;
            }
            total += self.density(&x);
        }
        total * vol
    }
}

/// Normalized first Dirichlet eigenfunction of an interval, box or ball.
pub fn eigenfunction_reference(domain: &Domain) -> Result<Eigenfunction> {
    match domain.shape() {
        Shape::Interval { a, b } => Ok(Eigenfunction::Interval { a: *a, b: *b }),
        Shape::Box { lo, hi } => Ok(Eigenfunction::Box { lo: lo.clone(), hi: hi.clone() }),
        Shape::Ball { center, radius } => {
            let d = center.len();
            let nu = d as f64 / 2.0 - 1.0;
            let zero = bessel_j_first_zero(nu);
            let radial = |r: f64| bessel_j_scaled(nu, zero * r / radius) * r.powi(d as i32 - 1);
            let norm = unit_sphere_area(d) * simpson(radial, 0.0, *radius, 4000);
            Ok(Eigenfunction::Ball { center: center.clone(), radius: *radius, nu, zero, norm })
        }
        _ => Err(Error::UnsupportedDomain("eigenfunction reference")),
    }
}
