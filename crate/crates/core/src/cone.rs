//! Cone parameters: the hypergeometric profile `h_{p,d}`, its first zero
//! `theta_{p,d}`, the Lipschitz threshold `c(N, d)` and Hawkes' criterion for
//! the non-intersection of `N` independent stable ranges.
//!
//! The harmonic function `|x|^p h_{p,d}(theta)` vanishes on the boundary of
//! the right circular cone of half-angle `theta_{p,d}`, where
//!
//! ```text
//! h_{p,d}(theta) = 2F1(-p, p + d - 2; (d - 1)/2; (1 - cos theta)/2)
//! ```

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Hard cap on the number of series terms.
pub const MAX_TERMS: usize = 10_000;

/// Bracketing step used when scanning for the first zero of `h`.
pub const ROOT_SCAN_STEP: f64 = PI / 1024.0;

/// Bisection stops once the bracket is narrower than this.
pub const ROOT_TOL: f64 = 1e-12;

// Above this argument the direct series is replaced by the 1 - x connection
// formula, when that formula is non-degenerate.
const CONNECTION_SWITCH: f64 = 0.75;

/// A right circular cone `K_{p,d}` with half-angle `theta = theta_{p,d}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub p: f64,
    pub d: usize,
    pub theta: f64,
}

impl ConeSpec {
    /// Builds the cone for exponent `p` in dimension `d`, solving for its angle.
    pub fn new(p: f64, d: usize) -> Result<Self> {
        let theta = theta_pd(p, d)?;
        Ok(Self { p, d, theta })
    }

    /// Recovers the exponent of a cone with the given half-angle in dimension `d`.
    pub fn from_half_angle(theta: f64, d: usize) -> Result<Self> {
        let p = invert_theta(theta, d)?;
        Ok(Self { p, d, theta })
    }

    /// Lifetime tail exponent of excursions from the vertex, `-p/2`.
    pub fn tail_exponent(&self) -> f64 {
        -self.p / 2.0
    }
}

fn check_params(p: f64, d: usize) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::OutOfRange(format!("cone exponent p must be positive, got {p}")));
    }
    if d < 2 {
        return Err(Error::OutOfRange(format!("dimension d must be at least 2, got {d}")));
    }
    Ok(())
}

fn is_integer(v: f64) -> bool {
    v == v.round()
}

/// `1/Gamma(v)`, exactly zero at the poles.
fn rgamma(v: f64) -> f64 {
    if v <= 0.0 && is_integer(v) {
        0.0
    } else {
        1.0 / gamma(v)
    }
}

/// Power series for `2F1(a, b; c; x)` with the term-magnitude stopping rule
/// `|t_k| < 1e-15 |S_k| + 1e-16`.
///
/// The rule is only trusted once `k` has passed every index at which a
/// numerator factor `(a + k)` or `(b + k)` can still flip sign, so a
/// coincidentally small early term does not end the sum.
pub fn hyp2f1_series(a: f64, b: f64, c: f64, x: f64) -> Result<f64> {
    let settle = (-a).max(-b).max(0.0).ceil() as usize + 1;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * x;
        sum += term;
        if term == 0.0 || (k >= settle && term.abs() < 1e-15 * sum.abs() + 1e-16) {
            return Ok(sum);
        }
    }
    Err(Error::SeriesNonConvergence { terms: MAX_TERMS, x })
}

/// `2F1(a, b; c; 1)` by Gauss's summation theorem; requires `c - a - b > 0`.
fn hyp2f1_at_one(a: f64, b: f64, c: f64) -> f64 {
    gamma(c) * gamma(c - a - b) * rgamma(c - a) * rgamma(c - b)
}

/// Connection formula around `x = 1`, valid when `c - a - b` is not an integer.
fn hyp2f1_connection(a: f64, b: f64, c: f64, x: f64) -> Result<f64> {
    let s = c - a - b;
    let y = 1.0 - x;
    let left = gamma(c) * gamma(s) * rgamma(c - a) * rgamma(c - b);
    let right = gamma(c) * gamma(-s) * rgamma(a) * rgamma(b);
    let mut value = 0.0;
    if left != 0.0 {
        value += left * hyp2f1_series(a, b, 1.0 - s, y)?;
    }
    if right != 0.0 {
        value += right * y.powf(s) * hyp2f1_series(c - a, c - b, 1.0 + s, y)?;
    }
    Ok(value)
}

/// Evaluates `h_{p,d}(theta)`.
///
/// Uses the power series in `x = (1 - cos theta)/2`. Near `x = 1` the series
/// becomes too slow for the term cap, so for even `d` (where `c - a - b` is a
/// half-integer) the `1 - x` connection formula takes over, and in `d = 2`
/// the endpoint `theta = pi` is summed in closed form.
pub fn hyp_h(p: f64, d: usize, theta: f64) -> Result<f64> {
    check_params(p, d)?;
    let (a, b, c) = (-p, p + d as f64 - 2.0, (d as f64 - 1.0) / 2.0);
    let s = c - a - b;
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::OutOfRange(format!("theta = {theta} is outside [0, pi]")));
    }
    if theta == PI {
        if s > 0.0 {
            return Ok(hyp2f1_at_one(a, b, c));
        }
        return Err(Error::OutOfRange(format!(
            "theta = pi is outside the convergence region for d = {d}"
        )));
    }
    let x = (1.0 - theta.cos()) / 2.0;
    if x > CONNECTION_SWITCH && !is_integer(s) {
        hyp2f1_connection(a, b, c, x)
    } else {
        hyp2f1_series(a, b, c, x)
    }
}

/// Smallest zero of `h_{p,d}` in `(0, pi]`.
///
/// Scans upward from `0` in steps of `pi/1024` until the sign changes, then
/// bisects to `1e-12`.
pub fn theta_pd(p: f64, d: usize) -> Result<f64> {
    check_params(p, d)?;
    let steps = (PI / ROOT_SCAN_STEP).round() as usize;
    let mut lo = 0.0;
    let mut h_lo = hyp_h(p, d, lo)?;
    for i in 1..=steps {
        let hi = if i == steps { PI } else { i as f64 * ROOT_SCAN_STEP };
        let h_hi = match hyp_h(p, d, hi) {
            Ok(v) => v,
            Err(Error::SeriesNonConvergence { .. }) | Err(Error::OutOfRange(_)) => {
                return Err(Error::RootNotFound { p, d })
            }
            Err(e) => return Err(e),
        };
        if h_hi == 0.0 {
            return Ok(hi);
        }
        if h_lo.signum() != h_hi.signum() {
            return bisect(p, d, lo, hi, h_lo);
        }
        lo = hi;
        h_lo = h_hi;
    }
    Err(Error::RootNotFound { p, d })
}

fn bisect(p: f64, d: usize, mut lo: f64, mut hi: f64, h_lo: f64) -> Result<f64> {
    let sign_lo = h_lo.signum();
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let h_mid = hyp_h(p, d, mid)?;
        if h_mid == 0.0 {
            return Ok(mid);
        }
        if h_mid.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Inverts `theta_pd(., d)` by bisection in `p`, using that the angle
/// decreases strictly with the exponent.
pub fn invert_theta(theta: f64, d: usize) -> Result<f64> {
    if !(theta > 0.0 && theta <= PI) {
        return Err(Error::OutOfRange(format!("half-angle {theta} is outside (0, pi]")));
    }
    // no zero below pi means the angle is effectively larger than any target
    let angle = |p: f64| match theta_pd(p, d) {
        Err(Error::RootNotFound { .. }) => Ok(f64::INFINITY),
        other => other,
    };
    let (mut lo, mut hi) = (0.05_f64, 64.0_f64);
    if angle(lo)? < theta || angle(hi)? > theta {
        return Err(Error::OutOfRange(format!(
            "half-angle {theta} has no exponent in [{lo}, {hi}] for d = {d}"
        )));
    }
    // theta_pd is accurate to ~1e-12, which bounds what this loop can resolve
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if angle(mid)? > theta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `c(N, d) = cot theta_{p', d}` with `p' = 2 - 2/N`, clamped at zero.
pub fn lipschitz_threshold(n: usize, d: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::OutOfRange(format!("particle count N must be at least 2, got {n}")));
    }
    let p = 2.0 - 2.0 / n as f64;
    let theta = theta_pd(p, d)?;
    Ok((1.0 / theta.tan()).max(0.0))
}

/// Hawkes' criterion: the ranges of `N` independent stable subordinators of
/// index `p/2` have empty common intersection iff `N p/2 - N + 1 < 0`.
pub fn hawkes_nonintersect(n: usize, p: f64) -> bool {
    let n = n as f64;
    n * p / 2.0 - n + 1.0 < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    // Independent oracle: explicit Pochhammer products, no recurrence, many
    // terms, accumulated smallest-first.
    fn naive_series(a: f64, b: f64, c: f64, x: f64, terms: usize) -> f64 {
        let poch = |v: f64, k: usize| (0..k).map(|i| v + i as f64).product::<f64>();
        let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
        let mut parts: Vec<f64> = (0..terms)
            .map(|k| poch(a, k) * poch(b, k) / (poch(c, k) * fact(k)) * x.powi(k as i32))
            .collect();
        parts.reverse();
        parts.iter().sum()
    }

    #[test]
    fn h_at_zero_is_one() {
        for p in [0.3, 1.0, 2.5, 7.0] {
            for d in 2..6 {
                assert_eq!(hyp_h(p, d, 0.0).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn h_22_vanishes_at_quarter_pi() {
        assert_abs_diff_eq!(hyp_h(2.0, 2, FRAC_PI_4).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn h_12_at_third_pi_matches_cosine_oracle() {
        let x = (1.0 - FRAC_PI_3.cos()) / 2.0;
        let oracle = naive_series(-1.0, 1.0, 0.5, x, 60);
        assert_abs_diff_eq!(oracle, (1.0 * FRAC_PI_3).cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(hyp_h(1.0, 2, FRAC_PI_3).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn d2_profile_is_cosine() {
        for p in [0.5, 1.5, 3.0, 4.0] {
            for i in 0..50 {
                let theta = i as f64 * 0.06;
                let x = (1.0 - theta.cos()) / 2.0;
                let h = hyp_h(p, 2, theta).unwrap();
                assert_abs_diff_eq!(h, (p * theta).cos(), epsilon = 1e-11);
                if x < 0.5 {
                    let oracle = naive_series(-p, p, 0.5, x, 80);
                    assert_abs_diff_eq!(h, oracle, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn p2_closed_form_on_grid() {
        for d in 2..=10 {
            for i in 0..100 {
                let theta = FRAC_PI_2 * i as f64 / 99.0;
                let exact = 1.0 - d as f64 / (d as f64 - 1.0) * theta.sin().powi(2);
                assert!((hyp_h(2.0, d, theta).unwrap() - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn connection_formula_agrees_with_series() {
        for d in [2usize, 4, 6] {
            for p in [0.4, 0.9, 1.7] {
                let (a, b, c) = (-p, p + d as f64 - 2.0, (d as f64 - 1.0) / 2.0);
                for x in [0.55, 0.65, 0.8, 0.9] {
                    let direct = hyp2f1_series(a, b, c, x).unwrap();
                    let conn = hyp2f1_connection(a, b, c, x).unwrap();
                    assert!((direct - conn).abs() < 1e-10, "d={d} p={p} x={x}");
                }
            }
        }
    }

    #[test]
    fn series_cap_is_an_error() {
        let err = hyp2f1_series(0.5, 0.5, 0.5, 0.999_999_9).unwrap_err();
        assert!(matches!(err, Error::SeriesNonConvergence { .. }));
    }

    #[test]
    fn theta_known_values() {
        assert_abs_diff_eq!(theta_pd(2.0, 2).unwrap(), FRAC_PI_4, epsilon = 1e-11);
        assert_abs_diff_eq!(hyp_h(1.0, 2, FRAC_PI_2).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(theta_pd(1.0, 2).unwrap(), FRAC_PI_2, epsilon = 1e-11);
        for d in 2..=10 {
            let expected = (1.0 / (d as f64).sqrt()).acos();
            assert_abs_diff_eq!(theta_pd(2.0, d).unwrap(), expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn theta_half_in_plane_is_pi() {
        assert_abs_diff_eq!(theta_pd(0.5, 2).unwrap(), PI, epsilon = 1e-10);
    }

    #[test]
    fn theta_monotonicity() {
        for d in [2usize, 3, 4] {
            let thetas: Vec<f64> = [0.5, 1.0, 1.5, 2.0, 3.0]
                .iter()
                .map(|&p| theta_pd(p, d).unwrap())
                .collect();
            assert!(thetas.windows(2).all(|w| w[1] < w[0]), "d={d}: {thetas:?}");
        }
        let by_d: Vec<f64> = (2..=8).map(|d| theta_pd(2.0, d).unwrap()).collect();
        assert!(by_d.windows(2).all(|w| w[1] > w[0]));
        for p in [1.1, 1.5, 2.0, 3.0] {
            for d in 2..=6 {
                assert!(theta_pd(p, d).unwrap() <= FRAC_PI_2 + 1e-12);
            }
        }
    }

    #[test]
    fn theta_is_first_zero() {
        for (p, d) in [(1.3, 3), (2.7, 4), (0.8, 5)] {
            let theta = theta_pd(p, d).unwrap();
            assert!(hyp_h(p, d, theta).unwrap().abs() < 1e-9);
            let mut t = 0.0;
            while t < theta - 1e-3 {
                assert!(hyp_h(p, d, t).unwrap() > 0.0);
                t += 1e-3;
            }
        }
    }

    #[test]
    fn invert_round_trips() {
        let p = invert_theta(PI / 8.0, 2).unwrap();
        assert_abs_diff_eq!(p, 4.0, epsilon = 1e-8);
        let cone = ConeSpec::new(1.7, 3).unwrap();
        let back = ConeSpec::from_half_angle(cone.theta, 3).unwrap();
        assert_abs_diff_eq!(back.p, 1.7, epsilon = 1e-8);
    }

    #[test]
    fn threshold_values() {
        assert!(lipschitz_threshold(2, 2).unwrap() < 1e-10);
        for d in 2..=5 {
            let c = lipschitz_threshold(10_000, d).unwrap();
            assert!((c - 1.0 / (d as f64 - 1.0).sqrt()).abs() < 1e-3);
        }
        assert!(lipschitz_threshold(1, 2).is_err());
    }

    #[test]
    fn hawkes_examples() {
        assert!(hawkes_nonintersect(2, 0.9));
        assert!(!hawkes_nonintersect(2, 1.0));
        assert!(hawkes_nonintersect(3, 1.0));
        for n in 2..=20 {
            let p = 2.0 - 2.0 / n as f64;
            assert!(hawkes_nonintersect(n, p - 1e-9));
            assert!(!hawkes_nonintersect(n, p));
        }
    }

    #[test]
    fn bad_parameters() {
        assert!(hyp_h(-1.0, 2, 0.1).is_err());
        assert!(hyp_h(1.0, 1, 0.1).is_err());
        assert!(hyp_h(1.0, 3, PI).is_err());
    }
}
