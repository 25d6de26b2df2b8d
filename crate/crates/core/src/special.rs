//! Bessel functions of the first kind, enough for Dirichlet ground states of
//! balls.

use statrs::function::gamma::gamma;

/// `J_nu(z) / (z/2)^nu`, an entire function of `z` for `nu > -1`.
pub fn bessel_j_scaled(nu: f64, z: f64) -> f64 {
    let q = -z * z / 4.0;
    let mut term = 1.0 / gamma(nu + 1.0);
    let mut sum = term;
    for m in 1..200 {
        let mf = m as f64;
        term *= q / (mf * (mf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

pub fn bessel_j(nu: f64, z: f64) -> f64 {
    (z / 2.0).powf(nu) * bessel_j_scaled(nu, z)
}

/// First positive zero of `J_nu`, located by scanning and bisection.
pub fn bessel_j_first_zero(nu: f64) -> f64 {
    let step = 0.01;
    let mut lo = step;
    let mut f_lo = bessel_j_scaled(nu, lo);
    loop {
        let hi = lo + step;
        let f_hi = bessel_j_scaled(nu, hi);
        if f_lo.signum() != f_hi.signum() {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if bessel_j_scaled(nu, m).signum() == f_lo.signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            return 0.5 * (a + b);
        }
        lo = hi;
        f_lo = f_hi;
    }
}
