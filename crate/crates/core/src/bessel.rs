//! Modified Bessel functions of the second kind, orders zero and one.
//!
//! Two branches with the switchover at `x = 2`:
//!
//! * `x <= 2`: the ascending series in `(x/2)^2` (Abramowitz & Stegun 9.6.13 and
//!   9.6.11), which converges quickly and cancels at most one decimal digit here.
//! * `x > 2`: Steed's continued fraction for the ratio `K_1/K_0` together with
//!   Temme's normalisation sum, which carries the `sqrt(pi/2x) e^{-x}` large-argument
//!   prefactor exactly and stays at full double precision down to `x = 2`. The plain
//!   Hankel asymptotic series cannot reach 1e-10 that close to the switchover.

use crate::error::{Error, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Series/continued-fraction switchover point.
pub const SWITCHOVER: f64 = 2.0;

const SERIES_EPS: f64 = 1e-17;
const CF_EPS: f64 = 1e-16;
const MAX_TERMS: usize = 200;

/// `K_0(x)` for `x > 0`.
pub fn bessel_k0(x: f64) -> Result<f64> {
    check_domain(x)?;
    Ok(k0(x))
}

/// `K_1(x)` for `x > 0`.
pub fn bessel_k1(x: f64) -> Result<f64> {
    check_domain(x)?;
    Ok(k1(x))
}

fn check_domain(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "modified Bessel K requires a positive finite argument, got {x}"
        )))
    }
}

/// Unchecked `K_0`; callers guarantee `x > 0`.
pub(crate) fn k0(x: f64) -> f64 {
    if x <= SWITCHOVER {
        let s = small_series(x);
        -(0.5 * x).ln() * s.i0 - EULER_GAMMA * s.i0 + s.h0
    } else {
        steed(x).0
    }
}

/// Unchecked `K_1`; callers guarantee `x > 0`.
pub(crate) fn k1(x: f64) -> f64 {
    if x <= SWITCHOVER {
        let s = small_series(x);
        1.0 / x + s.i1 * (0.5 * x).ln() - 0.25 * x * s.psi1
    } else {
        steed(x).1
    }
}

/// `1 - x K_1(x)`, accurate in relative terms as `x -> 0` (where it behaves like
/// `x^2 log(1/x) / 2`). Equals 0 at `x = 0`.
pub(crate) fn one_minus_x_k1(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x <= SWITCHOVER {
        let s = small_series(x);
        -x * (0.5 * x).ln() * s.i1 + 0.25 * x * x * s.psi1
    } else {
        1.0 - x * steed(x).1
    }
}

/// `K_0(x) + ln x`, finite at the origin where it equals `ln 2 - gamma`.
pub(crate) fn k0_plus_ln(x: f64) -> f64 {
    if x <= 0.0 {
        return std::f64::consts::LN_2 - EULER_GAMMA;
    }
    if x <= SWITCHOVER {
        let s = small_series(x);
        -x.ln() * s.i0_minus_one + (std::f64::consts::LN_2 - EULER_GAMMA) * s.i0 + s.h0
    } else {
        steed(x).0 + x.ln()
    }
}

struct SmallSeries {
    i0: f64,
    i0_minus_one: f64,
    /// sum_{k>=1} H_k t^k / (k!)^2
    h0: f64,
    i1: f64,
    /// sum_{k>=0} [psi(k+1) + psi(k+2)] t^k / (k! (k+1)!)
    psi1: f64,
}

fn small_series(x: f64) -> SmallSeries {
    let t = 0.25 * x * x;
    // term0 = t^k/(k!)^2, term1 = t^k/(k!(k+1)!)
    let mut term0 = 1.0;
    let mut term1 = 1.0;
    let mut harmonic = 0.0;
    let mut i0_minus_one = 0.0;
    let mut h0 = 0.0;
    let mut i1_sum = 1.0;
    let mut psi1 = (-EULER_GAMMA) + (1.0 - EULER_GAMMA);
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term0 *= t / (kf * kf);
        term1 *= t / (kf * (kf + 1.0));
        harmonic += 1.0 / kf;
        i0_minus_one += term0;
        h0 += harmonic * term0;
        i1_sum += term1;
        // psi(k+1) + psi(k+2) = 2 H_k + 1/(k+1) - 2 gamma
        let psi_pair = 2.0 * harmonic + 1.0 / (kf + 1.0) - 2.0 * EULER_GAMMA;
        psi1 += psi_pair * term1;
        if term0 < SERIES_EPS * (1.0 + i0_minus_one) && term1 * psi_pair.abs() < SERIES_EPS {
            break;
        }
    }
    SmallSeries {
        i0: 1.0 + i0_minus_one,
        i0_minus_one,
        h0,
        i1: 0.5 * x * i1_sum,
        psi1,
    }
}

/// Returns `(K_0(x), K_1(x))` for `x > 2` via Steed's method (order zero).
fn steed(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..=10_000usize {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < CF_EPS {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        assert!((bessel_k0(1.0).unwrap() - 0.421_024_438_240_708_3).abs() < 1e-14);
        assert!((bessel_k1(1.0).unwrap() - 0.601_907_230_197_234_6).abs() < 1e-14);
        assert!((bessel_k0(2.5).unwrap() - 0.062_347_553_200_366_8).abs() < 1e-14);
    }

    #[test]
    fn branches_agree_at_switchover() {
        let below = small_series(SWITCHOVER);
        let k0_series = -(0.5 * SWITCHOVER).ln() * below.i0 - EULER_GAMMA * below.i0 + below.h0;
        let (k0_cf, k1_cf) = steed(SWITCHOVER);
        let k1_series =
            1.0 / SWITCHOVER + below.i1 * (0.5 * SWITCHOVER).ln() - 0.25 * SWITCHOVER * below.psi1;
        assert!(((k0_series - k0_cf) / k0_cf).abs() < 1e-14);
        assert!(((k1_series - k1_cf) / k1_cf).abs() < 1e-14);
    }

    #[test]
    fn small_argument_limit() {
        let x = 1e-6;
        assert!((x * bessel_k1(x).unwrap() - 1.0).abs() < 1e-5);
        assert!(one_minus_x_k1(x) > 0.0);
        assert!((one_minus_x_k1(1.0) - (1.0 - k1(1.0))).abs() < 1e-15);
        assert!((k0_plus_ln(1e-300) - (std::f64::consts::LN_2 - EULER_GAMMA)).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(matches!(bessel_k0(0.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_k1(-1.0), Err(Error::Domain(_))));
        assert!(bessel_k0(f64::NAN).is_err());
    }
}
