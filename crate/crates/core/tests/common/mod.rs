//! Independent numerical oracles for the integration tests. Nothing here calls the
//! library's quadrature or special-function code.
#![allow(dead_code)]

use filtered_vortex::Vec2;

/// Adaptive Simpson rule with Richardson correction.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Trapezoid sum over `[0, inf)` of an even, analytic, rapidly decaying integrand,
/// which converges geometrically in the step size.
fn even_trapezoid<F: Fn(f64) -> f64>(f: F, h: f64, t_max: f64) -> f64 {
    let mut s = 0.5 * f(0.0);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        if t > t_max {
            break;
        }
        s += f(t);
        k += 1;
    }
    s * h
}

/// `K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    let t_max = (2.0 * (750.0 / x)).ln().max(1.0) + 1.0;
    even_trapezoid(|t| (-x * t.cosh()).exp() * (nu * t).cosh(), 0.01, t_max)
}

/// `int_0^r s K_0(s) ds` via `K_0(s) = int exp(-s cosh t) dt` and the inner integral
/// in closed form.
pub fn alpha_cumulative_mass(r: f64) -> f64 {
    even_trapezoid(
        |t| {
            let a = t.cosh();
            let x = a * r;
            let inner = if x < 1e-3 {
                // 1 - e^{-x}(1+x) = x^2/2 - x^3/3 + x^4/8 - ...
                x * x * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0)
            } else {
                1.0 - (-x).exp() * (1.0 + x)
            };
            inner / (a * a)
        },
        0.005,
        40.0,
    )
}

/// `2 pi int_0^r s h_blob(s) ds` by adaptive quadrature.
pub fn blob_cumulative_mass(r: f64) -> f64 {
    let f = |s: f64| 2.0 * s / ((s * s + 1.0) * (s * s + 1.0));
    simpson(&f, 0.0, r, 1e-13)
}

/// Analytic rotation of a point about the origin.
pub fn rotate(p: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
