//! Adaptive Gauss-Kronrod quadrature and fixed Gauss-Legendre rules.

use crate::error::{Error, Result};

// Kronrod 15-point nodes (nonnegative half) and weights; the Gauss 7-point rule
// reuses the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Four-point Gauss-Legendre nodes on `[-1, 1]`.
pub const GAUSS4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
/// Matching weights (sum to 2).
pub const GAUSS4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Settings for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct AdaptiveConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_panels: 4000,
        }
    }
}

/// One G7/K15 panel: returns `(kronrod, |kronrod - gauss|)`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive Gauss-Kronrod integration: the panel with the largest error
/// estimate is bisected until the summed estimate meets the tolerance. Never
/// evaluates `f` at the endpoints, so integrable endpoint singularities are fine.
///
/// A panel whose estimate is already tiny and does not shrink under bisection (or
/// whose halves hit a non-finite value) is limited by rounding in `f`; it is kept
/// as is and no longer refined.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: AdaptiveConfig) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let max_panels = cfg.max_panels.max(1);
    let (v0, e0) = gk15(&f, a, b);
    if !v0.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
    }
    let mut panels = vec![Panel { lo: a, hi: b, value: v0, err: e0, frozen: false }];
    let mut total = v0;
    let mut total_err = e0;
    loop {
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total_err <= tol || total_err < 1e-300 {
            // re-sum to shed accumulated rounding from the running updates
            return Ok(panels.iter().map(|p| p.value).sum());
        }
        if panels.len() >= max_panels {
            return Err(Error::Quadrature(format!(
                "error estimate {total_err:e} above tolerance after {max_panels} panels on [{a}, {b}]"
            )));
        }
        let (worst, worst_err) = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.frozen)
            .fold((0, -1.0), |acc, (i, p)| if p.err > acc.1 { (i, p.err) } else { acc });
        if worst_err < 0.0 {
            return Ok(panels.iter().map(|p| p.value).sum());
        }
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.lo + p.hi);
        let roundoff_scale = ROUNDOFF_LEVEL * (1.0 + total.abs());
        if !(mid > p.lo.min(p.hi) && mid < p.lo.max(p.hi)) {
            return Err(Error::Quadrature(format!("panel collapsed near {mid}")));
        }
        let (vl, el) = gk15(&f, p.lo, mid);
        let (vr, er) = gk15(&f, mid, p.hi);
        let finite = vl.is_finite() && vr.is_finite();
        if p.err <= roundoff_scale && (!finite || el + er >= p.err) {
            total_err -= p.err;
            panels.push(Panel { frozen: true, ..p });
            continue;
        }
        if !finite {
            return Err(Error::Quadrature(format!("non-finite integrand on [{}, {}]", p.lo, p.hi)));
        }
        total += vl + vr - p.value;
        total_err += el + er - p.err;
        panels.push(Panel { lo: p.lo, hi: mid, value: vl, err: el, frozen: false });
        panels.push(Panel { lo: mid, hi: p.hi, value: vr, err: er, frozen: false });
    }
}

/// Panel error estimates below this fraction of the integral can be roundoff limited.
const ROUNDOFF_LEVEL: f64 = 1e-9;

struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
    /// no longer refined
    frozen: bool,
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol * (1.0 + c.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Bisection root of a monotone function with `f(lo) <= 0 <= f(hi)`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_smooth() {
        let v = integrate(|x| x * x * x, 0.0, 2.0, AdaptiveConfig::default()).unwrap();
        assert!((v - 4.0).abs() < 1e-13);
        let v = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, AdaptiveConfig::default())
            .unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity() {
        let v = integrate(|x: f64| x.ln(), 0.0, 1.0, AdaptiveConfig::default()).unwrap();
        assert!((v + 1.0).abs() < 1e-9);
    }

    #[test]
    fn gauss4_exact_for_degree_seven() {
        let v: f64 = GAUSS4_NODES
            .iter()
            .zip(GAUSS4_WEIGHTS)
            .map(|(&x, w)| w * x.powi(6))
            .sum();
        assert!((v - 2.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn golden_and_bisect() {
        let (x, fx) = golden_max(|r| -(r - 1.3) * (r - 1.3) + 2.0, 0.0, 5.0, 1e-12);
        assert!((x - 1.3).abs() < 1e-6 && (fx - 2.0).abs() < 1e-12);
        let root = bisect(|x| x * x - 2.0, 0.0, 2.0);
        assert!((root - 2f64.sqrt()).abs() < 1e-15);
    }
}
