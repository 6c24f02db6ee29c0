//! Fast evaluation of the alpha-kernel profile `P(r) = 1 - r K_1(r)` for velocity sums.
//!
//! Piecewise quintic Hermite interpolation in `u = ln r` on `[R_LO, R_HI]`, built
//! once from exact values and derivatives; the series is used below `R_LO` and
//! `P = 1` to double precision above `R_HI`.

use std::sync::OnceLock;

use crate::bessel;

const R_LO: f64 = 0.05;
const R_HI: f64 = 40.0;
const INTERVALS: usize = 2048;

struct Table {
    u0: f64,
    inv_h: f64,
    coef: Vec<[f64; 6]>,
}

fn build() -> Table {
    let u0 = R_LO.ln();
    let u1 = R_HI.ln();
    let h = (u1 - u0) / INTERVALS as f64;
    // P, dP/du = r^2 K0, d2P/du2 = 2 r^2 K0 - r^3 K1
    let node = |i: usize| {
        let r = (u0 + i as f64 * h).exp();
        let (k0, k1) = (bessel::k0(r), bessel::k1(r));
        let r2 = r * r;
        (bessel::one_minus_x_k1(r), r2 * k0, 2.0 * r2 * k0 - r2 * r * k1)
    };
    let mut prev = node(0);
    let mut coef = Vec::with_capacity(INTERVALS);
    for i in 0..INTERVALS {
        let next = node(i + 1);
        let (p0, d0, s0) = (prev.0, prev.1 * h, prev.2 * h * h);
        let (p1, d1, s1) = (next.0, next.1 * h, next.2 * h * h);
        // monomial coefficients in t in [0, 1]
        let c3 = 10.0 * (p1 - p0) - 6.0 * d0 - 4.0 * d1 - 1.5 * s0 + 0.5 * s1;
        let c4 = -15.0 * (p1 - p0) + 8.0 * d0 + 7.0 * d1 + 1.5 * s0 - s1;
        let c5 = 6.0 * (p1 - p0) - 3.0 * (d0 + d1) - 0.5 * s0 + 0.5 * s1;
        coef.push([p0, d0, 0.5 * s0, c3, c4, c5]);
        prev = next;
    }
    Table { u0, inv_h: 1.0 / h, coef }
}

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(build)
}

/// `1 - r K_1(r)` for `r >= 0`, within about `1e-15` of the exact profile.
pub(crate) fn pk_fast(r: f64) -> f64 {
    if r < R_LO {
        return bessel::one_minus_x_k1(r);
    }
    if r >= R_HI {
        return 1.0;
    }
    let t = table();
    let x = (r.ln() - t.u0) * t.inv_h;
    let i = (x as usize).min(INTERVALS - 1);
    let s = x - i as f64;
    let c = &t.coef[i];
    c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * (c[4] + s * c[5]))))
}
