//! Special functions needed by the closed-form chains: log-gamma and Bessel
//! functions of the first kind at integer order.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural logarithm of |Γ(x)|.
///
/// Lanczos approximation (g = 7, nine terms) with the reflection formula
/// below x = 1/2. Returns `+inf` at the poles x = 0, -1, -2, ...
pub fn ln_gamma(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 && x == x.floor() {
        return f64::INFINITY;
    }
    // Exact for small integers, which keeps lnΓ(1) = lnΓ(2) = 0 bit-exact.
    if x == x.floor() && x <= 30.0 {
        return ln_factorial(x as u64 - 1);
    }
    if x < 0.5 {
        // Γ(x)Γ(1-x) = π / sin(πx)
        return (PI / (PI * x).sin().abs()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// ln(n!) computed by direct summation for small n and log-gamma beyond.
pub fn ln_factorial(n: u64) -> f64 {
    if n <= 30 {
        let mut prod = 1.0f64;
        for k in 2..=n {
            prod *= k as f64;
        }
        prod.ln()
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// ln of the binomial coefficient C(m, k) for 0 ≤ k ≤ m.
pub fn ln_binomial(m: u64, k: u64) -> f64 {
    debug_assert!(k <= m);
    let k = k.min(m - k);
    if m <= 60 {
        // exact product in f64; every partial product is an integer < 2^60
        let mut c = 1.0f64;
        for i in 0..k {
            c = c * (m - i) as f64 / (i + 1) as f64;
        }
        return c.round().ln();
    }
    ln_factorial(m) - ln_factorial(k) - ln_factorial(m - k)
}

/// Bessel function of the first kind J_n(x) for integer n ≥ 0.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    bessel_j_orders(n, x)[n as usize]
}

/// J_0(x), ..., J_{n_max}(x) in one backward sweep.
///
/// Miller's algorithm: the three-term recurrence is run downward from an
/// order well above both `n_max` and |x|, then normalized with
/// J_0 + 2 Σ_k J_{2k} = 1. Backward recurrence is stable for J at every
/// order, so one sweep covers the oscillatory region x > n as well.
pub fn bessel_j_orders(n_max: u32, x: f64) -> Vec<f64> {
    let len = n_max as usize + 1;
    let mut out = vec![0.0; len];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = (n_max as f64).max(ax) + 30.0 + 12.0 * ax.cbrt();
    let mut m = top.ceil() as usize;
    if m % 2 == 1 {
        m += 1;
    }

    const BIG: f64 = 1e250;
    let two_over_x = 2.0 / ax;
    let mut j_next = 0.0; // J_{k+1}
    let mut j_cur = 1e-300; // J_k, arbitrary seed at k = m
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        // J_{k-1} = (2k/x) J_k - J_{k+1}
        let j_prev = k as f64 * two_over_x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        let order = k - 1;
        if order < len {
            out[order] = j_cur;
        }
        if order % 2 == 0 && order > 0 {
            norm += 2.0 * j_cur;
        }
        if j_cur.abs() > BIG {
            j_cur /= BIG;
            j_next /= BIG;
            norm /= BIG;
            for v in out.iter_mut() {
                *v /= BIG;
            }
        }
    }
    norm += j_cur; // J_0 term
    for v in out.iter_mut() {
        *v /= norm;
    }
    if x < 0.0 {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}
