//! Fejér and Jackson kernels on the circle.
//!
//! Both closed forms have removable singularities at the integers; near
//! them (`|sin(pi x)| < 1e-6`) the truncated Fourier series is used instead.

use std::f64::consts::{LN_2, PI};

const SERIES_SWITCH: f64 = 1e-6;

/// `sum_{|h| < H} (1 - |h|/H) e(h x)`.
pub fn fejer_series(h_order: usize, x: f64) -> f64 {
    let hf = h_order as f64;
    let mut s = 1.0;
    for h in 1..h_order {
        s += 2.0 * (1.0 - h as f64 / hf) * (2.0 * PI * h as f64 * x).cos();
    }
    s
}

/// `F_H(x) = sin^2(pi H x) / (H sin^2(pi x))`.
pub fn fejer_kernel(h_order: usize, x: f64) -> f64 {
    assert!(h_order >= 1, "Fejér kernel needs H >= 1");
    let x = x - x.round();
    let s = (PI * x).sin();
    if s.abs() < SERIES_SWITCH {
        return fejer_series(h_order, x);
    }
    let hf = h_order as f64;
    let n = (PI * hf * x).sin();
    n * n / (hf * s * s)
}

/// Number of ways to write `m` as an ordered sum of four integers in `[0, H)`.
fn four_fold_box_count(h_order: i128, m: i128) -> i128 {
    let binom3 = |n: i128| if n < 3 { 0 } else { n * (n - 1) * (n - 2) / 6 };
    let signs = [1, -4, 6, -4, 1];
    (0..5)
        .map(|i| {
            let t = m - i as i128 * h_order;
            if t < 0 {
                0
            } else {
                signs[i] * binom3(t + 3)
            }
        })
        .sum()
}

/// Jackson coefficients `a_0, a_1, ..., a_{2H-2}` (with `a_{-h} = a_h`).
///
/// The triangle weights `H - |j|` are the self-convolution of a box of
/// length `H`, so their autocorrelation is the four-fold box convolution,
/// counted exactly by inclusion-exclusion.
pub fn jackson_coefficients(h_order: usize) -> Vec<f64> {
    assert!(h_order >= 1, "Jackson kernel needs H >= 1");
    let hh = h_order as i128;
    let shift = 2 * (hh - 1);
    let norm = four_fold_box_count(hh, shift);
    debug_assert_eq!(norm, hh * (2 * hh * hh + 1) / 3);
    (0..(2 * h_order - 1))
        .map(|h| four_fold_box_count(hh, h as i128 + shift) as f64 / norm as f64)
        .collect()
}

/// `sum_{|h| < 2H-1} a_h e(h x)`.
pub fn jackson_series(h_order: usize, x: f64) -> f64 {
    let a = jackson_coefficients(h_order);
    jackson_series_with(&a, x)
}

pub(crate) fn jackson_series_with(a: &[f64], x: f64) -> f64 {
    let mut s = a[0];
    for (h, &ah) in a.iter().enumerate().skip(1) {
        s += 2.0 * ah * (2.0 * PI * h as f64 * x).cos();
    }
    s
}

/// `K_H(x) = 3 / (2H^3 + H) * sin^4(pi H x) / sin^4(pi x)`.
pub fn jackson_kernel(h_order: usize, x: f64) -> f64 {
    assert!(h_order >= 1, "Jackson kernel needs H >= 1");
    let x = x - x.round();
    let s = (PI * x).sin();
    if s.abs() < SERIES_SWITCH {
        return jackson_series(h_order, x);
    }
    let hf = h_order as f64;
    let q = (PI * hf * x).sin() / s;
    3.0 / (2.0 * hf.powi(3) + hf) * q.powi(4)
}

/// Sup-norm distance between a 1-Lipschitz `f` on the d-torus and its
/// smoothing with the product Jackson kernel of order `H`:
/// `||f - f_H||_inf <= (3 pi^2 log 2) d / (16 H + 8 / H)`.
pub fn jackson_sup_bound(d: usize, h_order: usize) -> f64 {
    let hf = h_order as f64;
    3.0 * PI * PI * LN_2 * d as f64 / (16.0 * hf + 8.0 / hf)
}
