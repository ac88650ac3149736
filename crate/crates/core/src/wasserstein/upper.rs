//! Berry–Esseen smoothing upper bounds for W_1 on the torus,
//! `W_1 <= 6d/H + sqrt(d)/(2 pi) (sum_{0 < ||h||_inf < H} |nu1_hat - nu2_hat|^2 / |h|^2)^(1/2)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::spectral::{SpectralCache, StepDistribution};
use crate::torus::{FourierBox, FourierIndex};

/// Which smoothing constant to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingConstant {
    /// `6d / H` over the box `||h||_inf < H`.
    #[default]
    Displayed,
    /// `(3 pi^2 log 2) d / (8J + 4/J)` with Jackson order `J = floor((H+1)/2)`
    /// over the box `||h||_inf < 2J - 1`.
    Jackson,
}

impl SmoothingConstant {
    /// The smoothing term and the exclusive Fourier box bound actually summed.
    pub fn term(self, d: usize, h_bound: usize) -> (f64, usize) {
        let df = d as f64;
        match self {
            SmoothingConstant::Displayed => (6.0 * df / h_bound as f64, h_bound),
            SmoothingConstant::Jackson => {
                let j = ((h_bound + 1) / 2).max(1);
                let jf = j as f64;
                (3.0 * PI * PI * LN_2 * df / (8.0 * jf + 4.0 / jf), 2 * j - 1)
            }
        }
    }
}

/// The smoothing bound for two measures given by their Fourier caches.
pub fn berry_esseen_upper(
    nu1: &SpectralCache,
    nu2: &SpectralCache,
    h_bound: usize,
    constant: SmoothingConstant,
) -> Result<f64> {
    if h_bound == 0 {
        return Err(Error::invalid("H", "must be at least 1"));
    }
    if nu1.dim() != nu2.dim() {
        return Err(Error::DimensionMismatch {
            expected: nu1.dim(),
            found: nu2.dim(),
        });
    }
    let d = nu1.dim();
    let (smooth, bound) = constant.term(d, h_bound);
    nu1.require(bound)?;
    nu2.require(bound)?;
    let fbox = FourierBox::new(d, bound);
    let mut s = 0.0;
    for h in fbox.iter() {
        let fi = FourierIndex(h);
        if fi.is_zero() {
            continue;
        }
        let a = nu1.get(&fi.0).expect("covered");
        let b = nu2.get(&fi.0).expect("covered");
        s += (a - b).norm_sqr() / fi.norm_sq() as f64;
    }
    Ok(smooth + (d as f64).sqrt() / (2.0 * PI) * s.sqrt())
}

/// `|nu_hat(h)|^2` grouped by shell `||h||_inf = s`, with the weights
/// `1 / |h|^2`, reused across step counts.
#[derive(Debug, Clone)]
pub struct ShellTable {
    d: usize,
    /// Per shell `s = 1..H_max-1`: pairs `(|nu_hat|^2, 1/|h|^2)` over
    /// sign-canonical `h` (each counted twice in the sums).
    shells: Vec<Vec<(f64, f64)>>,
}

impl ShellTable {
    pub fn build(nu: &StepDistribution, h_max: usize) -> Self {
        let d = nu.d();
        let h_max = h_max.max(1);
        let shells: Vec<Vec<(f64, f64)>> = (1..h_max)
            .into_par_iter()
            .map(|s| shell_points(d, s as i64)
                .into_iter()
                .map(|h| {
                    let fi = FourierIndex(h);
                    (nu.nu_hat(&fi.0).norm_sqr(), 1.0 / fi.norm_sq() as f64)
                })
                .collect())
            .collect();
        Self { d, shells }
    }

    pub fn h_max(&self) -> usize {
        self.shells.len() + 1
    }

    /// Prefix sums `P(H) = sum_{0 < ||h||_inf < H} |nu_hat(h)|^(2k) / |h|^2`
    /// for `H = 1..=H_max`.
    pub fn prefix_sums(&self, k: u64) -> Vec<f64> {
        let per_shell: Vec<f64> = self
            .shells
            .par_iter()
            .map(|sh| 2.0 * sh.iter().map(|&(a2, w)| pow_u64(a2, k) * w).sum::<f64>())
            .collect();
        let mut out = Vec::with_capacity(per_shell.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for v in per_shell {
            acc += v;
            out.push(acc);
        }
        out
    }
}

fn pow_u64(x: f64, k: u64) -> f64 {
    if k <= i32::MAX as u64 {
        x.powi(k as i32)
    } else {
        x.powf(k as f64)
    }
}

/// Sign-canonical points with `||h||_inf = s`, generated by the first
/// coordinate reaching `|h_j| = s`.
fn shell_points(d: usize, s: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for j in 0..d {
        // coordinates before j in (-s, s); the first nonzero one must be
        // positive, or h_j = +s when all of them vanish
        let before = (2 * s - 1).max(0) as usize;
        let after = (2 * s + 1) as usize;
        let total = before.pow(j as u32) * after.pow((d - j - 1) as u32);
        for mut idx in 0..total {
            let mut h = Vec::with_capacity(d);
            for _ in 0..j {
                h.push((idx % before) as i64 - (s - 1));
                idx /= before;
            }
            h.push(s);
            for _ in j + 1..d {
                h.push((idx % after) as i64 - s);
                idx /= after;
            }
            if let Some(&first) = h[..j].iter().find(|&&x| x != 0) {
                if first < 0 {
                    continue;
                }
                out.push(h.clone());
                h[j] = -s;
                out.push(h);
            } else {
                out.push(h);
            }
        }
    }
    out
}

/// Result of minimizing the smoothing bound over H.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperBound {
    /// Bound on `W_1(nu^{*k}, mu)`.
    pub w1: f64,
    /// `w1^p`, a bound on `W_p`.
    pub value: f64,
    pub h: usize,
}

fn bound_at(d: usize, prefix: &[f64], h: usize, constant: SmoothingConstant) -> f64 {
    let (smooth, bound) = constant.term(d, h);
    smooth + (d as f64).sqrt() / (2.0 * PI) * prefix[bound - 1].max(0.0).sqrt()
}

/// `min_{1 <= H <= H_max}` of the bound for `W_1(nu^{*k}, mu)`, raised to the
/// power `p`. Ties go to the smallest `H`.
pub fn optimize_upper(table: &ShellTable, k: u64, p: f64, constant: SmoothingConstant) -> Result<UpperBound> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid("p", "must lie in (0, 1]"));
    }
    let prefix = table.prefix_sums(k);
    let mut best = (f64::INFINITY, 1usize);
    for h in 1..=table.h_max() {
        let v = bound_at(table.d, &prefix, h, constant);
        if v < best.0 {
            best = (v, h);
        }
    }
    Ok(UpperBound {
        w1: best.0,
        value: if p == 1.0 { best.0 } else { best.0.powf(p) },
        h: best.1,
    })
}

/// Golden-section search for the minimizing H on `[1, H_max]`; agrees with
/// the exhaustive scan when the bound is unimodal in H.
pub fn optimize_upper_golden(table: &ShellTable, k: u64, constant: SmoothingConstant) -> UpperBound {
    let prefix = table.prefix_sums(k);
    let f = |h: usize| bound_at(table.d, &prefix, h, constant);
    let (mut lo, mut hi) = (1usize, table.h_max());
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 3 {
        let span = (hi - lo) as f64;
        let m1 = hi - (ratio * span).round() as usize;
        let m2 = lo + (ratio * span).round() as usize;
        let (m1, m2) = (m1.min(m2), m1.max(m2));
        if m1 == m2 {
            break;
        }
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let (v, h) = (lo..=hi).map(|h| (f(h), h)).fold((f64::INFINITY, 1), |a, b| if b.0 < a.0 { b } else { a });
    UpperBound { w1: v, value: v, h }
}

/// The counting sum `B_m = sum_{0 < ||h||_inf < m} exp(-c k max_i ||<h, alpha_i>||^2)`,
/// which controls the tail of the smoothing sum.
pub fn counting_sum(alphas: &[Vec<f64>], k: u64, c: f64, m: usize) -> Result<f64> {
    let d = alphas.first().map(Vec::len).ok_or(Error::EmptySet)?;
    let fbox = FourierBox::new(d, m.max(1));
    let kc = c * k as f64;
    Ok(fbox
        .iter()
        .filter(|h| h.iter().any(|&x| x != 0))
        .map(|h| {
            let worst = alphas
                .iter()
                .map(|a| crate::torus::nearest_integer_norm(h.iter().zip(a).map(|(&x, y)| x as f64 * y).sum()))
                .fold(0.0, f64::max);
            (-kc * worst * worst).exp()
        })
        .sum())
}
