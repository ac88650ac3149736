//! Mean-zero Hölder test functions on the torus and their Fourier data.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use super::kernel::jackson_coefficients;
use crate::error::{Error, Result};
use crate::torus::{torus_distance_raw, FourierBox, FourierIndex, TorusPoint};

/// Quadrature grid for distance-power coefficients, per axis.
const GRID_1D: usize = 1 << 16;
const GRID_2D: usize = 1 << 10;

/// Safety factor applied to grid-measured Hölder quotients.
pub const HOLDER_SAFETY: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunctionKind {
    /// `f(x) = sum_h c_h e(<h, x>)`; only sign-canonical `h` are stored, the
    /// conjugate half is implied.
    Trigonometric { terms: Vec<(FourierIndex, Complex64)> },
    /// `f(x) = ||x - center||^exponent - mean`.
    DistancePower { center: Vec<f64>, exponent: f64 },
}

#[derive(Debug, Clone)]
pub struct TestFunction {
    d: usize,
    kind: TestFunctionKind,
    holder_exponent: f64,
    holder_norm_estimate: f64,
    mean: f64,
    /// Raw DFT of the uncentered power on the quadrature grid.
    grid_dft: Option<Arc<Vec<Complex64>>>,
}

impl PartialEq for TestFunction {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d
            && self.kind == other.kind
            && self.holder_exponent == other.holder_exponent
            && self.holder_norm_estimate == other.holder_norm_estimate
    }
}

/// `int ||x||^a dx` over the d-torus, for d in {1, 2}.
fn power_mean(d: usize, a: f64) -> f64 {
    match d {
        1 => 0.5f64.powf(a) / (a + 1.0),
        _ => {
            // polar coordinates over the eighth of the square below the diagonal:
            // 8 / (a + 2) * int_0^{pi/4} (2 cos t)^{-(a+2)} dt, composite Simpson
            let n = 4096;
            let hstep = (PI / 4.0) / n as f64;
            let g = |t: f64| (2.0 * t.cos()).powf(-(a + 2.0));
            let mut s = g(0.0) + g(PI / 4.0);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * g(i as f64 * hstep);
            }
            8.0 / (a + 2.0) * s * hstep / 3.0
        }
    }
}

impl TestFunction {
    /// A real trigonometric polynomial from coefficients `c_h`.
    ///
    /// Both `h` and `-h` may be listed (they must then be conjugate); a term
    /// listed only once gets its conjugate partner implied. The `h = 0` term
    /// is dropped so the function has mean zero.
    pub fn trigonometric(d: usize, terms: Vec<(Vec<i64>, Complex64)>, holder_exponent: f64) -> Result<Self> {
        validate_exponent(holder_exponent)?;
        if d == 0 {
            return Err(Error::invalid("f", "dimension must be at least 1"));
        }
        let mut map: BTreeMap<FourierIndex, Complex64> = BTreeMap::new();
        for (h, c) in terms {
            if h.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: h.len(),
                });
            }
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::invalid("f", "coefficients must be finite"));
            }
            let h = FourierIndex(h);
            if h.is_zero() {
                continue;
            }
            let (key, val) = if h.is_sign_canonical() {
                (h, c)
            } else {
                (h.neg(), c.conj())
            };
            if let Some(prev) = map.get(&key) {
                if (prev - val).norm() > 1e-12 * (1.0 + val.norm()) {
                    return Err(Error::invalid(
                        "f",
                        format!("coefficients at {:?} and its negative are not conjugate", key.0),
                    ));
                }
            } else {
                map.insert(key, val);
            }
        }
        let terms: Vec<_> = map.into_iter().filter(|(_, c)| *c != Complex64::new(0.0, 0.0)).collect();
        let mut f = Self {
            d,
            kind: TestFunctionKind::Trigonometric { terms },
            holder_exponent,
            holder_norm_estimate: 0.0,
            mean: 0.0,
            grid_dft: None,
        };
        f.holder_norm_estimate = f.measured_holder_quotient() * HOLDER_SAFETY;
        Ok(f)
    }

    /// `amplitude * cos(2 pi <h, x>)`.
    pub fn cosine(h: Vec<i64>, amplitude: f64) -> Result<Self> {
        let d = h.len();
        Self::trigonometric(d, vec![(h, Complex64::new(amplitude / 2.0, 0.0))], 1.0)
    }

    pub fn zero(d: usize) -> Self {
        Self {
            d,
            kind: TestFunctionKind::Trigonometric { terms: Vec::new() },
            holder_exponent: 1.0,
            holder_norm_estimate: 0.0,
            mean: 0.0,
            grid_dft: None,
        }
    }

    /// `||x - center||^exponent` minus its mean, a Hölder function with
    /// exponent `exponent` and norm 1. Supported for d in {1, 2}.
    pub fn distance_power(center: &TorusPoint, exponent: f64) -> Result<Self> {
        validate_exponent(exponent)?;
        let d = center.dim();
        if d > 2 {
            return Err(Error::UnsupportedDimension {
                d,
                reason: "distance-power quadrature is implemented for d <= 2".into(),
            });
        }
        let dft = distance_power_dft(d, exponent);
        let mut f = Self {
            d,
            kind: TestFunctionKind::DistancePower {
                center: center.coords().to_vec(),
                exponent,
            },
            holder_exponent: exponent,
            holder_norm_estimate: 0.0,
            mean: power_mean(d, exponent),
            grid_dft: Some(Arc::new(dft)),
        };
        f.holder_norm_estimate = f.measured_holder_quotient() * HOLDER_SAFETY;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> &TestFunctionKind {
        &self.kind
    }

    pub fn holder_exponent(&self) -> f64 {
        self.holder_exponent
    }

    pub fn holder_norm_estimate(&self) -> f64 {
        self.holder_norm_estimate
    }

    pub fn is_zero(&self) -> bool {
        matches!(&self.kind, TestFunctionKind::Trigonometric { terms } if terms.is_empty())
    }

    /// Largest `||h||_inf` with a nonzero coefficient, for trigonometric `f`.
    pub fn degree(&self) -> Option<u64> {
        match &self.kind {
            TestFunctionKind::Trigonometric { terms } => {
                Some(terms.iter().map(|(h, _)| h.sup_norm()).max().unwrap_or(0))
            }
            TestFunctionKind::DistancePower { .. } => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            TestFunctionKind::Trigonometric { terms } => {
                let mut s = 0.0;
                for (h, c) in terms {
                    let t = 2.0 * PI * h.dot(x);
                    s += c.re * t.cos() - c.im * t.sin();
                }
                2.0 * s
            }
            TestFunctionKind::DistancePower { center, exponent } => {
                torus_distance_raw(x, center).powf(*exponent) - self.mean
            }
        }
    }

    /// `int f^2 d mu`.
    pub fn l2_norm_sq(&self) -> f64 {
        match &self.kind {
            TestFunctionKind::Trigonometric { terms } => {
                2.0 * terms.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>()
            }
            TestFunctionKind::DistancePower { exponent, .. } => {
                power_mean(self.d, 2.0 * exponent) - self.mean * self.mean
            }
        }
    }

    /// Fourier coefficients on the box `||h||_inf < bound`, in the box's
    /// linear-index order. Distance powers use the trapezoidal rule on a
    /// `2^16` (d = 1) or `2^10 x 2^10` (d = 2) grid, accurate to
    /// `O(grid^-(1 + exponent))`.
    pub fn fourier_coefficients(&self, bound: usize) -> Result<Vec<Complex64>> {
        let fbox = FourierBox::new(self.d, bound.max(1));
        let mut out = vec![Complex64::new(0.0, 0.0); fbox.len()];
        match &self.kind {
            TestFunctionKind::Trigonometric { terms } => {
                for (h, c) in terms {
                    if let Some(i) = fbox.index_of(&h.0) {
                        out[i] = *c;
                        out[fbox.index_of(&h.neg().0).expect("box is symmetric")] = c.conj();
                    }
                }
            }
            TestFunctionKind::DistancePower { center, .. } => {
                let n = if self.d == 1 { GRID_1D } else { GRID_2D };
                if bound > n / 2 {
                    return Err(Error::cap("Fourier box for quadrature coefficients", bound, n / 2));
                }
                let dft = self.grid_dft.as_ref().expect("distance power carries its DFT");
                let scale = 1.0 / (n as f64).powi(self.d as i32);
                for (i, slot) in out.iter_mut().enumerate() {
                    let h = fbox.index_at(i);
                    if h.iter().all(|&c| c == 0) {
                        continue;
                    }
                    let mut idx = 0usize;
                    for &c in h.iter().rev() {
                        idx = idx * n + c.rem_euclid(n as i64) as usize;
                    }
                    let phase: f64 = h.iter().zip(center).map(|(&hj, &xj)| hj as f64 * xj).sum();
                    *slot = dft[idx] * scale * Complex64::from_polar(1.0, -2.0 * PI * phase);
                }
            }
        }
        Ok(out)
    }

    /// Convolution with the product Jackson kernel of order `H`:
    /// `f_H_hat(h) = prod_j a_{h_j} f_hat(h)` on `||h||_inf < 2H - 1`.
    ///
    /// The Hölder estimate is inherited, since convolving with a probability
    /// density does not increase Hölder norms.
    pub fn smooth(&self, h_order: usize) -> Result<TestFunction> {
        let a = jackson_coefficients(h_order.max(1));
        let bound = 2 * h_order.max(1) - 1;
        let fbox = FourierBox::new(self.d, bound);
        let coeffs = self.fourier_coefficients(bound)?;
        let mut terms = Vec::new();
        for (i, c) in coeffs.iter().enumerate() {
            let h = FourierIndex(fbox.index_at(i));
            if !h.is_sign_canonical() || *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let w: f64 = h.0.iter().map(|&hj| a[hj.unsigned_abs() as usize]).product();
            terms.push((h, c * w));
        }
        terms.sort_by(|x, y| x.0.cmp(&y.0));
        Ok(TestFunction {
            d: self.d,
            kind: TestFunctionKind::Trigonometric { terms },
            holder_exponent: self.holder_exponent,
            holder_norm_estimate: self.holder_norm_estimate,
            mean: 0.0,
            grid_dft: None,
        })
    }

    /// Max of `|f(x) - f(y)| / ||x - y||^p` over all pairs of a uniform grid
    /// with about 4096 points (`2^12` for d = 1, `64^2` for d = 2).
    pub fn measured_holder_quotient(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let n = ((4096f64).powf(1.0 / self.d as f64).round() as usize).max(2);
        let total = n.pow(self.d as u32);
        let point = |mut i: usize| -> Vec<f64> {
            let mut x = vec![0.0; self.d];
            for c in x.iter_mut() {
                *c = (i % n) as f64 / n as f64;
                i /= n;
            }
            x
        };
        let values: Vec<f64> = (0..total).map(|i| self.eval(&point(i))).collect();
        let p = self.holder_exponent;
        // translation structure: pair (i, i + s) over offsets s
        (1..total)
            .into_par_iter()
            .map(|s| {
                let off = point(s);
                let dist = torus_distance_raw(&off, &vec![0.0; self.d]).powf(p);
                let mut best = 0.0f64;
                for i in 0..total {
                    // index of grid point i shifted by s, per axis mod n
                    let (mut a, mut b, mut j, mut m) = (i, s, 0usize, 1usize);
                    for _ in 0..self.d {
                        j += ((a % n + b % n) % n) * m;
                        a /= n;
                        b /= n;
                        m *= n;
                    }
                    best = best.max((values[j] - values[i]).abs());
                }
                best / dist
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "d": self.d,
            "function": self.kind,
            "holder_exponent": self.holder_exponent,
            "holder_norm_estimate": self.holder_norm_estimate,
        })
    }
}

fn validate_exponent(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("holder_exponent", "must lie in (0, 1]"))
    }
}

fn distance_power_dft(d: usize, a: f64) -> Vec<Complex64> {
    let n = if d == 1 { GRID_1D } else { GRID_2D };
    let dist1 = |j: usize| {
        let t = j as f64 / n as f64;
        t.min(1.0 - t)
    };
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    if d == 1 {
        let mut buf: Vec<Complex64> = (0..n).map(|j| Complex64::new(dist1(j).powf(a), 0.0)).collect();
        fft.process(&mut buf);
        return buf;
    }
    // row-major, x_1 fastest
    let mut buf: Vec<Complex64> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx % n, idx / n);
            Complex64::new((dist1(i).powi(2) + dist1(j).powi(2)).sqrt().powf(a), 0.0)
        })
        .collect();
    for row in buf.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        for j in 0..n {
            col[j] = buf[j * n + i];
        }
        fft.process(&mut col);
        for j in 0..n {
            buf[j * n + i] = col[j];
        }
    }
    buf
}

/// `sum_{||h||_inf < H} |f_hat(h)|^2 |h|^2 / L^2` with `L` the Hölder
/// estimate; for Lipschitz `f` this is at most `d / (4 pi^2)`.
pub fn lipschitz_fourier_decay_check(f: &TestFunction, h_bound: usize) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    let fbox = FourierBox::new(f.dim(), h_bound.max(1));
    let coeffs = f.fourier_coefficients(h_bound.max(1))?;
    let s: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c.norm_sqr() * FourierIndex(fbox.index_at(i)).norm_sq() as f64)
        .sum();
    let l = f.holder_norm_estimate();
    Ok(s / (l * l))
}
