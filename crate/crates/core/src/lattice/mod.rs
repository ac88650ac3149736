//! Rank-r lattice systems `alpha_1, ..., alpha_r in R^d` and their
//! simultaneous Diophantine quality.
//!
//! The algebraic construction takes a monic integer polynomial of degree
//! `r + d` with distinct real roots ordered `a_1 > ... > a_{r+d}`, forms the Vandermonde
//! block `V_ij = a_i^(j-1)` (r x r) and `W_ij = a_i^(r+j-1)` (r x d), and reads
//! the lattice generators off the rows of `M = V^-1 W`, reduced mod 1.
//! Irreducibility of the polynomial is the caller's responsibility; only the
//! cheap integer-root check is performed.

pub mod poly;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{frac, nearest_integer_norm, FourierIndex};

/// Default enumeration budget for [`diophantine_quality`].
pub const DEFAULT_ENUMERATION_CAP: usize = 50_000_000;

/// Where a lattice system came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatticeSource {
    /// Integer coefficients, constant term first.
    Polynomial { coefficients: Vec<i64> },
    Explicit,
}

/// Measured Diophantine constant of a lattice system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiophantineQuality {
    /// `min_{0 < ||h||_inf <= h_max} max_i ||<h, alpha_i>|| * ||h||_inf^exponent`
    pub k_hat: f64,
    pub argmin: FourierIndex,
    pub exponent: f64,
    pub h_max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSystem {
    pub r: usize,
    pub d: usize,
    pub alphas: Vec<Vec<f64>>,
    pub source: LatticeSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<DiophantineQuality>,
}

impl LatticeSystem {
    /// A system given by explicit vectors; coordinates are reduced mod 1.
    pub fn explicit(alphas: Vec<Vec<f64>>) -> Result<Self> {
        let r = alphas.len();
        if r == 0 {
            return Err(Error::invalid("alphas", "need at least one vector"));
        }
        let d = alphas[0].len();
        if d == 0 {
            return Err(Error::invalid("alphas", "vectors must have dimension >= 1"));
        }
        for a in &alphas {
            if a.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: a.len(),
                });
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("alphas", "entries must be finite"));
            }
        }
        Ok(Self {
            r,
            d,
            alphas: alphas
                .into_iter()
                .map(|a| a.into_iter().map(frac).collect())
                .collect(),
            source: LatticeSource::Explicit,
            quality: None,
        })
    }

    /// The badly-approximable exponent `d / r`.
    pub fn critical_exponent(&self) -> f64 {
        self.d as f64 / self.r as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lattice system serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sys: LatticeSystem =
            serde_json::from_str(s).map_err(|e| Error::invalid("lattice", e.to_string()))?;
        if sys.alphas.len() != sys.r || sys.alphas.iter().any(|a| a.len() != sys.d) {
            return Err(Error::invalid("lattice", "r/d disagree with alphas"));
        }
        Ok(sys)
    }
}

/// Result of the Vandermonde construction, with the unreduced matrix kept
/// around for residual checks.
#[derive(Debug, Clone)]
pub struct PolynomialConstruction {
    pub system: LatticeSystem,
    /// Roots in decreasing order; the first `r` feed the Vandermonde block.
    pub roots: Vec<f64>,
    /// `M = V^-1 W` before reduction mod 1, row-major r x d.
    pub matrix: Vec<Vec<f64>>,
    /// `max |V M - W| / max |W|`.
    pub relative_residual: f64,
}

/// Builds the lattice system of a monic integer polynomial of degree `r + d`.
pub fn construct_from_polynomial(coeffs: &[i64], r: usize, d: usize) -> Result<PolynomialConstruction> {
    if r == 0 || d == 0 {
        return Err(Error::invalid("r/d", "r and d must be at least 1"));
    }
    let degree = coeffs.len().saturating_sub(1);
    if degree != r + d {
        return Err(Error::invalid(
            "polynomial",
            format!("degree {degree} does not equal r + d = {}", r + d),
        ));
    }
    if let Some(n) = poly::integer_roots(coeffs).first() {
        return Err(Error::invalid(
            "polynomial",
            format!("integer root {n}: the polynomial is reducible"),
        ));
    }
    let mut roots = poly::real_roots(coeffs)?;
    roots.reverse();

    let v = DMatrix::from_fn(r, r, |i, j| roots[i].powi(j as i32));
    let w = DMatrix::from_fn(r, d, |i, j| roots[i].powi((r + j) as i32));
    let m = v
        .clone()
        .lu()
        .solve(&w)
        .ok_or_else(|| Error::Singular("Vandermonde block is singular".into()))?;
    let resid = (&v * &m - &w).abs().max();
    let scale = w.abs().max().max(1.0);
    let relative_residual = resid / scale;
    if relative_residual > 1e-10 {
        return Err(Error::Invariant(format!(
            "Vandermonde residual {relative_residual:e} exceeds 1e-10"
        )));
    }
    let matrix: Vec<Vec<f64>> = (0..r)
        .map(|i| (0..d).map(|j| m[(i, j)]).collect())
        .collect();
    let alphas = matrix
        .iter()
        .map(|row| row.iter().map(|&x| frac(x)).collect())
        .collect();
    Ok(PolynomialConstruction {
        system: LatticeSystem {
            r,
            d,
            alphas,
            source: LatticeSource::Polynomial {
                coefficients: coeffs.to_vec(),
            },
            quality: None,
        },
        roots,
        matrix,
        relative_residual,
    })
}

fn max_defect(alphas: &[Vec<f64>], h: &FourierIndex) -> f64 {
    alphas
        .iter()
        .map(|a| nearest_integer_norm(h.dot(a)))
        .fold(0.0, f64::max)
}

/// Empirical badly-approximable constant truncated at `h_max`, using the
/// exponent `d / r`.
pub fn diophantine_quality(sys: &LatticeSystem, h_max: u64) -> Result<DiophantineQuality> {
    diophantine_quality_in_range(sys, 1, h_max, sys.critical_exponent(), DEFAULT_ENUMERATION_CAP)
}

/// Minimum of `max_i ||<h, alpha_i>|| * ||h||_inf^exponent` over
/// `h_min <= ||h||_inf <= h_max`, visiting one of each `{h, -h}` pair.
///
/// Ties resolve to the lexicographically smallest `h`, so the result does not
/// depend on how the work is split across threads.
pub fn diophantine_quality_in_range(
    sys: &LatticeSystem,
    h_min: u64,
    h_max: u64,
    exponent: f64,
    cap: usize,
) -> Result<DiophantineQuality> {
    if h_max == 0 || h_min == 0 || h_min > h_max {
        return Err(Error::invalid("h_max", "need 1 <= h_min <= h_max"));
    }
    let d = sys.d as u32;
    let side = 2 * h_max as u128 + 1;
    let total = side.checked_pow(d).unwrap_or(u128::MAX);
    let count = (total - 1) / 2;
    if count > cap as u128 {
        return Err(Error::cap(
            "h-box enumeration",
            count.min(usize::MAX as u128) as usize,
            cap,
        ));
    }

    // Sign-canonical h: split on the first coordinate. h_1 > 0 with arbitrary
    // tail, or h_1 = 0 with a canonical tail (handled recursively by the
    // flattened enumeration below).
    let hm = h_max as i64;
    let tail_len = sys.d - 1;
    let tail_side = (2 * hm + 1) as usize;
    let tail_count = tail_side.pow(tail_len as u32);
    let decode_tail = |mut idx: usize| -> Vec<i64> {
        let mut t = Vec::with_capacity(tail_len);
        for _ in 0..tail_len {
            t.push((idx % tail_side) as i64 - hm);
            idx /= tail_side;
        }
        t.reverse();
        t
    };

    let best = (0..=hm)
        .into_par_iter()
        .map(|first| {
            let mut best: Option<(f64, FourierIndex)> = None;
            for ti in 0..tail_count {
                let mut h = Vec::with_capacity(sys.d);
                h.push(first);
                h.extend(decode_tail(ti));
                let h = FourierIndex(h);
                if !h.is_sign_canonical() {
                    continue;
                }
                let norm = h.sup_norm();
                if norm < h_min {
                    continue;
                }
                let v = max_defect(&sys.alphas, &h) * (norm as f64).powf(exponent);
                let better = match &best {
                    None => true,
                    Some((bv, bh)) => v < *bv || (v == *bv && h < *bh),
                };
                if better {
                    best = Some((v, h));
                }
            }
            best
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (None, x) | (x, None) => x,
                (Some(a), Some(b)) => {
                    if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                        Some(b)
                    } else {
                        Some(a)
                    }
                }
            },
        )
        .ok_or_else(|| Error::invalid("h_max", "empty enumeration range"))?;

    Ok(DiophantineQuality {
        k_hat: best.0,
        argmin: best.1,
        exponent,
        h_max,
    })
}

/// A nondecreasing positive function on `[1, inf)` used in the Diophantine
/// condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum PsiFunction {
    /// `x^exponent`
    Power { exponent: f64 },
    /// `x^exponent * log(e + x)^log_exponent`
    PowerLog { exponent: f64, log_exponent: f64 },
}

impl PsiFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PsiFunction::Power { exponent } => x.powf(exponent),
            PsiFunction::PowerLog {
                exponent,
                log_exponent,
            } => x.powf(exponent) * (std::f64::consts::E + x).ln().powf(log_exponent),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            PsiFunction::Power { exponent } => exponent > 0.0,
            PsiFunction::PowerLog {
                exponent,
                log_exponent,
            } => exponent > 0.0 && log_exponent >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("psi", "exponents must make psi increasing"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiInverse {
    pub value: f64,
    /// Set when `y < psi(1)`; the value is then clamped to 1.
    pub below_domain: bool,
}

/// Generalized inverse `sup { x >= 1 : psi(x) <= y }`.
pub fn psi_inverse(psi: &PsiFunction, y: f64) -> Result<PsiInverse> {
    psi.validate()?;
    if !y.is_finite() {
        return Err(Error::invalid("y", "must be finite"));
    }
    if y < psi.eval(1.0) {
        return Ok(PsiInverse {
            value: 1.0,
            below_domain: true,
        });
    }
    if let PsiFunction::Power { exponent } = *psi {
        return Ok(PsiInverse {
            value: y.powf(1.0 / exponent),
            below_domain: false,
        });
    }
    let mut lo = 1.0;
    let mut hi = 2.0;
    while psi.eval(hi) <= y {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if psi.eval(mid) <= y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(PsiInverse {
        value: lo,
        below_domain: false,
    })
}
