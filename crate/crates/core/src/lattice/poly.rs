//! Real root isolation for monic integer polynomials.
//!
//! Sturm sequences are built in exact rational arithmetic so root counts are
//! never fooled by rounding. Each isolated root is then polished in `f64` by
//! safeguarded Newton iteration inside its bracket.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Dense polynomial with rational coefficients, constant term first.
#[derive(Debug, Clone, PartialEq)]
struct RatPoly(Vec<BigRational>);

impl RatPoly {
    fn from_integers(coeffs: &[i64]) -> Self {
        let mut p = RatPoly(
            coeffs
                .iter()
                .map(|&c| BigRational::from_integer(BigInt::from(c)))
                .collect(),
        );
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.0.len() > 1 && self.0.last().is_some_and(Zero::is_zero) {
            self.0.pop();
        }
    }

    fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    fn derivative(&self) -> Self {
        if self.0.len() <= 1 {
            return RatPoly(vec![BigRational::zero()]);
        }
        let mut p = RatPoly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigRational::from_integer(BigInt::from(i)))
                .collect(),
        );
        p.trim();
        p
    }

    fn rem(&self, divisor: &RatPoly) -> RatPoly {
        let mut r = self.0.clone();
        let dd = divisor.degree();
        let lead = divisor.0[dd].clone();
        while r.len() > dd && !(r.len() == 1 && r[0].is_zero()) {
            let shift = r.len() - 1 - dd;
            let q = r.last().unwrap() / &lead;
            for (i, c) in divisor.0.iter().enumerate() {
                r[i + shift] -= &q * c;
            }
            r.pop();
            if r.is_empty() {
                r.push(BigRational::zero());
            }
        }
        let mut out = RatPoly(r);
        out.trim();
        out
    }

    fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    fn neg(&self) -> RatPoly {
        RatPoly(self.0.iter().map(|c| -c).collect())
    }
}

fn sturm_sequence(p: &RatPoly) -> Vec<RatPoly> {
    let mut seq = vec![p.clone(), p.derivative()];
    loop {
        let n = seq.len();
        if seq[n - 1].is_zero() {
            seq.pop();
            break;
        }
        if seq[n - 1].degree() == 0 {
            break;
        }
        let r = seq[n - 2].rem(&seq[n - 1]);
        if r.is_zero() {
            break;
        }
        seq.push(r.neg());
    }
    seq
}

fn sign_changes(seq: &[RatPoly], x: &BigRational) -> usize {
    let mut changes = 0;
    let mut last = 0i8;
    for p in seq {
        let v = p.eval(x);
        let s = if v.is_positive() {
            1
        } else if v.is_negative() {
            -1
        } else {
            0
        };
        if s != 0 {
            if last != 0 && s != last {
                changes += 1;
            }
            last = s;
        }
    }
    changes
}

fn horner(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

fn to_f64(x: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

/// Finds all roots of a monic integer polynomial (constant term first),
/// requiring them to be real and distinct. Roots are returned ascending.
pub fn real_roots(coeffs: &[i64]) -> Result<Vec<f64>> {
    let p = RatPoly::from_integers(coeffs);
    let deg = p.degree();
    if deg == 0 {
        return Err(Error::invalid("polynomial", "degree must be at least 1"));
    }
    if !p.0[deg].is_one() {
        return Err(Error::invalid("polynomial", "polynomial must be monic"));
    }
    let seq = sturm_sequence(&p);
    if seq.last().is_some_and(|g| g.degree() > 0) {
        return Err(Error::RootFinding("polynomial has repeated roots".into()));
    }
    // Cauchy bound for a monic polynomial
    let bound = BigRational::one()
        + p.0[..deg]
            .iter()
            .map(|c| c.abs())
            .fold(BigRational::zero(), |a, b| if b > a { b } else { a });
    let lo = -bound.clone();
    let count = sign_changes(&seq, &lo) - sign_changes(&seq, &bound);
    if count != deg {
        return Err(Error::RootFinding(format!(
            "expected {deg} distinct real roots, found {count}"
        )));
    }

    // Bisect (a, b] until every interval holds exactly one root.
    let two = BigRational::from_integer(BigInt::from(2));
    let mut stack = vec![(lo, bound)];
    let mut brackets = Vec::with_capacity(deg);
    while let Some((a, b)) = stack.pop() {
        let n = sign_changes(&seq, &a) - sign_changes(&seq, &b);
        match n {
            0 => {}
            1 => brackets.push((a, b)),
            _ => {
                let mid = (&a + &b) / &two;
                stack.push((a, mid.clone()));
                stack.push((mid, b));
            }
        }
    }

    let fcoeffs: Vec<f64> = coeffs.iter().map(|&c| c as f64).collect();
    let mut roots = Vec::with_capacity(deg);
    for (mut a, mut b) in brackets {
        if p.eval(&b).is_zero() {
            roots.push(to_f64(&b));
            continue;
        }
        // Shrink exactly until the bracket is narrow enough for f64 Newton.
        let width_target = BigRational::new(BigInt::from(1), BigInt::from(1u64 << 20));
        while &b - &a > width_target {
            let mid = (&a + &b) / &two;
            let pm = p.eval(&mid);
            if pm.is_zero() {
                a = mid.clone();
                b = mid;
                break;
            }
            let pb = p.eval(&b);
            if pm.is_positive() == pb.is_positive() {
                b = mid;
            } else {
                a = mid;
            }
        }
        roots.push(polish(&fcoeffs, to_f64(&a), to_f64(&b)));
    }
    roots.sort_by(|x, y| x.total_cmp(y));
    Ok(roots)
}

/// Safeguarded Newton iteration on `[a, b]`, falling back to bisection.
fn polish(coeffs: &[f64], mut a: f64, mut b: f64) -> f64 {
    if a == b {
        return a;
    }
    let (pa, _) = horner(coeffs, a);
    let sa = pa.signum();
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (px, dpx) = horner(coeffs, x);
        if px == 0.0 {
            return x;
        }
        if px.signum() == sa {
            a = x;
        } else {
            b = x;
        }
        let newton = x - px / dpx;
        let next = if dpx != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - x).abs() <= 1e-14 * x.abs().max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

/// Integer roots of a monic integer polynomial (all rational roots are
/// integers dividing the constant term).
pub fn integer_roots(coeffs: &[i64]) -> Vec<i64> {
    let eval = |x: i128| -> i128 {
        coeffs
            .iter()
            .rev()
            .fold(0i128, |acc, &c| acc.saturating_mul(x).saturating_add(c as i128))
    };
    let c0 = coeffs.first().copied().unwrap_or(0);
    if c0 == 0 {
        return vec![0];
    }
    let c0 = c0.unsigned_abs();
    let mut out = Vec::new();
    let mut q = 1u64;
    while q * q <= c0 {
        if c0 % q == 0 {
            for cand in [q, c0 / q] {
                for s in [cand as i128, -(cand as i128)] {
                    if eval(s) == 0 && !out.contains(&(s as i64)) {
                        out.push(s as i64);
                    }
                }
            }
        }
        q += 1;
    }
    out.sort();
    out
}
