//! The spectral form of the asymptotic variance,
//! `C(f, nu) = sum_{h != 0} |f_hat(h)|^2 (1 - |nu_hat(h)|^2) / |1 - nu_hat(h)|^2`.

use rayon::prelude::*;
use serde::Serialize;

use super::{spectral_gap, StepDistribution, TestFunction};
use crate::error::{Error, Result};
use crate::torus::{FourierBox, FourierIndex};

const TAIL_TARGET: f64 = 1e-8;
const DEGENERATE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralVariance {
    pub value: f64,
    /// Exclusive sup-norm bound of the summed box.
    pub h_bound: usize,
    /// `2 / (1 - g)^2 * sum_{outside} |f_hat|^2`, zero when the sum is exact.
    pub tail_bound: f64,
    /// True when every nonzero coefficient of `f` lies inside the box.
    pub exact: bool,
}

fn box_sum(f_hat: &[num_complex::Complex64], nu: &StepDistribution, fbox: FourierBox) -> Result<(f64, f64)> {
    let parts: Vec<Result<(f64, f64)>> = (0..fbox.len())
        .into_par_iter()
        .map(|i| {
            let h = FourierIndex(fbox.index_at(i));
            if !h.is_sign_canonical() {
                return Ok((0.0, 0.0));
            }
            let v = nu.nu_hat(&h.0);
            let denom = (num_complex::Complex64::new(1.0, 0.0) - v).norm_sqr();
            if denom.sqrt() < DEGENERATE_TOL {
                return Err(Error::DegenerateWalk { h: h.0 });
            }
            let w = f_hat[i].norm_sqr();
            if w == 0.0 {
                return Ok((0.0, 0.0));
            }
            Ok((2.0 * w * (1.0 - v.norm_sqr()) / denom, 2.0 * w))
        })
        .collect();
    let mut value = 0.0;
    let mut mass = 0.0;
    for p in parts {
        let (a, b) = p?;
        value += a;
        mass += b;
    }
    Ok((value, mass))
}

/// Truncated spectral sum over `0 < ||h||_inf < H`. With `h_bound = None`
/// the box is the support of a trigonometric `f`, or else is doubled until
/// the tail estimate drops below `1e-8` (or the quadrature limit is hit, in
/// which case the achieved tail bound is reported).
pub fn asymptotic_variance_spectral(
    f: &TestFunction,
    nu: &StepDistribution,
    h_bound: Option<usize>,
) -> Result<SpectralVariance> {
    if f.dim() != nu.d() {
        return Err(Error::DimensionMismatch {
            expected: nu.d(),
            found: f.dim(),
        });
    }
    if f.is_zero() {
        return Ok(SpectralVariance {
            value: 0.0,
            h_bound: h_bound.unwrap_or(1),
            tail_bound: 0.0,
            exact: true,
        });
    }
    let total = f.l2_norm_sq();
    let eval = |hb: usize| -> Result<SpectralVariance> {
        let fbox = FourierBox::new(nu.d(), hb);
        let f_hat = f.fourier_coefficients(hb)?;
        let (value, mass) = box_sum(&f_hat, nu, fbox)?;
        let exact = f.degree().is_some_and(|deg| (deg as usize) < hb);
        let tail_bound = if exact || hb < 2 {
            if exact {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            let (g, _) = spectral_gap(nu, hb)?;
            2.0 * (total - mass).max(0.0) / (1.0 - g).powi(2)
        };
        Ok(SpectralVariance {
            value,
            h_bound: hb,
            tail_bound,
            exact,
        })
    };
    if let Some(hb) = h_bound {
        return eval(hb.max(1));
    }
    if let Some(deg) = f.degree() {
        return eval(deg as usize + 1);
    }
    let limit = match nu.d() {
        1 => 1 << 14,
        _ => 1 << 7,
    };
    let mut hb = 8;
    loop {
        let res = eval(hb)?;
        if res.tail_bound < TAIL_TARGET || hb >= limit {
            return Ok(res);
        }
        hb *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::IntegerLaw;
    use crate::torus::TorusPoint;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn walk(alpha: f64) -> StepDistribution {
        StepDistribution::new(vec![1.0], vec![IntegerLaw::symmetric_unit()], vec![vec![alpha]]).unwrap()
    }

    #[test]
    fn zero_function_has_zero_variance() {
        let v = asymptotic_variance_spectral(&TestFunction::zero(1), &walk(0.3), None).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn golden_cosine_closed_form() {
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let f = TestFunction::cosine(vec![1], 2f64.sqrt()).unwrap();
        let v = asymptotic_variance_spectral(&f, &walk(phi), None).unwrap();
        let rho = (2.0 * PI * phi).cos();
        assert!(v.exact);
        assert_abs_diff_eq!(v.value, (1.0 + rho) / (1.0 - rho), epsilon = 1e-12);
    }

    #[test]
    fn rational_walk_is_degenerate() {
        let f = TestFunction::cosine(vec![2], 1.0).unwrap();
        let e = asymptotic_variance_spectral(&f, &walk(0.5), None).unwrap_err();
        assert_eq!(e, Error::DegenerateWalk { h: vec![2] });
    }

    #[test]
    fn distance_power_tail_rule() {
        let f = TestFunction::distance_power(&TorusPoint::circle(0.0), 1.0).unwrap();
        let nu = walk(2f64.sqrt() - 1.0);
        let v = asymptotic_variance_spectral(&f, &nu, None).unwrap();
        assert!(v.value > 0.0);
        assert!(v.tail_bound < 1e-8, "{v:?}");
        // a smaller box gives a smaller partial sum (every term is >= 0)
        let w = asymptotic_variance_spectral(&f, &nu, Some(16)).unwrap();
        assert!(w.value <= v.value);
        assert!(v.value - w.value <= w.tail_bound);
    }
}
