//! Exact W_1 on the circle.
//!
//! With `F(x) = m1[0, x] - m2[0, x]` the difference of distribution
//! functions, `W_1(m1, m2) = min_c int_0^1 |F(x) - c| dx`, minimized at a
//! Lebesgue median of `F`. Here `F` is piecewise linear with one common slope
//! (coming from Haar components), so both the median and the integral are
//! evaluated in closed form segment by segment.

use crate::error::{Error, Result};

use super::measure::DiscreteMeasure;

/// A measure on the circle accepted by the exact oracle.
#[derive(Debug, Clone, Copy)]
pub enum CircleMeasure<'a> {
    Haar,
    Atoms(&'a DiscreteMeasure),
}

/// `F` on `[x_j, x_{j+1})` equals `value_j + slope * (x - x_j)`.
#[derive(Debug, Clone)]
pub struct CdfDifference {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
}

impl CdfDifference {
    pub fn new(m1: CircleMeasure<'_>, m2: CircleMeasure<'_>) -> Result<Self> {
        let mut events: Vec<(f64, f64)> = Vec::new();
        let mut slope = 0.0;
        for (m, sign) in [(m1, 1.0), (m2, -1.0)] {
            match m {
                CircleMeasure::Haar => slope += sign,
                CircleMeasure::Atoms(a) => {
                    if a.dim() != 1 {
                        return Err(Error::UnsupportedDimension {
                            d: a.dim(),
                            reason: "circle transport needs d = 1".into(),
                        });
                    }
                    events.extend((0..a.len()).map(|i| (a.point(i)[0], sign * a.mass(i))));
                }
            }
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut breaks = vec![0.0];
        let mut values = vec![0.0];
        let mut acc = 0.0;
        for (x, w) in events {
            acc += w;
            let last = breaks.len() - 1;
            if x == breaks[last] {
                values[last] = acc;
            } else {
                breaks.push(x);
                values.push(acc);
            }
        }
        // store values at segment starts including the linear part
        for (v, &x) in values.iter_mut().zip(&breaks) {
            *v += slope * x;
        }
        Ok(Self {
            breaks,
            values,
            slope,
        })
    }

    fn segments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        // (start value, length)
        (0..self.breaks.len()).map(move |j| {
            let end = self.breaks.get(j + 1).copied().unwrap_or(1.0);
            (self.values[j], end - self.breaks[j])
        })
    }

    /// Lebesgue measure of `{F <= c}`.
    fn sublevel(&self, c: f64) -> f64 {
        let s = self.slope;
        self.segments()
            .map(|(v, len)| {
                if s == 0.0 {
                    if v <= c {
                        len
                    } else {
                        0.0
                    }
                } else {
                    let t = ((c - v) / s).clamp(0.0, len);
                    if s > 0.0 {
                        t
                    } else {
                        len - t
                    }
                }
            })
            .sum()
    }

    /// A Lebesgue median of `F`.
    pub fn median(&self) -> f64 {
        if self.slope == 0.0 {
            let mut segs: Vec<(f64, f64)> = self.segments().collect();
            segs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut acc = 0.0;
            for (v, len) in &segs {
                acc += len;
                if acc >= 0.5 {
                    return *v;
                }
            }
            return segs.last().map_or(0.0, |s| s.0);
        }
        let (mut lo, mut hi) = self.segments().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (v, len)| {
            let w = v + self.slope * len;
            (lo.min(v).min(w), hi.max(v).max(w))
        });
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sublevel(mid) >= 0.5 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// `int_0^1 |F(x) - c| dx`.
    pub fn l1_deviation(&self, c: f64) -> f64 {
        let s = self.slope;
        self.segments()
            .map(|(v, len)| {
                let u0 = v - c;
                let u1 = u0 + s * len;
                if s == 0.0 || u0 * u1 >= 0.0 {
                    0.5 * len * (u0.abs() + u1.abs())
                } else {
                    (u0 * u0 + u1 * u1) / (2.0 * s.abs())
                }
            })
            .sum()
    }
}

/// Exact `W_1(m1, m2)` on the circle.
pub fn exact_w1_circle(m1: CircleMeasure<'_>, m2: CircleMeasure<'_>) -> Result<f64> {
    let f = CdfDifference::new(m1, m2)?;
    let c = f.median();
    Ok(f.l1_deviation(c))
}

/// The optimal shift `c*` and the value, for building the monotone coupling.
pub fn circle_transport_shift(m: &DiscreteMeasure) -> Result<(f64, f64)> {
    let f = CdfDifference::new(CircleMeasure::Atoms(m), CircleMeasure::Haar)?;
    let c = f.median();
    Ok((c, f.l1_deviation(c)))
}
