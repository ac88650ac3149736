//! Lower bounds from R-nets.
//!
//! If `A` is a finite R-net, testing against `dist(x, A)^p` gives
//! `W_p(theta, mu) >= d/(d+p) (omega_d |A|)^(-p/d) - R^p (1 - theta(A))`.
//! For a lattice walk the net is the image of a box of lattice coordinates
//! around the mean, which carries most of the mass of `nu^{*k}` by Chebyshev.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::StepDistribution;
use crate::torus::{frac, torus_distance_raw, unit_ball_volume, PointSet};

use super::measure::LatticeLaw;

/// Default cap on the number of points of a walk-support net.
pub const DEFAULT_NET_CAP: usize = 2_000_000;

/// Cover-check grid for d = 2, per axis.
const COVER_GRID_2D: usize = 1 << 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RNetBound {
    pub value: f64,
    /// True when the bound is not positive, hence carries no information.
    pub vacuous: bool,
}

/// `d/(d+p) (omega_d n)^(-p/d) - R^p (1 - theta)` for a net of `n` points.
pub fn rnet_bound_from_counts(n: usize, theta: f64, radius: f64, p: f64, d: usize) -> Result<RNetBound> {
    if n == 0 {
        return Err(Error::EmptySet);
    }
    if !(0.0..=1.0 + 1e-12).contains(&theta) {
        return Err(Error::invalid("theta", "net mass must lie in [0, 1]"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid("p", "must lie in (0, 1]"));
    }
    let df = d as f64;
    let main = df / (df + p) * (unit_ball_volume(d) * n as f64).powf(-p / df);
    let value = main - radius.powf(p) * (1.0 - theta.min(1.0));
    Ok(RNetBound {
        value,
        vacuous: value <= 0.0,
    })
}

/// The R-net lower bound with `theta(A)` given by the masses of `A`.
pub fn rnet_lower_bound(a: &PointSet, radius: f64, p: f64, d: usize) -> Result<RNetBound> {
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    if a.dim() != Some(d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: a.dim().unwrap_or(0),
        });
    }
    let theta = a.total_mass().unwrap_or(0.0);
    rnet_bound_from_counts(a.len(), theta, radius, p, d)
}

/// `max_x dist(x, A)` on the circle: half the largest circular gap.
fn circle_net_radius(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let mut gap = 1.0 - xs[xs.len() - 1] + xs[0];
    for w in xs.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    gap / 2.0
}

/// Upper estimate of `max_x dist(x, A)` on the 2-torus: the maximum over a
/// `2^9 x 2^9` grid, plus half the grid diagonal so the estimate is a valid
/// covering radius.
fn torus2_net_radius(pts: &[[f64; 2]]) -> f64 {
    use rayon::prelude::*;
    // bucket the net into cells for nearest-point queries
    let cells = ((pts.len() as f64).sqrt().ceil() as usize).clamp(1, 256);
    let mut buckets: Vec<Vec<[f64; 2]>> = vec![Vec::new(); cells * cells];
    let cell_of = |x: f64| ((x * cells as f64) as usize).min(cells - 1);
    for p in pts {
        buckets[cell_of(p[1]) * cells + cell_of(p[0])].push(*p);
    }
    let nearest = |q: [f64; 2]| -> f64 {
        let (cx, cy) = (cell_of(q[0]) as i64, cell_of(q[1]) as i64);
        let w = 1.0 / cells as f64;
        let c = cells as i64;
        let mut best = f64::INFINITY;
        for ring in 0..=(c / 2 + 1) {
            // unvisited points lie at least (ring - 1) cells away
            if ring >= 1 && best <= (ring - 1) as f64 * w {
                break;
            }
            for dy in -ring..=ring {
                for dx in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue;
                    }
                    let bx = (cx + dx).rem_euclid(c) as usize;
                    let by = (cy + dy).rem_euclid(c) as usize;
                    for p in &buckets[by * cells + bx] {
                        best = best.min(torus_distance_raw(&q, p));
                    }
                }
            }
        }
        best
    };
    let n = COVER_GRID_2D;
    let measured = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let q = [(idx % n) as f64 / n as f64, (idx / n) as f64 / n as f64];
            nearest(q)
        })
        .reduce(|| 0.0, f64::max);
    measured + 0.5 * 2f64.sqrt() / n as f64
}

/// A net built from the box of lattice coordinates around the mean.
#[derive(Debug, Clone)]
pub struct WalkSupportNet {
    /// Inclusive coordinate ranges `[lo_i, hi_i]`.
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
    pub size: usize,
    pub radius: f64,
    /// Chebyshev lower bound `1 - r B / lambda^2` on `nu^{*k}(A)`.
    pub mass_lb: f64,
    /// Exact `nu^{*k}(A)` when the lattice law is available.
    pub mass_exact: Option<f64>,
}

impl WalkSupportNet {
    /// The net mass used in the bound: exact when known.
    pub fn theta(&self) -> f64 {
        self.mass_exact.unwrap_or(self.mass_lb).max(0.0)
    }

    /// The net as a point set (without masses).
    pub fn points(&self, nu: &StepDistribution) -> PointSet {
        let pts = box_points(nu, &self.lo, &self.hi)
            .into_iter()
            .map(|x| crate::torus::TorusPoint::new(x).expect("finite"))
            .collect();
        PointSet::new(pts).expect("box is nonempty")
    }
}

fn box_points(nu: &StepDistribution, lo: &[i64], hi: &[i64]) -> Vec<Vec<f64>> {
    let r = lo.len();
    let d = nu.d();
    let mut out = Vec::new();
    let mut n = lo.to_vec();
    loop {
        let x: Vec<f64> = (0..d)
            .map(|j| frac(n.iter().zip(nu.alphas()).map(|(&ni, a)| ni as f64 * a[j]).sum()))
            .collect();
        out.push(x);
        let mut c = 0;
        loop {
            if c == r {
                return out;
            }
            n[c] += 1;
            if n[c] <= hi[c] {
                break;
            }
            n[c] = lo[c];
            c += 1;
        }
    }
}

/// Builds `A = { sum n_i alpha_i : |n_i - E_i k| <= lambda sqrt k }` with
/// `E_i = P(I = i) E xi_i`, measures its covering radius and bounds its
/// mass. Supports d in {1, 2}.
pub fn walk_support_net(
    nu: &StepDistribution,
    k: u64,
    lambda: f64,
    law: Option<&LatticeLaw>,
    cap: usize,
) -> Result<WalkSupportNet> {
    let d = nu.d();
    if d > 2 {
        return Err(Error::UnsupportedDimension {
            d,
            reason: "net radius measurement is implemented for d <= 2".into(),
        });
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda", "must be positive"));
    }
    let kf = k as f64;
    let spread = lambda * kf.sqrt();
    let drift = nu.coordinate_drift();
    let lo: Vec<i64> = drift.iter().map(|e| (e * kf - spread).ceil() as i64).collect();
    let hi: Vec<i64> = drift.iter().map(|e| (e * kf + spread).floor() as i64).collect();
    let size = lo
        .iter()
        .zip(&hi)
        .try_fold(1u128, |acc, (&a, &b)| acc.checked_mul((b - a + 1).max(0) as u128))
        .unwrap_or(u128::MAX);
    if size == 0 {
        return Err(Error::EmptySet);
    }
    if size > cap as u128 {
        return Err(Error::cap("walk support net", size.min(usize::MAX as u128) as usize, cap));
    }
    let pts = box_points(nu, &lo, &hi);
    let radius = if d == 1 {
        let mut xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        circle_net_radius(&mut xs)
    } else {
        let flat: Vec<[f64; 2]> = pts.iter().map(|p| [p[0], p[1]]).collect();
        torus2_net_radius(&flat)
    };
    let r = nu.r() as f64;
    let mass_lb = 1.0 - r * nu.max_second_moment() / (lambda * lambda);
    let mass_exact = law.map(|l| l.box_mass(&lo, &hi));
    Ok(WalkSupportNet {
        lo,
        hi,
        size: size as usize,
        radius,
        mass_lb,
        mass_exact,
    })
}
