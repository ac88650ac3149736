//! Geometry of the flat torus R^d / Z^d.
//!
//! Points are stored by their canonical representative in `[0, 1)^d`. The
//! metric is the quotient of the Euclidean metric,
//! `||x - y|| = min_{m in Z^d} |x - y - m|`, which decomposes coordinate-wise
//! because the nearest integer shift can be chosen independently per axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance from `t` to the nearest integer, in `[0, 1/2]`.
pub fn nearest_integer_norm(t: f64) -> f64 {
    (t - t.round()).abs()
}

/// Reduces a real number to `[0, 1)`.
#[inline]
pub fn frac(t: f64) -> f64 {
    let r = t - t.floor();
    // t slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A point of R^d / Z^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    /// Builds a point from arbitrary real coordinates, reducing mod 1.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("coords", "dimension must be at least 1"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coords", "coordinates must be finite"));
        }
        Ok(Self::from_reduced(coords.into_iter().map(frac).collect()))
    }

    /// One-dimensional point.
    pub fn circle(x: f64) -> Self {
        Self::from_reduced(vec![frac(x)])
    }

    /// The identity element `0` of R^d / Z^d.
    pub fn origin(d: usize) -> Self {
        Self::from_reduced(vec![0.0; d])
    }

    pub(crate) fn from_reduced(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| (0.0..1.0).contains(c)));
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Group operation `x + a mod 1`.
    pub fn translate(&self, shift: &[f64]) -> Result<Self> {
        check_dim(self.dim(), shift.len())?;
        Ok(Self::from_reduced(
            self.coords
                .iter()
                .zip(shift)
                .map(|(x, a)| frac(x + a))
                .collect(),
        ))
    }
}

impl TryFrom<Vec<f64>> for TorusPoint {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        TorusPoint::new(v)
    }
}

impl From<TorusPoint> for Vec<f64> {
    fn from(p: TorusPoint) -> Self {
        p.coords
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Wraparound distance on raw coordinate slices; both must have equal length.
#[inline]
pub fn torus_distance_raw(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y) {
        let t = nearest_integer_norm(a - b);
        acc += t * t;
    }
    acc.sqrt()
}

/// Invariant Euclidean distance on the torus.
pub fn torus_distance(x: &TorusPoint, y: &TorusPoint) -> Result<f64> {
    check_dim(x.dim(), y.dim())?;
    Ok(torus_distance_raw(&x.coords, &y.coords))
}

/// A lattice point `h` of the unitary dual Z^d.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FourierIndex(pub Vec<i64>);

impl FourierIndex {
    pub fn new(h: Vec<i64>) -> Self {
        Self(h)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn sup_norm(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    /// `|h|^2`, exact in integer arithmetic.
    pub fn norm_sq(&self) -> u64 {
        self.0.iter().map(|&c| (c * c) as u64).sum()
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    /// `<h, x>` for a real vector `x`.
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&h, &a)| h as f64 * a).sum()
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }

    /// True when the first nonzero coordinate is positive.
    pub fn is_sign_canonical(&self) -> bool {
        self.0.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
    }
}

/// The dense box `{h in Z^d : ||h||_inf < bound}` with a linear index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FourierBox {
    d: usize,
    bound: usize,
}

impl FourierBox {
    pub fn new(d: usize, bound: usize) -> Self {
        assert!(d >= 1 && bound >= 1);
        Self { d, bound }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Exclusive sup-norm bound `H`.
    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn side(&self) -> usize {
        2 * self.bound - 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, h: &[i64]) -> bool {
        h.len() == self.d && h.iter().all(|c| c.unsigned_abs() < self.bound as u64)
    }

    pub fn index_of(&self, h: &[i64]) -> Option<usize> {
        if !self.contains(h) {
            return None;
        }
        let off = self.bound as i64 - 1;
        let side = self.side();
        let mut idx = 0usize;
        for &c in h.iter().rev() {
            idx = idx * side + (c + off) as usize;
        }
        Some(idx)
    }

    pub fn index_at(&self, mut idx: usize) -> Vec<i64> {
        let off = self.bound as i64 - 1;
        let side = self.side();
        let mut h = Vec::with_capacity(self.d);
        for _ in 0..self.d {
            h.push((idx % side) as i64 - off);
            idx /= side;
        }
        h
    }

    /// Iterates every `h` in the box in linear-index order.
    pub fn iter(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.len()).map(move |i| self.index_at(i))
    }
}

/// A finite set of torus points with optional masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    points: Vec<TorusPoint>,
    masses: Option<Vec<f64>>,
}

impl PointSet {
    pub fn new(points: Vec<TorusPoint>) -> Result<Self> {
        Self::build(points, None)
    }

    pub fn with_masses(points: Vec<TorusPoint>, masses: Vec<f64>) -> Result<Self> {
        Self::build(points, Some(masses))
    }

    fn build(points: Vec<TorusPoint>, masses: Option<Vec<f64>>) -> Result<Self> {
        if let Some(first) = points.first() {
            let d = first.dim();
            for p in &points {
                check_dim(d, p.dim())?;
            }
        }
        if let Some(m) = &masses {
            if m.len() != points.len() {
                return Err(Error::invalid("masses", "length differs from points"));
            }
            if m.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
                return Err(Error::invalid("masses", "masses must be nonnegative"));
            }
            let total: f64 = m.iter().sum();
            if total > 1.0 + 1e-12 {
                return Err(Error::invalid("masses", format!("total mass {total} exceeds 1")));
            }
        }
        Ok(Self { points, masses })
    }

    pub fn points(&self) -> &[TorusPoint] {
        &self.points
    }

    pub fn masses(&self) -> Option<&[f64]> {
        self.masses.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(TorusPoint::dim)
    }

    /// Total mass carried by the set, if masses are attached.
    pub fn total_mass(&self) -> Option<f64> {
        self.masses.as_ref().map(|m| m.iter().sum())
    }
}

/// Distance from `x` to the nearest point of `set`.
pub fn distance_to_set(x: &TorusPoint, set: &PointSet) -> Result<f64> {
    let d = set.dim().ok_or(Error::EmptySet)?;
    check_dim(d, x.dim())?;
    Ok(set
        .points
        .iter()
        .map(|a| torus_distance_raw(x.coords(), a.coords()))
        .fold(f64::INFINITY, f64::min))
}

/// Volume of the unit ball in R^d.
pub fn unit_ball_volume(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    std::f64::consts::PI.powf(half) / statrs::function::gamma::gamma(half + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn circle_wraparound() {
        let d = torus_distance(&TorusPoint::circle(0.0), &TorusPoint::circle(0.75)).unwrap();
        assert_abs_diff_eq!(d, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn farthest_point_of_two_torus() {
        let x = TorusPoint::new(vec![0.0, 0.0]).unwrap();
        let y = TorusPoint::new(vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(
            torus_distance(&x, &y).unwrap(),
            2f64.sqrt() / 2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let x = TorusPoint::new(vec![0.0]).unwrap();
        let y = TorusPoint::new(vec![0.0, 0.1]).unwrap();
        assert!(matches!(
            torus_distance(&x, &y),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn nearest_integer_norm_examples() {
        assert_abs_diff_eq!(nearest_integer_norm(0.3), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(nearest_integer_norm(1.7), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(nearest_integer_norm(-0.5), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn canonical_representative() {
        let p = TorusPoint::new(vec![-0.25, 3.5, -1e-18]).unwrap();
        assert_eq!(p.coords(), &[0.75, 0.5, 0.0]);
        assert!(TorusPoint::new(vec![]).is_err());
        assert!(TorusPoint::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn distance_to_set_examples() {
        let a = PointSet::new(vec![TorusPoint::circle(0.0), TorusPoint::circle(0.5)]).unwrap();
        let d1 = distance_to_set(&TorusPoint::circle(0.1), &a).unwrap();
        assert_abs_diff_eq!(d1, 0.1, epsilon = 1e-15);
        let d2 = distance_to_set(&TorusPoint::circle(0.25), &a).unwrap();
        assert_abs_diff_eq!(d2, 0.25, epsilon = 1e-15);
        assert_eq!(distance_to_set(&TorusPoint::circle(0.5), &a).unwrap(), 0.0);
        let empty = PointSet::new(vec![]).unwrap();
        assert_eq!(
            distance_to_set(&TorusPoint::circle(0.5), &empty),
            Err(Error::EmptySet)
        );
    }

    #[test]
    fn point_set_mass_validation() {
        let pts = vec![TorusPoint::circle(0.0), TorusPoint::circle(0.5)];
        assert!(PointSet::with_masses(pts.clone(), vec![0.5, 0.6]).is_err());
        assert!(PointSet::with_masses(pts.clone(), vec![-0.1, 0.6]).is_err());
        assert!(PointSet::with_masses(pts, vec![0.5, 0.25]).is_ok());
    }

    #[test]
    fn fourier_box_roundtrip() {
        let b = FourierBox::new(2, 3);
        assert_eq!(b.len(), 25);
        for (i, h) in b.iter().enumerate() {
            assert_eq!(b.index_of(&h), Some(i));
        }
        assert_eq!(b.index_of(&[3, 0]), None);
    }

    #[test]
    fn unit_ball_volumes() {
        assert_abs_diff_eq!(unit_ball_volume(1), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(unit_ball_volume(2), std::f64::consts::PI, epsilon = 1e-12);
        assert_abs_diff_eq!(
            unit_ball_volume(3),
            4.0 * std::f64::consts::PI / 3.0,
            epsilon = 1e-12
        );
    }

    fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-3.0f64..3.0, d)
    }

    fn triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..=3).prop_flat_map(|d| (point(d), point(d), point(d)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn metric_axioms((x, y, z) in triple()) {
            let (x, y, z) = (
                TorusPoint::new(x).unwrap(),
                TorusPoint::new(y).unwrap(),
                TorusPoint::new(z).unwrap(),
            );
            let dxy = torus_distance(&x, &y).unwrap();
            let dyx = torus_distance(&y, &x).unwrap();
            let dxz = torus_distance(&x, &z).unwrap();
            let dzy = torus_distance(&z, &y).unwrap();
            prop_assert!(dxy >= 0.0);
            prop_assert_eq!(dxy, dyx);
            prop_assert!(dxy <= dxz + dzy + 1e-12);
            prop_assert!(dxy <= (x.dim() as f64).sqrt() / 2.0 + 1e-12);
            prop_assert_eq!(torus_distance(&x, &x).unwrap(), 0.0);
        }

        #[test]
        fn translation_invariance((x, y, a) in triple()) {
            let (xp, yp) = (TorusPoint::new(x).unwrap(), TorusPoint::new(y).unwrap());
            let before = torus_distance(&xp, &yp).unwrap();
            let after = torus_distance(&xp.translate(&a).unwrap(), &yp.translate(&a).unwrap()).unwrap();
            prop_assert!((before - after).abs() < 1e-12);
        }

        #[test]
        fn snowflaked_metric_triangle((x, y, z) in triple(), pi in 0usize..3) {
            let p = [0.3, 0.5, 1.0][pi];
            let (x, y, z) = (
                TorusPoint::new(x).unwrap(),
                TorusPoint::new(y).unwrap(),
                TorusPoint::new(z).unwrap(),
            );
            let dxy = torus_distance(&x, &y).unwrap().powf(p);
            let dxz = torus_distance(&x, &z).unwrap().powf(p);
            let dzy = torus_distance(&z, &y).unwrap().powf(p);
            prop_assert!(dxy <= dxz + dzy + 1e-12);
        }

        #[test]
        fn nearest_integer_norm_period_and_parity(t in -100.0f64..100.0) {
            let n = nearest_integer_norm(t);
            prop_assert!((0.0..=0.5).contains(&n));
            prop_assert!((n - nearest_integer_norm(-t)).abs() < 1e-12);
            prop_assert!((n - nearest_integer_norm(t + 1.0)).abs() < 1e-12);
        }
    }
}
