//! Finitely supported probability measures and exact convolution powers of
//! lattice walks.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::StepDistribution;
use crate::torus::{frac, PointSet, TorusPoint};

/// Default cap on the number of atoms of a materialized convolution power.
pub const DEFAULT_ATOM_CAP: usize = 1_000_000;

/// A probability measure with finitely many atoms on R^d / Z^d.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    d: usize,
    /// Row-major coordinates in `[0, 1)`, `d` per atom.
    coords: Vec<f64>,
    masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, masses: Vec<f64>) -> Result<Self> {
        let d = points.first().map(Vec::len).ok_or(Error::EmptySet)?;
        if d == 0 {
            return Err(Error::invalid("points", "dimension must be at least 1"));
        }
        let mut coords = Vec::with_capacity(points.len() * d);
        for p in &points {
            if p.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: p.len(),
                });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid("points", "coordinates must be finite"));
            }
            coords.extend(p.iter().map(|&c| frac(c)));
        }
        Self::from_flat(d, coords, masses)
    }

    pub(crate) fn from_flat(d: usize, coords: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if masses.len() * d != coords.len() {
            return Err(Error::invalid("masses", "one mass per atom required"));
        }
        if masses.is_empty() {
            return Err(Error::EmptySet);
        }
        if masses.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::invalid("masses", "masses must be nonnegative"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "masses",
                format!("masses sum to {total}, not 1"),
            ));
        }
        Ok(Self { d, coords, masses })
    }

    /// Point mass at `x`.
    pub fn dirac(x: &[f64]) -> Self {
        Self::new(vec![x.to_vec()], vec![1.0]).expect("a single finite point is a valid measure")
    }

    /// Equal masses on the given points.
    pub fn uniform_on(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n as f64; n])
    }

    /// Equal masses on the `n^d` grid cell centers, a discretization of Haar
    /// measure.
    pub fn haar_grid(d: usize, n: usize) -> Self {
        let total = n.pow(d as u32);
        let mut coords = Vec::with_capacity(total * d);
        for mut i in 0..total {
            for _ in 0..d {
                coords.push(((i % n) as f64 + 0.5) / n as f64);
                i /= n;
            }
        }
        Self {
            d,
            coords,
            masses: vec![1.0 / total as f64; total],
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn to_point_set(&self) -> PointSet {
        let pts = (0..self.len())
            .map(|i| TorusPoint::new(self.point(i).to_vec()).expect("coordinates are reduced"))
            .collect();
        PointSet::with_masses(pts, self.masses.clone()).expect("masses are valid")
    }
}

/// Exact law of the lattice coordinates `(n_1, ..., n_r)` after k steps, on a
/// dense box of Z^r.
#[derive(Debug, Clone)]
pub struct LatticeLaw {
    /// Inclusive lower corner per coordinate.
    lo: Vec<i64>,
    /// Side length per coordinate.
    len: Vec<usize>,
    /// Masses, first coordinate fastest.
    mass: Vec<f64>,
}

impl LatticeLaw {
    pub fn lower(&self) -> &[i64] {
        &self.lo
    }

    pub fn sides(&self) -> &[usize] {
        &self.len
    }

    /// Visits `(n, mass)` for every lattice point with positive mass.
    pub fn for_each_atom(&self, mut visit: impl FnMut(&[i64], f64)) {
        let r = self.lo.len();
        let mut n = self.lo.clone();
        for &m in &self.mass {
            if m > 0.0 {
                visit(&n, m);
            }
            for c in 0..r {
                n[c] += 1;
                if n[c] < self.lo[c] + self.len[c] as i64 {
                    break;
                }
                n[c] = self.lo[c];
            }
        }
    }

    pub fn atom_count(&self) -> usize {
        self.mass.iter().filter(|&&m| m > 0.0).count()
    }

    /// Mass of the box `lo <= n <= hi`.
    pub fn box_mass(&self, lo: &[i64], hi: &[i64]) -> f64 {
        let mut s = 0.0;
        self.for_each_atom(|n, m| {
            if n.iter().zip(lo).zip(hi).all(|((x, a), b)| x >= a && x <= b) {
                s += m;
            }
        });
        s
    }

    /// The pushforward `n -> sum_i n_i alpha_i mod 1`.
    pub fn to_measure(&self, alphas: &[Vec<f64>]) -> Result<DiscreteMeasure> {
        let d = alphas[0].len();
        let mut coords = Vec::new();
        let mut masses = Vec::new();
        self.for_each_atom(|n, m| {
            for j in 0..d {
                let x: f64 = n.iter().zip(alphas).map(|(&ni, a)| ni as f64 * a[j]).sum();
                coords.push(frac(x));
            }
            masses.push(m);
        });
        let total: f64 = masses.iter().sum();
        for m in masses.iter_mut() {
            *m /= total;
        }
        DiscreteMeasure::from_flat(d, coords, masses)
    }
}

fn step_ranges(nu: &StepDistribution) -> Vec<(i64, i64)> {
    nu.steps()
        .iter()
        .map(|s| {
            let lo = s.support().min().unwrap_or(0).min(0);
            let hi = s.support().max().unwrap_or(0).max(0);
            (lo, hi)
        })
        .collect()
}

/// Cells of the dense lattice box holding `nu^{*k}`; `None` on overflow.
pub fn lattice_law_cells(nu: &StepDistribution, k: u64) -> Option<u128> {
    step_ranges(nu)
        .iter()
        .try_fold(1u128, |acc, &(lo, hi)| acc.checked_mul(((hi - lo) as u128).checked_mul(k as u128)? + 1))
}

/// Exact laws of the lattice coordinates after each `k` in `ks` (ascending
/// or not), computed by one incremental dynamic program.
///
/// Fails with `CapExceeded` if the dense box for the largest `k` would hold
/// more than `atom_cap` cells.
pub fn lattice_laws(nu: &StepDistribution, ks: &[u64], atom_cap: usize) -> Result<Vec<LatticeLaw>> {
    let r = nu.r();
    let kmax = ks.iter().copied().max().unwrap_or(0);
    let ranges = step_ranges(nu);
    match lattice_law_cells(nu, kmax) {
        Some(c) if c <= atom_cap as u128 => {}
        other => {
            return Err(Error::cap(
                "convolution power support",
                other.map_or(usize::MAX, |c| c.min(usize::MAX as u128) as usize),
                atom_cap,
            ))
        }
    }

    // moves: (coordinate, offset, probability)
    let moves: Vec<(usize, i64, f64)> = nu
        .steps()
        .iter()
        .enumerate()
        .flat_map(|(i, law)| {
            let w = nu.selector()[i];
            law.atoms()
                .iter()
                .filter(move |a| a.1 > 0.0 && w > 0.0)
                .map(move |&(n, p)| (i, n, w * p))
        })
        .collect();

    let mut order: Vec<usize> = (0..ks.len()).collect();
    order.sort_by_key(|&i| ks[i]);
    let mut out: Vec<Option<LatticeLaw>> = vec![None; ks.len()];

    let mut law = LatticeLaw {
        lo: vec![0; r],
        len: vec![1; r],
        mass: vec![1.0],
    };
    let mut done = 0u64;
    for &slot in &order {
        while done < ks[slot] {
            law = step(&law, &ranges, &moves);
            done += 1;
        }
        out[slot] = Some(law.clone());
    }
    Ok(out.into_iter().map(|l| l.expect("every slot filled")).collect())
}

fn step(law: &LatticeLaw, ranges: &[(i64, i64)], moves: &[(usize, i64, f64)]) -> LatticeLaw {
    let r = law.lo.len();
    let lo: Vec<i64> = (0..r).map(|c| law.lo[c] + ranges[c].0).collect();
    let len: Vec<usize> = (0..r)
        .map(|c| law.len[c] + (ranges[c].1 - ranges[c].0) as usize)
        .collect();
    let mut strides = vec![1usize; r];
    for c in 1..r {
        strides[c] = strides[c - 1] * len[c - 1];
    }
    let total: usize = len.iter().product();
    let mut mass = vec![0.0; total];

    // offset of each old cell inside the new box (before applying a move)
    let mut base = vec![0usize; law.mass.len()];
    {
        let mut idx = vec![0usize; r];
        for b in base.iter_mut() {
            *b = (0..r)
                .map(|c| (idx[c] as i64 + law.lo[c] - lo[c]) as usize * strides[c])
                .sum();
            for c in 0..r {
                idx[c] += 1;
                if idx[c] < law.len[c] {
                    break;
                }
                idx[c] = 0;
            }
        }
    }
    for &(c, n, p) in moves {
        let shift = n * strides[c] as i64;
        for (i, &m) in law.mass.iter().enumerate() {
            if m != 0.0 {
                mass[(base[i] as i64 + shift) as usize] += p * m;
            }
        }
    }
    LatticeLaw { lo, len, mass }
}

/// The exact k-fold convolution power `nu^{*k}` as a discrete measure.
pub fn convolution_power(nu: &StepDistribution, k: u64, atom_cap: usize) -> Result<DiscreteMeasure> {
    let law = lattice_laws(nu, &[k], atom_cap)?.remove(0);
    law.to_measure(nu.alphas())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::IntegerLaw;
    use approx::assert_abs_diff_eq;

    fn binom(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn symmetric_walk_is_binomial() {
        let nu = StepDistribution::new(vec![1.0], vec![IntegerLaw::symmetric_unit()], vec![vec![0.3]]).unwrap();
        let laws = lattice_laws(&nu, &[10, 3], DEFAULT_ATOM_CAP).unwrap();
        let mut seen = 0;
        laws[0].for_each_atom(|n, m| {
            let j = ((n[0] + 10) / 2) as u64;
            assert_eq!((n[0] + 10) % 2, 0);
            assert_abs_diff_eq!(m, binom(10, j) / 1024.0, epsilon = 1e-15);
            seen += 1;
        });
        assert_eq!(seen, 11);
        assert_eq!(laws[1].atom_count(), 4);
    }

    #[test]
    fn rank_two_masses_and_fourier_transform() {
        let nu = StepDistribution::new(
            vec![0.3, 0.7],
            vec![
                IntegerLaw::new(vec![(-1, 0.5), (2, 0.5)]).unwrap(),
                IntegerLaw::symmetric_unit(),
            ],
            vec![vec![0.123, 0.77], vec![0.456, 0.1]],
        )
        .unwrap();
        let k = 7;
        let m = convolution_power(&nu, k, DEFAULT_ATOM_CAP).unwrap();
        let total: f64 = m.masses().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
        // transform of nu^{*k} at h equals nu_hat(h)^k
        for h in [[1i64, 0], [2, -1], [0, 3]] {
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for i in 0..m.len() {
                let t = -2.0 * std::f64::consts::PI * (h[0] as f64 * m.point(i)[0] + h[1] as f64 * m.point(i)[1]);
                acc += num_complex::Complex64::from_polar(m.mass(i), t);
            }
            let expect = crate::spectral::convolution_power_hat(nu.nu_hat(&h), k);
            assert!((acc - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let nu = StepDistribution::new(
            vec![0.5, 0.5],
            vec![IntegerLaw::symmetric_unit(); 2],
            vec![vec![0.1], vec![0.2]],
        )
        .unwrap();
        assert!(matches!(
            lattice_laws(&nu, &[1000], 10_000),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(vec![vec![0.1]], vec![0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![], vec![]).is_err());
        let m = DiscreteMeasure::new(vec![vec![1.25, -0.5]], vec![1.0]).unwrap();
        assert_eq!(m.point(0), &[0.25, 0.5]);
        let g = DiscreteMeasure::haar_grid(2, 4);
        assert_eq!(g.len(), 16);
        assert_eq!(g.point(5), &[0.375, 0.375]);
    }
}
