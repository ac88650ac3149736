//! Step distributions on the torus and their exact Fourier transforms.
//!
//! A step is `xi_I * alpha_I` where the selector `I` picks one of the lattice
//! vectors and `xi_I` is an integer with finite support, so
//! `nu_hat(h) = sum_i P(I = i) phi_i(-2 pi <h, alpha_i>)` is a finite sum.

pub mod kernel;
pub mod test_function;
pub mod variance;

use num_complex::Complex64;
use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::LatticeSystem;
use crate::torus::{FourierBox, FourierIndex};

pub use kernel::{
    fejer_kernel, fejer_series, jackson_coefficients, jackson_kernel, jackson_series,
    jackson_sup_bound,
};
pub use test_function::{TestFunction, TestFunctionKind};
pub use variance::{asymptotic_variance_spectral, SpectralVariance};

const PROB_TOL: f64 = 1e-12;

/// Signed reduction to `[-1/2, 1/2]`; odd in `t`, so conjugate symmetry of
/// the transforms below holds bit for bit.
#[inline]
fn centered(t: f64) -> f64 {
    t - t.round()
}

/// A finitely supported law on Z, as `(value, probability)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntegerLaw(Vec<(i64, f64)>);

impl IntegerLaw {
    pub fn new(mut atoms: Vec<(i64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("steps", "integer law has empty support"));
        }
        if atoms.iter().any(|&(_, p)| !(0.0..=1.0).contains(&p) || !p.is_finite()) {
            return Err(Error::invalid("steps", "probabilities must lie in [0, 1]"));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::invalid(
                "steps",
                format!("integer law sums to {total}, not 1"),
            ));
        }
        atoms.sort_by_key(|a| a.0);
        if atoms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("steps", "repeated support point"));
        }
        Ok(Self(atoms))
    }

    /// `xi = +-1` with probability 1/2 each.
    pub fn symmetric_unit() -> Self {
        Self(vec![(-1, 0.5), (1, 0.5)])
    }

    pub fn atoms(&self) -> &[(i64, f64)] {
        &self.0
    }

    /// Support points carrying positive mass.
    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        self.0.iter().filter(|a| a.1 > 0.0).map(|a| a.0)
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().map(|&(n, p)| n as f64 * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.0.iter().map(|&(n, p)| (n as f64).powi(2) * p).sum()
    }

    /// `E exp(i t xi)` for `t = 2 pi s`, with `s` given in turns.
    pub fn char_fn_turns(&self, s: f64) -> Complex64 {
        let s = centered(s);
        self.0
            .iter()
            .map(|&(n, p)| Complex64::from_polar(p, 2.0 * PI * centered(n as f64 * s)))
            .sum()
    }

    /// `E exp(i t xi)`.
    pub fn char_fn(&self, t: f64) -> Complex64 {
        self.char_fn_turns(t / (2.0 * PI))
    }
}

/// Greatest common divisor of all pairwise support differences.
pub fn maximal_span(law: &IntegerLaw) -> Result<u64> {
    let mut it = law.support();
    let first = it
        .next()
        .ok_or_else(|| Error::invalid("steps", "empty support"))?;
    let g = it.fold(0i64, |g, n| g.gcd(&(n - first)));
    if g == 0 {
        return Err(Error::invalid("steps", "degenerate law: single support point"));
    }
    Ok(g as u64)
}

/// Largest `c` with `|phi(2 pi x)| <= 1 - c ||D x||^2` on the grid
/// `x = j / n`, `0 < j < n`, where `D` is the maximal span.
///
/// Grid points with `D x` integral are skipped (both sides vanish there).
pub fn fit_char_fn_constant(law: &IntegerLaw, n: usize) -> Result<f64> {
    let span = maximal_span(law)? as f64;
    let mut c = f64::INFINITY;
    for j in 1..n {
        let x = j as f64 / n as f64;
        let q = crate::torus::nearest_integer_norm(span * x);
        if q < 1e-9 {
            continue;
        }
        let ratio = (1.0 - law.char_fn_turns(x).norm()) / (q * q);
        c = c.min(ratio);
    }
    Ok(c)
}

/// The law of one step `xi_I alpha_I` of a lattice walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepDistribution")]
pub struct StepDistribution {
    selector: Vec<f64>,
    steps: Vec<IntegerLaw>,
    alphas: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStepDistribution {
    selector: Vec<f64>,
    steps: Vec<Vec<(i64, f64)>>,
    alphas: Vec<Vec<f64>>,
}

impl TryFrom<RawStepDistribution> for StepDistribution {
    type Error = Error;

    fn try_from(raw: RawStepDistribution) -> Result<Self> {
        let steps = raw
            .steps
            .into_iter()
            .map(IntegerLaw::new)
            .collect::<Result<Vec<_>>>()?;
        StepDistribution::new(raw.selector, steps, raw.alphas)
    }
}

impl StepDistribution {
    pub fn new(selector: Vec<f64>, steps: Vec<IntegerLaw>, alphas: Vec<Vec<f64>>) -> Result<Self> {
        let r = alphas.len();
        if r == 0 {
            return Err(Error::invalid("alphas", "need at least one vector"));
        }
        if selector.len() != r {
            return Err(Error::invalid(
                "selector",
                format!("{} weights for {r} vectors", selector.len()),
            ));
        }
        if steps.len() != r {
            return Err(Error::invalid(
                "steps",
                format!("{} laws for {r} vectors", steps.len()),
            ));
        }
        if selector.iter().any(|&p| !(0.0..=1.0).contains(&p) || !p.is_finite()) {
            return Err(Error::invalid("selector", "weights must lie in [0, 1]"));
        }
        let total: f64 = selector.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::invalid(
                "selector",
                format!("weights sum to {total}, not 1"),
            ));
        }
        let d = alphas[0].len();
        if d == 0 {
            return Err(Error::invalid("alphas", "dimension must be at least 1"));
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
            selector,
            steps,
            alphas,
        })
    }

    /// Uniform choice of `+-alpha_i`, weight `1/(2r)` each.
    pub fn symmetric(lattice: &LatticeSystem) -> Self {
        let r = lattice.r;
        Self {
            selector: vec![1.0 / r as f64; r],
            steps: vec![IntegerLaw::symmetric_unit(); r],
            alphas: lattice.alphas.clone(),
        }
    }

    pub fn r(&self) -> usize {
        self.alphas.len()
    }

    pub fn d(&self) -> usize {
        self.alphas[0].len()
    }

    pub fn selector(&self) -> &[f64] {
        &self.selector
    }

    pub fn steps(&self) -> &[IntegerLaw] {
        &self.steps
    }

    pub fn alphas(&self) -> &[Vec<f64>] {
        &self.alphas
    }

    /// True when every step law has at least two support points.
    pub fn is_nondegenerate(&self) -> bool {
        self.steps.iter().all(|s| s.support().count() >= 2)
    }

    /// Drift per coordinate, `P(I = i) E xi_i`.
    pub fn coordinate_drift(&self) -> Vec<f64> {
        self.selector
            .iter()
            .zip(&self.steps)
            .map(|(p, s)| p * s.mean())
            .collect()
    }

    /// `max_i P(I = i) E xi_i^2`.
    pub fn max_second_moment(&self) -> f64 {
        self.selector
            .iter()
            .zip(&self.steps)
            .map(|(p, s)| p * s.second_moment())
            .fold(0.0, f64::max)
    }

    /// Exact Fourier coefficient `nu_hat(h) = int exp(-2 pi i <h, x>) d nu`.
    pub fn nu_hat(&self, h: &[i64]) -> Complex64 {
        debug_assert_eq!(h.len(), self.d());
        let mut acc = Complex64::new(0.0, 0.0);
        for ((w, law), a) in self.selector.iter().zip(&self.steps).zip(&self.alphas) {
            if *w == 0.0 {
                continue;
            }
            let s = h.iter().zip(a).map(|(&hj, &aj)| hj as f64 * centered(aj)).sum::<f64>();
            acc += law.char_fn_turns(-s) * *w;
        }
        acc
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            selector: &'a [f64],
            steps: &'a [IntegerLaw],
            alphas: &'a [Vec<f64>],
        }
        serde_json::to_string_pretty(&Out {
            selector: &self.selector,
            steps: &self.steps,
            alphas: &self.alphas,
        })
        .expect("step distribution serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::invalid("step_distribution", e.to_string()))
    }
}

/// `nu_hat(h)^k`, the transform of the k-fold convolution power.
pub fn convolution_power_hat(value: Complex64, k: u64) -> Complex64 {
    let mut base = value;
    let mut acc = Complex64::new(1.0, 0.0);
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

/// Largest `|nu_hat(h)|` over `0 < ||h||_inf < H`, with a maximizing `h`
/// (lexicographically smallest sign-canonical one on ties).
pub fn spectral_gap(nu: &StepDistribution, h_bound: usize) -> Result<(f64, FourierIndex)> {
    if h_bound < 2 {
        return Err(Error::invalid("H", "spectral gap needs H >= 2"));
    }
    let b = FourierBox::new(nu.d(), h_bound);
    let best = (0..b.len())
        .into_par_iter()
        .filter_map(|i| {
            let h = FourierIndex(b.index_at(i));
            h.is_sign_canonical().then(|| (nu.nu_hat(&h.0).norm(), h))
        })
        .reduce_with(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })
        .expect("box with H >= 2 has nonzero points");
    Ok(best)
}

/// Fourier coefficients of a measure on the box `||h||_inf < H`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCache {
    fbox: FourierBox,
    nu_hat: Vec<Complex64>,
    f_hat: Option<Vec<Complex64>>,
}

impl SpectralCache {
    /// Evaluates `nu_hat` on the box. Only sign-canonical indices are
    /// computed; the rest are filled by conjugation.
    pub fn build(nu: &StepDistribution, h_bound: usize) -> Self {
        let fbox = FourierBox::new(nu.d(), h_bound.max(1));
        let mut values: Vec<Complex64> = (0..fbox.len())
            .into_par_iter()
            .map(|i| {
                let h = fbox.index_at(i);
                let fi = FourierIndex(h);
                if fi.is_zero() {
                    Complex64::new(1.0, 0.0)
                } else if fi.is_sign_canonical() {
                    nu.nu_hat(&fi.0)
                } else {
                    Complex64::new(f64::NAN, 0.0)
                }
            })
            .collect();
        // the box is symmetric under h -> -h, which maps index i to len-1-i
        let n = values.len();
        for i in 0..n / 2 {
            if values[i].re.is_nan() {
                values[i] = values[n - 1 - i].conj();
            } else {
                values[n - 1 - i] = values[i].conj();
            }
        }
        Self {
            fbox,
            nu_hat: values,
            f_hat: None,
        }
    }

    /// Cache of the Haar measure: `1` at `h = 0`, zero elsewhere.
    pub fn haar(d: usize, h_bound: usize) -> Self {
        let fbox = FourierBox::new(d, h_bound.max(1));
        let mut nu_hat = vec![Complex64::new(0.0, 0.0); fbox.len()];
        nu_hat[fbox.len() / 2] = Complex64::new(1.0, 0.0);
        Self {
            fbox,
            nu_hat,
            f_hat: None,
        }
    }

    /// The cache of the k-fold convolution power.
    pub fn power(&self, k: u64) -> Self {
        Self {
            fbox: self.fbox,
            nu_hat: self
                .nu_hat
                .iter()
                .map(|&v| convolution_power_hat(v, k))
                .collect(),
            f_hat: self.f_hat.clone(),
        }
    }

    pub fn with_f_hat(mut self, f: &TestFunction) -> Result<Self> {
        let coeffs = f.fourier_coefficients(self.fbox.bound())?;
        self.f_hat = Some(coeffs);
        Ok(self)
    }

    pub fn fourier_box(&self) -> FourierBox {
        self.fbox
    }

    /// Exclusive bound `H` of the covered box.
    pub fn h_bound(&self) -> usize {
        self.fbox.bound()
    }

    pub fn dim(&self) -> usize {
        self.fbox.dim()
    }

    pub fn get(&self, h: &[i64]) -> Option<Complex64> {
        self.fbox.index_of(h).map(|i| self.nu_hat[i])
    }

    pub fn f_hat(&self, h: &[i64]) -> Option<Complex64> {
        let i = self.fbox.index_of(h)?;
        self.f_hat.as_ref().map(|f| f[i])
    }

    pub fn values(&self) -> &[Complex64] {
        &self.nu_hat
    }

    pub fn require(&self, h_bound: usize) -> Result<()> {
        if self.fbox.bound() < h_bound {
            return Err(Error::InsufficientCoverage {
                available: self.fbox.bound(),
                required: h_bound,
            });
        }
        Ok(())
    }

    /// CSV rows `h1,...,hd,re,im` in linear-index order.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let cols: Vec<String> = (1..=self.dim()).map(|j| format!("h{j}")).collect();
        out.push_str(&cols.join(","));
        out.push_str(",re,im\n");
        for (i, v) in self.nu_hat.iter().enumerate() {
            for c in self.fbox.index_at(i) {
                out.push_str(&c.to_string());
                out.push(',');
            }
            out.push_str(&format!("{:e},{:e}\n", v.re, v.im));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn golden() -> StepDistribution {
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        StepDistribution::new(vec![1.0], vec![IntegerLaw::symmetric_unit()], vec![vec![phi]]).unwrap()
    }

    #[test]
    fn nu_hat_examples() {
        let nu = golden();
        assert_eq!(nu.nu_hat(&[0]), Complex64::new(1.0, 0.0));
        let single = StepDistribution::new(
            vec![1.0],
            vec![IntegerLaw::new(vec![(1, 1.0)]).unwrap()],
            vec![vec![0.25]],
        )
        .unwrap();
        let v = single.nu_hat(&[1]);
        assert_abs_diff_eq!(v.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn symmetric_walk_is_mean_of_cosines() {
        let lat = LatticeSystem::explicit(vec![vec![0.1, 0.37], vec![0.73, 0.2], vec![0.5, 0.9]]).unwrap();
        let nu = StepDistribution::symmetric(&lat);
        for h in [[1i64, 0], [2, -3], [-4, 7]] {
            let direct: f64 = lat
                .alphas
                .iter()
                .map(|a| (2.0 * PI * (h[0] as f64 * a[0] + h[1] as f64 * a[1])).cos())
                .sum::<f64>()
                / 3.0;
            let v = nu.nu_hat(&h);
            assert_abs_diff_eq!(v.re, direct, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn power_examples() {
        assert_eq!(convolution_power_hat(Complex64::new(1.0, 0.0), 17), Complex64::new(1.0, 0.0));
        assert_eq!(convolution_power_hat(Complex64::new(0.3, 0.2), 0), Complex64::new(1.0, 0.0));
        let v = convolution_power_hat(Complex64::new(0.0, -1.0), 2);
        assert_abs_diff_eq!(v.re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
        let v = convolution_power_hat(Complex64::new(0.9, 0.0), 100);
        assert_abs_diff_eq!(v.re, 0.9f64.powi(100), epsilon = 1e-18);
        assert_abs_diff_eq!(v.re, 2.656139888758747e-5, epsilon = 1e-15);
    }

    #[test]
    fn spectral_gap_examples() {
        let half = StepDistribution::new(vec![1.0], vec![IntegerLaw::symmetric_unit()], vec![vec![0.5]]).unwrap();
        // |cos(pi h)| = 1 at both h = 1 and h = 2; ties go to the smaller index
        let (g, h) = spectral_gap(&half, 3).unwrap();
        assert_abs_diff_eq!(g, 1.0, epsilon = 1e-15);
        assert_eq!(h.0, vec![1]);
        assert_abs_diff_eq!(half.nu_hat(&[2]).re, 1.0, epsilon = 1e-15);

        let (g, h) = spectral_gap(&golden(), 2).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(g, (2.0 * PI * phi).cos().abs(), epsilon = 1e-14);
        assert_abs_diff_eq!(g, 0.7373688780783197, epsilon = 1e-12);
        assert_eq!(h.0, vec![1]);
    }

    #[test]
    fn span_examples() {
        let law = |s: &[i64]| IntegerLaw::new(s.iter().map(|&n| (n, 1.0 / s.len() as f64)).collect()).unwrap();
        assert_eq!(maximal_span(&law(&[-1, 1])).unwrap(), 2);
        assert_eq!(maximal_span(&law(&[0, 2, 6])).unwrap(), 2);
        assert_eq!(maximal_span(&law(&[1, 2])).unwrap(), 1);
        assert!(maximal_span(&law(&[3])).is_err());
    }

    #[test]
    fn fitted_char_fn_constant_is_positive() {
        let laws = [
            IntegerLaw::symmetric_unit(),
            IntegerLaw::new(vec![(0, 0.25), (2, 0.5), (6, 0.25)]).unwrap(),
            IntegerLaw::new(vec![(1, 0.3), (2, 0.7)]).unwrap(),
        ];
        for law in &laws {
            let c = fit_char_fn_constant(law, 10_000).unwrap();
            assert!(c > 0.0, "{c}");
            // bound must hold on the grid by construction
            let span = maximal_span(law).unwrap() as f64;
            for j in 1..100 {
                let x = j as f64 / 100.0;
                let q = crate::torus::nearest_integer_norm(span * x);
                assert!(law.char_fn_turns(x).norm() <= 1.0 - c * q * q + 1e-12);
            }
        }
        // symmetric +-1: with y = ||2x||, (1 - cos(pi y)) / y^2 decreases on
        // [0, 1/2] from pi^2/2 to 4, attained at x = 1/4
        let c = fit_char_fn_constant(&IntegerLaw::symmetric_unit(), 10_000).unwrap();
        assert_abs_diff_eq!(c, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn validation_names_fields() {
        let e = StepDistribution::new(vec![0.7, 0.7], vec![IntegerLaw::symmetric_unit(); 2], vec![vec![0.1], vec![0.2]]).unwrap_err();
        assert!(matches!(e, Error::InvalidInput { ref field, .. } if field == "selector"));
        assert!(IntegerLaw::new(vec![(1, 0.5), (1, 0.5)]).is_err());
        assert!(IntegerLaw::new(vec![(1, 0.5)]).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let nu = golden();
        let back = StepDistribution::from_json(&nu.to_json()).unwrap();
        assert_eq!(back, nu);
        assert!(StepDistribution::from_json(r#"{"selector":[1.0],"steps":[[[1,1.0]]],"alphas":[[0.1]],"x":1}"#).is_err());
    }

    #[test]
    fn cache_matches_direct_evaluation() {
        let lat = LatticeSystem::explicit(vec![vec![0.31, 0.77]]).unwrap();
        let nu = StepDistribution::symmetric(&lat);
        let cache = SpectralCache::build(&nu, 5);
        for h in FourierBox::new(2, 5).iter() {
            let a = cache.get(&h).unwrap();
            let b = nu.nu_hat(&h);
            assert!((a - b).norm() < 1e-15);
        }
        assert!(cache.require(6).is_err());
        let csv = cache.to_csv();
        assert!(csv.starts_with("h1,h2,re,im\n"));
        assert_eq!(csv.lines().count(), 1 + 81);
    }

    proptest! {
        #[test]
        fn hermitian_and_bounded(
            alphas in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..4),
            h in prop::collection::vec(-50i64..50, 2),
            w in prop::collection::vec(0.01f64..1.0, 3),
        ) {
            let r = alphas.len();
            let total: f64 = w[..r].iter().sum();
            let selector: Vec<f64> = w[..r].iter().map(|x| x / total).collect();
            let selector_sum: f64 = selector.iter().sum();
            prop_assume!((selector_sum - 1.0).abs() < 1e-12);
            let steps = vec![IntegerLaw::new(vec![(-2, 0.2), (1, 0.5), (3, 0.3)]).unwrap(); r];
            let nu = StepDistribution::new(selector, steps, alphas).unwrap();
            let neg: Vec<i64> = h.iter().map(|c| -c).collect();
            let a = nu.nu_hat(&h);
            let b = nu.nu_hat(&neg);
            prop_assert_eq!(a, b.conj());
            prop_assert!(a.norm() <= 1.0 + 1e-12);
        }
    }
}
