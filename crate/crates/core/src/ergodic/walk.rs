//! Seeded simulation of `S_k = X_1 + ... + X_k mod 1`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::{StepDistribution, TestFunction};
use crate::torus::{frac, TorusPoint};

/// The generator for `(seed, stream)`: ChaCha8 keyed by `seed` with the
/// stream set to `stream`, so trials are independent and reproducible.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws one step: first the base vector `I`, then `xi_I`.
#[derive(Debug, Clone)]
pub struct StepSampler {
    d: usize,
    selector: WeightedIndex<f64>,
    steps: Vec<(WeightedIndex<f64>, Vec<i64>)>,
    alphas: Vec<Vec<f64>>,
}

impl StepSampler {
    pub fn new(nu: &StepDistribution) -> Result<Self> {
        let selector = WeightedIndex::new(nu.selector().iter().copied())
            .map_err(|e| Error::invalid("selector", e.to_string()))?;
        let steps = nu
            .steps()
            .iter()
            .map(|law| {
                let w = WeightedIndex::new(law.atoms().iter().map(|a| a.1))
                    .map_err(|e| Error::invalid("steps", e.to_string()))?;
                Ok((w, law.atoms().iter().map(|a| a.0).collect()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            d: nu.d(),
            selector,
            steps,
            alphas: nu.alphas().to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// The lattice move `(i, n)` of one step.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, i64) {
        let i = self.selector.sample(rng);
        let (w, values) = &self.steps[i];
        (i, values[w.sample(rng)])
    }

    /// Adds one step to `x` in place.
    pub fn step<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut [f64]) {
        let (i, n) = self.draw(rng);
        if n != 0 {
            for (xj, a) in x.iter_mut().zip(&self.alphas[i]) {
                *xj = frac(*xj + n as f64 * a);
            }
        }
    }

    /// Sum of `m` steps started at the origin.
    pub fn block<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        for _ in 0..m {
            self.step(rng, &mut x);
        }
        x
    }
}

/// A streamed walk `S_1, ..., S_N` from the origin.
#[derive(Debug, Clone)]
pub struct WalkPath {
    pub seed: u64,
    pub stream: u64,
    pub steps: usize,
    sampler: StepSampler,
    rng: ChaCha8Rng,
    pos: Vec<f64>,
    taken: usize,
}

impl WalkPath {
    /// Advances one step and returns the new position, or `None` after `S_N`.
    pub fn advance(&mut self) -> Option<&[f64]> {
        if self.taken == self.steps {
            return None;
        }
        self.sampler.step(&mut self.rng, &mut self.pos);
        self.taken += 1;
        Some(&self.pos)
    }

    pub fn taken(&self) -> usize {
        self.taken
    }
}

impl Iterator for WalkPath {
    type Item = TorusPoint;

    fn next(&mut self) -> Option<TorusPoint> {
        self.advance().map(|x| TorusPoint::new(x.to_vec()).expect("finite"))
    }
}

/// The walk of `n` steps for `seed`, on stream 0.
pub fn simulate_walk(nu: &StepDistribution, n: usize, seed: u64) -> Result<WalkPath> {
    simulate_walk_stream(nu, n, seed, 0)
}

pub fn simulate_walk_stream(nu: &StepDistribution, n: usize, seed: u64, stream: u64) -> Result<WalkPath> {
    if n == 0 {
        return Err(Error::invalid("N", "must be at least 1"));
    }
    Ok(WalkPath {
        seed,
        stream,
        steps: n,
        sampler: StepSampler::new(nu)?,
        rng: trial_rng(seed, stream),
        pos: vec![0.0; nu.d()],
        taken: 0,
    })
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `sum_k f(S_k)` over the remaining steps of `path`.
pub fn ergodic_sum(path: &mut WalkPath, f: &TestFunction) -> Result<f64> {
    if f.dim() != path.sampler.dim() {
        return Err(Error::DimensionMismatch {
            expected: path.sampler.dim(),
            found: f.dim(),
        });
    }
    let mut acc = NeumaierSum::default();
    while let Some(x) = path.advance() {
        acc.add(f.eval(x));
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::IntegerLaw;

    fn golden() -> StepDistribution {
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        StepDistribution::new(vec![1.0], vec![IntegerLaw::symmetric_unit()], vec![vec![phi]]).unwrap()
    }

    #[test]
    fn degenerate_steps_stay_at_origin() {
        let nu = StepDistribution::new(vec![1.0], vec![IntegerLaw::new(vec![(0, 1.0)]).unwrap()], vec![vec![0.3]]).unwrap();
        assert!(simulate_walk(&nu, 50, 7).unwrap().all(|p| p.coords() == [0.0]));
    }

    #[test]
    fn seeded_paths_repeat() {
        let a: Vec<TorusPoint> = simulate_walk(&golden(), 100, 42).unwrap().collect();
        let b: Vec<TorusPoint> = simulate_walk(&golden(), 100, 42).unwrap().collect();
        let c: Vec<TorusPoint> = simulate_walk_stream(&golden(), 100, 42, 1).unwrap().collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 100);
        assert!(a.iter().all(|p| (0.0..1.0).contains(&p.coords()[0])));
    }

    #[test]
    fn first_step_frequency() {
        let nu = golden();
        let phi = nu.alphas()[0][0];
        let trials = 100_000u64;
        let plus = (0..trials)
            .filter(|&t| {
                let x = simulate_walk_stream(&nu, 1, 3, t).unwrap().next().unwrap();
                (x.coords()[0] - phi).abs() < 1e-12
            })
            .count();
        let freq = plus as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.005, "{freq}");
    }

    #[test]
    fn sums_of_small_cases() {
        let nu = golden();
        let zero = TestFunction::zero(1);
        assert_eq!(ergodic_sum(&mut simulate_walk(&nu, 1000, 1).unwrap(), &zero).unwrap(), 0.0);
        let f = TestFunction::cosine(vec![1], 2f64.sqrt()).unwrap();
        let mut path = simulate_walk(&nu, 1, 9).unwrap();
        let x = path.clone().next().unwrap();
        assert_eq!(ergodic_sum(&mut path, &f).unwrap(), f.eval(x.coords()));
    }

    #[test]
    fn compensated_sum() {
        let mut s = NeumaierSum::default();
        for x in [1.0, 1e100, 1.0, -1e100] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }
}
