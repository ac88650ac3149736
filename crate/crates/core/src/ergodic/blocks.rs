//! Block decomposition `H_1, J_1, H_2, J_2, ...` and the coupled block sums.
//!
//! For `k` in `J_i`,
//! `W_k = sum_{j < i} (T_{H_j} + S_{J_j}) + T_{H_i} + (partial sum over J_i)`
//! and `W_k*` replaces `T_{H_i}` by `U_{H_i}`; the `H` blocks (`i >= 2`) are
//! treated symmetrically with the roles of `H` and `J` exchanged. Each pair
//! `(T, U)` is drawn from the optimal circle coupling of `nu^{*m}` and `mu`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::spectral::{StepDistribution, TestFunction};
use crate::torus::{frac, nearest_integer_norm};
use crate::wasserstein::{circle_transport_shift, convolution_power, DiscreteMeasure};

use super::walk::{trial_rng, StepSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlockKind {
    H,
    J,
}

/// The block `kind_index` covering `start..=end` (1-based step indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Block {
    pub kind: BlockKind,
    pub index: usize,
    pub start: u64,
    pub end: u64,
}

impl Block {
    pub fn len(&self) -> usize {
        (self.end - self.start + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// `|H_i| = max(floor(i^(1/4)), 1)`.
pub fn h_size(i: usize) -> usize {
    integer_root(i as u64, 4).max(1) as usize
}

/// `|J_i| = max(floor(i^(1/2)), 1)`.
pub fn j_size(i: usize) -> usize {
    integer_root(i as u64, 2).max(1) as usize
}

fn integer_root(n: u64, k: u32) -> u64 {
    let mut r = (n as f64).powf(1.0 / k as f64).round() as u64;
    while r > 0 && r.checked_pow(k).is_none_or(|v| v > n) {
        r -= 1;
    }
    while (r + 1).checked_pow(k).is_some_and(|v| v <= n) {
        r += 1;
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockDecomposition {
    pub n: u64,
    /// `H_1, J_1, H_2, J_2, ...`, the last one truncated at `n`.
    pub blocks: Vec<Block>,
}

impl BlockDecomposition {
    pub fn new(n: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("N", "must be at least 2"));
        }
        let mut blocks = Vec::new();
        let mut start = 1u64;
        let mut i = 1usize;
        'outer: loop {
            for (kind, size) in [(BlockKind::H, h_size(i)), (BlockKind::J, j_size(i))] {
                let end = (start + size as u64 - 1).min(n);
                blocks.push(Block {
                    kind,
                    index: i,
                    start,
                    end,
                });
                if end == n {
                    break 'outer;
                }
                start = end + 1;
            }
            i += 1;
        }
        Ok(Self { n, blocks })
    }

    /// Index `i` of the block (`H_i` or `J_i`) containing `n`.
    pub fn block_index_of_end(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.index)
    }

    /// Complete `(H_i, J_i)` pairs plus a trailing partial pair, by index.
    pub fn pairs(&self) -> Vec<(Block, Option<Block>)> {
        self.blocks
            .chunks(2)
            .map(|c| (c[0], c.get(1).copied()))
            .collect()
    }
}

/// The optimal coupling of a finite measure on the circle with `mu`: for
/// `t` uniform on `[0, 1)`, `T = Q(t)` with `Q` the quantile function and
/// `U = t - c* mod 1`, `c*` a median of the CDF difference.
#[derive(Debug, Clone)]
pub struct CircleCoupling {
    points: Vec<f64>,
    cum: Vec<f64>,
    shift: f64,
    /// Exact `W_1(m, mu)`.
    pub delta: f64,
}

impl CircleCoupling {
    pub fn new(m: &DiscreteMeasure) -> Result<Self> {
        let (shift, delta) = circle_transport_shift(m)?;
        let mut atoms: Vec<(f64, f64)> = (0..m.len()).map(|i| (m.point(i)[0], m.mass(i))).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cum = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for a in &atoms {
            acc += a.1;
            cum.push(acc);
        }
        Ok(Self {
            points: atoms.iter().map(|a| a.0).collect(),
            cum,
            shift,
            delta,
        })
    }

    fn quantile(&self, t: f64) -> f64 {
        let j = self.cum.partition_point(|&c| c <= t);
        self.points[j.min(self.points.len() - 1)]
    }

    /// `(T, U)` at level `t`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        (self.quantile(t), frac(t - self.shift))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        self.at(rng.random::<f64>())
    }

    /// Exact `E ||T - U||^p` under this coupling.
    pub fn expected_cost(&self, p: f64) -> f64 {
        // antiderivative of the 1-periodic ||s||^p
        let half = 0.5f64.powf(p + 1.0) / (p + 1.0);
        let g = |s: f64| {
            let fl = s.floor();
            let u = s - fl;
            let inner = if u <= 0.5 {
                u.powf(p + 1.0) / (p + 1.0)
            } else {
                2.0 * half - (1.0 - u).powf(p + 1.0) / (p + 1.0)
            };
            fl * 2.0 * half + inner
        };
        let mut total = 0.0;
        let mut t0 = 0.0;
        for (&a, &c) in self.points.iter().zip(&self.cum) {
            let t1 = c.min(1.0);
            if t1 > t0 {
                // s = t - c* - a over t in [t0, t1)
                total += g(t1 - self.shift - a) - g(t0 - self.shift - a);
            }
            t0 = t1;
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingOptions {
    /// Exponent of the cost `d(T, U)^p`.
    pub p: f64,
    /// Factor applied to `Delta` in the reported per-block cost contract:
    /// 1 for the optimal plan, 2 for the slack allowed in the construction.
    pub contract_factor: f64,
    pub atom_cap: usize,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self {
            p: 1.0,
            contract_factor: 1.0,
            atom_cap: crate::wasserstein::measure::DEFAULT_ATOM_CAP,
        }
    }
}

/// One replication of the coupled construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledBlockSums {
    /// `Y_i = sum_{k in J_i} f(W_k)` for each `J_i` present.
    pub y: Vec<f64>,
    pub y_star: Vec<f64>,
    /// `Z_i` and `Z_i*` for `i >= 2` (entry `i - 2`).
    pub z: Vec<f64>,
    pub z_star: Vec<f64>,
    /// `d(T_{H_i}, U_{H_i})^p` per `J_i` present.
    pub h_cost: Vec<f64>,
    /// `d(T_{J_i}, U_{J_i})^p` per `H_{i+1}` present.
    pub j_cost: Vec<f64>,
    /// `W_k*` at the first `k` of each `J_i`.
    pub w_star_first: Vec<f64>,
    /// All `W_k*`, `k` in the `J` blocks.
    pub w_star: Vec<f64>,
}

/// Precomputed couplings for a decomposition of `1..=N`.
#[derive(Debug, Clone)]
pub struct BlockCoupler {
    pub blocks: BlockDecomposition,
    sampler: StepSampler,
    couplings: BTreeMap<usize, CircleCoupling>,
    opts: CouplingOptions,
}

impl BlockCoupler {
    pub const MAX_N: u64 = 100_000;

    pub fn new(nu: &StepDistribution, n: u64, opts: CouplingOptions) -> Result<Self> {
        if nu.d() != 1 {
            return Err(Error::UnsupportedDimension {
                d: nu.d(),
                reason: "the block coupling uses circle transport".into(),
            });
        }
        if n > Self::MAX_N {
            return Err(Error::cap("coupled block length", n as usize, Self::MAX_N as usize));
        }
        if !(opts.p > 0.0 && opts.p <= 1.0) {
            return Err(Error::invalid("p", "must lie in (0, 1]"));
        }
        let blocks = BlockDecomposition::new(n)?;
        let mut couplings = BTreeMap::new();
        for b in &blocks.blocks {
            if let std::collections::btree_map::Entry::Vacant(e) = couplings.entry(b.len()) {
                let m = convolution_power(nu, b.len() as u64, opts.atom_cap)?;
                e.insert(CircleCoupling::new(&m)?);
            }
        }
        Ok(Self {
            blocks,
            sampler: StepSampler::new(nu)?,
            couplings,
            opts,
        })
    }

    pub fn coupling(&self, m: usize) -> Option<&CircleCoupling> {
        self.couplings.get(&m)
    }

    /// `contract_factor * E d(T, U)^p` of the plan for block length `m`.
    pub fn cost_contract(&self, m: usize) -> Option<f64> {
        self.couplings
            .get(&m)
            .map(|c| self.opts.contract_factor * c.expected_cost(self.opts.p))
    }

    /// One replication driven by `rng`.
    pub fn run<R: Rng + ?Sized>(&self, f: &TestFunction, rng: &mut R) -> Result<CoupledBlockSums> {
        if f.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: f.dim(),
            });
        }
        let p = self.opts.p;
        let cost = |t: f64, u: f64| nearest_integer_norm(t - u).powf(p);
        let mut out = CoupledBlockSums {
            y: Vec::new(),
            y_star: Vec::new(),
            z: Vec::new(),
            z_star: Vec::new(),
            h_cost: Vec::new(),
            j_cost: Vec::new(),
            w_star_first: Vec::new(),
            w_star: Vec::new(),
        };
        // a_y = sum_{j < i} (T_{H_j} + S_{J_j}); a_z = sum_{j < i} (S_{H_j} + T_{J_j})
        let mut a_y = 0.0;
        let mut a_z = 0.0;
        let mut prev_j: Option<(f64, f64)> = None;
        for (h, j) in self.blocks.pairs() {
            // H_i: the Z-type sums use the coupling drawn for J_{i-1}
            let (th, uh) = self.couplings[&h.len()].sample(rng);
            let mut walk = 0.0;
            let (mut zs, mut zs_star) = (0.0, 0.0);
            for _ in 0..h.len() {
                walk = self.step(rng, walk);
                if let Some((tj, uj)) = prev_j {
                    zs += f.eval(&[frac(a_z + tj + walk)]);
                    zs_star += f.eval(&[frac(a_z + uj + walk)]);
                }
            }
            let s_h = walk;
            if let Some((tj, _)) = prev_j {
                out.z.push(zs);
                out.z_star.push(zs_star);
                a_z = frac(a_z + tj);
            }
            a_z = frac(a_z + s_h);
            let Some(j) = j else { break };
            out.h_cost.push(cost(th, uh));
            let mut walk = 0.0;
            let (mut ys, mut ys_star) = (0.0, 0.0);
            for step in 0..j.len() {
                walk = self.step(rng, walk);
                let w_star = frac(a_y + uh + walk);
                ys += f.eval(&[frac(a_y + th + walk)]);
                ys_star += f.eval(&[w_star]);
                if step == 0 {
                    out.w_star_first.push(w_star);
                }
                out.w_star.push(w_star);
            }
            out.y.push(ys);
            out.y_star.push(ys_star);
            a_y = frac(a_y + th + walk);
            let (tj, uj) = self.couplings[&j.len()].sample(rng);
            if j.end < self.blocks.n {
                out.j_cost.push(cost(tj, uj));
            }
            prev_j = Some((tj, uj));
            // S_{J_i} enters the Y track only; the Z track uses T_{J_i}
        }
        Ok(out)
    }

    fn step<R: Rng + ?Sized>(&self, rng: &mut R, x: f64) -> f64 {
        let mut v = [x];
        self.sampler.step(rng, &mut v);
        v[0]
    }
}

/// One replication for `seed` (stream 0).
pub fn coupled_block_sums(
    nu: &StepDistribution,
    f: &TestFunction,
    n: u64,
    seed: u64,
    opts: CouplingOptions,
) -> Result<CoupledBlockSums> {
    let coupler = BlockCoupler::new(nu, n, opts)?;
    coupler.run(f, &mut trial_rng(seed, 0))
}

/// Independent replications on streams `0..reps`.
pub fn coupled_block_replications(
    coupler: &BlockCoupler,
    f: &TestFunction,
    reps: usize,
    seed: u64,
) -> Result<Vec<CoupledBlockSums>> {
    (0..reps as u64)
        .into_par_iter()
        .map(|r| coupler.run(f, &mut trial_rng(seed, r)))
        .collect()
}
