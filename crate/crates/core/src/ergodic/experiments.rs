//! Monte Carlo variance, CLT and LIL harnesses, and the variance growth check.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::spectral::{asymptotic_variance_spectral, StepDistribution, TestFunction};
use crate::torus::FourierBox;

use super::stats::{ks_band_95, ks_normal, mean_and_se};
use super::walk::{trial_rng, NeumaierSum, StepSampler};

/// Target for the spectral bound on the last retained summand of the
/// variance series.
pub const SUMMAND_TAIL_TARGET: f64 = 1e-4;
/// Ratio of the geometric LIL checkpoint schedule.
pub const LIL_CHECKPOINT_RATIO: f64 = 1.25;
/// First N with `log log N > 0` used for LIL ratios.
pub const LIL_START: u64 = 16;
/// Inflation of the asymptotic KS band absorbing finite-N CLT error.
pub const KS_BAND_INFLATION: f64 = 2.0;

fn check_dims(nu: &StepDistribution, f: &TestFunction) -> Result<()> {
    if nu.d() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: nu.d(),
            found: f.dim(),
        });
    }
    Ok(())
}

fn uniform_point<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random::<f64>()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub k_max: usize,
    pub trials: usize,
}

/// `|E f(U) f(U + S_k)| <= sum_h |f_hat(h)|^2 |nu_hat(h)|^k`: the smallest k
/// with bound below `target`. Non-trigonometric `f` use a coefficient box plus
/// the residual `L^2` mass, which does not decay in k.
pub fn summand_truncation(nu: &StepDistribution, f: &TestFunction, target: f64) -> Result<usize> {
    const LIMIT: usize = 10_000_000;
    let bound = match f.degree() {
        Some(deg) => deg as usize + 1,
        None => {
            if f.dim() == 1 {
                256
            } else {
                32
            }
        }
    };
    let fbox = FourierBox::new(f.dim(), bound);
    let coeffs = f.fourier_coefficients(bound)?;
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let mut captured = 0.0;
    for (i, h) in fbox.iter().enumerate() {
        let w = coeffs[i].norm_sqr();
        if w == 0.0 || h.iter().all(|&x| x == 0) {
            continue;
        }
        captured += w;
        pairs.push((w, nu.nu_hat(&h).norm()));
    }
    let residual = if f.degree().is_some() {
        0.0
    } else {
        (f.l2_norm_sq() - captured).max(0.0)
    };
    if residual >= target {
        return Err(Error::invalid(
            "k_max",
            "spectral tail of the summands does not fall below the target; pass k_max explicitly",
        ));
    }
    let tail = |k: usize| residual + pairs.iter().map(|&(w, a)| w * a.powi(k as i32)).sum::<f64>();
    if pairs.iter().any(|&(_, a)| a >= 1.0) {
        return Err(Error::invalid("k_max", "|nu_hat| = 1 on the support of f_hat"));
    }
    let mut k = 1usize;
    while tail(k) >= target {
        k *= 2;
        if k > LIMIT {
            return Err(Error::cap("variance series truncation", k, LIMIT));
        }
    }
    let (mut lo, mut hi) = (k / 2, k);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if tail(mid) < target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(if tail(lo) < target { lo } else { hi })
}

/// Monte Carlo estimate of `C = E f(U)^2 + 2 sum_{k=1}^{K} E f(U) f(U + S_k)`
/// with `U` uniform and independent of the walk.
pub fn monte_carlo_variance(
    nu: &StepDistribution,
    f: &TestFunction,
    k_max: Option<usize>,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    check_dims(nu, f)?;
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    if f.is_zero() {
        return Ok(MonteCarloEstimate {
            mean: 0.0,
            std_err: 0.0,
            k_max: k_max.unwrap_or(0),
            trials,
        });
    }
    let k_max = match k_max {
        Some(k) => k,
        None => summand_truncation(nu, f, SUMMAND_TAIL_TARGET)?,
    };
    let sampler = StepSampler::new(nu)?;
    let d = nu.d();
    let z: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let mut x = uniform_point(&mut rng, d);
            let f0 = f.eval(&x);
            let mut acc = NeumaierSum::default();
            for _ in 0..k_max {
                sampler.step(&mut rng, &mut x);
                acc.add(f.eval(&x));
            }
            f0 * f0 + 2.0 * f0 * acc.value()
        })
        .collect();
    let (mean, std_err) = mean_and_se(&z);
    Ok(MonteCarloEstimate {
        mean,
        std_err,
        k_max,
        trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LilSummary {
    pub checkpoint_ratio: f64,
    pub checkpoints: Vec<u64>,
    /// Per trial, `sum / sqrt(2 N log log N)` at each checkpoint.
    pub ratios: Vec<Vec<f64>>,
    /// Inclusive window of N for the per-trial supremum.
    pub window: (u64, u64),
    /// Per trial, `sup |sum| / sqrt(2 N log log N)` over the window.
    pub sups: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub trials: usize,
    pub n: u64,
    pub seed: u64,
    pub function: serde_json::Value,
    pub walk: serde_json::Value,
    /// Spectral `C(f, nu)`.
    pub sigma2: f64,
    /// Per trial, `sum_{k <= N} f(S_k) / sqrt(N)`.
    pub normalized_sums: Vec<f64>,
    /// KS distance of the normalized sums to `N(0, sigma2)`; `None` on the
    /// degenerate branch `sigma2 = 0`.
    pub ks_distance: Option<f64>,
    /// `KS_BAND_INFLATION * 1.36 / sqrt(trials)`.
    pub ks_band: f64,
    pub max_abs_normalized_sum: f64,
    pub lil: Option<LilSummary>,
}

impl ExperimentReport {
    pub fn degenerate(&self) -> bool {
        self.ks_distance.is_none()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per trial: `trial,normalized_sum[,lil_sup]`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.lil.is_some() {
            "trial,normalized_sum,lil_sup\n"
        } else {
            "trial,normalized_sum\n"
        });
        for (t, s) in self.normalized_sums.iter().enumerate() {
            match &self.lil {
                Some(l) => writeln!(out, "{t},{s},{}", l.sups[t]),
                None => writeln!(out, "{t},{s}"),
            }
            .expect("string write");
        }
        out
    }
}

fn base_report(
    experiment: &str,
    nu: &StepDistribution,
    f: &TestFunction,
    n: u64,
    seed: u64,
    normalized_sums: Vec<f64>,
) -> Result<ExperimentReport> {
    let sigma2 = asymptotic_variance_spectral(f, nu, None)?.value;
    let trials = normalized_sums.len();
    let ks_distance = (sigma2 > 0.0).then(|| ks_normal(&normalized_sums, sigma2));
    let max_abs = normalized_sums.iter().fold(0.0, |m: f64, s| m.max(s.abs()));
    Ok(ExperimentReport {
        experiment: experiment.into(),
        trials,
        n,
        seed,
        function: f.describe(),
        walk: serde_json::from_str(&nu.to_json()).expect("walk json"),
        sigma2,
        normalized_sums,
        ks_distance,
        ks_band: KS_BAND_INFLATION * ks_band_95(trials),
        max_abs_normalized_sum: max_abs,
        lil: None,
    })
}

/// Independent trials of `sum_{k <= N} f(S_k) / sqrt(N)`, compared with
/// `N(0, C(f, nu))`.
pub fn clt_experiment(
    nu: &StepDistribution,
    f: &TestFunction,
    n: u64,
    trials: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    check_dims(nu, f)?;
    if n == 0 || trials == 0 {
        return Err(Error::invalid("N/trials", "must be at least 1"));
    }
    let sampler = StepSampler::new(nu)?;
    let d = nu.d();
    let sqrt_n = (n as f64).sqrt();
    let sums: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let mut x = vec![0.0; d];
            let mut acc = NeumaierSum::default();
            for _ in 0..n {
                sampler.step(&mut rng, &mut x);
                acc.add(f.eval(&x));
            }
            acc.value() / sqrt_n
        })
        .collect();
    base_report("clt", nu, f, n, seed, sums)
}

/// Geometric checkpoints `ceil(16 * 1.25^j)` up to and including `n_max`.
pub fn lil_checkpoints(n_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut x = LIL_START as f64;
    while (x.ceil() as u64) < n_max {
        let c = x.ceil() as u64;
        if out.last() != Some(&c) {
            out.push(c);
        }
        x *= LIL_CHECKPOINT_RATIO;
    }
    out.push(n_max);
    out
}

fn lil_norm(n: u64) -> f64 {
    let nf = n as f64;
    (2.0 * nf * nf.ln().ln()).sqrt()
}

/// Per trial, the running `sum_{k <= N} f(S_k) / sqrt(2 N log log N)` at the
/// checkpoints and its supremum in absolute value over `[N_max / 10, N_max]`.
pub fn lil_experiment(
    nu: &StepDistribution,
    f: &TestFunction,
    n_max: u64,
    trials: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    check_dims(nu, f)?;
    if n_max < 100 {
        return Err(Error::invalid("N_max", "must be at least 100"));
    }
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let sampler = StepSampler::new(nu)?;
    let d = nu.d();
    let checkpoints = lil_checkpoints(n_max);
    let window = ((n_max / 10).max(LIL_START), n_max);
    let per_trial: Vec<(f64, Vec<f64>, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let mut x = vec![0.0; d];
            let mut acc = NeumaierSum::default();
            let mut ratios = Vec::with_capacity(checkpoints.len());
            let mut next = 0;
            let mut sup = 0.0f64;
            for n in 1..=n_max {
                sampler.step(&mut rng, &mut x);
                acc.add(f.eval(&x));
                let at_checkpoint = next < checkpoints.len() && checkpoints[next] == n;
                let in_window = n >= window.0;
                if at_checkpoint || in_window {
                    let r = acc.value() / lil_norm(n);
                    if at_checkpoint {
                        ratios.push(r);
                        next += 1;
                    }
                    if in_window {
                        sup = sup.max(r.abs());
                    }
                }
            }
            (acc.value() / (n_max as f64).sqrt(), ratios, sup)
        })
        .collect();
    let mut sums = Vec::with_capacity(trials);
    let mut ratios = Vec::with_capacity(trials);
    let mut sups = Vec::with_capacity(trials);
    for (s, r, m) in per_trial {
        sums.push(s);
        ratios.push(r);
        sups.push(m);
    }
    let mut report = base_report("lil", nu, f, n_max, seed, sums)?;
    report.lil = Some(LilSummary {
        checkpoint_ratio: LIL_CHECKPOINT_RATIO,
        checkpoints,
        ratios,
        window,
        sups,
    });
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthRow {
    pub n: u64,
    /// Estimate of `E (sum_{k <= N} f(U + S_k))^2 / N`.
    pub estimate: f64,
    pub std_err: f64,
    /// `estimate - C`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceGrowth {
    pub c_spectral: f64,
    pub trials: usize,
    pub rows: Vec<GrowthRow>,
}

/// Monte Carlo `E (sum_{k <= N} f(U + S_k))^2 / N` at each `N` in `ns`,
/// against the spectral `C(f, nu)`. Needs at least 1000 trials.
pub fn variance_growth_check(
    nu: &StepDistribution,
    f: &TestFunction,
    ns: &[u64],
    trials: usize,
    seed: u64,
) -> Result<VarianceGrowth> {
    check_dims(nu, f)?;
    if trials < 1000 {
        return Err(Error::invalid("trials", "must be at least 1000"));
    }
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::invalid("Ns", "must be a nonempty list of positive counts"));
    }
    let c = asymptotic_variance_spectral(f, nu, None)?.value;
    let mut sorted = ns.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let n_max = *sorted.last().expect("nonempty");
    let sampler = StepSampler::new(nu)?;
    let d = nu.d();
    let per_trial: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let mut x = uniform_point(&mut rng, d);
            let mut acc = NeumaierSum::default();
            let mut out = Vec::with_capacity(sorted.len());
            let mut next = 0;
            for n in 1..=n_max {
                sampler.step(&mut rng, &mut x);
                acc.add(f.eval(&x));
                if sorted[next] == n {
                    out.push(acc.value().powi(2) / n as f64);
                    next += 1;
                }
            }
            out
        })
        .collect();
    let rows = sorted
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let col: Vec<f64> = per_trial.iter().map(|r| r[j]).collect();
            let (estimate, std_err) = mean_and_se(&col);
            GrowthRow {
                n,
                estimate,
                std_err,
                deviation: estimate - c,
            }
        })
        .collect();
    Ok(VarianceGrowth {
        c_spectral: c,
        trials,
        rows,
    })
}
