//! Per-k records `lower <= exact <= upper` for `W_p(nu^{*k}, mu)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::spectral::StepDistribution;

use super::circle::{exact_w1_circle, CircleMeasure};
use super::lower::{rnet_bound_from_counts, walk_support_net, DEFAULT_NET_CAP};
use super::measure::{lattice_law_cells, lattice_laws, DiscreteMeasure, LatticeLaw, DEFAULT_ATOM_CAP};
use super::transport::{exact_wp_grid, DEFAULT_TRANSPORT_CAP};
use super::upper::{optimize_upper, ShellTable, SmoothingConstant};

/// Slack allowed when checking `lower <= exact <= upper`.
pub const SANDWICH_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactMethod {
    /// Closed form on the circle (d = 1, p = 1).
    CircleClosedForm,
    /// Finite transport against the cell-centre discretization of `mu`.
    GridTransport,
}

impl ExactMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ExactMethod::CircleClosedForm => "circle_closed_form",
            ExactMethod::GridTransport => "grid_transport",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRecord {
    pub k: u64,
    pub p: f64,
    pub lower: f64,
    /// The `lambda` attaining `lower`, if any net gave a positive bound.
    pub lower_lambda: Option<f64>,
    pub exact: Option<f64>,
    pub exact_method: Option<ExactMethod>,
    pub upper: f64,
    pub upper_h: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SandwichOptions {
    pub h_max: usize,
    pub lambdas: Vec<f64>,
    pub constant: SmoothingConstant,
    pub atom_cap: usize,
    pub net_cap: usize,
    pub transport_cap: usize,
    /// Cells per axis of the discretized Haar measure used by grid transport;
    /// 0 picks 1000 for d = 1 and 32 for d = 2.
    pub haar_grid: usize,
    /// Skip exact entries altogether.
    pub skip_exact: bool,
}

impl Default for SandwichOptions {
    fn default() -> Self {
        Self {
            h_max: 1024,
            lambdas: vec![2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0],
            constant: SmoothingConstant::Displayed,
            atom_cap: DEFAULT_ATOM_CAP,
            net_cap: DEFAULT_NET_CAP,
            transport_cap: DEFAULT_TRANSPORT_CAP,
            haar_grid: 0,
            skip_exact: false,
        }
    }
}

impl SandwichOptions {
    fn grid_side(&self, d: usize) -> usize {
        match (self.haar_grid, d) {
            (0, 1) => 1000,
            (0, _) => 32,
            (n, _) => n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_max < 2 {
            return Err(Error::invalid("h_max", "must be at least 2"));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::invalid("lambdas", "must be a nonempty list of positive reals"));
        }
        Ok(())
    }
}

fn exact_entry(
    nu: &StepDistribution,
    law: &LatticeLaw,
    p: f64,
    opts: &SandwichOptions,
) -> Result<Option<(f64, ExactMethod)>> {
    let d = nu.d();
    let m = law.to_measure(nu.alphas())?;
    if d == 1 && p == 1.0 {
        let v = exact_w1_circle(CircleMeasure::Atoms(&m), CircleMeasure::Haar)?;
        return Ok(Some((v, ExactMethod::CircleClosedForm)));
    }
    if d > 2 {
        return Ok(None);
    }
    let grid = DiscreteMeasure::haar_grid(d, opts.grid_side(d));
    if m.len() + grid.len() > opts.transport_cap {
        return Ok(None);
    }
    let v = exact_wp_grid(&m, &grid, p, opts.transport_cap)?;
    Ok(Some((v, ExactMethod::GridTransport)))
}

fn lower_entry(
    nu: &StepDistribution,
    k: u64,
    p: f64,
    law: Option<&LatticeLaw>,
    opts: &SandwichOptions,
) -> Result<(f64, Option<f64>)> {
    let mut best = (0.0, None);
    for &lambda in &opts.lambdas {
        let net = match walk_support_net(nu, k, lambda, law, opts.net_cap) {
            Ok(n) => n,
            Err(Error::CapExceeded { .. }) => continue,
            Err(e) => return Err(e),
        };
        let b = rnet_bound_from_counts(net.size, net.theta().min(1.0), net.radius, p, nu.d())?;
        if b.value > best.0 {
            best = (b.value, Some(lambda));
        }
    }
    Ok(best)
}

/// Lower, exact (when within caps) and upper values per `k`, ordered as `ks`.
/// Fails with `Invariant` if an exact value falls outside its bounds.
pub fn bound_sandwich(nu: &StepDistribution, ks: &[u64], p: f64, opts: &SandwichOptions) -> Result<Vec<BoundRecord>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid("p", "must lie in (0, 1]"));
    }
    opts.validate()?;
    let table = ShellTable::build(nu, opts.h_max);

    let feasible: Vec<u64> = if opts.skip_exact {
        Vec::new()
    } else {
        let mut f: Vec<u64> = ks
            .iter()
            .copied()
            .filter(|&k| lattice_law_cells(nu, k).is_some_and(|c| c <= opts.atom_cap as u128))
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    };
    let laws = lattice_laws(nu, &feasible, opts.atom_cap)?;
    let law_of = |k: u64| feasible.binary_search(&k).ok().map(|i| &laws[i]);

    ks.par_iter()
        .map(|&k| {
            let law = law_of(k);
            let up = optimize_upper(&table, k, p, opts.constant)?;
            let (lower, lower_lambda) = lower_entry(nu, k, p, law, opts)?;
            let exact = match law {
                Some(l) => exact_entry(nu, l, p, opts)?,
                None => None,
            };
            let rec = BoundRecord {
                k,
                p,
                lower,
                lower_lambda,
                exact: exact.map(|e| e.0),
                exact_method: exact.map(|e| e.1),
                upper: up.value,
                upper_h: up.h,
            };
            check_record(&rec)?;
            Ok(rec)
        })
        .collect()
}

/// Verifies `lower <= exact <= upper` up to `SANDWICH_SLACK` and nonnegativity.
pub fn check_record(rec: &BoundRecord) -> Result<()> {
    if rec.lower < 0.0 || rec.upper < 0.0 {
        return Err(Error::Invariant(format!("negative bound at k = {}", rec.k)));
    }
    if let Some(e) = rec.exact {
        if rec.lower > e + SANDWICH_SLACK || e > rec.upper + SANDWICH_SLACK {
            return Err(Error::Invariant(format!(
                "sandwich broken at k = {}: {} <= {} <= {}",
                rec.k, rec.lower, e, rec.upper
            )));
        }
    }
    Ok(())
}

pub const CSV_HEADER: &str = "k,p,lower,exact,exact_method,upper,upper_H";

/// CSV with header `k,p,lower,exact,exact_method,upper,upper_H`; missing exact
/// entries are empty fields. Floats use the shortest round-trip form.
pub fn records_to_csv(records: &[BoundRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            r.p,
            r.lower,
            r.exact.map(|e| e.to_string()).unwrap_or_default(),
            r.exact_method.map(ExactMethod::as_str).unwrap_or_default(),
            r.upper,
            r.upper_h
        );
    }
    out
}

/// Least-squares slope of `ln y` against `ln x`, over pairs with `y > 0`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
