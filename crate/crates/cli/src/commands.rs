//! Command bodies. Each writes its artifacts through the manifest.

use std::path::Path;

use serde::Serialize;
use serde_json::json;

use walklab_core::ergodic::{
    clt_experiment, coupled_block_replications, correlation, ks_band_95, ks_uniform, lil_experiment, mean_and_se,
    monte_carlo_variance, variance_growth_check, BlockCoupler, BlockKind, CouplingOptions,
};
use walklab_core::lattice::diophantine_quality;
use walklab_core::spectral::{asymptotic_variance_spectral, spectral_gap};
use walklab_core::wasserstein::{bound_sandwich, log_log_slope, records_to_csv, BoundRecord};

use crate::config::{parse_config, ExperimentConfig, Walk};
use crate::manifest::{sha256_hex, Manifest};
use crate::{CliError, Command};

type Res = Result<(), CliError>;

/// Bundled `reproduce` cases: name and config.
pub const BUNDLED: [(&str, &str); 3] = [
    ("golden", include_str!("../configs/golden.json")),
    ("cubic_rank_two", include_str!("../configs/cubic_rank_two.json")),
    ("cubic_plane", include_str!("../configs/cubic_plane.json")),
];

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn csv_bytes(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("artifact serializes")
}

pub fn dispatch(command: Command, cfg: &ExperimentConfig, out: &Path, m: &mut Manifest) -> Res {
    let walk = cfg.walk.build()?;
    match command {
        Command::Construct => construct(&walk, out, m),
        Command::Quality => quality(cfg, &walk, out, m),
        Command::Bounds => bounds(cfg, &walk, out, m, "bounds").map(|_| ()),
        Command::Variance => variance(cfg, &walk, out, m),
        Command::Clt | Command::Lil => walk_experiment(command, cfg, &walk, out, m),
        Command::Blocks => blocks(cfg, &walk, out, m),
        Command::Reproduce => unreachable!("reproduce has no config"),
    }
}

fn construct(walk: &Walk, out: &Path, m: &mut Manifest) -> Res {
    m.write_json(
        out,
        "construct.json",
        json!({
            "lattice": walk.lattice,
            "roots": walk.roots,
            "relative_residual": walk.residual,
            "step_distribution": walk.nu,
            "nondegenerate": walk.nu.is_nondegenerate(),
        }),
    )
}

fn quality(cfg: &ExperimentConfig, walk: &Walk, out: &Path, m: &mut Manifest) -> Res {
    let q = diophantine_quality(&walk.lattice, cfg.quality.h_max).map_err(|e| CliError::from_core(e, "quality.h_max"))?;
    let (gap, at) = spectral_gap(&walk.nu, cfg.quality.gap_h).map_err(|e| CliError::from_core(e, "quality.gap_h"))?;
    m.write_json(
        out,
        "quality.json",
        json!({
            "r": walk.lattice.r,
            "d": walk.lattice.d,
            "diophantine": q,
            "spectral_gap": {"max_abs_nu_hat": gap, "at": at, "h_bound": cfg.quality.gap_h},
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Slopes {
    pub exact: Option<f64>,
    pub upper: Option<f64>,
    pub lower: Option<f64>,
    pub exact_points: usize,
}

/// Log-log slopes of `W_p^{1/p}` against `k`.
pub fn fit_slopes(records: &[BoundRecord]) -> Slopes {
    let ks: Vec<f64> = records.iter().map(|r| r.k as f64).collect();
    let root = |v: f64, p: f64| v.powf(1.0 / p);
    let col = |g: &dyn Fn(&BoundRecord) -> Option<f64>| -> Vec<f64> {
        records.iter().map(|r| g(r).map_or(f64::NAN, |v| root(v, r.p))).collect()
    };
    let exact = col(&|r| r.exact);
    Slopes {
        exact: log_log_slope(&ks, &exact),
        upper: log_log_slope(&ks, &col(&|r| Some(r.upper))),
        lower: log_log_slope(&ks, &col(&|r| Some(r.lower))),
        exact_points: records.iter().filter(|r| r.exact.is_some()).count(),
    }
}

fn bounds(cfg: &ExperimentConfig, walk: &Walk, out: &Path, m: &mut Manifest, stem: &str) -> Result<Slopes, CliError> {
    let b = &cfg.bounds;
    let records = bound_sandwich(&walk.nu, &b.ks, b.p, &b.sandwich).map_err(|e| CliError::from_core(e, "bounds."))?;
    m.write_artifact(out, &format!("{stem}.csv"), records_to_csv(&records).as_bytes())?;
    let slopes = fit_slopes(&records);
    let (r, d) = (walk.lattice.r, walk.lattice.d);
    m.write_json(
        out,
        &format!("{stem}.json"),
        json!({
            "r": r,
            "d": d,
            "predicted_exponent": -(r as f64) / (2.0 * d as f64),
            "slopes": slopes,
            "records": records,
        }),
    )?;
    Ok(slopes)
}

fn variance(cfg: &ExperimentConfig, walk: &Walk, out: &Path, m: &mut Manifest) -> Res {
    let v = &cfg.variance;
    let f = cfg.function_spec(walk.nu.d()).build(walk.nu.d())?;
    let spectral = asymptotic_variance_spectral(&f, &walk.nu, None).map_err(|e| CliError::from_core(e, "walk"))?;
    let mc = monte_carlo_variance(&walk.nu, &f, v.k_max, v.trials, cfg.seed)
        .map_err(|e| CliError::from_core(e, "variance."))?;
    let growth = if v.growth_ns.is_empty() {
        None
    } else {
        let g = variance_growth_check(&walk.nu, &f, &v.growth_ns, v.growth_trials, cfg.seed)
            .map_err(|e| CliError::from_core(e, "variance."))?;
        let mut w = csv_writer();
        w.write_record(["n", "estimate", "std_err", "deviation"])
            .map_err(|e| CliError::Io(e.to_string()))?;
        for row in &g.rows {
            w.serialize((row.n, row.estimate, row.std_err, row.deviation))
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
        m.write_artifact(out, "variance_growth.csv", &csv_bytes(w)?)?;
        Some(g)
    };
    let z = if mc.std_err > 0.0 {
        Some((mc.mean - spectral.value) / mc.std_err)
    } else {
        None
    };
    m.write_json(
        out,
        "variance.json",
        json!({
            "function": f.describe(),
            "spectral": spectral,
            "monte_carlo": mc,
            "z_score": z,
            "growth": growth,
        }),
    )
}

fn walk_experiment(command: Command, cfg: &ExperimentConfig, walk: &Walk, out: &Path, m: &mut Manifest) -> Res {
    let f = cfg.function_spec(walk.nu.d()).build(walk.nu.d())?;
    let report = match command {
        Command::Clt => clt_experiment(&walk.nu, &f, cfg.clt.n, cfg.clt.trials, cfg.seed)
            .map_err(|e| CliError::from_core(e, "clt."))?,
        _ => lil_experiment(&walk.nu, &f, cfg.lil.n_max, cfg.lil.trials, cfg.seed)
            .map_err(|e| CliError::from_core(e, "lil."))?,
    };
    let stem = command.as_str();
    m.write_artifact(out, &format!("{stem}.csv"), report.to_csv().as_bytes())?;
    m.write_json(out, &format!("{stem}.json"), to_value(&report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CostRow {
    block_length: usize,
    samples: usize,
    mean_cost: f64,
    std_err: f64,
    delta: f64,
    contract: f64,
}

fn blocks(cfg: &ExperimentConfig, walk: &Walk, out: &Path, m: &mut Manifest) -> Res {
    let b = &cfg.blocks;
    let f = cfg.function_spec(walk.nu.d()).build(walk.nu.d())?;
    let opts = CouplingOptions {
        p: b.p,
        contract_factor: b.contract_factor,
        ..Default::default()
    };
    let coupler = BlockCoupler::new(&walk.nu, b.n, opts).map_err(|e| CliError::from_core(e, "blocks."))?;
    let runs = coupled_block_replications(&coupler, &f, b.reps, cfg.seed).map_err(|e| CliError::from_core(e, "blocks."))?;

    let pooled: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.w_star_first.iter().take(b.uniformity_blocks).copied())
        .collect();
    let ks = ks_uniform(&pooled);

    let pairs = runs.iter().map(|r| r.y_star.len()).min().unwrap_or(0).saturating_sub(1);
    let correlations: Vec<f64> = (0..pairs)
        .map(|i| {
            let a: Vec<f64> = runs.iter().map(|r| r.y_star[i]).collect();
            let c: Vec<f64> = runs.iter().map(|r| r.y_star[i + 1]).collect();
            correlation(&a, &c)
        })
        .collect();
    let max_corr = correlations.iter().fold(0.0f64, |a, c| a.max(c.abs()));

    let h_lengths: Vec<usize> = coupler
        .blocks
        .blocks
        .iter()
        .filter(|blk| blk.kind == BlockKind::H)
        .map(|blk| blk.len())
        .collect();
    let mut lengths = h_lengths.clone();
    lengths.sort_unstable();
    lengths.dedup();
    let mut rows = Vec::new();
    for len in lengths {
        let costs: Vec<f64> = runs
            .iter()
            .flat_map(|r| r.h_cost.iter().zip(&h_lengths).filter(|(_, &l)| l == len).map(|(c, _)| *c))
            .collect();
        let (Some(coupling), Some(contract)) = (coupler.coupling(len), coupler.cost_contract(len)) else {
            continue;
        };
        if costs.is_empty() {
            continue;
        }
        let (mean_cost, std_err) = mean_and_se(&costs);
        rows.push(CostRow {
            block_length: len,
            samples: costs.len(),
            mean_cost,
            std_err,
            delta: coupling.delta,
            contract,
        });
    }
    let mut w = csv_writer();
    for row in &rows {
        w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    m.write_artifact(out, "blocks.csv", &csv_bytes(w)?)?;
    m.write_json(
        out,
        "blocks.json",
        json!({
            "n": b.n,
            "reps": b.reps,
            "uniformity": {"samples": pooled.len(), "ks_distance": ks, "ks_band_95": ks_band_95(pooled.len())},
            "adjacent_correlations": correlations,
            "max_abs_correlation": max_corr,
            "correlation_threshold": 3.0 / (b.reps as f64).sqrt(),
            "costs": rows,
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SummaryRow {
    case: String,
    r: usize,
    d: usize,
    predicted: f64,
    slope_exact: Option<f64>,
    slope_upper: Option<f64>,
    slope_lower: Option<f64>,
    exact_points: usize,
    k_min: u64,
    k_max: u64,
}

/// Runs the bundled `bounds` configs and writes `summary.csv`/`summary.json`.
pub fn reproduce(out: &Path, m: &mut Manifest) -> Res {
    let mut rows = Vec::new();
    let mut hashes = serde_json::Map::new();
    for (name, text) in BUNDLED {
        let cfg = parse_config(text)?;
        cfg.validate(Command::Bounds)?;
        let walk = cfg.walk.build()?;
        let hash = sha256_hex(&serde_json::to_vec(&cfg).expect("config serializes"));
        let mut sub = Manifest::new(Command::Bounds, Some(cfg.clone()), None, m.threads);
        let slopes = bounds(&cfg, &walk, out, &mut sub, &format!("reproduce_{name}"))?;
        m.artifacts.extend(sub.artifacts);
        hashes.insert(name.to_string(), json!(hash));
        let (r, d) = (walk.lattice.r, walk.lattice.d);
        rows.push(SummaryRow {
            case: name.to_string(),
            r,
            d,
            predicted: -(r as f64) / (2.0 * d as f64),
            slope_exact: slopes.exact,
            slope_upper: slopes.upper,
            slope_lower: slopes.lower,
            exact_points: slopes.exact_points,
            k_min: cfg.bounds.ks.iter().copied().min().unwrap_or(0),
            k_max: cfg.bounds.ks.iter().copied().max().unwrap_or(0),
        });
    }
    let mut w = csv_writer();
    for row in &rows {
        w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    m.write_artifact(out, "summary.csv", &csv_bytes(w)?)?;
    m.write_json(out, "summary.json", json!({"cases": rows, "config_sha256": hashes}))
}
