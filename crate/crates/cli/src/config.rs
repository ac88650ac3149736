//! Experiment configuration documents.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use walklab_core::lattice::{construct_from_polynomial, LatticeSystem};
use walklab_core::spectral::{IntegerLaw, StepDistribution, TestFunction};
use walklab_core::torus::TorusPoint;
use walklab_core::wasserstein::SandwichOptions;

use crate::{CliError, Command};

/// Environment variable that overrides the config seed.
pub const SEED_ENV: &str = "WALKLAB_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    pub walk: WalkSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<FunctionSpec>,
    #[serde(default)]
    pub quality: QualityParams,
    #[serde(default)]
    pub bounds: BoundsParams,
    #[serde(default)]
    pub variance: VarianceParams,
    #[serde(default)]
    pub clt: CltParams,
    #[serde(default)]
    pub lil: LilParams,
    #[serde(default)]
    pub blocks: BlocksParams,
}

/// A walk given either by a monic polynomial (constant term first) and
/// `(r, d)`, or by explicit vectors. `selector` is `P(I = i)`; `steps[i]` is
/// the law of `xi_i` as `(value, probability)` pairs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polynomial: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<Vec<(i64, f64)>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `amplitude * cos(2 pi <h, x>)`.
    Cosine { h: Vec<i64>, amplitude: f64 },
    /// `||x - center||^exponent` minus its mean.
    DistancePower { center: Vec<f64>, exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QualityParams {
    pub h_max: u64,
    /// Exclusive sup-norm bound for the spectral gap search.
    pub gap_h: usize,
}

impl Default for QualityParams {
    fn default() -> Self {
        Self { h_max: 10_000, gap_h: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsParams {
    pub ks: Vec<u64>,
    pub p: f64,
    pub sandwich: SandwichOptions,
}

impl Default for BoundsParams {
    fn default() -> Self {
        Self {
            ks: (4..=14).map(|e| 1u64 << e).collect(),
            p: 1.0,
            sandwich: SandwichOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VarianceParams {
    pub trials: usize,
    /// Summand truncation; chosen from the spectral tail when absent.
    pub k_max: Option<usize>,
    /// Walk lengths for the `Var(S_N) / N` growth table; empty skips it.
    pub growth_ns: Vec<u64>,
    pub growth_trials: usize,
}

impl Default for VarianceParams {
    fn default() -> Self {
        Self {
            trials: 100_000,
            k_max: None,
            growth_ns: Vec::new(),
            growth_trials: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CltParams {
    pub n: u64,
    pub trials: usize,
}

impl Default for CltParams {
    fn default() -> Self {
        Self { n: 20_000, trials: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LilParams {
    pub n_max: u64,
    pub trials: usize,
}

impl Default for LilParams {
    fn default() -> Self {
        Self {
            n_max: 1_000_000,
            trials: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlocksParams {
    pub n: u64,
    pub reps: usize,
    pub p: f64,
    pub contract_factor: f64,
    /// Leading `J` blocks per replication whose first `W*` is pooled for the
    /// uniformity check.
    pub uniformity_blocks: usize,
}

impl Default for BlocksParams {
    fn default() -> Self {
        Self {
            n: 10_000,
            reps: 500,
            p: 1.0,
            contract_factor: 1.0,
            uniformity_blocks: 20,
        }
    }
}

/// Where the effective seed came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Config,
    Env,
}

/// Parses a config document, or the `config` member of a manifest.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::validation("config", e.to_string()))?;
    let is_manifest = value.get("tool").and_then(Value::as_str) == Some(crate::TOOL_NAME) && value.get("config").is_some();
    let (value, prefix) = if is_manifest {
        (value["config"].clone(), "config.")
    } else {
        (value, "")
    };
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "config".to_string() } else { format!("{prefix}{path}") };
        CliError::validation(field, e.into_inner().to_string())
    })
}

/// Applies `WALKLAB_SEED` (if set) over the config seed.
pub fn apply_seed_override(cfg: &mut ExperimentConfig, env: Option<String>) -> Result<SeedSource, CliError> {
    match env {
        Some(s) => {
            cfg.seed = s
                .trim()
                .parse()
                .map_err(|_| CliError::validation(SEED_ENV, format!("`{s}` is not an unsigned 64-bit integer")))?;
            Ok(SeedSource::Env)
        }
        None => Ok(SeedSource::Config),
    }
}

/// Validated walk: the step law plus the lattice it was built from.
pub struct Walk {
    pub lattice: LatticeSystem,
    pub nu: StepDistribution,
    /// Unreduced Vandermonde solve residual, for polynomial walks.
    pub residual: Option<f64>,
    pub roots: Option<Vec<f64>>,
}

fn walk_err(field: &str) -> impl Fn(walklab_core::Error) -> CliError + '_ {
    move |e| CliError::from_core(e, &format!("walk.{field}"))
}

impl WalkSpec {
    pub fn build(&self) -> Result<Walk, CliError> {
        let (lattice, residual, roots) = match (&self.polynomial, &self.alphas) {
            (Some(coeffs), None) => {
                let r = self.r.ok_or_else(|| CliError::validation("walk.r", "required with `polynomial`"))?;
                let d = self.d.ok_or_else(|| CliError::validation("walk.d", "required with `polynomial`"))?;
                let c = construct_from_polynomial(coeffs, r, d).map_err(walk_err("polynomial"))?;
                (c.system, Some(c.relative_residual), Some(c.roots))
            }
            (None, Some(alphas)) => {
                if self.r.is_some() || self.d.is_some() {
                    return Err(CliError::validation("walk.r", "`r` and `d` only apply to `polynomial`"));
                }
                (LatticeSystem::explicit(alphas.clone()).map_err(walk_err("alphas"))?, None, None)
            }
            _ => {
                return Err(CliError::validation(
                    "walk",
                    "give exactly one of `polynomial` or `alphas`",
                ))
            }
        };
        let r = lattice.r;
        let selector = self.selector.clone().unwrap_or_else(|| vec![1.0 / r as f64; r]);
        let steps = match &self.steps {
            Some(laws) => laws
                .iter()
                .map(|atoms| IntegerLaw::new(atoms.clone()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(walk_err("steps"))?,
            None => vec![IntegerLaw::symmetric_unit(); r],
        };
        let nu = StepDistribution::new(selector, steps, lattice.alphas.clone()).map_err(walk_err(""))?;
        Ok(Walk {
            lattice,
            nu,
            residual,
            roots,
        })
    }
}

impl FunctionSpec {
    pub fn build(&self, d: usize) -> Result<TestFunction, CliError> {
        let f = match self {
            FunctionSpec::Cosine { h, amplitude } => {
                TestFunction::cosine(h.clone(), *amplitude).map_err(|e| CliError::from_core(e, "function."))?
            }
            FunctionSpec::DistancePower { center, exponent } => {
                let c = TorusPoint::new(center.clone()).map_err(|e| CliError::from_core(e, "function.center"))?;
                TestFunction::distance_power(&c, *exponent).map_err(|e| CliError::from_core(e, "function."))?
            }
        };
        if f.dim() != d {
            return Err(CliError::validation(
                "function",
                format!("dimension {} does not match the walk dimension {d}", f.dim()),
            ));
        }
        Ok(f)
    }
}

impl ExperimentConfig {
    /// `function`, defaulting to `sqrt 2 cos(2 pi x_1)`.
    pub fn function_spec(&self, d: usize) -> FunctionSpec {
        self.function.clone().unwrap_or_else(|| {
            let mut h = vec![0; d];
            h[0] = 1;
            FunctionSpec::Cosine {
                h,
                amplitude: 2f64.sqrt(),
            }
        })
    }

    /// Checks the parameters the given command uses.
    pub fn validate(&self, command: Command) -> Result<(), CliError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(CliError::validation(
                    "command",
                    format!("config is for `{}`, invoked as `{}`", c.as_str(), command.as_str()),
                ));
            }
        }
        let positive = |field: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(CliError::validation(field, "must be positive"))
            }
        };
        match command {
            Command::Quality => {
                positive("quality.h_max", self.quality.h_max > 0)?;
                positive("quality.gap_h", self.quality.gap_h > 1)?;
            }
            Command::Bounds => {
                if self.bounds.ks.is_empty() {
                    return Err(CliError::validation("bounds.ks", "must list at least one k"));
                }
                positive("bounds.ks", self.bounds.ks.iter().all(|&k| k > 0))?;
                if !(self.bounds.p > 0.0 && self.bounds.p <= 1.0) {
                    return Err(CliError::validation("bounds.p", "must lie in (0, 1]"));
                }
                self.bounds
                    .sandwich
                    .validate()
                    .map_err(|e| CliError::from_core(e, "bounds.sandwich."))?;
            }
            Command::Variance => {
                positive("variance.trials", self.variance.trials > 0)?;
                if !self.variance.growth_ns.is_empty() && self.variance.growth_trials < 1000 {
                    return Err(CliError::validation("variance.growth_trials", "must be at least 1000"));
                }
            }
            Command::Clt => {
                positive("clt.n", self.clt.n > 0)?;
                positive("clt.trials", self.clt.trials > 0)?;
            }
            Command::Lil => {
                if self.lil.n_max < 100 {
                    return Err(CliError::validation("lil.n_max", "must be at least 100"));
                }
                positive("lil.trials", self.lil.trials > 0)?;
            }
            Command::Blocks => {
                positive("blocks.n", self.blocks.n > 0)?;
                positive("blocks.reps", self.blocks.reps > 0)?;
                if !(self.blocks.p > 0.0 && self.blocks.p <= 1.0) {
                    return Err(CliError::validation("blocks.p", "must lie in (0, 1]"));
                }
                positive("blocks.contract_factor", self.blocks.contract_factor >= 1.0)?;
            }
            Command::Construct | Command::Reproduce => {}
        }
        Ok(())
    }
}
