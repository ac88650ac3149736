//! Walk simulation and the ergodic-sum experiments: Monte Carlo variance,
//! CLT and LIL harnesses, and the block coupling.

pub mod blocks;
pub mod experiments;
pub mod stats;
pub mod walk;

pub use blocks::{
    coupled_block_replications, coupled_block_sums, h_size, j_size, Block, BlockCoupler, BlockDecomposition,
    BlockKind, CircleCoupling, CoupledBlockSums, CouplingOptions,
};
pub use experiments::{
    clt_experiment, lil_checkpoints, lil_experiment, monte_carlo_variance, summand_truncation,
    variance_growth_check, ExperimentReport, GrowthRow, LilSummary, MonteCarloEstimate, VarianceGrowth,
};
pub use stats::{correlation, ks_band_95, ks_distance, ks_normal, ks_uniform, mean_and_se};
pub use walk::{ergodic_sum, simulate_walk, simulate_walk_stream, trial_rng, NeumaierSum, StepSampler, WalkPath};
