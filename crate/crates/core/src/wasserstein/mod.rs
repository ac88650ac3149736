//! Wasserstein distances between random walk laws and the Haar measure:
//! exact values where feasible, an R-net lower bound and a Fourier
//! smoothing upper bound.

pub mod circle;
pub mod lower;
pub mod measure;
pub mod sandwich;
pub mod transport;
pub mod upper;

pub use circle::{circle_transport_shift, exact_w1_circle, CircleMeasure};
pub use lower::{rnet_bound_from_counts, rnet_lower_bound, walk_support_net, RNetBound, WalkSupportNet};
pub use measure::{convolution_power, lattice_law_cells, lattice_laws, DiscreteMeasure, LatticeLaw};
pub use transport::{exact_w1_grid, exact_wp_grid, solve_transport, TransportSolution};
pub use upper::{berry_esseen_upper, optimize_upper, optimize_upper_golden, counting_sum, ShellTable, SmoothingConstant, UpperBound};
pub use sandwich::{bound_sandwich, check_record, log_log_slope, records_to_csv, BoundRecord, ExactMethod, SandwichOptions};
