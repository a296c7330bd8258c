//! Minimal entropy martingale measure (MEMM) solver for jump-diffusion
//! stochastic volatility markets driven by a finite-activity Lévy process.
//!
//! The price/volatility pair follows
//!
//! ```text
//! dS_t/S_{t-} = eta_M dt + sigma_M dY^c + d(W_M * (mu - nu))
//! dV_t        = eta_V dt + d(W_V * mu)
//! ```
//!
//! with a finite atomic jump measure `nu`. The crate solves the implicit
//! jump-kernel equation for `W_L`, the semi-linear transport IPDE for the
//! value function `u` by characteristics and Picard iteration, assembles the
//! Girsanov kernels of the entropy-minimal measure change, and verifies the
//! result with a Monte Carlo harness (density normalization, entropy,
//! martingale statistics, pathwise residual).
//!
//! Node sweeps and Monte Carlo paths are data-parallel via rayon when the
//! default `parallel` feature is enabled; disabling it yields a sequential
//! build with bitwise-identical results.

pub mod error;
pub mod girsanov;
pub mod grid;
pub mod ipde;
pub mod kernel;
pub mod measure;
pub mod model;
pub mod modelfile;
pub mod montecarlo;
pub mod newton;
pub mod parallel;
pub mod special;
pub mod stats;

pub use error::{MemmError, Result};
pub use girsanov::{kernels_at, log_density_increment, GirsanovKernels};
pub use grid::{Grid, Surface};
pub use ipde::{
    apply_f, delta_u, flow_characteristic, picard_solve, FixedPointReport, PicardConfig,
    PicardSolution, SourceKind,
};
pub use kernel::{compute_phi_sigma, g_value, solve_phi_k, solve_wl, MemmFields, PhiSolution};
pub use measure::LevyMeasure;
pub use model::{lambda_hat, validate_model, MarketModel, ValidationReport};
pub use modelfile::{BuiltModel, ModelFile};
pub use montecarlo::{
    pathwise_residual, simulate_paths, simulate_summary, verify_suite, MeasureKind, PathSample,
    SimSummary, VerifyReport,
};
pub use stats::VerifyStats;
pub use special::{
    build_bns_model, check_bns_admissibility, solve_deterministic_phi, solve_orthogonal,
    BnsAdmissibility, BnsParams, OrthogonalSolution,
};
