//! Discrete-time quantum walks on a momentum ladder, realized as a kicked
//! two-level atom.
//!
//! The walker is a spinor wavefunction over integer momentum classes. Each
//! walk step applies a resonant two-level pulse (the coin), a standing-wave
//! kick whose sign depends on the internal level (the shift), and a free
//! flight (quadratic phase). The crate provides:
//!
//! - [`state`]: spinor states on the momentum window, distributions, and
//!   reduced coin observables;
//! - [`coin`]: 2x2 pulse matrices, the biased-coin family, and their algebra;
//! - [`kick`]: the level-dependent momentum kick (Bessel-convolution and
//!   angle-grid routes) plus the idealized one-bin shift;
//! - [`free`]: free flight between kicks with exact turn reduction;
//! - [`engine`]: walk sequencing, phase-drift compensation, ensembles over
//!   quasimomentum and pulse jitter, and time reversal (exact adjoint and the
//!   laboratory echo);
//! - [`dsl`]: a small scripting language (`.qws`) for pulse sequences;
//! - [`analysis`]: spreading-exponent fits, growth-model comparison,
//!   total-variation distance, and peak finding;
//! - [`rng`]: deterministic per-trajectory random streams.
//!
//! # Example
//!
//! ```
//! use momentum_walk::{fit_scaling, run_walk, WalkConfig};
//!
//! let record = run_walk(&WalkConfig::default()).unwrap();
//! assert_eq!(record.num_rows(), 16);
//! // The mean stays pinned at the ratchet midpoint...
//! assert!((record.stats[15].mean_momentum - 0.5).abs() < 1e-9);
//! // ...while the width grows near-ballistically.
//! let fit = fit_scaling(&record, None).unwrap();
//! assert!(fit.exponent > 0.9);
//! ```

pub mod analysis;
pub mod coin;
pub mod dsl;
pub mod engine;
pub mod error;
pub mod free;
pub mod kick;
pub mod rng;
pub mod state;

pub use analysis::{
    compare_growth_models, default_fit_window, fit_scaling, fit_sigma_series, peak_positions,
    total_variation, GrowthComparison, GrowthModel, ScalingFit, DEFAULT_PEAK_FLOOR,
};
pub use coin::{apply_coin, biased_coin, coin_matrix, BiasVariant, CoinLabel, CoinMatrix};
pub use dsl::{interpret, parse, ParseError, SequenceProgram};
pub use engine::{
    apply_noise_schedule, classical_walk_reference, default_half_width, reverse_walk,
    run_ensemble, run_walk, scan_coin_phase, GlobalPhasePolicy, InitialSpec, ResolvedGrid,
    ReversalMode, RunMeta, ScanPoint, ShiftRealization, StepStats, WalkConfig, WalkRecord,
};
pub use error::{Result, WalkError};
pub use free::{apply_free_evolution, RESONANT_TAU};
pub use kick::{
    apply_ideal_shift, apply_kick_bessel, apply_kick_grid, bessel_jn, completeness_order,
    default_angle_points, default_truncation, kick_weights, KickParams,
};
pub use rng::{sample_beta, sample_pulse_noise, sigma_from_fwhm, trajectory_rng};
pub use state::{coin_entropy_from_density, Distribution, SpinorState};
