//! Residual analysis of the adaptive policy and the numerical lemma checks.

pub mod delta;
pub mod gap;
pub mod relaxation;
pub mod residual;

pub use delta::{
    check_coefficient_difference, check_delta_bounds, check_gamma_nonneg, check_series_inequality,
    delta, delta_conservative, delta_conservative_shape, delta_grid_max, delta_greedy, delta_rows, gamma,
    series_coefficient, series_coefficients, ConservativeShape,
};
pub use gap::{optimality_gap, GapReport, GapSummary};
pub use relaxation::{check_relaxation, relaxation_optimum, RelaxationOptimum};
pub use residual::{
    check_residual_recursion, harmonic_bound, max_residual, residual, row_bounds, ResidualReport,
    RowBounds,
};
