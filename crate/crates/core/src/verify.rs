//! The full verification suite: lemma checks that need no table, and bound
//! checks evaluated row by row while the adaptive table is swept.

use crate::analysis::delta::{
    check_coefficient_difference, check_delta_bounds, check_gamma_nonneg, check_series_inequality,
};
use crate::analysis::relaxation::check_relaxation;
use crate::analysis::residual::{harmonic_bound, residual_recursion_discrepancy, row_bounds};
use crate::error::Result;
use crate::report::{CheckRow, VerificationReport};
use crate::value::{log_gap, sweep_rows, GridConfig, TableKind};

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub grid: GridConfig,
    /// Tolerance for grid-precision checks; defaults to `10 * step`.
    pub tolerance: f64,
    pub delta_samples: usize,
    pub series_samples: usize,
    pub gamma_samples: usize,
    pub gamma_ks: Vec<usize>,
    pub coefficient_j_max: usize,
}

impl VerifyConfig {
    pub fn new(grid: GridConfig) -> Self {
        VerifyConfig {
            tolerance: grid.tolerance(),
            grid,
            delta_samples: 10_000,
            series_samples: 1_000_000,
            gamma_samples: 100_000,
            gamma_ks: vec![3, 4, 10, 100, 10_000],
            coefficient_j_max: 200,
        }
    }
}

/// Per-row bound checks on the adaptive table, `k = 1..=k_max`.
pub fn grid_checks(grid: &GridConfig, tolerance: f64) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::with_capacity(7 * grid.k_max());
    let mut prev_max = 0.0;
    let mut harmonic = 0.0;
    sweep_rows(TableKind::Adaptive, grid, |row| {
        let k = row.k;
        let kf = k as f64;
        harmonic += 2.0 / kf;
        let b = row_bounds(k, row.values, grid);
        let discrepancy = residual_recursion_discrepancy(k, row.values, row.prev, grid);
        rows.push(CheckRow::at_most("sandwich_upper", Some(k), b.upper_excess, tolerance));
        rows.push(CheckRow::at_most("sandwich_lower", Some(k), b.lower_excess, tolerance));
        rows.push(CheckRow::at_most(
            "max_residual_log_bound",
            Some(k),
            b.max_residual,
            log_gap(k) + tolerance,
        ));
        rows.push(CheckRow::at_most(
            "max_residual_harmonic",
            Some(k),
            b.max_residual,
            harmonic + tolerance,
        ));
        rows.push(CheckRow::at_most(
            "residual_increment",
            Some(k),
            b.max_residual - prev_max,
            2.0 / kf + tolerance,
        ));
        rows.push(CheckRow::at_most(
            "residual_minus_delta",
            Some(k),
            b.residual_minus_delta,
            prev_max + tolerance,
        ));
        rows.push(CheckRow::at_most("residual_recursion", Some(k), discrepancy, tolerance));
        prev_max = b.max_residual;
        Ok(())
    })?;
    debug_assert!((harmonic - harmonic_bound(grid.k_max())).abs() < 1e-9);
    Ok(rows)
}

pub fn run_verification(cfg: &VerifyConfig) -> Result<VerificationReport> {
    let mut report = VerificationReport::default();
    report.extend(check_coefficient_difference(cfg.coefficient_j_max)?);
    report.extend([check_series_inequality(cfg.series_samples)?]);
    report.extend(check_gamma_nonneg(&cfg.gamma_ks, cfg.gamma_samples)?);
    report.extend(check_delta_bounds(cfg.grid.k_max().max(3), cfg.delta_samples)?);
    let k_max = cfg.grid.k_max();
    let mut relax_ks = vec![1, 2, 10, 100, k_max];
    relax_ks.sort_unstable();
    relax_ks.dedup();
    report.extend(check_relaxation(&relax_ks, 1001)?);
    report.extend(grid_checks(&cfg.grid, cfg.tolerance)?);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(k_max: usize) -> VerifyConfig {
        VerifyConfig {
            delta_samples: 1001,
            series_samples: 10_001,
            gamma_samples: 10_001,
            ..VerifyConfig::new(GridConfig::new(1e-3, k_max).unwrap())
        }
    }

    #[test]
    fn small_suite_passes() {
        let report = run_verification(&quick(30)).unwrap();
        let failures: Vec<_> = report.failures().collect();
        assert!(failures.is_empty(), "{failures:?}");
        assert_eq!(report.check("sandwich_upper").count(), 30);
    }

    #[test]
    fn horizon_three_reports_branch_agreement() {
        let report = run_verification(&quick(3)).unwrap();
        let row = report
            .check("delta_branch_agreement")
            .find(|r| r.k == Some(3))
            .expect("k = 3 row");
        assert!(row.pass);
    }

    #[test]
    fn zero_tolerance_fails() {
        let cfg = VerifyConfig {
            tolerance: 0.0,
            ..quick(10)
        };
        let report = run_verification(&cfg).unwrap();
        assert!(!report.all_pass());
    }
}
