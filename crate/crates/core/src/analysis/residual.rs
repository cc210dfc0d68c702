//! Residuals `r_k(s) = sqrt(2k(1-s)) - v̂_k(s)` of the adaptive value function
//! below the prophet bound, their maxima, and the alternative recursion
//!
//! ```text
//! r_k(s) = δ_k(s) + (1 - ĥ_k(s) + s) r_{k-1}(s) + ∫_s^{ĥ_k(s)} r_{k-1}(x) dx.
//! ```

use rayon::prelude::*;

use crate::analysis::delta::delta_unchecked;
use crate::error::{check_horizon, check_unit, Error, Result};
use crate::policy::threshold_unchecked;
use crate::report::CheckRow;
use crate::value::{
    cumulative_into, integral_to, interpolate, log_gap, lower_bound_unchecked,
    upper_bound_unchecked, GridConfig, TableKind, ValueTable,
};

const PAR_MIN_LEN: usize = 2048;

fn require_adaptive(table: &ValueTable) -> Result<()> {
    if table.kind() != TableKind::Adaptive {
        return Err(Error::KindMismatch {
            expected: TableKind::Adaptive.name(),
            actual: table.kind().name(),
        });
    }
    Ok(())
}

/// `r_k(s)` from the interpolated table row.
pub fn residual(table: &ValueTable, k: usize, s: f64) -> Result<f64> {
    require_adaptive(table)?;
    check_horizon(k)?;
    check_unit("state", s)?;
    let v = interpolate(table.row(k)?, s);
    Ok(upper_bound_unchecked(k, s) - v)
}

/// Maximal residual of one row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub k: usize,
    pub max_residual: f64,
    pub argmax_node: usize,
    pub argmax_state: f64,
    /// `2(log k + 1)`.
    pub telescoped_bound: f64,
    pub residuals: Option<Vec<f64>>,
}

impl ResidualReport {
    /// Report for a row of `v̂_k` sampled at the nodes of `config`.
    pub fn from_row(k: usize, values: &[f64], config: &GridConfig, keep_nodes: bool) -> Self {
        let residuals: Vec<f64> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| upper_bound_unchecked(k, config.node(i)) - v)
            .collect();
        let (argmax_node, max_residual) = residuals
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, r)| if r > best.1 { (i, r) } else { best });
        ResidualReport {
            k,
            max_residual,
            argmax_node,
            argmax_state: config.node(argmax_node),
            telescoped_bound: log_gap(k),
            residuals: keep_nodes.then_some(residuals),
        }
    }
}

pub fn max_residual(table: &ValueTable, k: usize) -> Result<ResidualReport> {
    require_adaptive(table)?;
    check_horizon(k)?;
    Ok(ResidualReport::from_row(k, table.row(k)?, table.config(), false))
}

/// Largest absolute difference between `r_k` and the right-hand side of the
/// alternative recursion, over the grid nodes. `values` is row `k`, `prev`
/// row `k - 1`; integrals of `v̂_{k-1}` use the value engine's quadrature and
/// integrals of the square-root term are exact.
pub fn residual_recursion_discrepancy(
    k: usize,
    values: &[f64],
    prev: &[f64],
    config: &GridConfig,
) -> f64 {
    let mut prefix = Vec::new();
    cumulative_into(prev, config.step(), &mut prefix);
    let root = (2.0 * (k as f64 - 1.0)).sqrt();
    values
        .par_iter()
        .with_min_len(PAR_MIN_LEN)
        .enumerate()
        .map(|(i, &v)| {
            let s = config.node(i);
            let h = threshold_unchecked(k, s);
            let u = 1.0 - s;
            let w = (1.0 - h).max(0.0);
            let lhs = upper_bound_unchecked(k, s) - v;
            let prev_residual = root * u.sqrt() - prev[i];
            let sqrt_integral = root * (2.0 / 3.0) * (u * u.sqrt() - w * w.sqrt());
            let value_integral = integral_to(prev, &prefix, h) - prefix[i];
            let rhs = delta_unchecked(k, s)
                + (1.0 - (h - s)) * prev_residual
                + (sqrt_integral - value_integral);
            (lhs - rhs).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// Checks the alternative recursion for row `k` of a table against the
/// tolerance `tolerance`.
pub fn check_residual_recursion(table: &ValueTable, k: usize, tolerance: f64) -> Result<CheckRow> {
    require_adaptive(table)?;
    check_horizon(k)?;
    let values = table.row(k)?;
    let prev = table.row(k - 1)?;
    let d = residual_recursion_discrepancy(k, values, prev, table.config());
    Ok(CheckRow::at_most("residual_recursion", Some(k), d, tolerance))
}

/// Grid statistics of one adaptive row used by the bound checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowBounds {
    pub k: usize,
    /// `max_i (v̂_k(s_i) - sqrt(2k(1-s_i)))`; `<= 0` is the prophet bound.
    pub upper_excess: f64,
    /// `max_i (sqrt(2k(1-s_i)) - 2(log k + 1) - v̂_k(s_i))`.
    pub lower_excess: f64,
    pub max_residual: f64,
    /// `max_i (r_k(s_i) - δ_k(s_i))`; at most `r_{k-1}` up to grid error.
    pub residual_minus_delta: f64,
}

pub fn row_bounds(k: usize, values: &[f64], config: &GridConfig) -> RowBounds {
    let init = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (upper_excess, lower_excess, max_residual, residual_minus_delta) = values
        .par_iter()
        .with_min_len(PAR_MIN_LEN)
        .enumerate()
        .map(|(i, &v)| {
            let s = config.node(i);
            let ub = upper_bound_unchecked(k, s);
            let r = ub - v;
            (v - ub, lower_bound_unchecked(k, s) - v, r, r - delta_unchecked(k, s))
        })
        .reduce(
            || init,
            |a, b| (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2), a.3.max(b.3)),
        );
    RowBounds {
        k,
        upper_excess,
        lower_excess,
        max_residual,
        residual_minus_delta,
    }
}

/// `Σ_{j=1..k} 2/j`.
pub fn harmonic_bound(k: usize) -> f64 {
    (1..=k).map(|j| 2.0 / j as f64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::delta::delta;
    use crate::value::build_adaptive_table;

    fn table() -> ValueTable {
        build_adaptive_table(&GridConfig::new(1e-3, 40).unwrap()).unwrap()
    }

    #[test]
    fn residual_examples() {
        let t = table();
        let eps = t.config().tolerance();
        assert!((residual(&t, 1, 0.0).unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        for k in 1..=40 {
            assert_eq!(residual(&t, k, 1.0).unwrap(), 0.0);
        }
        assert!((residual(&t, 2, 0.0).unwrap() - 0.5).abs() <= eps);
        assert!(residual(&t, 0, 0.3).is_err());
        assert!(residual(&t, 41, 0.3).is_err());
    }

    #[test]
    fn max_residual_first_row() {
        // r_1(s) = √(2u) - u peaks at u = 1/2 with value 1/2
        let t = table();
        let rep = max_residual(&t, 1).unwrap();
        assert!((rep.max_residual - 0.5).abs() < 1e-12);
        assert!((rep.argmax_state - 0.5).abs() < 1e-12);
        assert_eq!(rep.telescoped_bound, 2.0);
        let eps = t.config().tolerance();
        for k in 1..=40 {
            let rep = max_residual(&t, k).unwrap();
            assert!(rep.max_residual >= -eps);
            assert!(rep.max_residual <= rep.telescoped_bound + eps);
            assert!(rep.max_residual <= harmonic_bound(k) + eps);
        }
    }

    #[test]
    fn recursion_agrees_with_value_engine() {
        let t = table();
        let eps = t.config().tolerance();
        let first = check_residual_recursion(&t, 1, eps).unwrap();
        assert!(first.statistic < 1e-12);
        // r_1 = δ_1 since r_0 ≡ 0
        for i in 0..=20 {
            let s = i as f64 / 20.0;
            assert!((residual(&t, 1, s).unwrap() - delta(1, s).unwrap()).abs() < 1e-12);
        }
        for k in 1..=40 {
            let row = check_residual_recursion(&t, k, eps).unwrap();
            assert!(row.pass, "k={k}: {}", row.statistic);
            assert!(row.statistic < 1e-9);
        }
    }

    #[test]
    fn residual_increments_bounded_by_delta() {
        let t = table();
        let eps = t.config().tolerance();
        let mut prev_max = 0.0;
        for k in 1..=40 {
            let b = row_bounds(k, t.row(k).unwrap(), t.config());
            assert!(b.upper_excess <= eps);
            assert!(b.lower_excess <= eps);
            assert!(b.residual_minus_delta <= prev_max + eps);
            assert!(b.max_residual - prev_max <= 2.0 / k as f64 + eps);
            prev_max = b.max_residual;
        }
    }

    #[test]
    fn streaming_table_rejects_discarded_rows() {
        use crate::value::{build_table, Retention};
        let cfg = GridConfig::new(1e-3, 10).unwrap();
        let lean = build_table(TableKind::Adaptive, &cfg, Retention::LastTwo).unwrap();
        assert!(check_residual_recursion(&lean, 10, 1e-2).is_ok());
        assert!(matches!(
            check_residual_recursion(&lean, 9, 1e-2),
            Err(Error::RowUnavailable { .. })
        ));
        assert!(max_residual(&lean, 3).is_err());
    }

    #[test]
    fn residual_rejects_optimal_tables() {
        let cfg = GridConfig::new(1e-2, 5).unwrap();
        let o = crate::value::build_optimal_table(&cfg).unwrap();
        assert!(matches!(residual(&o, 2, 0.0), Err(Error::KindMismatch { .. })));
    }
}
