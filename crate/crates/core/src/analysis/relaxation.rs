//! Closed-form optimum of the relaxation
//!
//! ```text
//! max Σ_{i=1..k} d_i   subject to   Σ_{i=1..k} d_i² <= 2(1 - s)
//! ```
//!
//! whose KKT point is the equal split `d_i* = sqrt(2(1-s)/k)` with value
//! `w* = sqrt(2k(1-s))`.

use crate::error::{check_horizon, check_unit, Error, Result};
use crate::report::CheckRow;
use crate::value::upper_bound_unchecked;

const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationOptimum {
    pub w_star: f64,
    pub d_star: f64,
}

impl RelaxationOptimum {
    /// `|k d*² - 2(1-s)|`.
    pub fn feasibility_error(&self, k: usize, s: f64) -> f64 {
        (k as f64 * self.d_star * self.d_star - 2.0 * (1.0 - s)).abs()
    }

    /// `|w* - k d*|`, relative to `max(1, w*)`.
    pub fn objective_error(&self, k: usize) -> f64 {
        (self.w_star - k as f64 * self.d_star).abs() / self.w_star.max(1.0)
    }
}

pub fn relaxation_optimum(k: usize, s: f64) -> Result<RelaxationOptimum> {
    check_horizon(k)?;
    check_unit("state", s)?;
    let opt = RelaxationOptimum {
        w_star: upper_bound_unchecked(k, s),
        d_star: (2.0 * (1.0 - s) / k as f64).sqrt(),
    };
    let worst = opt.feasibility_error(k, s).max(opt.objective_error(k));
    if worst > FEASIBILITY_TOL {
        return Err(Error::Arithmetic {
            k,
            node: 0,
            value: worst,
            limit: FEASIBILITY_TOL,
        });
    }
    Ok(opt)
}

/// Feasibility and objective identities over `ks × states`.
pub fn check_relaxation(ks: &[usize], states: usize) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut worst: f64 = 0.0;
        let mut identity: f64 = 0.0;
        for i in 0..states.max(2) {
            let s = i as f64 / (states.max(2) - 1) as f64;
            let opt = relaxation_optimum(k, s)?;
            worst = worst
                .max(opt.feasibility_error(k, s))
                .max(opt.objective_error(k));
            identity = identity.max((opt.w_star - upper_bound_unchecked(k, s)).abs());
        }
        rows.push(CheckRow::at_most("relaxation_kkt", Some(k), worst, FEASIBILITY_TOL));
        rows.push(CheckRow::at_most("relaxation_prophet_identity", Some(k), identity, 0.0));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let o = relaxation_optimum(2, 0.0).unwrap();
        assert_eq!((o.w_star, o.d_star), (2.0, 1.0));
        let o = relaxation_optimum(1, 1.0).unwrap();
        assert_eq!((o.w_star, o.d_star), (0.0, 0.0));
        assert!(relaxation_optimum(0, 0.5).is_err());
        assert!(relaxation_optimum(3, 2.0).is_err());
        assert!(check_relaxation(&[1, 2, 10, 10_000], 101).unwrap().iter().all(|r| r.pass));
    }

    proptest! {
        /// Any feasible point scores at most w* (Cauchy-Schwarz).
        #[test]
        fn feasible_points_never_beat_the_optimum(
            raw in proptest::collection::vec(-1.0f64..1.0, 1..60),
            s in 0.0f64..=1.0,
        ) {
            let k = raw.len();
            let norm: f64 = raw.iter().map(|d| d * d).sum::<f64>().sqrt();
            prop_assume!(norm > 0.0);
            let radius = (2.0 * (1.0 - s)).sqrt();
            let objective: f64 = raw.iter().map(|d| d / norm * radius).sum();
            let opt = relaxation_optimum(k, s).unwrap();
            prop_assert!(objective <= opt.w_star + 1e-12);
        }

        #[test]
        fn optimum_equals_prophet_bound(k in 1usize..100_000, s in 0.0f64..=1.0) {
            let opt = relaxation_optimum(k, s).unwrap();
            prop_assert_eq!(opt.w_star, crate::value::upper_bound(k, s).unwrap());
        }
    }
}
