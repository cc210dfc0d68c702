//! The per-step residual increment `δ_k`, the auxiliary function `γ_k`, and
//! the power-series coefficients used to show `γ_k >= 0`.
//!
//! ```text
//! δ_k(s) = sqrt(2k(1-s)) - sqrt(2(k-1)(1-s))
//!        + ∫_s^{ĥ_k(s)} { sqrt(2(k-1)(1-s)) - sqrt(2(k-1)(1-x)) - 1 } dx
//! ```
//!
//! The integrand is `c - sqrt(2(k-1)(1-x))`, so its antiderivative is closed
//! form and no quadrature is involved anywhere in this module.

use rayon::prelude::*;

use crate::error::{check_horizon, check_unit, Error, Result};
use crate::policy::{critical_state_unchecked, threshold_unchecked};
use crate::report::CheckRow;

/// Tolerance on upper bounds for `δ_k`.
pub const DELTA_BOUND_TOL: f64 = 1e-10;
/// Tolerance for consecutive-sample monotonicity and non-negativity checks.
pub const SAMPLE_TOL: f64 = 1e-12;
/// Relative tolerance for the coefficient identity.
pub const COEFFICIENT_REL_TOL: f64 = 1e-10;

/// `δ_k(s)` evaluated with an arbitrary window edge `h ∈ [s, 1]`.
///
/// With `u = 1 - s`, `w = 1 - h`, `d = h - s`, `a = √u`, `b = √w`:
///
/// ```text
/// δ = √(2u) / (√k + √(k-1)) - d + √(2(k-1)) · d² (a + 2b) / (3 (a + b)²)
/// ```
///
/// which is the antiderivative rearranged to avoid cancellation.
pub(crate) fn delta_with_edge(k: usize, s: f64, h: f64) -> f64 {
    let kf = k as f64;
    let u = 1.0 - s;
    let d = h - s;
    let a = u.sqrt();
    let b = (1.0 - h).max(0.0).sqrt();
    let lead = (2.0 * u).sqrt() / (kf.sqrt() + (kf - 1.0).sqrt());
    let ab = a + b;
    if ab == 0.0 {
        return lead - d;
    }
    lead - d + (2.0 * (kf - 1.0)).sqrt() * d * d * (a + 2.0 * b) / (3.0 * ab * ab)
}

/// Conservative-regime `δ_k(s)`, using the unclipped window `s + sqrt(2(1-s)/k)`.
pub fn delta_conservative(k: usize, s: f64) -> f64 {
    let h = (s + (2.0 * (1.0 - s) / k as f64).sqrt()).min(1.0);
    delta_with_edge(k, s, h)
}

/// Greedy-regime closed form
/// `√(1-s) {√(2k) - √(2(k-1))} + (1-s) { √(2(k-1)(1-s)) / 3 - 1 }`.
pub fn delta_greedy(k: usize, s: f64) -> f64 {
    let kf = k as f64;
    let u = 1.0 - s;
    u.sqrt() * ((2.0 * kf).sqrt() - (2.0 * (kf - 1.0)).sqrt())
        + u * ((2.0 * (kf - 1.0) * u).sqrt() / 3.0 - 1.0)
}

#[inline]
pub(crate) fn delta_unchecked(k: usize, s: f64) -> f64 {
    if s < critical_state_unchecked(k) {
        delta_with_edge(k, s, threshold_unchecked(k, s))
    } else {
        delta_greedy(k, s)
    }
}

/// `δ_k(s)` for `k >= 1`, `s ∈ [0, 1]`.
pub fn delta(k: usize, s: f64) -> Result<f64> {
    check_horizon(k)?;
    check_unit("state", s)?;
    Ok(delta_unchecked(k, s))
}

/// `γ_k(y)` for `k >= 3`, `y ∈ [0, 1/2]`.
pub fn gamma(k: usize, y: f64) -> Result<f64> {
    if k < 3 {
        return Err(Error::Domain {
            what: "gamma horizon (k >= 3)",
            value: k as f64,
        });
    }
    if !(0.0..=0.5).contains(&y) {
        return Err(Error::Domain {
            what: "gamma argument (y in [0, 1/2])",
            value: y,
        });
    }
    Ok(gamma_unchecked(k, y))
}

fn gamma_unchecked(k: usize, y: f64) -> f64 {
    let kf = k as f64;
    let r = (2.0 * y).sqrt();
    let inner = (1.0 - r).max(0.0).sqrt();
    2.0 + y * kf * (1.0 - (1.0 - 1.0 / kf).sqrt()) - 2.0 * inner - r * (2.0 - inner)
}

/// `a_1, ..., a_{j_max}` from `a_1 = 2^{-1/2}` and
/// `a_j = (2j - 3) / (√2 j) · a_{j-1}`.
pub fn series_coefficients(j_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(j_max);
    let mut a = std::f64::consts::FRAC_1_SQRT_2;
    for j in 1..=j_max {
        if j > 1 {
            let jf = j as f64;
            a *= (2.0 * jf - 3.0) / (std::f64::consts::SQRT_2 * jf);
        }
        out.push(a);
    }
    out
}

/// `a_j = (2j)! / ((2j - 1) (j!)² 2^{3j/2})`, via the ratio recursion.
pub fn series_coefficient(j: usize) -> Result<f64> {
    if j == 0 {
        return Err(Error::Domain {
            what: "coefficient index",
            value: 0.0,
        });
    }
    Ok(*series_coefficients(j).last().expect("j >= 1"))
}

/// `√2 a_j - a_{j-1} >= 0` for `j = 3..=j_max`, and the identity
/// `√2 a_j - a_{j-1} = ((j - 3)/j) a_{j-1}`. Both are reported relative to
/// `a_{j-1}`.
pub fn check_coefficient_difference(j_max: usize) -> Result<Vec<CheckRow>> {
    if j_max < 3 {
        return Err(Error::Domain {
            what: "j_max (>= 3)",
            value: j_max as f64,
        });
    }
    let a = series_coefficients(j_max);
    let mut rows = Vec::with_capacity(2 * (j_max - 2));
    for j in 3..=j_max {
        let (aj, prev) = (a[j - 1], a[j - 2]);
        let diff = std::f64::consts::SQRT_2 * aj - prev;
        let expected = (j as f64 - 3.0) / j as f64 * prev;
        rows.push(CheckRow::at_least(
            "coefficient_difference",
            Some(j),
            diff / prev,
            -COEFFICIENT_REL_TOL,
        ));
        rows.push(CheckRow::at_most(
            "coefficient_identity",
            Some(j),
            (diff - expected).abs() / prev,
            COEFFICIENT_REL_TOL,
        ));
    }
    Ok(rows)
}

/// Left and right sides of
/// `√(2y) {2 - √(1 - √(2y))} <= 2 + y/2 - 2 √(1 - √(2y))`.
pub fn series_inequality_sides(y: f64) -> (f64, f64) {
    let r = (2.0 * y).sqrt();
    let inner = (1.0 - r).max(0.0).sqrt();
    (r * (2.0 - inner), 2.0 + 0.5 * y - 2.0 * inner)
}

fn unit_samples(samples: usize, hi: f64) -> impl IndexedParallelIterator<Item = f64> {
    let last = (samples - 1) as f64;
    (0..samples).into_par_iter().map(move |i| {
        if i == samples - 1 {
            hi
        } else {
            hi * i as f64 / last
        }
    })
}

/// Minimum of `RHS - LHS` over `samples` equispaced points of `[0, 1/2]`.
pub fn check_series_inequality(samples: usize) -> Result<CheckRow> {
    if samples < 2 {
        return Err(Error::Domain {
            what: "sample count (>= 2)",
            value: samples as f64,
        });
    }
    let min = unit_samples(samples, 0.5)
        .map(|y| {
            let (lhs, rhs) = series_inequality_sides(y);
            rhs - lhs
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(CheckRow::at_least("series_inequality", None, min, -SAMPLE_TOL))
}

/// Minimum of `γ_k` over `samples` points of `[0, 1/2]`, per `k`.
pub fn check_gamma_nonneg(ks: &[usize], samples: usize) -> Result<Vec<CheckRow>> {
    if samples < 2 {
        return Err(Error::Domain {
            what: "sample count (>= 2)",
            value: samples as f64,
        });
    }
    ks.iter()
        .map(|&k| {
            gamma(k, 0.0)?;
            let min = unit_samples(samples, 0.5)
                .map(|y| gamma_unchecked(k, y))
                .reduce(|| f64::INFINITY, f64::min);
            Ok(CheckRow::at_least("gamma_nonneg", Some(k), min, -SAMPLE_TOL))
        })
        .collect()
}

/// Maximum of `δ_k` over `samples` equispaced points of `[0, 1]`.
pub fn delta_grid_max(k: usize, samples: usize) -> f64 {
    unit_samples(samples, 1.0)
        .with_min_len(1024)
        .map(|s| delta_unchecked(k, s))
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// Conservative-regime shape of `δ_k` on `[0, s_k]`, `k >= 3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservativeShape {
    /// Smallest consecutive increment.
    pub min_increment: f64,
    pub max: f64,
    /// `δ_k(s_k)`.
    pub at_critical: f64,
}

pub fn delta_conservative_shape(k: usize, samples: usize) -> ConservativeShape {
    let sk = critical_state_unchecked(k);
    let values: Vec<f64> = unit_samples(samples, sk)
        .with_min_len(1024)
        .map(|s| delta_unchecked(k, s))
        .collect();
    let min_increment = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ConservativeShape {
        min_increment,
        max,
        at_critical: *values.last().expect("samples >= 2"),
    }
}

/// Rows for one horizon: the global bound `δ_k <= 2/k`, and for `k >= 3` the
/// conservative-regime monotonicity, the `4/(3k)` bound, the peak at `s_k`,
/// and agreement of the two closed forms at `s_k`.
pub fn delta_rows(k: usize, samples: usize) -> Vec<CheckRow> {
    let kf = k as f64;
    let mut rows = vec![CheckRow::at_most(
        "delta_max",
        Some(k),
        delta_grid_max(k, samples),
        2.0 / kf + DELTA_BOUND_TOL,
    )];
    if k >= 3 {
        let shape = delta_conservative_shape(k, samples);
        let sk = critical_state_unchecked(k);
        rows.push(CheckRow::at_least(
            "delta_monotone",
            Some(k),
            shape.min_increment,
            -SAMPLE_TOL,
        ));
        rows.push(CheckRow::at_most(
            "delta_conservative_max",
            Some(k),
            shape.max,
            4.0 / (3.0 * kf) + DELTA_BOUND_TOL,
        ));
        rows.push(CheckRow::at_most(
            "delta_peak_at_critical",
            Some(k),
            shape.max - shape.at_critical,
            SAMPLE_TOL,
        ));
        rows.push(CheckRow::at_most(
            "delta_branch_agreement",
            Some(k),
            (delta_conservative(k, sk) - delta_greedy(k, sk)).abs(),
            DELTA_BOUND_TOL,
        ));
    }
    rows
}

/// [`delta_rows`] for `k = 1..=k_max`.
pub fn check_delta_bounds(k_max: usize, samples: usize) -> Result<Vec<CheckRow>> {
    if k_max < 3 {
        return Err(Error::Domain {
            what: "k_max (>= 3)",
            value: k_max as f64,
        });
    }
    if samples < 2 {
        return Err(Error::Domain {
            what: "sample count (>= 2)",
            value: samples as f64,
        });
    }
    let per_k: Vec<Vec<CheckRow>> = (1..=k_max)
        .into_par_iter()
        .map(|k| delta_rows(k, samples))
        .collect();
    Ok(per_k.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson quadrature of the defining integral after the
    /// substitution `x = 1 - t²`, which removes the endpoint singularity.
    fn delta_by_quadrature(k: usize, s: f64) -> f64 {
        let kf = k as f64;
        let h = threshold_unchecked(k, s);
        let c = (2.0 * (kf - 1.0) * (1.0 - s)).sqrt();
        let f = |t: f64| (c - (2.0 * (kf - 1.0)).sqrt() * t - 1.0) * 2.0 * t;
        let (lo, hi) = ((1.0 - h).max(0.0).sqrt(), (1.0 - s).sqrt());
        let n = 20_000;
        let dt = (hi - lo) / n as f64;
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(lo + i as f64 * dt);
        }
        (2.0 * kf * (1.0 - s)).sqrt() - c + acc * dt / 3.0
    }

    #[test]
    fn delta_matches_quadrature_oracle() {
        for k in [1, 2, 3, 4, 7, 10, 100, 1000] {
            for i in 0..=40 {
                let s = i as f64 / 40.0;
                let q = delta_by_quadrature(k, s);
                assert!((delta(k, s).unwrap() - q).abs() < 1e-9, "k={k} s={s}");
            }
        }
    }

    #[test]
    fn delta_examples() {
        assert!((delta(1, 0.0).unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        for k in [1, 2, 5, 50] {
            assert_eq!(delta(k, 1.0).unwrap(), 0.0);
        }
        let closed = 2.0 * (1.0 - (2.0f64 / 3.0).sqrt() - 1.0 / 3.0) + 4.0 / 9.0 * (2.0f64 / 3.0).sqrt();
        assert!((closed - 0.0632).abs() < 1e-3);
        let s3 = 1.0 / 3.0;
        assert!((delta_greedy(3, s3) - closed).abs() < 1e-12);
        assert!((delta_conservative(3, s3) - closed).abs() < 1e-12);
        assert!((delta(3, s3).unwrap() - closed).abs() < 1e-12);
        assert!(delta(0, 0.5).is_err());
        assert!(delta(3, 1.5).is_err());
    }

    #[test]
    fn delta_one_peaks_at_midpoint() {
        // δ_1(s) = √(2u) - u, maximised at u = 1/2
        let brute = (0..=100_000)
            .map(|i| delta(1, i as f64 / 100_000.0).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((brute - 0.5).abs() < 1e-9);
        assert!((delta(1, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!(delta_grid_max(1, 10_001) <= 2.0);
    }

    #[test]
    fn delta_at_critical_matches_closed_form() {
        for k in 3..500 {
            let kf = k as f64;
            let closed = 2.0 * (1.0 - (1.0 - 1.0 / kf).sqrt() - 1.0 / kf)
                + 4.0 / (3.0 * kf) * ((kf - 1.0) / kf).sqrt();
            let sk = critical_state_unchecked(k);
            assert!((delta_greedy(k, sk) - closed).abs() < 1e-12);
            assert!((delta_conservative(k, sk) - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_examples() {
        for k in [3, 10, 1000] {
            assert_eq!(gamma(k, 0.0).unwrap(), 0.0);
        }
        let expected = 2.0 + 1.5 * (1.0 - (2.0f64 / 3.0).sqrt()) - 2.0;
        assert!((expected - 0.2753).abs() < 1e-4);
        assert!((gamma(3, 0.5).unwrap() - expected).abs() < 1e-14);
        let brute = (0..=10_000)
            .map(|i| gamma(10, 0.5 * i as f64 / 10_000.0).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(brute >= -1e-12);
        assert!(gamma(10, 0.25).unwrap() >= 0.0);
        assert!(gamma(2, 0.1).is_err());
        assert!(gamma(3, 0.6).is_err());
    }

    /// δ'_k(s) = sqrt((k-1)(1-s)/2) γ_k(1/(k(1-s))), checked by central differences.
    #[test]
    fn gamma_factorises_delta_derivative() {
        for k in [3, 5, 20, 200] {
            let sk = critical_state_unchecked(k);
            for i in 1..20 {
                let s = sk * i as f64 / 20.0;
                let h = 1e-6;
                let fd = (delta_conservative(k, s + h) - delta_conservative(k, s - h)) / (2.0 * h);
                let kf = k as f64;
                let y = 1.0 / (kf * (1.0 - s));
                let formula = ((kf - 1.0) * (1.0 - s) / 2.0).sqrt() * gamma(k, y).unwrap();
                assert!((fd - formula).abs() < 1e-6, "k={k} s={s}: {fd} vs {formula}");
            }
        }
    }

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    #[test]
    fn coefficients_match_factorial_form() {
        assert!((series_coefficient(1).unwrap() - 2f64.powf(-0.5)).abs() < 1e-15);
        assert!((series_coefficient(2).unwrap() - 0.25).abs() < 1e-15);
        assert!((series_coefficient(3).unwrap() - 0.25 / 2f64.sqrt()).abs() < 1e-15);
        assert!((series_coefficient(3).unwrap() - 0.176777).abs() < 1e-6);
        for j in 1..=15u32 {
            let closed = factorial(2 * j)
                / ((2 * j - 1) as f64 * factorial(j).powi(2) * 2f64.powf(1.5 * j as f64));
            let rec = series_coefficient(j as usize).unwrap();
            assert!((rec - closed).abs() <= 1e-13 * closed, "j={j}");
        }
        assert!(series_coefficient(0).is_err());
    }

    /// -√(1 - √(2y)) = -1 + Σ a_j y^{j/2}
    #[test]
    fn coefficients_reproduce_series() {
        let a = series_coefficients(400);
        for y in [0.01f64, 0.1, 0.2, 0.3] {
            let t = y.sqrt();
            let series: f64 = -1.0 + a.iter().enumerate().map(|(i, c)| c * t.powi(i as i32 + 1)).sum::<f64>();
            let direct = -(1.0 - (2.0 * y).sqrt()).sqrt();
            assert!((series - direct).abs() < 1e-10, "y={y}");
        }
    }

    #[test]
    fn coefficient_difference_examples() {
        let rows = check_coefficient_difference(200).unwrap();
        assert!(rows.iter().all(|r| r.pass));
        let a = series_coefficients(4);
        let d3 = std::f64::consts::SQRT_2 * a[2] - a[1];
        assert!(d3.abs() < 1e-15);
        let d4 = std::f64::consts::SQRT_2 * a[3] - a[2];
        assert!((d4 - a[2] / 4.0).abs() < 1e-15);
        assert!((d4 - 0.044194).abs() < 1e-6);
        assert!(check_coefficient_difference(2).is_err());
    }

    #[test]
    fn series_inequality_examples() {
        assert_eq!(series_inequality_sides(0.0), (0.0, 0.0));
        let (l, r) = series_inequality_sides(0.5);
        assert!((l - 2.0).abs() < 1e-15 && (r - 2.25).abs() < 1e-15);
        assert!(check_series_inequality(10_001).unwrap().pass);
        assert!(check_series_inequality(1).is_err());
    }

    #[test]
    fn delta_bound_rows_pass_for_small_horizons() {
        let rows = check_delta_bounds(60, 2001).unwrap();
        assert!(rows.iter().all(|r| r.pass), "{:?}", rows.iter().find(|r| !r.pass));
        assert!(rows.iter().any(|r| r.check == "delta_branch_agreement" && r.k == Some(3)));
    }
}
