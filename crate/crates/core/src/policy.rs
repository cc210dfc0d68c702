//! Closed-form adaptive thresholds.
//!
//! With `k` observations still to be seen and last selection `s`, the
//! adaptive policy accepts the next value `x` iff `x ∈ [s, ĥ_k(s)]` where
//!
//! ```text
//! ĥ_k(s) = min{ s + sqrt(2(1 - s)/k), 1 }.
//! ```
//!
//! Below the critical state `s_k = max{1 - 2/k, 0}` the window is strictly
//! inside `[s, 1]` (conservative regime); at or above it every feasible value
//! is accepted (greedy regime).

use crate::error::{check_horizon, check_unit, Result};

/// Value of the most recent selection, 0 before any selection.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct State(f64);

impl State {
    pub fn new(s: f64) -> Result<Self> {
        check_unit("state", s)?;
        Ok(State(s))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Number of observations yet to be seen. Always at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Horizon(usize);

impl Horizon {
    pub fn new(k: usize) -> Result<Self> {
        check_horizon(k)?;
        Ok(Horizon(k))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Conservative,
    Greedy,
}

/// `s_k = max{1 - 2/k, 0}`.
pub fn critical_state(k: usize) -> Result<f64> {
    check_horizon(k)?;
    Ok(critical_state_unchecked(k))
}

#[inline]
pub(crate) fn critical_state_unchecked(k: usize) -> f64 {
    (1.0 - 2.0 / k as f64).max(0.0)
}

/// Upper edge `ĥ_k(s)` of the acceptance window.
pub fn threshold(k: usize, s: f64) -> Result<f64> {
    check_horizon(k)?;
    check_unit("state", s)?;
    Ok(threshold_unchecked(k, s))
}

/// Threshold without domain checks; `k >= 1` and `s ∈ [0, 1]` are assumed.
#[inline]
pub fn threshold_unchecked(k: usize, s: f64) -> f64 {
    if s >= critical_state_unchecked(k) {
        return 1.0;
    }
    let h = s + (2.0 * (1.0 - s) / k as f64).sqrt();
    h.clamp(s, 1.0)
}

pub fn regime(k: usize, s: f64) -> Result<Regime> {
    check_horizon(k)?;
    check_unit("state", s)?;
    Ok(if s < critical_state_unchecked(k) {
        Regime::Conservative
    } else {
        Regime::Greedy
    })
}

/// Whether `x` lies in the closed window `[s, ĥ_k(s)]`.
pub fn accepts(k: usize, s: f64, x: f64) -> Result<bool> {
    check_horizon(k)?;
    check_unit("state", s)?;
    check_unit("observation", x)?;
    Ok(s <= x && x <= threshold_unchecked(k, s))
}
