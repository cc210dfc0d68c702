//! Acceptance-window rules.
//!
//! A [`ThresholdFamily`] maps `(j, s)` with `j` steps remaining and last
//! selection `s` to the upper edge `h_j(s) ∈ [s, 1]` of the acceptance window
//! `[s, h_j(s)]`. A [`SelectionRule`] is the more general accept/reject
//! predicate; every threshold family is a selection rule, and so is the
//! reflected (decreasing) version of any rule.

use crate::error::{Error, Result};
use crate::policy::threshold_unchecked;

pub trait ThresholdFamily: Sync {
    /// Upper acceptance edge `h_j(s)`. Callers guarantee `j >= 1`, `s ∈ [0, 1]`.
    fn upper_edge(&self, steps_remaining: usize, state: f64) -> f64;
}

pub trait SelectionRule: Sync {
    fn accepts(&self, steps_remaining: usize, state: f64, x: f64) -> bool;

    /// Whether accepted values never fall below the state.
    fn is_increasing(&self) -> bool {
        true
    }
}

impl<T: ThresholdFamily + ?Sized> SelectionRule for T {
    #[inline]
    fn accepts(&self, steps_remaining: usize, state: f64, x: f64) -> bool {
        state <= x && x <= self.upper_edge(steps_remaining, state)
    }
}

impl<T: ThresholdFamily + ?Sized> ThresholdFamily for &T {
    #[inline]
    fn upper_edge(&self, steps_remaining: usize, state: f64) -> f64 {
        (**self).upper_edge(steps_remaining, state)
    }
}

/// The adaptive thresholds `ĥ_j`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AdaptiveFamily;

impl ThresholdFamily for AdaptiveFamily {
    #[inline]
    fn upper_edge(&self, steps_remaining: usize, state: f64) -> f64 {
        threshold_unchecked(steps_remaining, state)
    }
}

pub fn adaptive_family() -> AdaptiveFamily {
    AdaptiveFamily
}

/// Accepts every feasible value.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyFamily;

impl ThresholdFamily for GreedyFamily {
    #[inline]
    fn upper_edge(&self, _steps_remaining: usize, _state: f64) -> f64 {
        1.0
    }
}

pub fn greedy_family() -> GreedyFamily {
    GreedyFamily
}

/// Window of constant width `w`, truncated at 1.
#[derive(Debug, Clone, Copy)]
pub struct FixedWidthFamily {
    width: f64,
}

impl FixedWidthFamily {
    pub fn width(&self) -> f64 {
        self.width
    }
}

impl ThresholdFamily for FixedWidthFamily {
    #[inline]
    fn upper_edge(&self, _steps_remaining: usize, state: f64) -> f64 {
        (state + self.width).min(1.0)
    }
}

pub fn fixed_width_family(width: f64) -> Result<FixedWidthFamily> {
    if width > 0.0 && width <= 1.0 {
        Ok(FixedWidthFamily { width })
    } else {
        Err(Error::Domain {
            what: "window width",
            value: width,
        })
    }
}

/// Decreasing-selection rule obtained by the reflection `x ↦ 1 - x`.
///
/// For an increasing base rule the state is the last selected value, starting
/// at 1, and an observation `x` is accepted iff `x <= state` and the base rule
/// accepts `1 - x` from state `1 - state`.
#[derive(Debug, Clone, Copy)]
pub struct Mirrored<R>(pub R);

impl<R: SelectionRule> SelectionRule for Mirrored<R> {
    #[inline]
    fn accepts(&self, steps_remaining: usize, state: f64, x: f64) -> bool {
        // Direct comparison so rounding in 1 - x never breaks monotonicity.
        let ordered = if self.0.is_increasing() {
            x <= state
        } else {
            x >= state
        };
        ordered && self.0.accepts(steps_remaining, 1.0 - state, 1.0 - x)
    }

    fn is_increasing(&self) -> bool {
        !self.0.is_increasing()
    }
}

impl<F: ThresholdFamily> Mirrored<F> {
    /// Lower acceptance edge `1 - h_j(1 - s)` of the reflected window.
    pub fn lower_edge(&self, steps_remaining: usize, state: f64) -> f64 {
        1.0 - self.0.upper_edge(steps_remaining, 1.0 - state)
    }
}

pub fn mirror_family<R: SelectionRule>(rule: R) -> Mirrored<R> {
    Mirrored(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn adaptive_examples() {
        let f = adaptive_family();
        assert_eq!(f.upper_edge(1, 0.9), 1.0);
        assert!((f.upper_edge(8, 0.5) - (0.5 + 0.125f64.sqrt())).abs() < 1e-15);
        assert_eq!(f.upper_edge(10, 0.8), 1.0);
    }

    #[test]
    fn greedy_and_fixed_width() {
        assert_eq!(greedy_family().upper_edge(7, 0.4), 1.0);
        let f = fixed_width_family(0.2).unwrap();
        assert_eq!(f.upper_edge(3, 0.9), 1.0);
        assert!((f.upper_edge(3, 0.5) - 0.7).abs() < 1e-15);
        assert!(fixed_width_family(0.0).is_err());
        assert!(fixed_width_family(1.5).is_err());
        assert!(fixed_width_family(f64::NAN).is_err());
    }

    #[test]
    fn mirror_examples() {
        let m = mirror_family(adaptive_family());
        assert!(m.accepts(1, 0.5, 0.2));
        assert!(!m.accepts(1, 0.5, 0.6));
        assert_eq!(m.lower_edge(1, 0.5), 0.0);
    }

    proptest! {
        #[test]
        fn mirror_is_an_involution(j in 1usize..2000, si in 0u32..=1 << 20, xi in 0u32..=1 << 20) {
            // dyadic inputs reflect exactly under x -> 1 - x
            let s = si as f64 / (1u32 << 20) as f64;
            let x = xi as f64 / (1u32 << 20) as f64;
            let base = adaptive_family();
            let twice = mirror_family(mirror_family(base));
            prop_assert_eq!(twice.accepts(j, s, x), base.accepts(j, s, x));
        }

        #[test]
        fn fixed_width_feasible(w in 1e-6f64..=1.0, s in 0.0f64..=1.0, j in 1usize..100) {
            let h = fixed_width_family(w).unwrap().upper_edge(j, s);
            prop_assert!(s <= h && h <= 1.0);
        }
    }
}
