//! Grid dynamic programming for the adaptive and optimal value functions.
//!
//! States live on the uniform grid `s_i = i / G`, `i = 0..=G`. Each row is
//! represented by its node samples and read back through the piecewise-linear
//! interpolant. Integrals of a row are exact integrals of that interpolant:
//! a composite-trapezoid prefix array over whole cells plus the closed-form
//! area of the fractional last cell. Every row is therefore `O(G)` after one
//! prefix pass over the previous row.
//!
//! Adaptive recursion, `v̂_0 ≡ 0`:
//!
//! ```text
//! v̂_k(s) = (1 - ĥ_k(s) + s) v̂_{k-1}(s) + ∫_s^{ĥ_k(s)} (1 + v̂_{k-1}(x)) dx
//! ```
//!
//! Optimal (Bellman) recursion, `v*_0 ≡ 0`:
//!
//! ```text
//! v*_k(s) = v*_{k-1}(s) + ∫_s^1 max{0, 1 + v*_{k-1}(x) - v*_{k-1}(s)} dx
//! ```
//!
//! The integrand of the Bellman step is positive exactly up to the optimal
//! edge `h*_k(s) = sup{x : 1 + v*_{k-1}(x) >= v*_{k-1}(s)}`, located by
//! bisection over the monotone row and solved exactly inside its cell.

use rayon::prelude::*;

use crate::error::{check_unit, Error, Result};
use crate::family::ThresholdFamily;
use crate::policy::threshold_unchecked;

const DEFAULT_STEP: f64 = 1e-4;
const DEFAULT_K_MAX: usize = 10_000;
const COARSEST_STEP: f64 = 1e-2;
/// Rows shorter than this are computed on the calling thread.
const PAR_MIN_LEN: usize = 2048;

/// Discretization of `[0, 1]` and the largest horizon computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    step: f64,
    intervals: usize,
    k_max: usize,
}

impl GridConfig {
    /// `1/step` must be an integer and `step <= 1e-2`.
    pub fn new(step: f64, k_max: usize) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidConfig(format!("step must be positive, got {step}")));
        }
        if step > COARSEST_STEP * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "step {step} is coarser than {COARSEST_STEP}"
            )));
        }
        let inverse = 1.0 / step;
        let intervals = inverse.round();
        if (inverse - intervals).abs() > 1e-6 * intervals {
            return Err(Error::InvalidConfig(format!(
                "1/step must be an integer, got {inverse}"
            )));
        }
        if k_max == 0 {
            return Err(Error::InvalidConfig("k_max must be at least 1".into()));
        }
        Ok(GridConfig {
            step: 1.0 / intervals,
            intervals: intervals as usize,
            k_max,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of cells `G`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of nodes `G + 1`.
    pub fn nodes(&self) -> usize {
        self.intervals + 1
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.intervals as f64
    }

    /// Error budget for grid-precision bound checks, `10 * step`.
    pub fn tolerance(&self) -> f64 {
        10.0 * self.step
    }

    /// Same grid, different horizon.
    pub fn with_k_max(&self, k_max: usize) -> Result<Self> {
        GridConfig::new(self.step, k_max)
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig::new(DEFAULT_STEP, DEFAULT_K_MAX).expect("default grid is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Adaptive,
    Optimal,
}

impl TableKind {
    pub fn name(self) -> &'static str {
        match self {
            TableKind::Adaptive => "adaptive",
            TableKind::Optimal => "optimal",
        }
    }
}

/// Which rows a finished table keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retention {
    All,
    /// Only rows `k_max - 1` and `k_max`. Optimal tables still keep every
    /// edge row because the optimal policy needs them.
    LastTwo,
}

/// One freshly computed row, handed to [`sweep_rows`] callbacks.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    pub k: usize,
    pub values: &'a [f64],
    /// Row `k - 1`.
    pub prev: &'a [f64],
    /// Optimal edges `h*_k(s_i)`; `None` for adaptive rows.
    pub edges: Option<&'a [f64]>,
}

/// Fills `out` with the cumulative trapezoid integral of `values`.
pub(crate) fn cumulative_into(values: &[f64], step: f64, out: &mut Vec<f64>) {
    out.clear();
    out.reserve(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * step * (w[0] + w[1]);
        out.push(acc);
    }
}

/// `∫_0^x` of the linear interpolant of `values`, given its prefix array.
#[inline]
pub(crate) fn integral_to(values: &[f64], prefix: &[f64], x: f64) -> f64 {
    let g = values.len() - 1;
    if x >= 1.0 {
        return prefix[g];
    }
    let pos = x * g as f64;
    let j = (pos as usize).min(g - 1);
    let t = pos - j as f64;
    let step = 1.0 / g as f64;
    prefix[j] + step * t * (values[j] + 0.5 * t * (values[j + 1] - values[j]))
}

/// Linear interpolation of `values` at `x ∈ [0, 1]`, exact at nodes.
#[inline]
pub(crate) fn interpolate(values: &[f64], x: f64) -> f64 {
    let g = values.len() - 1;
    let pos = x * g as f64;
    let nearest = pos.round();
    if (pos - nearest).abs() <= 1e-9 {
        return values[(nearest as usize).min(g)];
    }
    let j = (pos as usize).min(g - 1);
    let t = pos - j as f64;
    values[j] + t * (values[j + 1] - values[j])
}

fn adaptive_row(k: usize, config: &GridConfig, prev: &[f64], prefix: &[f64], out: &mut [f64]) {
    out.par_iter_mut()
        .with_min_len(PAR_MIN_LEN)
        .enumerate()
        .for_each(|(i, v)| {
            let s = config.node(i);
            let h = threshold_unchecked(k, s);
            let width = h - s;
            *v = (1.0 - width) * prev[i] + width + integral_to(prev, prefix, h) - prefix[i];
        });
}

fn optimal_row(
    config: &GridConfig,
    prev: &[f64],
    prefix: &[f64],
    out: &mut [f64],
    edges: &mut [f64],
) {
    let g = config.intervals();
    out.par_iter_mut()
        .zip(edges.par_iter_mut())
        .with_min_len(PAR_MIN_LEN)
        .enumerate()
        .for_each(|(i, (v, edge))| {
            let s = config.node(i);
            let here = prev[i];
            let target = here - 1.0;
            let h = if prev[g] >= target {
                1.0
            } else {
                // last node with prev >= target; prev[i] itself qualifies
                let p = i + prev[i..].partition_point(|&x| x >= target) - 1;
                let p = p.min(g - 1);
                let drop = prev[p] - prev[p + 1];
                let frac = if drop > 0.0 {
                    ((prev[p] - target) / drop).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (config.node(p) + frac * config.step()).clamp(s, 1.0)
            };
            *edge = h;
            *v = here + (1.0 - here) * (h - s) + integral_to(prev, prefix, h) - prefix[i];
        });
}

fn validate_row(k: usize, row: &[f64], tolerance: f64) -> Result<()> {
    let limit = (2.0 * k as f64).sqrt();
    for (node, &value) in row.iter().enumerate() {
        if !(value >= -tolerance && value <= limit + tolerance) {
            return Err(Error::Arithmetic {
                k,
                node,
                value,
                limit,
            });
        }
    }
    Ok(())
}

/// Runs the recursion of `kind` for `k = 1..=k_max`, calling `visit` with each
/// new row. Only two rows are held in memory.
pub fn sweep_rows<F>(kind: TableKind, config: &GridConfig, mut visit: F) -> Result<()>
where
    F: FnMut(RowView<'_>) -> Result<()>,
{
    let nodes = config.nodes();
    let mut prev = vec![0.0; nodes];
    let mut cur = vec![0.0; nodes];
    let mut prefix = Vec::with_capacity(nodes);
    let mut edges = match kind {
        TableKind::Optimal => vec![1.0; nodes],
        TableKind::Adaptive => Vec::new(),
    };
    let tolerance = config.tolerance();
    for k in 1..=config.k_max() {
        cumulative_into(&prev, config.step(), &mut prefix);
        match kind {
            TableKind::Adaptive => adaptive_row(k, config, &prev, &prefix, &mut cur),
            TableKind::Optimal => optimal_row(config, &prev, &prefix, &mut cur, &mut edges),
        }
        validate_row(k, &cur, tolerance)?;
        visit(RowView {
            k,
            values: &cur,
            prev: &prev,
            edges: (kind == TableKind::Optimal).then_some(edges.as_slice()),
        })?;
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(())
}

/// Value-function samples for rows `first_row..=k_max`, plus the optimal
/// edges for every row when the table is of kind [`TableKind::Optimal`].
#[derive(Debug, Clone)]
pub struct ValueTable {
    kind: TableKind,
    config: GridConfig,
    first_row: usize,
    values: Vec<f64>,
    edges: Option<Vec<f64>>,
}

impl ValueTable {
    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn k_max(&self) -> usize {
        self.config.k_max()
    }

    pub fn is_streaming(&self) -> bool {
        self.first_row > 0
    }

    /// Retained rows as an inclusive range.
    pub fn retained(&self) -> std::ops::RangeInclusive<usize> {
        self.first_row..=self.config.k_max()
    }

    pub fn row(&self, k: usize) -> Result<&[f64]> {
        if k < self.first_row || k > self.config.k_max() {
            return Err(Error::RowUnavailable {
                k,
                first: self.first_row,
                last: self.config.k_max(),
            });
        }
        let n = self.config.nodes();
        let start = (k - self.first_row) * n;
        Ok(&self.values[start..start + n])
    }

    /// Optimal edge row `h*_j` at the grid nodes.
    pub fn edge_row(&self, j: usize) -> Result<&[f64]> {
        let edges = self.edges.as_ref().ok_or(Error::KindMismatch {
            expected: TableKind::Optimal.name(),
            actual: self.kind.name(),
        })?;
        if j == 0 || j > self.config.k_max() {
            return Err(Error::RowUnavailable {
                k: j,
                first: 1,
                last: self.config.k_max(),
            });
        }
        let n = self.config.nodes();
        Ok(&edges[j * n..(j + 1) * n])
    }

    /// Cumulative integral `C_k(s_i) = ∫_0^{s_i} v_k` of a retained row.
    pub fn cumulative(&self, k: usize) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        cumulative_into(self.row(k)?, self.config.step(), &mut out);
        Ok(out)
    }

    /// Interpolated `v_k(s)`.
    pub fn eval(&self, k: usize, s: f64) -> Result<f64> {
        check_unit("state", s)?;
        Ok(interpolate(self.row(k)?, s))
    }
}

/// Builds the table of `kind`, keeping the rows selected by `retention`.
pub fn build_table(kind: TableKind, config: &GridConfig, retention: Retention) -> Result<ValueTable> {
    let nodes = config.nodes();
    let k_max = config.k_max();
    let first_row = match retention {
        Retention::All => 0,
        Retention::LastTwo => k_max - 1,
    };
    let mut values = Vec::with_capacity((k_max + 1 - first_row) * nodes);
    if first_row == 0 {
        values.resize(nodes, 0.0);
    }
    let mut edges = (kind == TableKind::Optimal).then(|| {
        let mut e = Vec::with_capacity((k_max + 1) * nodes);
        e.resize(nodes, 1.0);
        e
    });
    sweep_rows(kind, config, |row| {
        if row.k >= first_row {
            values.extend_from_slice(row.values);
        }
        if let (Some(all), Some(e)) = (edges.as_mut(), row.edges) {
            all.extend_from_slice(e);
        }
        Ok(())
    })?;
    Ok(ValueTable {
        kind,
        config: *config,
        first_row,
        values,
        edges,
    })
}

pub fn build_adaptive_table(config: &GridConfig) -> Result<ValueTable> {
    build_table(TableKind::Adaptive, config, Retention::All)
}

pub fn build_optimal_table(config: &GridConfig) -> Result<ValueTable> {
    build_table(TableKind::Optimal, config, Retention::All)
}

/// Interpolated lookup `v_k(s)`.
pub fn eval_value(table: &ValueTable, k: usize, s: f64) -> Result<f64> {
    table.eval(k, s)
}

/// Prophet bound `sqrt(2k(1 - s))`.
pub fn upper_bound(k: usize, s: f64) -> Result<f64> {
    check_unit("state", s)?;
    Ok(upper_bound_unchecked(k, s))
}

#[inline]
pub(crate) fn upper_bound_unchecked(k: usize, s: f64) -> f64 {
    (2.0 * k as f64 * (1.0 - s)).sqrt()
}

/// `sqrt(2k(1 - s)) - 2(log k + 1)`; may be negative.
pub fn lower_bound(k: usize, s: f64) -> Result<f64> {
    crate::error::check_horizon(k)?;
    check_unit("state", s)?;
    Ok(lower_bound_unchecked(k, s))
}

#[inline]
pub(crate) fn lower_bound_unchecked(k: usize, s: f64) -> f64 {
    upper_bound_unchecked(k, s) - log_gap(k)
}

/// `2(log k + 1)`.
#[inline]
pub fn log_gap(k: usize) -> f64 {
    2.0 * ((k as f64).ln() + 1.0)
}

/// Optimal acceptance edges recovered from an optimal table, linearly
/// interpolated between grid nodes and clamped into `[s, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct OptimalFamily<'a> {
    table: &'a ValueTable,
}

impl OptimalFamily<'_> {
    pub fn k_max(&self) -> usize {
        self.table.k_max()
    }

    /// Checked edge lookup.
    pub fn edge(&self, j: usize, s: f64) -> Result<f64> {
        check_unit("state", s)?;
        let row = self.table.edge_row(j)?;
        Ok(interpolate(row, s).clamp(s, 1.0))
    }
}

impl ThresholdFamily for OptimalFamily<'_> {
    /// Panics if `j` exceeds the table horizon.
    #[inline]
    fn upper_edge(&self, steps_remaining: usize, state: f64) -> f64 {
        let n = self.table.config.nodes();
        let edges = self.table.edges.as_ref().expect("optimal table");
        assert!(steps_remaining >= 1 && steps_remaining <= self.table.k_max());
        let row = &edges[steps_remaining * n..(steps_remaining + 1) * n];
        interpolate(row, state).clamp(state, 1.0)
    }
}

pub fn optimal_family(table: &ValueTable) -> Result<OptimalFamily<'_>> {
    if table.kind != TableKind::Optimal {
        return Err(Error::KindMismatch {
            expected: TableKind::Optimal.name(),
            actual: table.kind.name(),
        });
    }
    Ok(OptimalFamily { table })
}

/// `v_k(0)` for `k = 1..=k_max`, computed in streaming mode.
pub fn origin_values(kind: TableKind, config: &GridConfig) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(config.k_max());
    sweep_rows(kind, config, |row| {
        out.push(row.values[0]);
        Ok(())
    })?;
    Ok(out)
}
