//! Optimality gap `v*_n(0) - v̂_n(0)` and the prophet shortfall
//! `g(n) = sqrt(2n) - v*_n(0)`.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::format::num;
use crate::report::CheckRow;
use crate::value::{log_gap, TableKind, ValueTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub n: usize,
    pub v_opt: f64,
    pub v_hat: f64,
    pub gap: f64,
    pub g_n: f64,
}

impl GapReport {
    pub fn new(n: usize, v_opt: f64, v_hat: f64) -> Self {
        GapReport {
            n,
            v_opt,
            v_hat,
            gap: v_opt - v_hat,
            g_n: (2.0 * n as f64).sqrt() - v_opt,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapSummary {
    pub reports: Vec<GapReport>,
    /// Running maximum of the gap, aligned with `reports`.
    pub running_max: Vec<f64>,
}

impl GapSummary {
    pub fn from_reports(reports: Vec<GapReport>) -> Self {
        let mut best = f64::NEG_INFINITY;
        let running_max = reports
            .iter()
            .map(|r| {
                best = best.max(r.gap);
                best
            })
            .collect();
        GapSummary {
            reports,
            running_max,
        }
    }

    /// Gap series from `v*_n(0)` and `v̂_n(0)` for `n = 1..`.
    pub fn from_origin_series(v_opt: &[f64], v_hat: &[f64]) -> Self {
        let reports = v_opt
            .iter()
            .zip(v_hat)
            .enumerate()
            .map(|(i, (&o, &h))| GapReport::new(i + 1, o, h))
            .collect();
        Self::from_reports(reports)
    }

    /// Largest gap and the `n` where it occurs.
    pub fn max_gap(&self) -> Option<(usize, f64)> {
        self.reports
            .iter()
            .fold(None, |best: Option<(usize, f64)>, r| match best {
                Some((_, g)) if g >= r.gap => best,
                _ => Some((r.n, r.gap)),
            })
    }

    /// `-ε <= gap <= 2(log n + 1) + ε` and `g(n) >= -ε`, per `n`.
    pub fn check_rows(&self, tolerance: f64) -> Vec<CheckRow> {
        let mut rows = Vec::with_capacity(3 * self.reports.len());
        for r in &self.reports {
            rows.push(CheckRow::at_most("gap_log_bound", Some(r.n), r.gap, log_gap(r.n) + tolerance));
            rows.push(CheckRow::at_least("gap_nonneg", Some(r.n), r.gap, -tolerance));
            rows.push(CheckRow::at_least("prophet_shortfall_nonneg", Some(r.n), r.g_n, -tolerance));
        }
        rows
    }

    pub const CSV_HEADER: &'static str = "n,v_opt,v_hat,gap,g_n";

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.reports {
            writeln!(out, "{},{},{},{},{}", r.n, num(r.v_opt), num(r.v_hat), num(r.gap), num(r.g_n))?;
        }
        Ok(())
    }
}

pub fn optimality_gap(opt: &ValueTable, hat: &ValueTable, n_list: &[usize]) -> Result<GapSummary> {
    if opt.kind() != TableKind::Optimal {
        return Err(Error::KindMismatch {
            expected: TableKind::Optimal.name(),
            actual: opt.kind().name(),
        });
    }
    if hat.kind() != TableKind::Adaptive {
        return Err(Error::KindMismatch {
            expected: TableKind::Adaptive.name(),
            actual: hat.kind().name(),
        });
    }
    if opt.config() != hat.config() {
        return Err(Error::ConfigMismatch);
    }
    let reports = n_list
        .iter()
        .map(|&n| Ok(GapReport::new(n, opt.eval(n, 0.0)?, hat.eval(n, 0.0)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(GapSummary::from_reports(reports))
}
