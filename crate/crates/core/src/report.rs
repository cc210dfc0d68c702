//! Verification rows and the `check,k,statistic,bound,margin,pass` report.

use std::io::{self, Write};

use crate::format::num;

/// One verified inequality. `margin >= 0` iff the check passed.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: &'static str,
    pub k: Option<usize>,
    pub statistic: f64,
    pub bound: f64,
    pub margin: f64,
    pub pass: bool,
}

impl CheckRow {
    /// Passes iff `statistic <= bound`.
    pub fn at_most(check: &'static str, k: Option<usize>, statistic: f64, bound: f64) -> Self {
        let margin = bound - statistic;
        CheckRow {
            check,
            k,
            statistic,
            bound,
            margin,
            pass: margin >= 0.0,
        }
    }

    /// Passes iff `statistic >= bound`.
    pub fn at_least(check: &'static str, k: Option<usize>, statistic: f64, bound: f64) -> Self {
        let margin = statistic - bound;
        CheckRow {
            check,
            k,
            statistic,
            bound,
            margin,
            pass: margin >= 0.0,
        }
    }

    fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let k = self.k.map(|k| k.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            self.check,
            k,
            num(self.statistic),
            num(self.bound),
            num(self.margin),
            self.pass
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerificationReport {
    pub rows: Vec<CheckRow>,
}

impl VerificationReport {
    pub const HEADER: &'static str = "check,k,statistic,bound,margin,pass";

    pub fn extend(&mut self, rows: impl IntoIterator<Item = CheckRow>) {
        self.rows.extend(rows);
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    /// Rows of one named check.
    pub fn check<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a CheckRow> + 'a {
        self.rows.iter().filter(move |r| r.check == name)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{}", Self::HEADER)?;
        for row in &self.rows {
            row.write_csv(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_and_csv() {
        let mut r = VerificationReport::default();
        r.extend([
            CheckRow::at_most("delta_max", Some(3), 0.25, 0.5),
            CheckRow::at_least("series_inequality", None, -1.0, -1e-12),
        ]);
        assert!(!r.all_pass());
        assert_eq!(r.failures().count(), 1);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "check,k,statistic,bound,margin,pass\n\
             delta_max,3,0.25,0.5,0.25,true\n\
             series_inequality,,-1,-1e-12,-0.999999999999,false\n"
        );
    }
}
