//! `kind,k,s,value,upper_bound,lower_bound` table export.

use std::io::{self, Write};

use crate::format::num;
use crate::value::{lower_bound_unchecked, upper_bound_unchecked, GridConfig, TableKind, ValueTable};

pub const TABLE_HEADER: &str = "kind,k,s,value,upper_bound,lower_bound";

/// Index `i` of `0..=last` is kept when it is a multiple of `stride` or the
/// last one.
pub fn keep_index(i: usize, last: usize, stride: usize) -> bool {
    i == last || i.is_multiple_of(stride.max(1))
}

pub fn write_table_header<W: Write>(out: &mut W) -> io::Result<()> {
    writeln!(out, "{TABLE_HEADER}")
}

/// Writes the thinned nodes of one row. The lower bound is left empty at
/// `k = 0`, where it is undefined.
pub fn write_table_row<W: Write>(
    out: &mut W,
    kind: TableKind,
    k: usize,
    values: &[f64],
    config: &GridConfig,
    s_stride: usize,
) -> io::Result<()> {
    let last = config.intervals();
    for (i, &v) in values.iter().enumerate() {
        if !keep_index(i, last, s_stride) {
            continue;
        }
        let s = config.node(i);
        let lower = if k == 0 {
            String::new()
        } else {
            num(lower_bound_unchecked(k, s))
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            kind.name(),
            k,
            num(s),
            num(v),
            num(upper_bound_unchecked(k, s)),
            lower
        )?;
    }
    Ok(())
}

/// Writes every retained row `k` with `keep_index(k, k_max, k_stride)`.
pub fn write_table_csv<W: Write>(
    out: &mut W,
    table: &ValueTable,
    k_stride: usize,
    s_stride: usize,
) -> io::Result<()> {
    write_table_header(out)?;
    let k_max = table.k_max();
    for k in table.retained() {
        if keep_index(k, k_max, k_stride) {
            let row = table.row(k).expect("retained row");
            write_table_row(out, table.kind(), k, row, table.config(), s_stride)?;
        }
    }
    Ok(())
}
