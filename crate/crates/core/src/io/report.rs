use std::fmt::Write as _;

use super::matrix::{format_number, Precision};
use crate::redundancy::RedundancyReport;
use crate::Scalar;

/// `.report.txt`: summary lines followed by one `element <id> <r>` line per
/// element in row order, flagged `zero` below the zero-redundancy cutoff.
pub fn format_report<T: Scalar>(report: &RedundancyReport<T>, precision: Precision) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "n_q {}", report.diagonal.len());
    let _ = writeln!(out, "n_s {}", report.n_s);
    let _ = writeln!(out, "trace {}", format_number(report.trace, precision));
    for &(id, r) in &report.per_element {
        let _ = write!(out, "element {id} {}", format_number(r, precision));
        if report.zero_redundancy_ids.contains(&id) {
            out.push_str(" zero");
        }
        out.push('\n');
    }
    out
}
