use std::fmt::Write as _;

use super::{expr::parse_number, tokenized_lines, ParseError};
use crate::{Mat, Scalar};

/// How numbers are rendered in exports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    /// Fixed number of digits after the decimal point.
    Decimals(usize),
    /// Significant digits, zero written as `0.0` (the style of printed
    /// tables).
    Significant(usize),
    /// Shortest text that parses back to the identical value.
    Full,
}

pub fn format_number<T: Scalar>(v: T, precision: Precision) -> String {
    match precision {
        Precision::Full => format!("{v:?}"),
        Precision::Decimals(d) => strip_negative_zero(format!("{:.*}", d, v.to_f64_lossy())),
        Precision::Significant(s) => significant(v.to_f64_lossy(), s.max(1)),
    }
}

fn significant(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0.0".into();
    }
    let mut exp = v.abs().log10().floor() as i32;
    let mut text = fixed_for(v, digits, exp);
    // Rounding can carry into a new leading digit (0.09996 -> 0.1000).
    let reparsed: f64 = text.parse().unwrap_or(v);
    if reparsed != 0.0 && reparsed.abs().log10().floor() as i32 > exp {
        exp += 1;
        text = fixed_for(v, digits, exp);
    }
    strip_negative_zero(text)
}

fn fixed_for(v: f64, digits: usize, exp: i32) -> String {
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

fn strip_negative_zero(s: String) -> String {
    match s.strip_prefix('-') {
        Some(rest) if rest.chars().all(|c| c == '0' || c == '.') => rest.to_string(),
        _ => s,
    }
}

/// Row-major text, one matrix row per line, entries separated by a single
/// space. With [`Precision::Significant`], entries below `1e-12` times the
/// largest magnitude print as `0.0`.
pub fn export_matrix<T: Scalar>(m: &Mat<T>, precision: Precision) -> String {
    let cutoff = T::lit(1e-12) * m.max_abs().max(T::one());
    let mut out = String::new();
    for row in m.rows_iter() {
        for (j, &v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let v = match precision {
                Precision::Significant(_) if v.abs() <= cutoff => T::zero(),
                _ => v,
            };
            let _ = write!(out, "{}", format_number(v, precision));
        }
        out.push('\n');
    }
    out
}

/// Parses the text written by [`export_matrix`]. Entries may also be
/// numeric expressions. Blank input gives a 0×0 matrix.
pub fn parse_matrix<T: Scalar>(text: &str) -> Result<Mat<T>, ParseError> {
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (line, toks) in tokenized_lines(text) {
        if let Some(c) = cols {
            if toks.len() != c {
                return Err(ParseError::new(
                    line,
                    toks[0].column,
                    format!("row has {} entries, expected {c}", toks.len()),
                ));
            }
        }
        cols = Some(toks.len());
        for t in toks {
            data.push(
                parse_scalar::<T>(t.text)
                    .map_err(|(off, msg)| ParseError::new(line, t.column + off, msg))?,
            );
        }
        rows += 1;
    }
    Ok(Mat::from_vec(rows, cols.unwrap_or(0), data))
}

/// Plain literals parse directly in `T` (exact for shortest round-trip
/// text); anything else goes through the expression evaluator.
pub(crate) fn parse_scalar<T: Scalar>(text: &str) -> Result<T, (usize, String)> {
    if let Ok(v) = text.parse::<T>() {
        if v.is_finite() {
            return Ok(v);
        }
    }
    let v = parse_number(text)?;
    let t = T::lit(v);
    if t.is_finite() {
        Ok(t)
    } else {
        Err((0, format!("'{text}' overflows")))
    }
}
