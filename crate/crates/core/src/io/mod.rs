//! Text formats: `.rxm` models, `.rxu` update scripts, `.mat.txt` matrices
//! and `.report.txt` redundancy reports.
//!
//! All formats are UTF-8 and line oriented. `#` starts a comment that runs
//! to the end of the line. Numeric fields accept small expressions such as
//! `100*sqrt(2)` or `-sqrt(2)/2`.

mod expr;
mod matrix;
mod model_file;
mod report;
mod script;

use std::fmt;

pub use expr::parse_number;
pub use matrix::{export_matrix, format_number, parse_matrix, Precision};
pub use model_file::{parse_model, serialize_model, ModelDocument};
pub use report::format_report;
pub use script::{parse_update_script, serialize_script, Payload, ScriptStep, UpdateScript};

/// A syntax or semantic error at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {}",
            self.line, self.column, self.message
        )
    }
}

/// A whitespace-delimited token with its 1-based column.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Token<'a> {
    pub text: &'a str,
    pub column: usize,
}

/// Splits every line into tokens, dropping comments and blank lines.
/// Yields `(line number, tokens)`.
pub(crate) fn tokenized_lines(text: &str) -> impl Iterator<Item = (usize, Vec<Token<'_>>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let code = match line.find('#') {
            Some(p) => &line[..p],
            None => line,
        };
        let toks = tokens(code);
        (!toks.is_empty()).then_some((i + 1, toks))
    })
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (pos, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(token_at(line, s, pos));
            }
        } else if start.is_none() {
            start = Some(pos);
        }
    }
    if let Some(s) = start {
        out.push(token_at(line, s, line.len()));
    }
    out
}

fn token_at(line: &str, start: usize, end: usize) -> Token<'_> {
    Token {
        text: &line[start..end],
        column: line[..start].chars().count() + 1,
    }
}
