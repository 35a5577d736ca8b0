//! `.rxu` update scripts, one operation per line:
//!
//! ```text
//! add 3 at 3 = 100*sqrt(2) : -sqrt(2)/2 sqrt(2)/2 0 0
//! add 7 truss 2 5 E=210000 A=0.01
//! remove 4
//! remove 8 9          # one combined removal
//! exchange 3 = 200 : 0 0 0 1
//! exchange 6 beam 1 4 E=1 A=1 I=0.1
//! ```
//!
//! Raw payloads list `stiffness : row` groups separated by `|`; a block of
//! several modes is one element. `at` is a 1-based row position.

use std::fmt::Write as _;

use super::matrix::{format_number, parse_scalar, Precision};
use super::{tokenized_lines, ParseError, Token};
use crate::model::{ElementId, ElementKind, NodeId};
use crate::Scalar;

/// What an added or exchanged element consists of.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload<T> {
    /// Compatibility rows over all `n` DOFs, each with its stiffness.
    Rows(Vec<(T, Vec<T>)>),
    /// A geometric element; needs a model to resolve.
    Element {
        kind: ElementKind,
        nodes: [NodeId; 2],
        youngs_modulus: T,
        area: T,
        inertia: Option<T>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptStep<T> {
    Add {
        id: ElementId,
        /// 0-based row where the element's rows start.
        at: Option<usize>,
        payload: Payload<T>,
    },
    Remove {
        ids: Vec<ElementId>,
    },
    Exchange {
        id: ElementId,
        payload: Payload<T>,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UpdateScript<T> {
    pub steps: Vec<ScriptStep<T>>,
    /// Source line of every step, for error reporting.
    pub lines: Vec<usize>,
}

pub fn parse_update_script<T: Scalar>(text: &str) -> Result<UpdateScript<T>, ParseError> {
    let mut script = UpdateScript {
        steps: Vec::new(),
        lines: Vec::new(),
    };
    for (line, toks) in tokenized_lines(text) {
        let step = match toks[0].text {
            "add" => {
                let id = parse_id(line, toks.get(1), "element id")?;
                let mut rest = &toks[2..];
                let mut at = None;
                if rest.first().map(|t| t.text) == Some("at") {
                    let row = parse_id(line, rest.get(1), "row position")? as usize;
                    if row == 0 {
                        return Err(ParseError::new(
                            line,
                            rest[1].column,
                            "rows are numbered from 1",
                        ));
                    }
                    at = Some(row - 1);
                    rest = &rest[2..];
                }
                let payload = parse_payload(line, rest, toks[0])?;
                ScriptStep::Add { id, at, payload }
            }
            "remove" => {
                if toks.len() < 2 {
                    return Err(ParseError::new(
                        line,
                        toks[0].column,
                        "remove needs element ids",
                    ));
                }
                let ids = toks[1..]
                    .iter()
                    .map(|t| parse_id(line, Some(t), "element id"))
                    .collect::<Result<Vec<_>, _>>()?;
                ScriptStep::Remove { ids }
            }
            "exchange" => {
                let id = parse_id(line, toks.get(1), "element id")?;
                let payload = parse_payload(line, &toks[2..], toks[0])?;
                ScriptStep::Exchange { id, payload }
            }
            other => {
                return Err(ParseError::new(
                    line,
                    toks[0].column,
                    format!("unknown operation '{other}' (expected add, remove or exchange)"),
                ))
            }
        };
        script.steps.push(step);
        script.lines.push(line);
    }
    Ok(script)
}

fn parse_payload<T: Scalar>(
    line: usize,
    toks: &[Token<'_>],
    op: Token<'_>,
) -> Result<Payload<T>, ParseError> {
    match toks.first().map(|t| t.text) {
        Some("=") => parse_rows(line, &toks[1..], toks[0]).map(Payload::Rows),
        Some("truss") | Some("beam") => parse_element(line, toks),
        Some(_) => Err(ParseError::new(
            line,
            toks[0].column,
            "expected '=' followed by rows, or an element ('truss' or 'beam')",
        )),
        None => Err(ParseError::new(
            line,
            op.column,
            format!("{} needs a payload", op.text),
        )),
    }
}

/// `c : r1 r2 ... | c : r1 r2 ...`
pub(crate) fn parse_rows<T: Scalar>(
    line: usize,
    toks: &[Token<'_>],
    anchor: Token<'_>,
) -> Result<Vec<(T, Vec<T>)>, ParseError> {
    if toks.is_empty() {
        return Err(ParseError::new(line, anchor.column, "empty row payload"));
    }
    let mut groups = Vec::new();
    for group in toks.split(|t| t.text == "|") {
        let Some(first) = group.first() else {
            return Err(ParseError::new(
                line,
                anchor.column,
                "empty group in row payload",
            ));
        };
        if group.get(1).map(|t| t.text) != Some(":") {
            let col = group
                .get(1)
                .map_or(first.column + first.text.len(), |t| t.column);
            return Err(ParseError::new(
                line,
                col,
                "expected ' : ' after the stiffness",
            ));
        }
        let c = number::<T>(line, first)?;
        if c <= T::zero() {
            return Err(ParseError::new(
                line,
                first.column,
                "stiffness must be positive",
            ));
        }
        if group.len() < 3 {
            return Err(ParseError::new(
                line,
                group[1].column,
                "missing row entries",
            ));
        }
        let row = group[2..]
            .iter()
            .map(|t| number::<T>(line, t))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some((_, prev)) = groups.first() {
            let prev: &Vec<T> = prev;
            if prev.len() != row.len() {
                return Err(ParseError::new(
                    line,
                    group[2].column,
                    format!("row has {} entries, expected {}", row.len(), prev.len()),
                ));
            }
        }
        groups.push((c, row));
    }
    Ok(groups)
}

/// `truss n1 n2 E=.. A=..` or `beam n1 n2 E=.. A=.. I=..`
pub(crate) fn parse_element<T: Scalar>(
    line: usize,
    toks: &[Token<'_>],
) -> Result<Payload<T>, ParseError> {
    let kind = match toks[0].text {
        "truss" => ElementKind::Truss,
        "beam" => ElementKind::PlaneBeam,
        other => {
            return Err(ParseError::new(
                line,
                toks[0].column,
                format!("unknown element kind '{other}'"),
            ))
        }
    };
    let n1 = parse_id(line, toks.get(1), "node id")?;
    let n2 = parse_id(line, toks.get(2), "node id")?;
    let (mut e, mut a, mut i) = (None, None, None);
    for t in &toks[3.min(toks.len())..] {
        let Some((key, value)) = t.text.split_once('=') else {
            return Err(ParseError::new(
                line,
                t.column,
                format!("expected key=value, got '{}'", t.text),
            ));
        };
        let slot = match key {
            "E" => &mut e,
            "A" => &mut a,
            "I" => &mut i,
            _ => {
                return Err(ParseError::new(
                    line,
                    t.column,
                    format!("unknown property '{key}'"),
                ))
            }
        };
        if slot.is_some() {
            return Err(ParseError::new(
                line,
                t.column,
                format!("{key} given twice"),
            ));
        }
        let vt = Token {
            text: value,
            column: t.column + key.len() + 1,
        };
        let v = number::<T>(line, &vt)?;
        if v <= T::zero() {
            return Err(ParseError::new(
                line,
                vt.column,
                format!("{key} must be positive"),
            ));
        }
        *slot = Some(v);
    }
    let end = toks.last().map_or(1, |t| t.column + t.text.len());
    let youngs_modulus = e.ok_or_else(|| ParseError::new(line, end, "missing E=<value>"))?;
    let area = a.ok_or_else(|| ParseError::new(line, end, "missing A=<value>"))?;
    match (kind, i) {
        (ElementKind::PlaneBeam, None) => {
            return Err(ParseError::new(line, end, "beam needs I=<value>"))
        }
        (ElementKind::Truss, Some(_)) => {
            return Err(ParseError::new(
                line,
                toks[0].column,
                "truss elements take no I",
            ))
        }
        _ => {}
    }
    Ok(Payload::Element {
        kind,
        nodes: [n1, n2],
        youngs_modulus,
        area,
        inertia: i,
    })
}

pub(crate) fn parse_id(
    line: usize,
    tok: Option<&Token<'_>>,
    what: &str,
) -> Result<u32, ParseError> {
    let Some(t) = tok else {
        return Err(ParseError::new(line, 1, format!("missing {what}")));
    };
    t.text
        .parse::<u32>()
        .map_err(|_| ParseError::new(line, t.column, format!("expected {what}, got '{}'", t.text)))
}

pub(crate) fn number<T: Scalar>(line: usize, t: &Token<'_>) -> Result<T, ParseError> {
    parse_scalar::<T>(t.text).map_err(|(off, msg)| ParseError::new(line, t.column + off, msg))
}

pub(crate) fn write_payload<T: Scalar>(out: &mut String, payload: &Payload<T>) {
    let full = Precision::Full;
    match payload {
        Payload::Rows(groups) => {
            out.push_str(" =");
            for (g, (c, row)) in groups.iter().enumerate() {
                if g > 0 {
                    out.push_str(" |");
                }
                let _ = write!(out, " {} :", format_number(*c, full));
                for &v in row {
                    let _ = write!(out, " {}", format_number(v, full));
                }
            }
        }
        Payload::Element {
            kind,
            nodes,
            youngs_modulus,
            area,
            inertia,
        } => {
            let name = match kind {
                ElementKind::Truss => "truss",
                ElementKind::PlaneBeam => "beam",
            };
            let _ = write!(
                out,
                " {name} {} {} E={} A={}",
                nodes[0],
                nodes[1],
                format_number(*youngs_modulus, full),
                format_number(*area, full)
            );
            if let Some(i) = inertia {
                let _ = write!(out, " I={}", format_number(*i, full));
            }
        }
    }
}

/// Writes a script that parses back to `script.steps` exactly.
pub fn serialize_script<T: Scalar>(steps: &[ScriptStep<T>]) -> String {
    let mut out = String::new();
    for step in steps {
        match step {
            ScriptStep::Add { id, at, payload } => {
                let _ = write!(out, "add {id}");
                if let Some(at) = at {
                    let _ = write!(out, " at {}", at + 1);
                }
                write_payload(&mut out, payload);
            }
            ScriptStep::Remove { ids } => {
                out.push_str("remove");
                for id in ids {
                    let _ = write!(out, " {id}");
                }
            }
            ScriptStep::Exchange { id, payload } => {
                let _ = write!(out, "exchange {id}");
                write_payload(&mut out, payload);
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const CYCLE: &str = "\
# A -> B -> C -> A
add 3 at 3 = 100*sqrt(2) : -sqrt(2)/2 sqrt(2)/2 0 0
remove 4
exchange 3 = 200 : 0 0 0 1
";

    #[test]
    fn parses_cycle_script() {
        let s: UpdateScript<f64> = parse_update_script(CYCLE).unwrap();
        assert_eq!(s.steps.len(), 3);
        assert_eq!(s.lines, vec![2, 3, 4]);
        let h = 2f64.sqrt() / 2.0;
        assert_eq!(
            s.steps[0],
            ScriptStep::Add {
                id: 3,
                at: Some(2),
                payload: Payload::Rows(vec![(100.0 * 2f64.sqrt(), vec![-h, h, 0.0, 0.0])]),
            }
        );
        assert_eq!(s.steps[1], ScriptStep::Remove { ids: vec![4] });
        assert!(
            matches!(&s.steps[2], ScriptStep::Exchange { id: 3, payload: Payload::Rows(g) } if g[0].0 == 200.0)
        );
    }

    #[test]
    fn empty_script() {
        let s: UpdateScript<f64> = parse_update_script("# nothing\n\n").unwrap();
        assert!(s.steps.is_empty());
    }

    #[test]
    fn blocked_payload_is_one_step() {
        let groups: Vec<String> = (0..10)
            .map(|i| {
                let row: Vec<String> = (0..10)
                    .map(|j| if i == j { "1".into() } else { "0".into() })
                    .collect();
                format!("{} : {}", i + 1, row.join(" "))
            })
            .collect();
        let text = format!("add 50 = {}\n", groups.join(" | "));
        let s: UpdateScript<f64> = parse_update_script(&text).unwrap();
        let [ScriptStep::Add {
            payload: Payload::Rows(g),
            ..
        }] = s.steps.as_slice()
        else {
            panic!("expected one add");
        };
        assert_eq!(g.len(), 10);
        assert_eq!(g[9].0, 10.0);
    }

    #[test]
    fn geometric_payloads() {
        let s: UpdateScript<f64> = parse_update_script(
            "add 7 truss 2 5 E=2e5 A=0.5\nexchange 6 beam 1 4 A=1 I=0.1 E=3\nremove 8 9\n",
        )
        .unwrap();
        assert_eq!(
            s.steps[0],
            ScriptStep::Add {
                id: 7,
                at: None,
                payload: Payload::Element {
                    kind: ElementKind::Truss,
                    nodes: [2, 5],
                    youngs_modulus: 2e5,
                    area: 0.5,
                    inertia: None
                }
            }
        );
        assert!(matches!(
            &s.steps[1],
            ScriptStep::Exchange {
                payload: Payload::Element {
                    inertia: Some(_),
                    ..
                },
                ..
            }
        ));
        assert_eq!(s.steps[2], ScriptStep::Remove { ids: vec![8, 9] });
    }

    #[test]
    fn malformed_lines_report_position() {
        let cases = [
            ("frobnicate 3\n", 1, 1),
            ("remove 4\nremove x\n", 2, 8),
            ("add 3 = 200 0 0\n", 1, 13),
            ("add 3 = 200 : 0 1 | 100 : 1\n", 1, 27),
            ("add 3 = -1 : 0 1\n", 1, 9),
            ("add 3 at 0 = 1 : 1\n", 1, 10),
            ("add 3\n", 1, 1),
            ("exchange 2 truss 1 2 E=1\n", 1, 25),
            ("add 4 beam 1 2 E=1 A=1\n", 1, 23),
            ("add 4 truss 1 2 E=1 A=1 Q=2\n", 1, 25),
            ("add 4 truss 1 2 E=0 A=1\n", 1, 19),
            ("exchange 3 = 200 : 0 sqrt(\n", 1, 27),
        ];
        for (text, line, col) in cases {
            let err = parse_update_script::<f64>(text).unwrap_err();
            assert_eq!((err.line, err.column), (line, col), "{text:?}: {err}");
        }
    }

    #[test]
    fn serialization_round_trips() {
        let s: UpdateScript<f64> = parse_update_script(CYCLE).unwrap();
        let again: UpdateScript<f64> = parse_update_script(&serialize_script(&s.steps)).unwrap();
        assert_eq!(s.steps, again.steps);
    }
}
