//! `.rxm` model files.
//!
//! Geometric form:
//!
//! ```text
//! redmx-model 1
//! dim 2
//! node 1 0 0 fix x y
//! node 3 0 1
//! truss 1 1 3 E=200 A=1
//! beam 7 3 4 E=1 A=1 I=0.01
//! ```
//!
//! Raw form, giving `A` and `C` directly with one line per element in row
//! order:
//!
//! ```text
//! redmx-model 1
//! raw 4
//! element 1 = 200 : 0 1 0 0
//! element 2 = 100*sqrt(2) : 0 0 sqrt(2)/2 sqrt(2)/2
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::matrix::{format_number, Precision};
use super::script::{number, parse_element, parse_id, parse_rows, write_payload, Payload};
use super::{tokenized_lines, ParseError, Token};
use crate::assembly::{assemble_system, ElementBlock, SystemMatrices};
use crate::error::{Error, ModelError, Result};
use crate::linalg::SparseRow;
use crate::model::{Direction, Element, ElementId, ElementKind, Node, NodeId, StructuralModel};
use crate::Scalar;

const HEADER: &str = "redmx-model";
const VERSION: &str = "1";

/// A parsed model file.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelDocument<T> {
    Geometric(StructuralModel<T>),
    /// `A` and `C` without geometry.
    Raw(SystemMatrices<T>),
}

impl<T: Scalar> ModelDocument<T> {
    pub fn to_system(&self) -> Result<SystemMatrices<T>> {
        match self {
            ModelDocument::Geometric(m) => assemble_system(m),
            ModelDocument::Raw(s) => Ok(s.clone()),
        }
    }

    pub fn model(&self) -> Option<&StructuralModel<T>> {
        match self {
            ModelDocument::Geometric(m) => Some(m),
            ModelDocument::Raw(_) => None,
        }
    }
}

pub fn parse_model<T: Scalar>(text: &str) -> std::result::Result<ModelDocument<T>, ParseError> {
    let mut lines = tokenized_lines(text);
    let Some((line, head)) = lines.next() else {
        return Err(ParseError::new(
            1,
            1,
            format!("empty document, expected '{HEADER} {VERSION}'"),
        ));
    };
    if head[0].text != HEADER {
        return Err(ParseError::new(
            line,
            head[0].column,
            format!("expected '{HEADER} {VERSION}'"),
        ));
    }
    match head.get(1) {
        Some(t) if t.text == VERSION && head.len() == 2 => {}
        Some(t) => {
            return Err(ParseError::new(
                line,
                t.column,
                format!("unsupported version '{}'", t.text),
            ))
        }
        None => return Err(ParseError::new(line, head[0].column, "missing version")),
    }
    let Some((line, mode)) = lines.next() else {
        return Err(ParseError::new(
            line + 1,
            1,
            "expected 'dim <2|3>' or 'raw <n>'",
        ));
    };
    let size = parse_id(line, mode.get(1), "a size")? as usize;
    if mode.len() > 2 {
        return Err(trailing(line, &mode[2]));
    }
    match mode[0].text {
        "dim" => {
            if size != 2 && size != 3 {
                return Err(ParseError::new(line, mode[1].column, "dim must be 2 or 3"));
            }
            parse_geometric(size, lines)
        }
        "raw" => parse_raw(line, size, lines),
        other => Err(ParseError::new(
            line,
            mode[0].column,
            format!("expected 'dim' or 'raw', got '{other}'"),
        )),
    }
}

fn trailing(line: usize, t: &Token<'_>) -> ParseError {
    ParseError::new(line, t.column, format!("unexpected '{}'", t.text))
}

fn parse_geometric<'a, T: Scalar>(
    dim: usize,
    lines: impl Iterator<Item = (usize, Vec<Token<'a>>)>,
) -> std::result::Result<ModelDocument<T>, ParseError> {
    let mut nodes = Vec::new();
    let mut elements = Vec::new();
    let mut node_lines: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut elem_lines: ElementLines = BTreeMap::new();
    let mut last_line = 1;
    for (line, toks) in lines {
        last_line = line;
        match toks[0].text {
            "node" => {
                let id = parse_id(line, toks.get(1), "node id")?;
                let coords_end = 2 + dim;
                if toks.len() < coords_end {
                    return Err(ParseError::new(
                        line,
                        toks[0].column,
                        format!("node needs {dim} coordinates"),
                    ));
                }
                let coords = toks[2..coords_end]
                    .iter()
                    .map(|t| number::<T>(line, t))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                let mut node = Node::free(id, &coords);
                match toks.get(coords_end) {
                    None => {}
                    Some(t) if t.text == "fix" => {
                        if toks.len() == coords_end + 1 {
                            return Err(ParseError::new(line, t.column, "fix needs directions"));
                        }
                        for d in &toks[coords_end + 1..] {
                            for ch in d.text.chars() {
                                match ch {
                                    'x' => node.fixed[0] = true,
                                    'y' => node.fixed[1] = true,
                                    'z' if dim == 3 => node.fixed[2] = true,
                                    'r' if dim == 2 => node.fixed_rotation = true,
                                    _ => {
                                        return Err(ParseError::new(
                                            line,
                                            d.column,
                                            format!("unknown direction '{ch}' for a {dim}D model"),
                                        ))
                                    }
                                }
                            }
                        }
                    }
                    Some(t) => return Err(trailing(line, t)),
                }
                node_lines.insert(id, line);
                nodes.push(node);
            }
            "truss" | "beam" => {
                let id = parse_id(line, toks.get(1), "element id")?;
                let mut rest = vec![toks[0]];
                rest.extend_from_slice(&toks[2..]);
                let Payload::Element {
                    kind,
                    nodes: ends,
                    youngs_modulus,
                    area,
                    inertia,
                } = parse_element::<T>(line, &rest)?
                else {
                    unreachable!()
                };
                let refs = [(ends[0], toks[2].column), (ends[1], toks[3].column)];
                elem_lines.insert(id, (line, refs));
                elements.push(Element {
                    id,
                    kind,
                    nodes: ends,
                    youngs_modulus,
                    area,
                    inertia,
                });
            }
            other => {
                return Err(ParseError::new(
                    line,
                    toks[0].column,
                    format!("expected 'node', 'truss' or 'beam', got '{other}'"),
                ))
            }
        }
    }
    StructuralModel::new(dim, nodes, elements)
        .map(ModelDocument::Geometric)
        .map_err(|e| locate(e, &node_lines, &elem_lines, last_line))
}

/// Element id to its line and the `(node, line)` of both end nodes.
type ElementLines = BTreeMap<ElementId, (usize, [(NodeId, usize); 2])>;

fn locate(
    err: ModelError,
    nodes: &BTreeMap<NodeId, usize>,
    elements: &ElementLines,
    last_line: usize,
) -> ParseError {
    let at_element = |id: &ElementId| elements.get(id).map_or((last_line, 1), |(l, _)| (*l, 1));
    let (line, column) = match &err {
        ModelError::DuplicateNode(id) | ModelError::NodeDimension { node: id, .. } => {
            (nodes.get(id).copied().unwrap_or(last_line), 1)
        }
        ModelError::UnknownNode { element, node } => match elements.get(element) {
            Some((l, refs)) => {
                let col = refs.iter().find(|r| r.0 == *node).map_or(1, |r| r.1);
                (*l, col)
            }
            None => (last_line, 1),
        },
        ModelError::DuplicateElement(id)
        | ModelError::DegenerateElement(id)
        | ModelError::BeamInSpace(id)
        | ModelError::MissingInertia(id)
        | ModelError::ZeroLength(id)
        | ModelError::UnknownElement(id)
        | ModelError::NonPositive { element: id, .. } => at_element(id),
        ModelError::BadDimension(_) | ModelError::NonFinite(_) | ModelError::NoSupport => {
            (last_line, 1)
        }
    };
    ParseError::new(line, column, err.to_string())
}

fn parse_raw<'a, T: Scalar>(
    line: usize,
    n: usize,
    lines: impl Iterator<Item = (usize, Vec<Token<'a>>)>,
) -> std::result::Result<ModelDocument<T>, ParseError> {
    if n == 0 {
        return Err(ParseError::new(line, 5, "raw models need n > 0"));
    }
    let mut blocks = Vec::new();
    let mut last = line;
    for (line, toks) in lines {
        last = line;
        if toks[0].text != "element" {
            return Err(ParseError::new(
                line,
                toks[0].column,
                format!("expected 'element', got '{}'", toks[0].text),
            ));
        }
        let id = parse_id(line, toks.get(1), "element id")?;
        match toks.get(2) {
            Some(t) if t.text == "=" => {}
            Some(t) => return Err(ParseError::new(line, t.column, "expected '='")),
            None => {
                return Err(ParseError::new(
                    line,
                    toks[0].column,
                    "element needs '= stiffness : row'",
                ))
            }
        }
        let groups = parse_rows::<T>(line, &toks[3..], toks[2])?;
        if groups[0].1.len() != n {
            return Err(ParseError::new(
                line,
                toks[2].column,
                format!("rows have {} entries, expected n = {n}", groups[0].1.len()),
            ));
        }
        if blocks.iter().any(|(b, _)| *b == id) {
            return Err(ParseError::new(
                line,
                toks[1].column,
                format!("duplicate element id {id}"),
            ));
        }
        let (c, rows): (Vec<T>, Vec<SparseRow<T>>) = groups
            .into_iter()
            .map(|(c, r)| (c, SparseRow::from_dense(&r)))
            .unzip();
        let block = ElementBlock::new(rows, c)
            .map_err(|e| ParseError::new(line, toks[0].column, e.to_string()))?;
        blocks.push((id, block));
    }
    SystemMatrices::from_blocks(n, blocks)
        .map(ModelDocument::Raw)
        .map_err(|e: Error| ParseError::new(last, 1, e.to_string()))
}

/// Writes a document that parses back to an identical model.
pub fn serialize_model<T: Scalar>(doc: &ModelDocument<T>) -> String {
    let mut out = format!("{HEADER} {VERSION}\n");
    let full = Precision::Full;
    match doc {
        ModelDocument::Geometric(m) => {
            let _ = writeln!(out, "dim {}", m.dim());
            for node in m.nodes() {
                let _ = write!(out, "node {}", node.id);
                for &c in &node.coords {
                    let _ = write!(out, " {}", format_number(c, full));
                }
                let mut fixed: Vec<&str> = Direction::translations(m.dim())
                    .iter()
                    .zip(&node.fixed)
                    .filter(|(_, &f)| f)
                    .map(|(d, _)| d.token())
                    .collect();
                if node.fixed_rotation {
                    fixed.push(Direction::Rot.token());
                }
                if !fixed.is_empty() {
                    let _ = write!(out, " fix {}", fixed.join(" "));
                }
                out.push('\n');
            }
            for e in m.elements() {
                let kind = match e.kind {
                    ElementKind::Truss => "truss",
                    ElementKind::PlaneBeam => "beam",
                };
                let _ = write!(
                    out,
                    "{kind} {} {} {} E={} A={}",
                    e.id,
                    e.nodes[0],
                    e.nodes[1],
                    format_number(e.youngs_modulus, full),
                    format_number(e.area, full)
                );
                if let Some(i) = e.inertia {
                    let _ = write!(out, " I={}", format_number(i, full));
                }
                out.push('\n');
            }
        }
        ModelDocument::Raw(sys) => {
            let _ = writeln!(out, "raw {}", sys.n());
            for rows in sys.row_map().entries() {
                let groups = rows
                    .range()
                    .map(|r| (sys.c()[r], sys.rows()[r].to_dense(sys.n())))
                    .collect();
                let _ = write!(out, "element {}", rows.id);
                write_payload(&mut out, &Payload::Rows(groups));
                out.push('\n');
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const BAR: &str =
        "redmx-model 1\ndim 2\nnode 1 0 0 fix x y\nnode 2 1 0 fix y\ntruss 1 1 2 E=200 A=1\n";

    #[test]
    fn minimal_bar() {
        let doc: ModelDocument<f64> = parse_model(BAR).unwrap();
        let m = doc.model().unwrap();
        assert_eq!(m.elements().len(), 1);
        let sys = doc.to_system().unwrap();
        assert_eq!((sys.n(), sys.n_q()), (1, 1));
        assert_eq!(sys.c()[0], 200.0);
    }

    #[test]
    fn missing_node_is_named() {
        let text = "redmx-model 1\ndim 2\nnode 1 0 0 fix x y\ntruss 1 1 9 E=1 A=1\n";
        let err = parse_model::<f64>(text).unwrap_err();
        assert_eq!(err.line, 4);
        assert!(err.message.contains("unknown node 9"), "{err}");
    }

    #[test]
    fn header_and_syntax_errors() {
        let cases = [
            ("", 1, 1),
            ("model 1\n", 1, 1),
            ("redmx-model 2\n", 1, 13),
            ("redmx-model 1\ndim 4\n", 2, 5),
            ("redmx-model 1\ndim 2\nnode 1 0\n", 3, 1),
            ("redmx-model 1\ndim 2\nnode 1 0 0 fix q\n", 3, 16),
            (
                "redmx-model 1\ndim 2\nnode 1 0 0 fix x y\nnode 2 1 0\ntruss 1 1 2 E=1 A=-1\n",
                5,
                19,
            ),
            ("redmx-model 1\ndim 2\n\n# c\nbolt 1\n", 5, 1),
            ("redmx-model 1\nraw 2\nelement 1 = 1 : 1 0 0\n", 3, 11),
            (
                "redmx-model 1\nraw 2\nelement 1 = 1 : 1 0\nelement 1 = 1 : 0 1\n",
                4,
                9,
            ),
        ];
        for (text, line, col) in cases {
            let err = parse_model::<f64>(text).unwrap_err();
            assert_eq!((err.line, err.column), (line, col), "{text:?}: {err}");
        }
    }

    #[test]
    fn geometric_round_trip() {
        let text = "redmx-model 1\ndim 2\nnode 1 0 0 fix x y r\nnode 2 3 0.1\nnode 3 6 0 fix x y\n\
                    beam 1 1 2 E=210000 A=0.01 I=1e-4\ntruss 2 2 3 E=1/3 A=sqrt(2)\n";
        let doc: ModelDocument<f64> = parse_model(text).unwrap();
        let again = parse_model(&serialize_model(&doc)).unwrap();
        assert_eq!(doc, again);
        assert_eq!(serialize_model(&again), serialize_model(&doc));
    }

    #[test]
    fn raw_round_trip_keeps_row_order() {
        let text =
            "redmx-model 1\nraw 3\nelement 5 = 2 : 1 0 0\nelement 2 = 1 : 0 1 0 | 3 : 0 0 1\n";
        let doc: ModelDocument<f64> = parse_model(text).unwrap();
        let ModelDocument::Raw(sys) = &doc else {
            panic!()
        };
        let ids: Vec<_> = sys
            .row_map()
            .entries()
            .iter()
            .map(|e| (e.id, e.len))
            .collect();
        assert_eq!(ids, vec![(5, 1), (2, 2)]);
        assert_eq!(parse_model(&serialize_model(&doc)).unwrap(), doc);
    }

    #[test]
    fn three_dimensional_supports() {
        let text = "redmx-model 1\ndim 3\nnode 1 0 0 0 fix xyz\nnode 2 1 0 0 fix yz\ntruss 1 1 2 E=1 A=1\n";
        let doc: ModelDocument<f64> = parse_model(text).unwrap();
        assert_eq!(doc.to_system().unwrap().n(), 1);
        let err = parse_model::<f64>(&text.replace("fix yz", "fix yr")).unwrap_err();
        assert_eq!(err.line, 4);
    }
}
