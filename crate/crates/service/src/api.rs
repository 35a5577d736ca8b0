//! JSON bodies. Field names are documented in `openapi.json`.

use serde::{Deserialize, Serialize};

use redmx::io::{Payload, ScriptStep};
use redmx::{ElementKind, RedundancyReport};

#[derive(Debug, Clone, Deserialize)]
pub struct CreateSession {
    /// Model document in `.rxm` syntax.
    pub model: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub generation: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub sessions: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RowJson {
    pub stiffness: f64,
    pub row: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ElementSpec {
    /// `truss` or `beam`.
    pub kind: String,
    pub nodes: [u32; 2],
    #[serde(rename = "E")]
    pub youngs_modulus: f64,
    #[serde(rename = "A")]
    pub area: f64,
    #[serde(rename = "I", default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<f64>,
}

/// An update operation. Added and exchanged elements carry exactly one of
/// `rows` or `element`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OpJson {
    Add {
        id: u32,
        /// 1-based row where the element's rows start; default keeps
        /// ascending id order.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rows: Option<Vec<RowJson>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        element: Option<ElementSpec>,
    },
    Remove {
        ids: Vec<u32>,
    },
    Exchange {
        id: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rows: Option<Vec<RowJson>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        element: Option<ElementSpec>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpdateRequest {
    pub op: OpJson,
    /// Rejected with 409 unless equal to the session's generation.
    #[serde(default)]
    pub expected_generation: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreviewRequest {
    pub op: OpJson,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ElementRedundancy {
    pub id: u32,
    pub redundancy: f64,
    pub zero_redundancy: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportJson {
    pub generation: u64,
    pub trace: f64,
    pub n_s: usize,
    pub n: usize,
    pub n_q: usize,
    pub elements: Vec<ElementRedundancy>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NodeJson {
    pub id: u32,
    pub coords: Vec<f64>,
    pub fixed: Vec<bool>,
    pub fixed_rotation: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelElement {
    pub id: u32,
    /// `truss`, `beam`, or `raw` for sessions without geometry.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<[u32; 2]>,
    pub modes: usize,
    pub redundancy: f64,
    pub zero_redundancy: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelJson {
    pub id: String,
    pub generation: u64,
    pub geometric: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    pub nodes: Vec<NodeJson>,
    pub elements: Vec<ModelElement>,
    pub trace: f64,
    pub n_s: usize,
    pub n: usize,
    pub n_q: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DiffEntry {
    pub id: u32,
    pub before: Option<f64>,
    pub after: Option<f64>,
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VerificationJson {
    pub r_deviation: f64,
    pub kinv_deviation: f64,
    pub trace_matches_n_s: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpdateResponse {
    #[serde(flatten)]
    pub report: ReportJson,
    pub diff: Vec<DiffEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DeltaEntry {
    pub id: u32,
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreviewResponse {
    pub generation: u64,
    pub deltas: Vec<DeltaEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
pub struct ErrorJson {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rcond: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_generation: Option<u64>,
}

pub fn report_json(report: &RedundancyReport<f64>, generation: u64, n: usize) -> ReportJson {
    ReportJson {
        generation,
        trace: report.trace,
        n_s: report.n_s,
        n,
        n_q: report.diagonal.len(),
        elements: report
            .per_element
            .iter()
            .map(|&(id, r)| ElementRedundancy {
                id,
                redundancy: r,
                zero_redundancy: report.zero_redundancy_ids.contains(&id),
            })
            .collect(),
    }
}

fn payload(
    rows: Option<Vec<RowJson>>,
    element: Option<ElementSpec>,
) -> Result<Payload<f64>, String> {
    match (rows, element) {
        (Some(rows), None) => {
            if rows.is_empty() {
                return Err("rows must not be empty".into());
            }
            Ok(Payload::Rows(
                rows.into_iter().map(|r| (r.stiffness, r.row)).collect(),
            ))
        }
        (None, Some(e)) => {
            let kind = match e.kind.as_str() {
                "truss" => ElementKind::Truss,
                "beam" => ElementKind::PlaneBeam,
                other => return Err(format!("unknown element kind {other:?}")),
            };
            Ok(Payload::Element {
                kind,
                nodes: e.nodes,
                youngs_modulus: e.youngs_modulus,
                area: e.area,
                inertia: e.inertia,
            })
        }
        (Some(_), Some(_)) => Err("give either rows or element, not both".into()),
        (None, None) => Err("rows or element is required".into()),
    }
}

impl OpJson {
    pub fn to_step(&self) -> Result<ScriptStep<f64>, String> {
        Ok(match self.clone() {
            OpJson::Add {
                id,
                at,
                rows,
                element,
            } => {
                if at == Some(0) {
                    return Err("at is 1-based".into());
                }
                ScriptStep::Add {
                    id,
                    at: at.map(|a| a - 1),
                    payload: payload(rows, element)?,
                }
            }
            OpJson::Remove { ids } => {
                if ids.is_empty() {
                    return Err("ids must not be empty".into());
                }
                ScriptStep::Remove { ids }
            }
            OpJson::Exchange { id, rows, element } => ScriptStep::Exchange {
                id,
                payload: payload(rows, element)?,
            },
        })
    }
}
