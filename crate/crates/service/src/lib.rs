//! HTTP design sessions.
//!
//! Each session owns a [`DesignState`] and an undo stack of full snapshots.
//! Reads share a session lock; mutations take it exclusively and bump the
//! session generation by one. See `openapi.json` for the wire format.

pub mod api;

use std::collections::{HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use redmx::design::{DesignState, VERIFY_TOLERANCE};
use redmx::io::{parse_model, ParseError, ScriptStep};
use redmx::{Error, ModelDocument};

use api::*;

pub const UNDO_DEPTH: usize = 32;
pub const DEFAULT_SESSION: &str = "default";
pub const DEFAULT_BIND: &str = "127.0.0.1:7878";

/// One design session.
#[derive(Debug, Clone)]
pub struct Session {
    design: DesignState<f64>,
    generation: u64,
    undo: VecDeque<DesignState<f64>>,
}

impl Session {
    pub fn new(design: DesignState<f64>) -> Self {
        Self {
            design,
            generation: 0,
            undo: VecDeque::new(),
        }
    }

    pub fn design(&self) -> &DesignState<f64> {
        &self.design
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn undo_depth(&self) -> usize {
        self.undo.len()
    }

    fn report(&self) -> ReportJson {
        let s = self.design.state();
        report_json(&s.report(), self.generation, s.n())
    }

    /// Applies `step`; on error the session is untouched.
    pub fn apply(&mut self, step: &ScriptStep<f64>) -> Result<(), Error> {
        let snapshot = self.design.clone();
        self.design.apply(step)?;
        self.undo.push_back(snapshot);
        if self.undo.len() > UNDO_DEPTH {
            self.undo.pop_front();
        }
        self.generation += 1;
        Ok(())
    }

    /// Reverts the last `apply`, generation included.
    fn rollback(&mut self) {
        if let Some(prev) = self.undo.pop_back() {
            self.design = prev;
            self.generation -= 1;
        }
    }

    /// Restores the last snapshot. Returns false when there is none.
    pub fn undo(&mut self) -> bool {
        match self.undo.pop_back() {
            Some(prev) => {
                self.design = prev;
                self.generation += 1;
                true
            }
            None => false,
        }
    }
}

type Shared = Arc<RwLock<Session>>;

/// All sessions of a running service.
#[derive(Clone, Default)]
pub struct SessionStore {
    sessions: Arc<RwLock<HashMap<String, Shared>>>,
    next: Arc<AtomicU64>,
}

impl SessionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Store holding `design` as the session named [`DEFAULT_SESSION`].
    pub fn with_default(design: DesignState<f64>) -> Self {
        let store = Self::new();
        store.insert(DEFAULT_SESSION.to_string(), Session::new(design));
        store
    }

    pub fn insert(&self, id: String, session: Session) {
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(id, Arc::new(RwLock::new(session)));
    }

    /// Adds a session under a fresh id.
    pub fn create(&self, session: Session) -> String {
        let id = format!("s{}", self.next.fetch_add(1, Ordering::Relaxed) + 1);
        self.insert(id.clone(), session);
        id
    }

    pub fn get(&self, id: &str) -> Option<Shared> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An error response.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Box<ErrorJson>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: Box::new(ErrorJson {
                error: code.into(),
                message: message.into(),
                ..ErrorJson::default()
            }),
        }
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "malformed_request",
            message,
        )
    }

    fn parse(e: ParseError) -> Self {
        let mut err = Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "parse_error",
            e.to_string(),
        );
        err.body.line = Some(e.line);
        err.body.column = Some(e.column);
        err
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::StaticallyDeterminateRemoval { elements, rcond } => {
                let mut err = Self::new(
                    StatusCode::CONFLICT,
                    "statically_determinate_removal",
                    message,
                );
                err.body.elements = Some(elements);
                err.body.rcond = Some(rcond);
                err
            }
            Error::GateSingular { rcond } => {
                let mut err = Self::new(StatusCode::UNPROCESSABLE_ENTITY, "gate_singular", message);
                err.body.rcond = Some(rcond);
                err
            }
            Error::RankDeficient { .. } | Error::NotPositiveDefinite { .. } => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "rank_deficient", message)
            }
            _ => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_operation",
                message,
            ),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(*self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// JSON body parsing that reports every failure as 422.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::unprocessable(e.to_string()))
}

fn session(store: &SessionStore, id: &str) -> Result<Shared, ApiError> {
    store.get(id).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_session",
            format!("no session {id:?}"),
        )
    })
}

#[derive(Debug, Default, Deserialize)]
struct VerifyFlag {
    #[serde(default)]
    verify: bool,
}

fn verification(s: &Session) -> Result<VerificationJson, ApiError> {
    let v = s.design.verify(VERIFY_TOLERANCE)?;
    let st = s.design.state();
    let trace_ok = (st.report().trace - st.n_s() as f64).abs() <= 1e-8;
    let json = VerificationJson {
        r_deviation: v.r_deviation,
        kinv_deviation: v.kinv_deviation,
        trace_matches_n_s: trace_ok,
    };
    if v.passed() && trace_ok {
        Ok(json)
    } else {
        Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "verification_failed",
            format!("state deviates from recomputation: {json:?}"),
        ))
    }
}

async fn health(State(store): State<SessionStore>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        sessions: store.len(),
    })
}

async fn create(
    State(store): State<SessionStore>,
    bytes: Bytes,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let req: CreateSession = body(&bytes)?;
    let doc: ModelDocument<f64> = parse_model(&req.model).map_err(ApiError::parse)?;
    let design = DesignState::new(doc)?;
    let id = store.create(Session::new(design));
    Ok((StatusCode::CREATED, Json(Created { id, generation: 0 })))
}

async fn model(State(store): State<SessionStore>, Path(id): Path<String>) -> ApiResult<ModelJson> {
    let shared = session(&store, &id)?;
    let s = shared.read().expect("session poisoned");
    let st = s.design.state();
    let report = st.report();
    let zero = |id| report.zero_redundancy_ids.contains(&id);
    let geometry = s.design.model();
    let elements = st
        .sys()
        .row_map()
        .entries()
        .iter()
        .zip(&report.per_element)
        .map(|(rows, &(eid, r))| {
            let el = geometry.and_then(|m| m.element(eid));
            ModelElement {
                id: eid,
                kind: match el.map(|e| e.kind) {
                    Some(redmx::ElementKind::Truss) => "truss",
                    Some(redmx::ElementKind::PlaneBeam) => "beam",
                    None => "raw",
                }
                .into(),
                nodes: el.map(|e| e.nodes),
                modes: rows.len,
                redundancy: r,
                zero_redundancy: zero(eid),
            }
        })
        .collect();
    let nodes = geometry
        .map(|m| {
            m.nodes()
                .iter()
                .map(|n| NodeJson {
                    id: n.id,
                    coords: n.coords.clone(),
                    fixed: n.fixed.clone(),
                    fixed_rotation: n.fixed_rotation,
                })
                .collect()
        })
        .unwrap_or_default();
    Ok(Json(ModelJson {
        id,
        generation: s.generation,
        geometric: geometry.is_some(),
        dim: geometry.map(|m| m.dim()),
        nodes,
        elements,
        trace: report.trace,
        n_s: report.n_s,
        n: st.n(),
        n_q: st.n_q(),
    }))
}

async fn redundancy(
    State(store): State<SessionStore>,
    Path(id): Path<String>,
    Query(flag): Query<VerifyFlag>,
) -> Result<Response, ApiError> {
    let shared = session(&store, &id)?;
    let s = shared.read().expect("session poisoned");
    let report = s.report();
    if flag.verify {
        let v = verification(&s)?;
        return Ok(Json(UpdateResponse {
            report,
            diff: Vec::new(),
            verification: Some(v),
        })
        .into_response());
    }
    Ok(Json(report).into_response())
}

fn diff(before: &ReportJson, after: &ReportJson) -> Vec<DiffEntry> {
    let old: HashMap<u32, f64> = before
        .elements
        .iter()
        .map(|e| (e.id, e.redundancy))
        .collect();
    let new: HashMap<u32, f64> = after
        .elements
        .iter()
        .map(|e| (e.id, e.redundancy))
        .collect();
    let mut out: Vec<DiffEntry> = after
        .elements
        .iter()
        .map(|e| {
            let b = old.get(&e.id).copied();
            DiffEntry {
                id: e.id,
                before: b,
                after: Some(e.redundancy),
                delta: e.redundancy - b.unwrap_or(0.0),
            }
        })
        .collect();
    out.extend(
        before
            .elements
            .iter()
            .filter(|e| !new.contains_key(&e.id))
            .map(|e| DiffEntry {
                id: e.id,
                before: Some(e.redundancy),
                after: None,
                delta: -e.redundancy,
            }),
    );
    out
}

async fn update(
    State(store): State<SessionStore>,
    Path(id): Path<String>,
    Query(flag): Query<VerifyFlag>,
    bytes: Bytes,
) -> ApiResult<UpdateResponse> {
    let shared = session(&store, &id)?;
    let req: UpdateRequest = body(&bytes)?;
    let step = req.op.to_step().map_err(ApiError::unprocessable)?;
    let mut s = shared.write().expect("session poisoned");
    if let Some(expected) = req.expected_generation {
        if expected != s.generation {
            let mut err = ApiError::new(
                StatusCode::CONFLICT,
                "generation_conflict",
                format!(
                    "expected generation {expected}, session is at {}",
                    s.generation
                ),
            );
            err.body.current_generation = Some(s.generation);
            return Err(err);
        }
    }
    let before = s.report();
    s.apply(&step)?;
    let verification = if flag.verify {
        match verification(&s) {
            Ok(v) => Some(v),
            Err(e) => {
                s.rollback();
                return Err(e);
            }
        }
    } else {
        None
    };
    let report = s.report();
    Ok(Json(UpdateResponse {
        diff: diff(&before, &report),
        report,
        verification,
    }))
}

async fn preview(
    State(store): State<SessionStore>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<PreviewResponse> {
    let shared = session(&store, &id)?;
    let req: PreviewRequest = body(&bytes)?;
    if !matches!(req.op, OpJson::Add { .. }) {
        return Err(ApiError::unprocessable(
            "only add operations can be previewed",
        ));
    }
    let step = req.op.to_step().map_err(ApiError::unprocessable)?;
    let s = shared.read().expect("session poisoned");
    let deltas = s
        .design
        .preview(&step)?
        .into_iter()
        .map(|(id, delta)| DeltaEntry { id, delta })
        .collect();
    Ok(Json(PreviewResponse {
        generation: s.generation,
        deltas,
    }))
}

async fn undo(State(store): State<SessionStore>, Path(id): Path<String>) -> ApiResult<ReportJson> {
    let shared = session(&store, &id)?;
    let mut s = shared.write().expect("session poisoned");
    if !s.undo() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "undo_empty",
            "nothing to undo",
        ));
    }
    Ok(Json(s.report()))
}

pub fn router(store: SessionStore) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create))
        .route("/sessions/:id/model", get(model))
        .route("/sessions/:id/redundancy", get(redundancy))
        .route("/sessions/:id/update", post(update))
        .route("/sessions/:id/preview", post(preview))
        .route("/sessions/:id/undo", post(undo))
        .with_state(store)
}

/// [`router`] plus static UI assets served from `assets` for all other paths.
pub fn router_with_assets(store: SessionStore, assets: Option<PathBuf>) -> Router {
    let r = router(store);
    match assets {
        Some(dir) => r.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => r,
    }
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[cfg(test)]
mod tests {
    use super::*;
    use redmx::fixtures;

    fn system_a() -> Session {
        Session::new(DesignState::new(parse_model(fixtures::SYSTEM_A).unwrap()).unwrap())
    }

    #[test]
    fn undo_stack_is_bounded() {
        let mut s = system_a();
        let add = ScriptStep::Add {
            id: 3,
            at: None,
            payload: redmx::io::Payload::Rows(vec![(1.0, vec![0.0, 1.0, 0.0, 0.0])]),
        };
        let remove = ScriptStep::Remove { ids: vec![3] };
        for _ in 0..20 {
            s.apply(&add).unwrap();
            s.apply(&remove).unwrap();
        }
        assert_eq!(s.undo_depth(), UNDO_DEPTH);
        assert_eq!(s.generation(), 40);
        let mut undone = 0;
        while s.undo() {
            undone += 1;
        }
        assert_eq!(undone, UNDO_DEPTH);
        assert_eq!(s.generation(), 40 + UNDO_DEPTH as u64);
    }

    #[test]
    fn failed_apply_changes_nothing() {
        let mut s = system_a();
        let r = s.design().state().r().clone();
        assert!(s.apply(&ScriptStep::Remove { ids: vec![1] }).is_err());
        assert_eq!(s.generation(), 0);
        assert_eq!(s.undo_depth(), 0);
        assert_eq!(s.design().state().r(), &r);
    }

    #[test]
    fn session_ids_are_fresh() {
        let store = SessionStore::with_default(system_a().design().clone());
        let a = store.create(system_a());
        let b = store.create(system_a());
        assert_ne!(a, b);
        assert_eq!(store.len(), 3);
        assert!(store.get(DEFAULT_SESSION).is_some());
    }
}
