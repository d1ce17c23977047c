//! HTTP/WebSocket API over in-memory simulation sessions.
//!
//! Mutations on a session are serialized: a second mutation arriving while
//! one runs is refused with 409. Every mutation is broadcast on
//! `/sessions/{id}/events` as `{"type": ..., "payload": ...}`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use porgysim_core::models::{ConfigFile, PartialConfig};
use porgysim_core::netgen::import_edge_list;
use porgysim_core::portgraph::{deserialize_graph, serialize_located, ElementId, PortGraph};
use porgysim_core::rewrite::RewriteRule;
use porgysim_core::session::{Simulation, SimulationError};
use porgysim_core::strategy::{AppliedStep, Filter, Status, StrategyError, StrategyProgram};
use porgysim_core::trace::{Derivation, StateId, StepGroup, TreeError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{broadcast, Mutex};

use crate::error::CliError;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    fn missing(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not-found", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

impl From<TreeError> for ApiError {
    fn from(e: TreeError) -> Self {
        match e {
            TreeError::UnknownState(_) | TreeError::UnknownElement(_) | TreeError::UnknownGroup(_) => {
                ApiError::missing(e.to_string())
            }
            other => ApiError::bad("trace", other.to_string()),
        }
    }
}

impl From<StrategyError> for ApiError {
    fn from(e: StrategyError) -> Self {
        match e {
            StrategyError::Tree(t) => t.into(),
            StrategyError::Apply(a) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "apply", a.to_string()),
            other => ApiError::bad("strategy", other.to_string()),
        }
    }
}

impl From<SimulationError> for ApiError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::Tree(t) => t.into(),
            SimulationError::Strategy(s) => s.into(),
            other => {
                let c = CliError::from(other);
                ApiError::bad(c.code, c.message)
            }
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub struct Session {
    sim: RwLock<Simulation>,
    mutation: Mutex<()>,
    events: broadcast::Sender<String>,
}

impl Session {
    fn new(sim: Simulation) -> Arc<Self> {
        let (events, _) = broadcast::channel(1024);
        Arc::new(Session {
            sim: RwLock::new(sim),
            mutation: Mutex::new(()),
            events,
        })
    }

    fn read<T>(&self, f: impl FnOnce(&Simulation) -> T) -> T {
        f(&self.sim.read().expect("session lock"))
    }

    fn publish(&self, kind: &str, payload: Value) {
        let msg = json!({"type": kind, "payload": payload}).to_string();
        // No subscriber is not an error.
        let _ = self.events.send(msg);
    }
}

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    persist: Option<PathBuf>,
    counter: AtomicU64,
}

impl AppState {
    pub fn new(persist: Option<PathBuf>) -> Arc<Self> {
        Arc::new(AppState {
            persist,
            ..AppState::default()
        })
    }

    fn snapshot_path(&self, id: &str) -> Option<PathBuf> {
        self.persist.as_ref().map(|d| d.join(format!("{id}.json")))
    }

    /// Looks up a session, loading its snapshot on first use.
    fn session(&self, id: &str) -> ApiResult<Arc<Session>> {
        if let Some(s) = self.sessions.read().expect("sessions lock").get(id) {
            return Ok(s.clone());
        }
        let unknown = || ApiError::missing(format!("unknown session `{id}`"));
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(unknown());
        }
        let path = self.snapshot_path(id).ok_or_else(unknown)?;
        let bytes = std::fs::read(&path).map_err(|_| unknown())?;
        let sim = Simulation::load_json(&bytes).map_err(ApiError::from)?;
        let mut map = self.sessions.write().expect("sessions lock");
        Ok(map.entry(id.to_owned()).or_insert_with(|| Session::new(sim)).clone())
    }

    fn fresh_id(&self) -> String {
        loop {
            let n = self.counter.fetch_add(1, Ordering::Relaxed) + 1;
            let id = format!("s{n}");
            let taken = self.sessions.read().expect("sessions lock").contains_key(&id)
                || self.snapshot_path(&id).is_some_and(|p| p.exists());
            if !taken {
                return id;
            }
        }
    }

    fn save(&self, id: &str, sim: &Simulation) {
        let Some(path) = self.snapshot_path(id) else {
            return;
        };
        match sim.save_json() {
            Ok(bytes) => {
                if let Err(e) = std::fs::write(&path, bytes) {
                    log::warn!("cannot snapshot session {id} to {}: {e}", path.display());
                }
            }
            Err(e) => log::warn!("cannot snapshot session {id}: {e}"),
        }
    }
}

/// Runs `f` on the session's simulation off the async runtime, holding the
/// mutation guard; a concurrent mutation gets 409.
async fn mutate<T: Send + 'static>(
    state: &Arc<AppState>,
    id: &str,
    f: impl FnOnce(&mut Simulation) -> ApiResult<T> + Send + 'static,
) -> ApiResult<(Arc<Session>, T)> {
    let session = state.session(id)?;
    let held = session.clone();
    let Ok(_guard) = held.mutation.try_lock() else {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "busy",
            format!("session `{id}` is already being modified"),
        ));
    };
    let (s, st, owned_id) = (session.clone(), state.clone(), id.to_owned());
    let out = tokio::task::spawn_blocking(move || -> ApiResult<T> {
        let mut sim = s.sim.write().expect("session lock");
        let out = f(&mut sim)?;
        st.save(&owned_id, &sim);
        Ok(out)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok((session, out))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateSession {
    /// Graph document as in graph files.
    #[serde(default)]
    pub graph: Option<Value>,
    /// Edge-list text, as an alternative to `graph`.
    #[serde(default)]
    pub edge_list: Option<String>,
    /// Same layout as configuration files.
    pub config: ConfigFile,
    /// Rule documents as in rule files.
    #[serde(default)]
    pub rules: Option<Value>,
    #[serde(default)]
    pub strategy: Option<String>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionInfo {
    pub id: String,
    pub model: String,
    pub root: StateId,
    pub cursor: StateId,
    pub rules: Vec<String>,
    pub strategy: String,
}

fn info(id: &str, sim: &Simulation) -> SessionInfo {
    SessionInfo {
        id: id.to_owned(),
        model: sim.config.model.label().to_owned(),
        root: sim.tree.root(),
        cursor: sim.cursor,
        rules: sim.library.names().map(str::to_owned).collect(),
        strategy: sim.program.to_string(),
    }
}

fn build_simulation(req: CreateSession) -> ApiResult<Simulation> {
    let graph: PortGraph = match (req.graph, req.edge_list) {
        (Some(doc), None) => {
            let bytes = serde_json::to_vec(&doc).expect("value encodes");
            deserialize_graph(&bytes)
                .map_err(|e| ApiError::bad("graph", e.to_string()))?
                .graph()
                .clone()
        }
        (None, Some(text)) => import_edge_list(text.as_bytes()).map_err(|e| ApiError::bad("graph", e.to_string()))?,
        _ => return Err(ApiError::bad("graph", "give exactly one of `graph` and `edgeList`")),
    };
    let mut partial = PartialConfig::default();
    req.config.overlay(&mut partial);
    if partial.model.is_none() {
        return Err(ApiError::bad("config", "config.model.kind is required"));
    }
    let config = partial.finish().map_err(|e| ApiError::bad("config", e.to_string()))?;
    let mut sim = Simulation::new(&graph, config)?;
    if req.rules.is_some() || req.strategy.is_some() {
        let rules: Vec<RewriteRule> = match req.rules {
            Some(v) => porgysim_core::rewrite::parse_rules(&serde_json::to_vec(&v).expect("value encodes"))
                .map_err(|e| ApiError::bad("rules", e.to_string()))?,
            None => Vec::new(),
        };
        let program = match req.strategy {
            Some(text) => StrategyProgram::parse(&text).map_err(|e| ApiError::bad("strategy", e.to_string()))?,
            None => sim.program.clone(),
        };
        sim.customize(rules, program)?;
    }
    Ok(sim)
}

async fn create_session(State(state): State<Arc<AppState>>, Json(req): Json<CreateSession>) -> ApiResult<Response> {
    let sim = tokio::task::spawn_blocking(move || build_simulation(req))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    let id = state.fresh_id();
    state.save(&id, &sim);
    let body = info(&id, &sim);
    state.sessions.write().expect("sessions lock").insert(id, Session::new(sim));
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionInfo>> {
    let s = state.session(&id)?;
    Ok(Json(s.read(|sim| info(&id, sim))))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundsRequest {
    #[serde(default = "one")]
    pub n: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RoundReport {
    pub status: Status,
    pub applications: usize,
    pub final_state: StateId,
}

fn step_payload(s: &AppliedStep) -> Value {
    json!({"rule": s.rule, "parent": s.parent, "child": s.child, "image": s.image})
}

async fn run_rounds(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Option<Json<RoundsRequest>>,
) -> ApiResult<Json<Value>> {
    let n = body.map_or(1, |Json(b)| b.n);
    let (session, (reports, steps, cursor)) = mutate(&state, &id, move |sim| {
        let outcomes = sim.run_rounds(n)?;
        let steps: Vec<AppliedStep> = outcomes.iter().flat_map(|o| o.log.iter().cloned()).collect();
        let reports: Vec<RoundReport> = outcomes
            .into_iter()
            .map(|o| RoundReport {
                status: o.status,
                applications: o.log.len(),
                final_state: o.final_state,
            })
            .collect();
        Ok((reports, steps, sim.cursor))
    })
    .await?;
    for s in &steps {
        session.publish("applied", step_payload(s));
    }
    Ok(Json(json!({"rounds": reports, "cursor": cursor})))
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum MatchChoice {
    Explicit(Vec<ElementId>),
    Named(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplyRequest {
    pub rule: String,
    /// Host element ids for the left-hand side in declaration order, or `"random"`.
    #[serde(rename = "match", default)]
    pub choice: Option<MatchChoice>,
}

async fn apply(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<ApplyRequest>,
) -> ApiResult<Json<Value>> {
    let images = match req.choice {
        None => None,
        Some(MatchChoice::Named(s)) if s == "random" => None,
        Some(MatchChoice::Named(s)) => return Err(ApiError::bad("match", format!("unknown match `{s}` (expected \"random\" or a list of ids)"))),
        Some(MatchChoice::Explicit(ids)) => Some(ids),
    };
    let (session, (step, cursor)) = mutate(&state, &id, move |sim| {
        let step = sim.apply(&req.rule, images.as_deref()).map_err(|e| match e {
            StrategyError::Match(m) => ApiError::bad("match", m.to_string()),
            other => other.into(),
        })?;
        Ok((step, sim.cursor))
    })
    .await?;
    if let Some(s) = &step {
        session.publish("applied", step_payload(s));
    }
    Ok(Json(json!({"applied": step, "cursor": cursor})))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetPosRequest {
    /// `Property(CrtGraph,<Kind>,<predicate>)`.
    pub filter: String,
    #[serde(default)]
    pub ban: bool,
}

async fn setpos(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<SetPosRequest>,
) -> ApiResult<Json<Value>> {
    let filter = Filter::parse(&req.filter).map_err(|e| ApiError::bad("filter", e.to_string()))?;
    let ban = req.ban;
    let (session, (state_id, selected)) = mutate(&state, &id, move |sim| {
        let s = sim.select(&filter, ban)?;
        let l = sim.current();
        let sel: Vec<ElementId> = if ban { &l.banned } else { &l.position }.iter().copied().collect();
        Ok((s, sel))
    })
    .await?;
    session.publish("branch", json!({"cursor": state_id}));
    Ok(Json(json!({"state": state_id, "cursor": state_id, "selected": selected})))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyRequest {
    pub text: String,
}

async fn set_strategy(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<StrategyRequest>,
) -> ApiResult<Json<Value>> {
    let program = StrategyProgram::parse(&req.text).map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, "strategy", e.to_string())
    })?;
    let (_, text) = mutate(&state, &id, move |sim| {
        sim.library.check(&program)?;
        sim.program = program;
        Ok(sim.program.to_string())
    })
    .await?;
    Ok(Json(json!({"strategy": text})))
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TreeNode {
    pub id: StateId,
    #[serde(flatten)]
    pub derivation: Option<Derivation>,
    pub children: Vec<StateId>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TreeSkeleton {
    pub root: StateId,
    pub cursor: StateId,
    pub states: Vec<TreeNode>,
    pub groups: Vec<StepGroup>,
    pub leaves: Vec<StateId>,
}

async fn tree(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<TreeSkeleton>> {
    let s = state.session(&id)?;
    Ok(Json(s.read(|sim| {
        let t = &sim.tree;
        TreeSkeleton {
            root: t.root(),
            cursor: sim.cursor,
            states: t
                .state_ids()
                .map(|sid| TreeNode {
                    id: sid,
                    derivation: t.derivation(sid).expect("listed").cloned(),
                    children: t.children(sid).expect("listed").to_vec(),
                })
                .collect(),
            groups: t.groups().to_vec(),
            leaves: t.leaves(),
        }
    })))
}

async fn get_state(
    State(state): State<Arc<AppState>>,
    Path((id, sid)): Path<(String, u64)>,
) -> ApiResult<Response> {
    let s = state.session(&id)?;
    let bytes = s.read(|sim| -> ApiResult<Vec<u8>> {
        let l = sim.tree.state(StateId(sid))?;
        serialize_located(l).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "graph", e.to_string()))
    })?;
    Ok(([(axum::http::header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

#[derive(Debug, Deserialize)]
pub struct MetricsQuery {
    pub leaf: Option<u64>,
}

async fn metrics(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<MetricsQuery>,
) -> ApiResult<Json<Value>> {
    let s = state.session(&id)?;
    let series = s.read(|sim| sim.metrics(q.leaf.map(StateId)))?;
    Ok(Json(serde_json::to_value(series).expect("series encodes")))
}

async fn trace(
    State(state): State<Arc<AppState>>,
    Path((id, element)): Path<(String, u64)>,
) -> ApiResult<Json<Value>> {
    let s = state.session(&id)?;
    let snaps = s.read(|sim| sim.tree.trace_element(ElementId(element)))?;
    Ok(Json(json!({"element": element, "snapshots": snaps})))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchRequest {
    pub state: StateId,
}

async fn branch(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<BranchRequest>,
) -> ApiResult<Json<Value>> {
    let (session, cursor) = mutate(&state, &id, move |sim| {
        sim.branch(req.state)?;
        Ok(sim.cursor)
    })
    .await?;
    session.publish("branch", json!({"cursor": cursor}));
    Ok(Json(json!({"cursor": cursor})))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionRequest {
    /// Element ids or node names; relayed as given.
    pub elements: Vec<Value>,
}

async fn selection(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<SelectionRequest>,
) -> ApiResult<Json<Value>> {
    let s = state.session(&id)?;
    let payload = json!({"elements": req.elements});
    s.publish("selection", payload.clone());
    Ok(Json(payload))
}

async fn events(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> ApiResult<Response> {
    let s = state.session(&id)?;
    let rx = s.events.subscribe();
    Ok(ws.on_upgrade(move |socket| relay(socket, rx)))
}

async fn relay(mut socket: WebSocket, mut rx: broadcast::Receiver<String>) {
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(text) => {
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("event subscriber lagged by {n} messages");
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/rounds", post(run_rounds))
        .route("/sessions/{id}/apply", post(apply))
        .route("/sessions/{id}/setpos", post(setpos))
        .route("/sessions/{id}/strategy", post(set_strategy))
        .route("/sessions/{id}/tree", get(tree))
        .route("/sessions/{id}/states/{sid}", get(get_state))
        .route("/sessions/{id}/metrics", get(metrics))
        .route("/sessions/{id}/trace/{element}", get(trace))
        .route("/sessions/{id}/branch", post(branch))
        .route("/sessions/{id}/selection", post(selection))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, persist: Option<PathBuf>) -> Result<(), CliError> {
    if let Some(dir) = &persist {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::new("io", format!("cannot bind {addr}: {e}")))?;
    log::info!("listening on {}", listener.local_addr().map_or(addr, |a| a));
    axum::serve(listener, router(AppState::new(persist)))
        .await
        .map_err(|e| CliError::new("io", e.to_string()))
}
