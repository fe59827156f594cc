//! JSON-over-HTTP front end for a single shadowtale engine.
//!
//! Mutating requests take the engine's write lock, which tokio grants in
//! FIFO order; at most `queue_depth` of them may be waiting or running at
//! once, later ones get 503. Reads share the lock and see a consistent state.

mod error;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use shadowtale::render::{
    self, CandidateListing, ConfabulateResponse, HashResponse, NarrateResponse,
};
use shadowtale::script::{Outcome, Session, DEFAULT_TOP};
use shadowtale::{EntityId, Line};
use tokio::sync::{OwnedSemaphorePermit, RwLock, Semaphore};
use tower_http::services::ServeDir;

pub use error::{ApiError, Location};

pub const DEFAULT_PORT: u16 = 8844;
pub const DEFAULT_QUEUE_DEPTH: usize = 128;

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    /// Mutating requests allowed in flight before 503.
    pub queue_depth: usize,
    /// Built web UI, served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        ServiceOptions {
            queue_depth: DEFAULT_QUEUE_DEPTH,
            static_dir: None,
        }
    }
}

struct AppState {
    session: RwLock<Session>,
    writers: Arc<Semaphore>,
}

type Shared = Arc<AppState>;

impl AppState {
    fn write_permit(&self) -> Result<OwnedSemaphorePermit, ApiError> {
        self.writers
            .clone()
            .try_acquire_owned()
            .map_err(|_| ApiError::busy())
    }
}

pub fn router(session: Session, options: ServiceOptions) -> Router {
    let state = Arc::new(AppState {
        session: RwLock::new(session),
        writers: Arc::new(Semaphore::new(options.queue_depth)),
    });
    let api = Router::new()
        .route("/narrate", post(narrate))
        .route("/focus", get(focus))
        .route("/shadow/{id}", get(shadow))
        .route("/hls", get(hls))
        .route("/memory", get(memory))
        .route("/state/hash", get(state_hash))
        .route("/confabulate", post(confabulate))
        .route("/cloze", post(cloze))
        .fallback(|| async {
            ApiError::new(StatusCode::NOT_FOUND, "bad_request", "no such endpoint")
        })
        .with_state(state);
    let app = Router::new().nest("/api", api);
    match options.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

/// Serves `router` on `listener` until the process is stopped.
pub async fn serve(listener: tokio::net::TcpListener, router: Router) -> std::io::Result<()> {
    axum::serve(listener, router).await
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

type Params = Result<Query<BTreeMap<String, String>>, QueryRejection>;

/// Parses the query string, rejecting parameters outside `allowed`.
fn params(query: Params, allowed: &[&str]) -> Result<BTreeMap<String, String>, ApiError> {
    let Query(map) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    if let Some(key) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(ApiError::bad_request(format!(
            "unknown query parameter `{key}`"
        )));
    }
    Ok(map)
}

fn number<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T, ApiError> {
    match map.get(key) {
        None => Ok(default),
        Some(raw) => raw
            .parse()
            .map_err(|_| ApiError::bad_request(format!("`{key}` must be a nonnegative integer"))),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NarrateRequest {
    text: String,
}

async fn narrate(
    State(app): State<Shared>,
    body: Bytes,
) -> Result<Json<NarrateResponse>, ApiError> {
    let request: NarrateRequest = parse_body(&body)?;
    let _permit = app.write_permit()?;
    let mut session = app.session.write().await;
    let mut inserted = Vec::new();
    for (index, line) in request.text.lines().enumerate() {
        let number = index + 1;
        let fail = |e: ApiError, inserted: &Vec<EntityId>| e.with_inserted(inserted.clone());
        let parsed = match Session::classify(line) {
            Ok(None) => continue,
            Ok(Some(Line::Directive(d))) => {
                let col = line.chars().take_while(|c| c.is_whitespace()).count() + 1;
                let e = ApiError::bad_request(format!(
                    "directive `{}` is not accepted here; use its endpoint",
                    d.name()
                ))
                .at(number, col);
                return Err(fail(e, &inserted));
            }
            Ok(Some(parsed)) => parsed,
            Err(e) => return Err(fail(ApiError::from_line(number, e), &inserted)),
        };
        match session.exec_parsed(line, parsed) {
            Ok(Outcome::Inserted(id)) => inserted.push(id),
            Ok(_) => {}
            Err(e) => return Err(fail(ApiError::from_line(number, e), &inserted)),
        }
    }
    Ok(Json(NarrateResponse {
        inserted,
        diagnostics: Vec::new(),
    }))
}

async fn focus(State(app): State<Shared>) -> Json<render::FocusListing> {
    let session = app.session.read().await;
    Json(render::focus(session.engine()))
}

async fn shadow(
    State(app): State<Shared>,
    Path(raw): Path<String>,
) -> Result<Json<render::ShadowListing>, ApiError> {
    let id: u64 = raw
        .parse()
        .map_err(|_| ApiError::bad_request(format!("`{raw}` is not an entity id")))?;
    let session = app.session.read().await;
    Ok(Json(render::shadow(session.engine(), EntityId(id))?))
}

async fn hls(State(app): State<Shared>, query: Params) -> Result<Json<CandidateListing>, ApiError> {
    let map = params(query, &["top"])?;
    let top = number(&map, "top", DEFAULT_TOP)?;
    let session = app.session.read().await;
    Ok(Json(render::candidates(
        &session.engine().build_continuations(top),
    )))
}

async fn memory(
    State(app): State<Shared>,
    query: Params,
) -> Result<Json<render::MemoryListing>, ApiError> {
    let map = params(query, &["from", "to"])?;
    let from = number(&map, "from", 0u64)?;
    let to = number(&map, "to", u64::MAX)?;
    if from > to {
        return Err(ApiError::bad_request("`from` must not exceed `to`"));
    }
    let session = app.session.read().await;
    Ok(Json(render::memory(session.engine(), from, to)))
}

async fn state_hash(State(app): State<Shared>) -> Json<HashResponse> {
    let session = app.session.read().await;
    Json(HashResponse {
        hash: session.engine().state_hash(),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfabulateRequest {
    steps: usize,
}

async fn confabulate(
    State(app): State<Shared>,
    body: Bytes,
) -> Result<Json<ConfabulateResponse>, ApiError> {
    let request: ConfabulateRequest = parse_body(&body)?;
    let _permit = app.write_permit()?;
    let mut session = app.session.write().await;
    let inserted = session.engine_mut().confabulate(request.steps)?;
    let vis = render::vi_views(session.engine(), &inserted);
    Ok(Json(ConfabulateResponse { inserted, vis }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClozeRequest {
    position: usize,
    top: Option<usize>,
}

async fn cloze(State(app): State<Shared>, body: Bytes) -> Result<Json<CandidateListing>, ApiError> {
    let request: ClozeRequest = parse_body(&body)?;
    let session = app.session.read().await;
    let candidates = session
        .engine()
        .cloze_infer(request.position, request.top.unwrap_or(DEFAULT_TOP))?;
    Ok(Json(render::candidates(&candidates)))
}
