//! HTTP API for elicitation sessions: a person (or a program) answers the
//! comparison queries of an allocation algorithm one at a time.
//!
//! ```text
//! POST /sessions                 {algorithm, n, item_labels, agent_labels?}
//! GET  /sessions/{id}/query
//! POST /sessions/{id}/answer     {choice: "x" | "y", index?}
//! GET  /sessions/{id}/report
//! ```

pub mod store;

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fairdiv_core::algorithm::RunTrace;
use fairdiv_core::session::Step;
use fairdiv_core::{Algorithm, Bundle, Preferred};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use store::{Session, Setup, Store, StoreError};

impl IntoResponse for StoreError {
    fn into_response(self) -> Response {
        let status = match &self {
            StoreError::BadRequest(_) => StatusCode::BAD_REQUEST,
            StoreError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            StoreError::NotFound => StatusCode::NOT_FOUND,
            StoreError::Conflict(_) => StatusCode::CONFLICT,
            StoreError::Io(_) | StoreError::Corrupt(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    algorithm: String,
    n: usize,
    item_labels: Vec<String>,
    #[serde(default)]
    agent_labels: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerRequest {
    choice: String,
    #[serde(default)]
    index: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentBundle {
    pub agent: usize,
    pub agent_label: String,
    pub items: Vec<String>,
}

/// What a client sees after every call.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum SessionView {
    Pending {
        session: String,
        index: usize,
        agent: usize,
        agent_label: String,
        x: Vec<String>,
        y: Vec<String>,
    },
    Finished {
        session: String,
        queries: usize,
        allocation: Vec<AgentBundle>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub agent: usize,
    pub x: Vec<String>,
    pub y: Vec<String>,
    pub choice: Preferred,
}

#[derive(Clone, Debug, Serialize)]
pub struct SessionReport {
    pub session: String,
    pub algorithm: Algorithm,
    pub n: usize,
    pub item_labels: Vec<String>,
    pub agent_labels: Vec<String>,
    pub allocation: Vec<AgentBundle>,
    pub queries: usize,
    pub per_agent_queries: Vec<u64>,
    pub transcript: Vec<TranscriptEntry>,
    /// Answers are taken at face value, so whether some additive valuation
    /// explains them is never checked.
    pub consistency: &'static str,
    pub trace: RunTrace,
}

fn labels(setup: &Setup, b: &Bundle) -> Vec<String> {
    b.iter().map(|g| setup.item_labels[g.0].clone()).collect()
}

fn allocation_view(setup: &Setup, bundles: &[Bundle]) -> Vec<AgentBundle> {
    bundles
        .iter()
        .enumerate()
        .map(|(i, b)| AgentBundle {
            agent: i,
            agent_label: setup.agent_labels[i].clone(),
            items: labels(setup, b),
        })
        .collect()
}

pub fn view(s: &Session) -> SessionView {
    match &s.state {
        Step::Pending { query } => SessionView::Pending {
            session: s.id.clone(),
            index: query.index,
            agent: query.agent.0,
            agent_label: s.setup.agent_labels[query.agent.0].clone(),
            x: labels(&s.setup, &query.x),
            y: labels(&s.setup, &query.y),
        },
        Step::Finished { outcome } => SessionView::Finished {
            session: s.id.clone(),
            queries: s.log.total(),
            allocation: allocation_view(&s.setup, &outcome.allocation.bundles),
        },
    }
}

pub fn report(s: &Session) -> Option<SessionReport> {
    let Step::Finished { outcome } = &s.state else {
        return None;
    };
    let mut per_agent_queries = s.log.per_agent.clone();
    per_agent_queries.resize(s.setup.n, 0);
    Some(SessionReport {
        session: s.id.clone(),
        algorithm: s.setup.algorithm,
        n: s.setup.n,
        item_labels: s.setup.item_labels.clone(),
        agent_labels: s.setup.agent_labels.clone(),
        allocation: allocation_view(&s.setup, &outcome.allocation.bundles),
        queries: s.log.total(),
        per_agent_queries,
        transcript: s
            .log
            .entries
            .iter()
            .map(|e| TranscriptEntry {
                agent: e.agent.0,
                x: labels(&s.setup, &e.x),
                y: labels(&s.setup, &e.y),
                choice: e.answer,
            })
            .collect(),
        consistency: "unverifiable",
        trace: outcome.trace.clone(),
    })
}

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, StoreError> {
    serde_json::from_slice(body).map_err(|e| StoreError::BadRequest(format!("invalid body: {e}")))
}

async fn create(State(store): State<Arc<Store>>, body: Bytes) -> Result<Response, StoreError> {
    let req: CreateRequest = parse(&body)?;
    let algorithm: Algorithm = req
        .algorithm
        .parse()
        .map_err(|e: fairdiv_core::FairDivError| StoreError::Unprocessable(e.to_string()))?;
    let agent_labels = req
        .agent_labels
        .unwrap_or_else(|| (1..=req.n).map(|i| format!("agent {i}")).collect());
    let session = store
        .create(Setup {
            algorithm,
            n: req.n,
            item_labels: req.item_labels,
            agent_labels,
        })
        .await?;
    Ok((StatusCode::CREATED, Json(view(&session))).into_response())
}

async fn query(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<Json<SessionView>, StoreError> {
    Ok(Json(view(&store.get(&id).await?)))
}

async fn answer(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, StoreError> {
    // unknown sessions are 404 whatever the body says
    store.get(&id).await?;
    let req: AnswerRequest = parse(&body)?;
    let choice = match req.choice.as_str() {
        "x" => Preferred::X,
        "y" => Preferred::Y,
        other => return Err(StoreError::BadRequest(format!("choice must be \"x\" or \"y\", not {other:?}"))),
    };
    Ok(Json(view(&store.answer(&id, choice, req.index).await?)))
}

async fn get_report(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
) -> Result<Json<SessionReport>, StoreError> {
    let session = store.get(&id).await?;
    report(&session)
        .map(Json)
        .ok_or_else(|| StoreError::Conflict("session is still waiting for answers".into()))
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/query", get(query))
        .route("/sessions/{id}/answer", post(answer))
        .route("/sessions/{id}/report", get(get_report))
        .with_state(store)
}

/// Serves the API on `listener`, keeping sessions under `dir`.
pub async fn serve(listener: tokio::net::TcpListener, dir: PathBuf) -> std::io::Result<()> {
    let store = Arc::new(Store::new(dir)?);
    axum::serve(listener, router(store)).await
}
