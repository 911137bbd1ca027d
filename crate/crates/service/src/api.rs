//! REST surface under `/api/v1`.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::formats::EmbeddingMeta;
use crate::queue::Queue;
use crate::store::{NewProject, Store};
use crate::views::{self, ListQuery};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub queue: Arc<Queue>,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (status, Json(self.body())).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ServiceError>;

/// Runs store work off the async executor.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Corrupt(format!("worker task failed: {e}")))?
}

fn bad_json(e: JsonRejection) -> ServiceError {
    ServiceError::Validation(e.body_text())
}

pub fn router(state: AppState) -> Router {
    let project = Router::new()
        .route("/", get(get_project))
        .route("/artifacts/corpus", post(upload_corpus))
        .route("/artifacts/tokens", post(upload_tokens))
        .route("/artifacts/embeddings", post(upload_embeddings))
        .route("/artifacts/tags/:tagset", post(upload_tags))
        .route("/artifacts/attributions", post(upload_attributions))
        .route("/run", post(run))
        .route("/status", get(status))
        .route("/overview", get(overview))
        .route("/concepts", get(list_concepts))
        .route("/concepts/:cid", get(get_concept))
        .route("/concepts/:cid/label", patch(set_label))
        .route("/sentences", get(list_sentences))
        .route("/sentences/:sid/explanation", get(explanation));
    Router::new()
        .route("/api/v1/projects", post(create_project).get(list_projects))
        .nest("/api/v1/projects/:id", project)
        .fallback(|| async { ServiceError::NotFound("route".into()) })
        .layer(DefaultBodyLimit::disable())
        .with_state(state)
}

async fn create_project(
    State(s): State<AppState>,
    body: std::result::Result<Json<NewProject>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(new) = body.map_err(bad_json)?;
    let project = blocking(move || s.store.create_project(new)).await?;
    Ok((StatusCode::CREATED, Json(project)))
}

async fn list_projects(State(s): State<AppState>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || s.store.list_projects()).await?))
}

async fn get_project(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || s.store.project(&id)).await?))
}

#[derive(Serialize)]
struct Accepted {
    artifact: &'static str,
    count: usize,
}

async fn upload_corpus(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let count = blocking(move || s.store.ingest_corpus(&id, &body)).await?;
    Ok(Json(Accepted {
        artifact: "corpus",
        count,
    }))
}

async fn upload_tokens(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let count = blocking(move || s.store.ingest_tokens(&id, &body)).await?;
    Ok(Json(Accepted {
        artifact: "tokens",
        count,
    }))
}

/// The sidecar metadata travels as query parameters next to the raw body.
#[derive(Deserialize)]
struct EmbeddingParams {
    n: usize,
    d: usize,
    layer: u32,
    model_name: Option<String>,
    checksum: Option<String>,
}

async fn upload_embeddings(
    State(s): State<AppState>,
    Path(id): Path<String>,
    params: std::result::Result<Query<EmbeddingParams>, axum::extract::rejection::QueryRejection>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let Query(p) = params.map_err(|e| ServiceError::Validation(e.body_text()))?;
    let meta = EmbeddingMeta {
        n: p.n,
        d: p.d,
        layer: p.layer,
        model_name: p.model_name,
        checksum: p.checksum,
    };
    Ok(Json(blocking(move || s.store.ingest_embeddings(&id, meta, &body)).await?))
}

async fn upload_tags(
    State(s): State<AppState>,
    Path((id, tagset)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let count = blocking(move || s.store.ingest_tags(&id, &tagset, &body)).await?;
    Ok(Json(Accepted {
        artifact: "tags",
        count,
    }))
}

async fn upload_attributions(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let count = blocking(move || s.store.ingest_attributions(&id, &body)).await?;
    Ok(Json(Accepted {
        artifact: "attributions",
        count,
    }))
}

async fn run(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let project = blocking({
        let store = s.store.clone();
        move || store.enqueue(&id)
    })
    .await?;
    s.queue.submit(&project.project_id);
    Ok((StatusCode::ACCEPTED, Json(views::status(&project))))
}

async fn status(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let project = blocking(move || s.store.project(&id)).await?;
    Ok(Json(views::status(&project)))
}

async fn overview(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || Ok(views::overview(&*s.store.analysis(&id)?))).await?))
}

async fn list_concepts(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<HashMap<String, String>>,
) -> ApiResult<impl IntoResponse> {
    let page = blocking(move || {
        let a = s.store.analysis(&id)?;
        views::concepts(&a, &ListQuery::from_params(&params)?)
    })
    .await?;
    Ok(Json(page))
}

fn parse_id(raw: &str, what: &str) -> Result<usize> {
    raw.parse().map_err(|_| ServiceError::NotFound(format!("{what} {raw}")))
}

async fn get_concept(
    State(s): State<AppState>,
    Path((id, cid)): Path<(String, String)>,
) -> ApiResult<impl IntoResponse> {
    let detail = blocking(move || {
        let a = s.store.analysis(&id)?;
        views::concept_detail(&a, parse_id(&cid, "concept")?)
    })
    .await?;
    Ok(Json(detail))
}

#[derive(Deserialize)]
struct LabelBody {
    label: String,
}

async fn set_label(
    State(s): State<AppState>,
    Path((id, cid)): Path<(String, String)>,
    body: std::result::Result<Json<LabelBody>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(body) = body.map_err(bad_json)?;
    let label = blocking(move || s.store.set_label(&id, parse_id(&cid, "concept")?, &body.label)).await?;
    Ok(Json(label))
}

async fn list_sentences(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<HashMap<String, String>>,
) -> ApiResult<impl IntoResponse> {
    let page = blocking(move || views::sentences(&*s.store.analysis(&id)?, &params)).await?;
    Ok(Json(page))
}

async fn explanation(
    State(s): State<AppState>,
    Path((id, sid)): Path<(String, String)>,
) -> ApiResult<impl IntoResponse> {
    let e = blocking(move || {
        let a = s.store.analysis(&id)?;
        views::explanation(&a, parse_id(&sid, "sentence")?)
    })
    .await?;
    Ok(Json(e))
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
