//! JSON over HTTP. Pipelines run on the blocking pool after `POST /v1/claims`
//! returns.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use factline_core::domain::{timestamp, Claim, UserInstructions};
use factline_core::extractor::ExtractError;
use factline_core::orchestrator::{PipelineError, RunStatus};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{claim_id, Service};

pub struct ApiError {
    status: StatusCode,
    message: String,
    extra: Option<serde_json::Value>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into(), extra: None }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let (Some(extra), Some(obj)) = (self.extra, body.as_object_mut()) {
            if let Some(fields) = extra.as_object() {
                obj.extend(fields.clone());
            }
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/v1/claims", post(submit_claim))
        .route("/v1/claims/{id}", get(claim_status))
        .route("/v1/claims/{id}/report", get(claim_report))
        .route("/v1/corpus/documents", post(add_documents))
        .route("/v1/lineage/{doc_id}", get(lineage))
        .route("/v1/sources/{domain}/credibility", get(credibility))
        .route("/v1/audit/{claim_id}", get(audit))
        .route("/v1/healthz", get(healthz))
        .with_state(service)
}

/// A claim as submitted; id and receipt time are filled in when absent.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimRequest {
    #[serde(default)]
    pub id: Option<String>,
    pub text: String,
    #[serde(default)]
    pub topic_hints: Vec<String>,
    #[serde(default, with = "timestamp::option")]
    pub received_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub instructions: Option<UserInstructions>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Submitted {
    pub claim_id: String,
}

async fn submit_claim(State(svc): State<Arc<Service>>, Json(req): Json<ClaimRequest>) -> ApiResult<Response> {
    let received_at = req.received_at.unwrap_or_else(|| svc.now());
    let claim = Claim {
        id: req.id.unwrap_or_else(|| claim_id(&req.text, received_at)),
        text: req.text,
        topic_hints: req.topic_hints,
        received_at,
        instructions: req.instructions,
    };
    let id = svc.orchestrator().submit(claim).map_err(|e| match e {
        PipelineError::InvalidClaim(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        PipelineError::DuplicateClaim(_) => ApiError::new(StatusCode::CONFLICT, e.to_string()),
        other => ApiError::internal(other),
    })?;
    let worker = svc.clone();
    let run_id = id.clone();
    // the outcome lands in the claim's run record; nothing awaits the handle
    tokio::task::spawn_blocking(move || worker.orchestrator().execute(&run_id));
    Ok((StatusCode::ACCEPTED, Json(Submitted { claim_id: id })).into_response())
}

async fn claim_status(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Response> {
    let run = svc.orchestrator().run(&id).ok_or_else(|| ApiError::not_found(format!("unknown claim {id}")))?;
    Ok(Json(run).into_response())
}

async fn claim_report(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Response> {
    let run = svc.orchestrator().run(&id).ok_or_else(|| ApiError::not_found(format!("unknown claim {id}")))?;
    match (run.status, run.result) {
        (RunStatus::Done, Some(report)) => Ok(Json(report).into_response()),
        (status, _) => {
            let mut err = ApiError::not_found("report not ready");
            err.extra = Some(json!({ "status": status, "detail": run.error }));
            Err(err)
        }
    }
}

async fn add_documents(State(svc): State<Arc<Service>>, body: String) -> ApiResult<Response> {
    let report = tokio::task::spawn_blocking(move || svc.ingest_jsonl(&body))
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)?;
    Ok(Json(report).into_response())
}

#[derive(Debug, Deserialize)]
struct LineageQuery {
    tau: Option<f64>,
}

async fn lineage(
    State(svc): State<Arc<Service>>,
    Path(doc_id): Path<String>,
    Query(q): Query<LineageQuery>,
) -> ApiResult<Response> {
    if let Some(tau) = q.tau {
        if !(0.0..=1.0).contains(&tau) {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "tau must be in [0, 1]"));
        }
    }
    let graph = tokio::task::spawn_blocking(move || svc.orchestrator().lineage(&doc_id, q.tau))
        .await
        .map_err(ApiError::internal)?
        .map_err(|e| match e {
            ExtractError::SeedNotFound(_) => ApiError::not_found(e.to_string()),
            other => ApiError::new(StatusCode::BAD_REQUEST, other.to_string()),
        })?;
    Ok(Json(graph).into_response())
}

async fn credibility(State(svc): State<Arc<Service>>, Path(domain): Path<String>) -> ApiResult<Response> {
    let entry = svc
        .orchestrator()
        .credibility(&domain)
        .ok_or_else(|| ApiError::not_found(format!("no ledger entry for {domain}")))?;
    Ok(Json(json!({
        "domain": domain,
        "score": entry.score,
        "n_updates": entry.n_updates,
        "updated_at": timestamp::render(&entry.updated_at),
    }))
    .into_response())
}

async fn audit(State(svc): State<Arc<Service>>, Path(claim_id): Path<String>) -> ApiResult<Response> {
    let chain = svc
        .orchestrator()
        .audit()
        .chain(&claim_id)
        .ok_or_else(|| ApiError::not_found(format!("no audit records for {claim_id}")))?;
    Ok(Json(chain).into_response())
}

async fn healthz(State(svc): State<Arc<Service>>) -> Json<factline_core::orchestrator::HealthReport> {
    Json(svc.orchestrator().health())
}
