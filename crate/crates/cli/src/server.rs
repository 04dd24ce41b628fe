//! HTTP front end of the annotation service.
//!
//! | route | success | failures |
//! |---|---|---|
//! | `GET /tasks/next?annotator=ID` | 200 task, 204 when done | 404 unknown annotator |
//! | `POST /annotations` | 200 acknowledgment | 400 bad JSON, 422 schema, 404 unknown ids |
//! | `GET /agreement` | 200 report | 409 nothing to compare |
//! | `GET /adjudication/queue` | 200 list | |
//! | `POST /adjudication/{sentence_id}` | 200 gold record | 409 no submissions, 422 schema, 404 |
//! | `GET /gold` | 200 list | |
//! | `POST /gold/promote?min_submissions=N&majority=BOOL` | 200 promoted records | |
//!
//! Annotation bodies use the annotation-file record schema. For
//! adjudication the body's `annotator_id` names the adjudicator.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pdd_core::annotation::AnnotationService;
use pdd_core::corpus::PddAnnotation;
use pdd_core::Error;
use serde::Deserialize;
use serde_json::json;

type Shared = Arc<AnnotationService>;

pub fn annotation_router(service: Shared) -> Router {
    Router::new()
        .route("/tasks/next", get(next_task))
        .route("/annotations", post(submit))
        .route("/agreement", get(agreement))
        .route("/adjudication/queue", get(queue))
        .route("/adjudication/{sentence_id}", post(adjudicate))
        .route("/gold", get(gold))
        .route("/gold/promote", post(promote))
        .with_state(service)
}

fn error_response(status: StatusCode, code: &str, message: impl ToString) -> Response {
    (status, Json(json!({ "error": { "code": code, "message": message.to_string() } }))).into_response()
}

fn core_error(e: Error) -> Response {
    let (status, code) = match &e {
        Error::UnknownAnnotator(_) => (StatusCode::NOT_FOUND, "unknown_annotator"),
        Error::UnknownSentence(_) => (StatusCode::NOT_FOUND, "unknown_sentence"),
        Error::NotSubmitted(_) => (StatusCode::CONFLICT, "not_submitted"),
        Error::Schema(_) | Error::InvalidSpan(_) | Error::MissingField(_) => {
            (StatusCode::UNPROCESSABLE_ENTITY, "schema_violation")
        }
        Error::NoSharedItems | Error::Degenerate(_) | Error::UndefinedCorrelation(_) => {
            (StatusCode::CONFLICT, "insufficient_data")
        }
        _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
    };
    error_response(status, code, e)
}

fn parse_annotation(body: &str) -> Result<PddAnnotation, Box<Response>> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| Box::new(error_response(StatusCode::BAD_REQUEST, "bad_json", e)))?;
    serde_json::from_value(value)
        .map_err(|e| Box::new(error_response(StatusCode::UNPROCESSABLE_ENTITY, "schema_violation", e)))
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: String,
}

async fn next_task(State(s): State<Shared>, Query(q): Query<NextQuery>) -> Response {
    match s.next_task(&q.annotator) {
        Ok(Some(task)) => Json(task).into_response(),
        Ok(None) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => core_error(e),
    }
}

async fn submit(State(s): State<Shared>, body: String) -> Response {
    let ann = match parse_annotation(&body) {
        Ok(a) => a,
        Err(r) => return *r,
    };
    match s.submit_annotation(ann) {
        Ok(ack) => Json(ack).into_response(),
        Err(e) => core_error(e),
    }
}

async fn agreement(State(s): State<Shared>) -> Response {
    match s.agreement() {
        Ok(report) => Json(report).into_response(),
        Err(e) => core_error(e),
    }
}

async fn queue(State(s): State<Shared>) -> Response {
    Json(s.adjudication_queue()).into_response()
}

async fn adjudicate(State(s): State<Shared>, Path(sentence_id): Path<String>, body: String) -> Response {
    let ann = match parse_annotation(&body) {
        Ok(a) => a,
        Err(r) => return *r,
    };
    if ann.sentence_id != sentence_id {
        return error_response(
            StatusCode::UNPROCESSABLE_ENTITY,
            "id_mismatch",
            format!("body sentence_id `{}` differs from path `{sentence_id}`", ann.sentence_id),
        );
    }
    let adjudicator = ann.annotator_id.clone();
    match s.adjudicate(&sentence_id, ann, &adjudicator) {
        Ok(record) => Json(record).into_response(),
        Err(e) => core_error(e),
    }
}

async fn gold(State(s): State<Shared>) -> Response {
    Json(s.gold()).into_response()
}

#[derive(Deserialize)]
struct PromoteQuery {
    #[serde(default = "default_min")]
    min_submissions: usize,
    #[serde(default)]
    majority: bool,
}

fn default_min() -> usize {
    2
}

async fn promote(State(s): State<Shared>, Query(q): Query<PromoteQuery>) -> Response {
    match s.auto_promote(q.min_submissions, q.majority) {
        Ok(records) => Json(records).into_response(),
        Err(e) => core_error(e),
    }
}

/// Serves `router` on `listener` until Ctrl-C.
pub async fn serve_until_ctrl_c(listener: tokio::net::TcpListener, router: Router) -> std::io::Result<()> {
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
