//! Server side of the inference wire protocol, wrapping any in-process
//! backend. Used as a stand-in for an external model server.

use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use pdd_core::pipeline::{Backend, InferRequest, InferResponse, PROTOCOL_VERSION};

type Shared = Arc<dyn Backend>;

pub fn infer_router(backend: Shared) -> Router {
    Router::new().route("/infer", post(infer)).with_state(backend)
}

fn reject(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (status, Json(InferResponse::error(code, message))).into_response()
}

/// Checks a request against the served backend, returning the rejection
/// status and body on mismatch.
pub fn check_request(req: &InferRequest, backend: &dyn Backend) -> Result<(), (StatusCode, InferResponse)> {
    let desc = backend.descriptor();
    let fail = |code: &str, msg: String| Err((StatusCode::BAD_REQUEST, InferResponse::error(code, msg)));
    if req.protocol != PROTOCOL_VERSION {
        return fail("unsupported_protocol", format!("expected {PROTOCOL_VERSION}, got {}", req.protocol));
    }
    if req.task != desc.kind {
        return fail("task_mismatch", format!("server handles {}, got {}", desc.kind.as_str(), req.task.as_str()));
    }
    if req.label_map_id != desc.label_map_id {
        return fail(
            "label_map_mismatch",
            format!("server uses label map {}, got {}", desc.label_map_id, req.label_map_id),
        );
    }
    Ok(())
}

async fn infer(State(backend): State<Shared>, body: String) -> Response {
    let req: InferRequest = match serde_json::from_str(&body) {
        Ok(r) => r,
        Err(e) => return reject(StatusCode::BAD_REQUEST, "bad_request", e.to_string()),
    };
    if let Err((status, resp)) = check_request(&req, backend.as_ref()) {
        return (status, Json(resp)).into_response();
    }
    let result = tokio::task::spawn_blocking(move || backend.infer(&req.sentences)).await;
    match result {
        Ok(Ok(outputs)) => Json(InferResponse::ok(outputs.into_iter().map(Result::ok).collect())).into_response(),
        Ok(Err(e)) => reject(StatusCode::INTERNAL_SERVER_ERROR, "backend_failure", e.to_string()),
        Err(e) => reject(StatusCode::INTERNAL_SERVER_ERROR, "backend_panic", e.to_string()),
    }
}
