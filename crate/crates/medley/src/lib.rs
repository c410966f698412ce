//! HTTP front ends: the mediator's JSON API and the per-source daemon.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use medley_core::mediator::{ErrorClass, Mediator, MediatorError, QueryRequest};
use medley_core::xsource::{serialize_xml, DataService, FixtureService, ServiceError};

fn error_response(e: &MediatorError) -> Response {
    let status = match e.class {
        ErrorClass::Client => StatusCode::BAD_REQUEST,
        ErrorClass::Transport => StatusCode::BAD_GATEWAY,
        ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    };
    (status, Json(json!({ "error": e }))).into_response()
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn ontology(State(m): State<Arc<Mediator>>) -> Json<serde_json::Value> {
    Json(m.ontology_json())
}

async fn sources(State(m): State<Arc<Mediator>>) -> Response {
    match tokio::task::spawn_blocking(move || m.sources_info()).await {
        Ok(info) => Json(info).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

async fn query(State(m): State<Arc<Mediator>>, body: Bytes) -> Response {
    let req: QueryRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            return (
                StatusCode::BAD_REQUEST,
                Json(json!({ "error": { "stage": "request", "class": "client", "message": e.to_string() } })),
            )
                .into_response()
        }
    };
    let explain = req.explain;
    let outcome = tokio::task::spawn_blocking(move || m.handle_query(&req)).await;
    match outcome {
        Ok(Ok(r)) if explain => Json(json!({
            "format": r.format,
            "body": r.body,
            "diagnostics": r.diagnostics,
        }))
        .into_response(),
        Ok(Ok(r)) => ([(header::CONTENT_TYPE, r.format.content_type())], r.body).into_response(),
        Ok(Err(e)) => error_response(&e),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

/// `GET /api/health`, `GET /api/ontology`, `GET /api/sources`, `POST /api/query`.
pub fn api_router(mediator: Arc<Mediator>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/ontology", get(ontology))
        .route("/api/sources", get(sources))
        .route("/api/query", post(query))
        .with_state(mediator)
}

const XML: [(header::HeaderName, &str); 1] = [(header::CONTENT_TYPE, "application/xml")];

async fn source_query(State(svc): State<Arc<FixtureService>>, body: String) -> Response {
    match svc.answer(&body) {
        Ok(xml) => (XML, xml).into_response(),
        Err(ServiceError::Query { message, .. }) => (StatusCode::BAD_REQUEST, message).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

async fn source_schema(State(svc): State<Arc<FixtureService>>) -> Response {
    (XML, svc.source_schema().text.clone()).into_response()
}

async fn source_provenance(State(svc): State<Arc<FixtureService>>) -> Response {
    match svc.provenance() {
        Ok(p) => (XML, serialize_xml(&p.to_xml())).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

/// `POST /query`, `GET /schema`, `GET /provenance` for one source.
pub fn source_router(svc: Arc<FixtureService>) -> Router {
    Router::new()
        .route("/query", post(source_query))
        .route("/schema", get(source_schema))
        .route("/provenance", get(source_provenance))
        .with_state(svc)
}

/// Serves a router until the process is interrupted.
pub async fn serve(listener: tokio::net::TcpListener, router: Router) -> std::io::Result<()> {
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
