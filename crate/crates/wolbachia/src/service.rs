//! Stateless HTTP/JSON front end.
//!
//! Every endpoint takes a JSON object with an optional `params` field (a
//! preset name or the six rates inline, default `"wmelpop"`), an optional
//! `budget_ms`, and the fields of the matching analysis input. Responses echo
//! the SHA-256 of the raw request body as `request_hash`.

use std::net::SocketAddr;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};
use tower_http::cors::CorsLayer;
use wolbachia_core::ModelParameters;

use crate::analysis::{self, Tolerances};
use crate::error::{AppError, AppResult};
use crate::params::{self, ParamSource};
use crate::sweep::Cancel;

pub const OPENAPI: &str = include_str!("../openapi.json");

pub fn router() -> Router {
    Router::new()
        .route("/equilibria", post(|b: Bytes| handle(b, |p, i, _| analysis::run_equilibria(p, i))))
        .route("/simulate", post(|b: Bytes| handle(b, |p, i, _| analysis::run_simulate(p, i))))
        .route("/separatrix", post(|b: Bytes| handle(b, analysis::run_separatrix)))
        .route("/min-release", post(|b: Bytes| handle(b, analysis::run_min_release)))
        .route("/plan", post(|b: Bytes| handle(b, analysis::run_plan)))
        .route("/simulate-impulsive", post(|b: Bytes| handle(b, |p, i, _| analysis::run_impulsive(p, i))))
        .route("/openapi.json", get(|| async { ([(header::CONTENT_TYPE, "application/json")], OPENAPI) }))
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .layer(CorsLayer::permissive())
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

struct Envelope<I> {
    params: ModelParameters,
    budget_ms: Option<u64>,
    input: I,
}

fn parse<I: DeserializeOwned>(body: &[u8]) -> AppResult<Envelope<I>> {
    let mut map: Map<String, Value> = serde_json::from_slice(body).map_err(AppError::input)?;
    let source: ParamSource = match map.remove("params") {
        Some(v) => serde_json::from_value(v).map_err(|e| AppError::Input(format!("params: {e}")))?,
        None => ParamSource::default(),
    };
    let budget_ms = match map.remove("budget_ms") {
        Some(v) => Some(serde_json::from_value(v).map_err(|e| AppError::Input(format!("budget_ms: {e}")))?),
        None => None,
    };
    let input = serde_json::from_value(Value::Object(map)).map_err(AppError::input)?;
    Ok(Envelope { params: source.resolve()?, budget_ms, input })
}

fn status_of(e: &AppError) -> StatusCode {
    match e {
        AppError::Input(_) => StatusCode::BAD_REQUEST,
        AppError::Validation { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        AppError::Numerical(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn error_response(hash: &str, e: &AppError) -> Response {
    let mut err = json!({ "code": e.kind(), "message": e.to_string() });
    if let AppError::Validation { violated, .. } = e {
        if !violated.is_empty() {
            err["violated"] = json!(violated);
        }
    }
    (status_of(e), Json(json!({ "request_hash": hash, "error": err }))).into_response()
}

async fn handle<I, O, F>(body: Bytes, op: F) -> Response
where
    I: DeserializeOwned + Send + 'static,
    O: Serialize + Send + 'static,
    F: Fn(&ModelParameters, &I, &Cancel) -> AppResult<analysis::Computed<O>> + Send + 'static,
{
    let hash = params::sha256_hex(&body);
    let env: Envelope<I> = match parse(&body) {
        Ok(env) => env,
        Err(e) => return error_response(&hash, &e),
    };
    let started = Instant::now();
    let cancel = Cancel::default();
    let worker_cancel = cancel.clone();
    let p = env.params;
    let task = tokio::task::spawn_blocking(move || op(&p, &env.input, &worker_cancel));

    let joined = match env.budget_ms {
        None => task.await,
        Some(ms) => match tokio::time::timeout(Duration::from_millis(ms), task).await {
            Ok(j) => j,
            Err(_) => {
                cancel.cancel();
                let body = json!({
                    "request_hash": hash,
                    "status": "budget_exceeded",
                    "budget_ms": ms,
                    "message": "analysis did not finish within budget_ms; no partial results are returned",
                });
                return (StatusCode::ACCEPTED, Json(body)).into_response();
            }
        },
    };
    let result = joined.unwrap_or_else(|e| Err(AppError::Numerical(format!("worker failed: {e}"))));
    match result {
        Ok(done) => {
            let body = json!({
                "request_hash": hash,
                "result": done.value,
                "diagnostics": diagnostics(&p, &done.tolerances, started),
            });
            (StatusCode::OK, Json(body)).into_response()
        }
        Err(e) => error_response(&hash, &e),
    }
}

fn diagnostics(p: &ModelParameters, tolerances: &Tolerances, started: Instant) -> Value {
    json!({
        "params_hash": params::hash(p),
        "tolerances": tolerances,
        "runtime_ms": started.elapsed().as_millis() as u64,
    })
}
