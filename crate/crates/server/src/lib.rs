// SPDX-License-Identifier: Apache-2.0

//! HTTP/JSON front end for the beacon detection operations. Every handler
//! runs its operation on the blocking pool; paths in requests refer to the
//! server's file system.

use std::future::Future;

use axum::extract::Json;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{de::DeserializeOwned, Serialize};
use tokio::net::TcpListener;

use beacon_core::ops::{self, ErrorBody};
use beacon_core::Error;

pub struct ApiError {
    status: StatusCode,
    message: String,
}

fn status_of(e: &Error) -> StatusCode {
    match e {
        Error::File { source, .. } => status_of(source),
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => StatusCode::NOT_FOUND,
        Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self {
            status: status_of(&e),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(status = %self.status, "{}", self.message);
        }
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

async fn blocking<Req, Resp>(req: Req, op: fn(&Req) -> beacon_core::Result<Resp>) -> Result<Json<Resp>, ApiError>
where
    Req: Send + 'static,
    Resp: Send + 'static,
{
    match tokio::task::spawn_blocking(move || op(&req)).await {
        Ok(r) => Ok(Json(r?)),
        Err(e) => Err(ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: format!("worker failed: {e}"),
        }),
    }
}

fn route<Req, Resp>(op: fn(&Req) -> beacon_core::Result<Resp>) -> axum::routing::MethodRouter
where
    Req: DeserializeOwned + Send + 'static,
    Resp: Serialize + Send + 'static,
{
    post(move |Json(req): Json<Req>| blocking(req, op))
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    version: &'static str,
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok",
        version: env!("CARGO_PKG_VERSION"),
    })
}

pub fn app() -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/simulate", route(ops::simulate))
        .route("/v1/train-svm", route(ops::train_svm))
        .route("/v1/train-mapper", route(ops::train_mapper))
        .route("/v1/rank-features", route(ops::rank))
        .route("/v1/run", route(ops::run))
        .route("/v1/frames", route(ops::process_frames))
        .route("/v1/evaluate", route(ops::evaluate_detections))
        .route("/v1/grid-search", route(ops::grid_search))
}

pub async fn serve(listener: TcpListener, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    axum::serve(listener, app()).with_graceful_shutdown(shutdown).await
}
