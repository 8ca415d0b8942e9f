// SPDX-License-Identifier: Apache-2.0

//! Thin async client for the beacon detection service.

use reqwest::StatusCode;
use serde::{de::DeserializeOwned, Serialize};

use beacon_core::ops::{
    ErrorBody, EvaluateRequest, EvaluateResponse, FramesRequest, GridSearchRequest, GridSearchResponse,
    RankFeaturesRequest, RankFeaturesResponse, RunRequest, RunResponse, SimulateRequest, SimulateResponse,
    TrainMapperResponse, TrainRequest, TrainSvmResponse,
};
use beacon_core::pipeline::FrameResult;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),

    #[error("server returned {status}: {message}")]
    Api { status: StatusCode, message: String },
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, req: &Req) -> Result<Resp> {
        let resp = self.http.post(format!("{}{path}", self.base)).json(req).send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let message = match resp.json::<ErrorBody>().await {
            Ok(b) => b.error,
            Err(_) => status.canonical_reason().unwrap_or("unknown error").to_string(),
        };
        Err(ClientError::Api { status, message })
    }

    pub async fn health(&self) -> Result<()> {
        self.http
            .get(format!("{}/health", self.base))
            .send()
            .await?
            .error_for_status()?;
        Ok(())
    }

    pub async fn simulate(&self, req: &SimulateRequest) -> Result<SimulateResponse> {
        self.post("/v1/simulate", req).await
    }

    pub async fn train_svm(&self, req: &TrainRequest) -> Result<TrainSvmResponse> {
        self.post("/v1/train-svm", req).await
    }

    pub async fn train_mapper(&self, req: &TrainRequest) -> Result<TrainMapperResponse> {
        self.post("/v1/train-mapper", req).await
    }

    pub async fn rank_features(&self, req: &RankFeaturesRequest) -> Result<RankFeaturesResponse> {
        self.post("/v1/rank-features", req).await
    }

    pub async fn run(&self, req: &RunRequest) -> Result<RunResponse> {
        self.post("/v1/run", req).await
    }

    pub async fn process_frames(&self, req: &FramesRequest) -> Result<Vec<FrameResult>> {
        self.post("/v1/frames", req).await
    }

    pub async fn evaluate(&self, req: &EvaluateRequest) -> Result<EvaluateResponse> {
        self.post("/v1/evaluate", req).await
    }

    pub async fn grid_search(&self, req: &GridSearchRequest) -> Result<GridSearchResponse> {
        self.post("/v1/grid-search", req).await
    }
}
