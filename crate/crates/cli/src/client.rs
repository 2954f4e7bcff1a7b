//! Typed HTTP client for the service.

use calitrade_api::wire::*;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("cannot reach the service at {url}: {source}")]
    Transport { url: String, source: reqwest::Error },
    #[error("service rejected the request ({status}): {message}")]
    Service { status: StatusCode, message: String },
    #[error("unexpected response from the service: {0}")]
    Decode(reqwest::Error),
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn check(&self, url: String, resp: reqwest::Result<reqwest::Response>) -> Result<reqwest::Response, ClientError> {
        let resp = resp.map_err(|source| ClientError::Transport { url, source })?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().await.unwrap_or_default();
        let message = serde_json::from_str::<ErrorBody>(&text).map(|b| b.error).unwrap_or(text);
        Err(ClientError::Service { status, message })
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        let url = format!("{}{path}", self.base);
        let resp = self.http.post(&url).json(body).send().await;
        self.check(url, resp).await?.json().await.map_err(ClientError::Decode)
    }

    pub async fn health(&self) -> Result<(), ClientError> {
        let url = format!("{}/health", self.base);
        let resp = self.http.get(&url).send().await;
        self.check(url, resp).await.map(|_| ())
    }

    pub async fn backtest(&self, req: &RunRequest) -> Result<BacktestResponse, ClientError> {
        self.post("/v1/backtest", req).await
    }

    pub async fn calibrate(&self, req: &RunRequest) -> Result<CalibrateResponse, ClientError> {
        self.post("/v1/calibrate", req).await
    }

    pub async fn validate_schedule(&self, req: &ScheduleRequest) -> Result<ScheduleResponse, ClientError> {
        self.post("/v1/validate-schedule", req).await
    }

    pub async fn synth(&self, req: &SynthRequest) -> Result<SynthResponse, ClientError> {
        self.post("/v1/synth", req).await
    }
}
