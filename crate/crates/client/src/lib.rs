//! Typed async client for the experiment service.

use std::time::Duration;

use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;

use hdwdrl_core::api::{
    ApiError, ConfigSource, EvalRequest, EvalResponse, ExportPlotsRequest, ExportPlotsResponse, GradCheckRequest,
    GradCheckResponse, Health, JobEvents, JobInfo, JobRequest, ResolvedConfig, ValidateEnvRequest,
    ValidateEnvResponse,
};
use hdwdrl_core::harness::{Progress, Summary};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// The service answered with a structured error.
    #[error("{0}")]
    Api(ApiError),
    #[error("request to {url} failed: {source}")]
    Transport {
        url: String,
        #[source]
        source: reqwest::Error,
    },
    /// The reply was not what the endpoint promises.
    #[error("unexpected reply from {url} ({status}): {body}")]
    Protocol { url: String, status: StatusCode, body: String },
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, for example `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn send(&self, method: Method, path: &str, body: Option<&(impl Serialize + ?Sized)>) -> Result<(String, StatusCode, String)> {
        let url = format!("{}{path}", self.base);
        let mut req = self.http.request(method, &url);
        if let Some(b) = body {
            req = req.json(b);
        }
        let transport = |source| ClientError::Transport { url: url.clone(), source };
        let resp = req.send().await.map_err(transport)?;
        let status = resp.status();
        let text = resp.text().await.map_err(transport)?;
        if !status.is_success() {
            return Err(match serde_json::from_str::<ApiError>(&text) {
                Ok(e) => ClientError::Api(e),
                Err(_) => ClientError::Protocol { url, status, body: text },
            });
        }
        Ok((url, status, text))
    }

    async fn json<T: DeserializeOwned>(&self, method: Method, path: &str, body: Option<&(impl Serialize + ?Sized)>) -> Result<T> {
        let (url, status, text) = self.send(method, path, body).await?;
        serde_json::from_str(&text).map_err(|_| ClientError::Protocol { url, status, body: text })
    }

    pub async fn health(&self) -> Result<Health> {
        self.json(Method::GET, "/health", None::<&()>).await
    }

    pub async fn resolve_config(&self, src: &ConfigSource) -> Result<ResolvedConfig> {
        self.json(Method::POST, "/config/resolve", Some(src)).await
    }

    pub async fn validate_env(&self, req: &ValidateEnvRequest) -> Result<ValidateEnvResponse> {
        self.json(Method::POST, "/validate-env", Some(req)).await
    }

    pub async fn check_gradients(&self, req: &GradCheckRequest) -> Result<GradCheckResponse> {
        self.json(Method::POST, "/check-gradients", Some(req)).await
    }

    pub async fn submit_job(&self, req: &JobRequest) -> Result<JobInfo> {
        self.json(Method::POST, "/jobs", Some(req)).await
    }

    pub async fn jobs(&self) -> Result<Vec<JobInfo>> {
        self.json(Method::GET, "/jobs", None::<&()>).await
    }

    pub async fn job(&self, id: u64) -> Result<JobInfo> {
        self.json(Method::GET, &format!("/jobs/{id}"), None::<&()>).await
    }

    pub async fn events(&self, id: u64, since: usize) -> Result<JobEvents> {
        self.json(Method::GET, &format!("/jobs/{id}/events?since={since}"), None::<&()>).await
    }

    /// `metrics.csv` of a finished job.
    pub async fn metrics(&self, id: u64) -> Result<String> {
        Ok(self.send(Method::GET, &format!("/jobs/{id}/metrics"), None::<&()>).await?.2)
    }

    pub async fn summary(&self, id: u64) -> Result<Summary> {
        self.json(Method::GET, &format!("/jobs/{id}/summary"), None::<&()>).await
    }

    pub async fn eval(&self, req: &EvalRequest) -> Result<EvalResponse> {
        self.json(Method::POST, "/eval", Some(req)).await
    }

    pub async fn export_plots(&self, req: &ExportPlotsRequest) -> Result<ExportPlotsResponse> {
        self.json(Method::POST, "/export-plots", Some(req)).await
    }

    /// Poll a job until it finishes, handing every progress event to
    /// `on_event` in order. Returns the final job record; a failed job
    /// becomes [`ClientError::Api`].
    pub async fn wait(&self, id: u64, poll: Duration, mut on_event: impl FnMut(&Progress)) -> Result<JobInfo> {
        let mut since = 0;
        loop {
            let ev = self.events(id, since).await?;
            ev.events.iter().for_each(&mut on_event);
            since = ev.next;
            if ev.state.is_finished() {
                let info = self.job(id).await?;
                return match info.error {
                    Some(e) => Err(ClientError::Api(e)),
                    None => Ok(info),
                };
            }
            tokio::time::sleep(poll).await;
        }
    }
}
