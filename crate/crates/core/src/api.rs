//! JSON request and response bodies shared by the HTTP service and its
//! client.

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::Error;
use crate::harness::{EnvReport, EpisodeStats, Progress, Summary, Variant};

/// Error classes surfaced over the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Usage,
    Invariant,
    Io,
    Format,
    NotFound,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{kind:?}: {message}")]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
    /// Offending config key, for config errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
}

impl ApiError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            key: None,
        }
    }
}

impl From<&Error> for ApiError {
    fn from(e: &Error) -> Self {
        let kind = match e {
            Error::Config { .. } => ErrorKind::Config,
            Error::Usage(_) => ErrorKind::Usage,
            Error::Invariant(_) | Error::Shape { .. } => ErrorKind::Invariant,
            Error::Io { .. } => ErrorKind::Io,
            Error::Format(_) => ErrorKind::Format,
        };
        let key = match e {
            Error::Config { key, .. } => Some(key.clone()),
            _ => None,
        };
        Self {
            kind,
            message: e.to_string(),
            key,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        (&e).into()
    }
}

/// A config file's text plus dotted `key=value` overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigSource {
    #[serde(default)]
    pub config_toml: Option<String>,
    #[serde(default)]
    pub overrides: Vec<String>,
}

impl ConfigSource {
    pub fn resolve(&self) -> crate::Result<Config> {
        Config::from_toml_str(self.config_toml.as_deref().unwrap_or(""), &self.overrides)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub config_toml: String,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateEnvRequest {
    #[serde(flatten)]
    pub source: ConfigSource,
    pub seed: u64,
    pub slots: usize,
    #[serde(default)]
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateEnvResponse {
    pub report: EnvReport,
    /// JSON lines, one per slot, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckRequest {
    #[serde(flatten)]
    pub source: ConfigSource,
    pub seed: u64,
    pub inputs: usize,
    pub eps: f64,
    pub tolerance: f64,
}

impl Default for GradCheckRequest {
    fn default() -> Self {
        Self {
            source: ConfigSource::default(),
            seed: 0,
            inputs: 20,
            eps: 1e-5,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheck {
    pub name: String,
    pub parameters: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckResponse {
    pub networks: Vec<NetworkCheck>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JobKind {
    Train { variant: Variant },
    Sweep { variants: Vec<Variant> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRequest {
    pub kind: JobKind,
    #[serde(flatten)]
    pub source: ConfigSource,
    /// Output directory; relative paths sit under the service's output
    /// root. Defaults to `<root>/job-<id>`.
    #[serde(default)]
    pub output: Option<String>,
    /// Parallel (variant, seed) jobs; defaults to the available cores.
    #[serde(default)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Running,
    Succeeded,
    Failed,
}

impl JobState {
    pub fn is_finished(self) -> bool {
        self != JobState::Running
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobInfo {
    pub id: u64,
    pub kind: JobKind,
    pub state: JobState,
    pub output: String,
    pub config_hash: String,
    /// Episodes finished so far, training and evaluation.
    pub episodes_done: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobEvents {
    pub state: JobState,
    pub events: Vec<Progress>,
    /// Pass as `since` to fetch only newer events.
    pub next: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRequest {
    pub checkpoint: String,
    pub episodes: usize,
    #[serde(default)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResponse {
    pub variant: Variant,
    pub seed: u64,
    pub episodes: Vec<EpisodeStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportPlotsRequest {
    pub metrics: String,
    pub out_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportPlotsResponse {
    pub files: Vec<String>,
}

pub type SummaryResponse = Summary;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds() {
        let e: ApiError = Error::config("scenario.grid_h", "bad").into();
        assert_eq!(e.kind, ErrorKind::Config);
        assert_eq!(e.key.as_deref(), Some("scenario.grid_h"));
        assert_eq!(ApiError::from(Error::Invariant("x".into())).kind, ErrorKind::Invariant);
        let json = serde_json::to_string(&ApiError::new(ErrorKind::NotFound, "no job 3")).unwrap();
        assert_eq!(json, r#"{"kind":"not_found","message":"no job 3"}"#);
    }

    #[test]
    fn job_request_wire_format() {
        let req: JobRequest = serde_json::from_str(
            r#"{"kind":{"type":"sweep","variants":["hdwdrl","no_sws"]},"overrides":["training.episodes=2"]}"#,
        )
        .unwrap();
        assert_eq!(req.kind, JobKind::Sweep { variants: vec![Variant::Hdwdrl, Variant::NoSws] });
        assert_eq!(req.source.resolve().unwrap().training.episodes, 2);
        assert_eq!(req.output, None);
    }
}
