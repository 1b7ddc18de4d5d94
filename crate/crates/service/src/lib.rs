//! HTTP/JSON front end for the experiment harness.
//!
//! | Method | Path | Body | Reply |
//! |---|---|---|---|
//! | GET | `/health` | | [`Health`] |
//! | POST | `/config/resolve` | [`ConfigSource`] | [`ResolvedConfig`] |
//! | POST | `/validate-env` | [`ValidateEnvRequest`] | [`ValidateEnvResponse`] |
//! | POST | `/check-gradients` | [`GradCheckRequest`] | [`GradCheckResponse`] |
//! | POST | `/jobs` | [`JobRequest`] | [`JobInfo`] (202) |
//! | GET | `/jobs` | | `[JobInfo]` |
//! | GET | `/jobs/:id` | | [`JobInfo`] |
//! | GET | `/jobs/:id/events?since=n` | | [`JobEvents`] |
//! | GET | `/jobs/:id/metrics` | | `metrics.csv` text |
//! | GET | `/jobs/:id/summary` | | summary JSON |
//! | POST | `/eval` | [`EvalRequest`] | [`EvalResponse`] |
//! | POST | `/export-plots` | [`ExportPlotsRequest`] | [`ExportPlotsResponse`] |
//!
//! Failures reply with an [`ApiError`] body. Training jobs run on blocking
//! threads; everything else answers inline.

use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

use hdwdrl_core::api::{
    ApiError, ConfigSource, ErrorKind, EvalRequest, EvalResponse, ExportPlotsRequest, ExportPlotsResponse,
    GradCheckRequest, GradCheckResponse, Health, JobEvents, JobInfo, JobKind, JobRequest, JobState, ResolvedConfig,
    ValidateEnvRequest, ValidateEnvResponse,
};
use hdwdrl_core::harness::{self, metrics_csv, Progress, RunLog, Summary};

/// Environment variable naming the directory job outputs go under.
pub const OUTPUT_ROOT_ENV: &str = "HDWDRL_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "hdwdrl-runs";

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    output_root: PathBuf,
    jobs: Mutex<Vec<Job>>,
}

struct Job {
    info: JobInfo,
    events: Vec<Progress>,
    metrics: Option<String>,
    summary: Option<Summary>,
}

impl AppState {
    pub fn new(output_root: impl Into<PathBuf>) -> Self {
        Self {
            inner: Arc::new(Inner {
                output_root: output_root.into(),
                jobs: Mutex::new(Vec::new()),
            }),
        }
    }

    /// Output root from `HDWDRL_OUTPUT_ROOT`, else `./hdwdrl-runs`.
    pub fn from_env() -> Self {
        Self::new(std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT), PathBuf::from))
    }

    pub fn output_root(&self) -> &Path {
        &self.inner.output_root
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.inner.output_root.join(p)
        }
    }

    fn with_job<T>(&self, id: u64, f: impl FnOnce(&mut Job) -> T) -> Result<T, AppError> {
        let mut jobs = self.inner.jobs.lock().expect("job table");
        let job = id
            .checked_sub(1)
            .and_then(|i| jobs.get_mut(i as usize))
            .ok_or_else(|| AppError(ApiError::new(ErrorKind::NotFound, format!("no job {id}"))))?;
        Ok(f(job))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/config/resolve", post(resolve_config))
        .route("/validate-env", post(validate_env))
        .route("/check-gradients", post(check_gradients))
        .route("/jobs", post(submit_job).get(list_jobs))
        .route("/jobs/:id", get(job_info))
        .route("/jobs/:id/events", get(job_events))
        .route("/jobs/:id/metrics", get(job_metrics))
        .route("/jobs/:id/summary", get(job_summary))
        .route("/eval", post(eval))
        .route("/export-plots", post(export_plots))
        .with_state(state)
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

#[derive(Debug)]
pub struct AppError(pub ApiError);

impl From<hdwdrl_core::Error> for AppError {
    fn from(e: hdwdrl_core::Error) -> Self {
        AppError(e.into())
    }
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = match self.0.kind {
            ErrorKind::Config => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Usage | ErrorKind::Format => StatusCode::BAD_REQUEST,
            ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::Invariant | ErrorKind::Io | ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(self.0)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, AppError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> hdwdrl_core::Result<T> + Send + 'static) -> Result<T, AppError> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(AppError::from),
        Err(e) => Err(AppError(ApiError::new(ErrorKind::Internal, format!("worker panicked: {e}")))),
    }
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn resolve_config(Json(src): Json<ConfigSource>) -> ApiResult<ResolvedConfig> {
    let cfg = src.resolve()?;
    Ok(Json(ResolvedConfig {
        config_toml: cfg.to_toml_string(),
        hash: cfg.hash(),
    }))
}

async fn validate_env(Json(req): Json<ValidateEnvRequest>) -> ApiResult<ValidateEnvResponse> {
    let cfg = req.source.resolve()?;
    let resp = blocking(move || {
        let mut buf = Vec::new();
        let report = harness::validate_env(
            &cfg.scenario,
            req.seed,
            req.slots,
            req.trace.then_some(&mut buf as &mut dyn std::io::Write),
        )?;
        Ok(ValidateEnvResponse {
            report,
            trace: req.trace.then(|| String::from_utf8(buf).expect("trace is utf-8")),
        })
    })
    .await?;
    Ok(Json(resp))
}

async fn check_gradients(Json(req): Json<GradCheckRequest>) -> ApiResult<GradCheckResponse> {
    let cfg = req.source.resolve()?;
    let networks =
        blocking(move || harness::check_networks(&cfg, req.seed, req.inputs, req.eps, req.tolerance)).await?;
    let passed = networks.iter().all(|n| n.passed);
    Ok(Json(GradCheckResponse { networks, passed }))
}

async fn submit_job(State(state): State<AppState>, Json(req): Json<JobRequest>) -> Result<Response, AppError> {
    let cfg = req.source.resolve()?;
    if let JobKind::Sweep { variants } = &req.kind {
        if variants.is_empty() {
            return Err(AppError(ApiError::new(ErrorKind::Usage, "sweep needs at least one variant")));
        }
    }
    let info = {
        let mut jobs = state.inner.jobs.lock().expect("job table");
        let id = jobs.len() as u64 + 1;
        let output = match &req.output {
            Some(p) => state.resolve(p),
            None => state.inner.output_root.join(format!("job-{id}")),
        };
        let info = JobInfo {
            id,
            kind: req.kind.clone(),
            state: JobState::Running,
            output: output.display().to_string(),
            config_hash: cfg.hash(),
            episodes_done: 0,
            error: None,
        };
        jobs.push(Job {
            info: info.clone(),
            events: Vec::new(),
            metrics: None,
            summary: None,
        });
        info
    };
    let workers = req
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    tracing::info!(id = info.id, output = %info.output, "job started");

    let id = info.id;
    let output = PathBuf::from(&info.output);
    let st = state.clone();
    tokio::task::spawn_blocking(move || {
        let progress = |p: &Progress| {
            let _ = st.with_job(id, |job| {
                job.events.push(p.clone());
                job.info.episodes_done += 1;
            });
        };
        let result: hdwdrl_core::Result<Vec<RunLog>> = match &req.kind {
            JobKind::Train { variant } => {
                let spec = harness::ExperimentSpec {
                    config: cfg.clone(),
                    variant: *variant,
                    output: Some(output),
                };
                harness::train(&spec, workers, &progress)
            }
            JobKind::Sweep { variants } => harness::sweep(&cfg, variants, Some(&output), workers, &progress),
        };
        let finished = result.and_then(|logs| Ok((metrics_csv(&logs)?, harness::aggregate(&logs, &cfg.scenario)?)));
        let _ = st.with_job(id, |job| match finished {
            Ok((metrics, summary)) => {
                job.metrics = Some(metrics);
                job.summary = Some(summary);
                job.info.state = JobState::Succeeded;
            }
            Err(e) => {
                tracing::warn!(id, error = %e, "job failed");
                job.info.state = JobState::Failed;
                job.info.error = Some(e.into());
            }
        });
    });
    Ok((StatusCode::ACCEPTED, Json(info)).into_response())
}

async fn list_jobs(State(state): State<AppState>) -> Json<Vec<JobInfo>> {
    Json(state.inner.jobs.lock().expect("job table").iter().map(|j| j.info.clone()).collect())
}

async fn job_info(State(state): State<AppState>, UrlPath(id): UrlPath<u64>) -> ApiResult<JobInfo> {
    Ok(Json(state.with_job(id, |j| j.info.clone())?))
}

#[derive(Deserialize)]
struct Since {
    #[serde(default)]
    since: usize,
}

async fn job_events(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<u64>,
    Query(q): Query<Since>,
) -> ApiResult<JobEvents> {
    Ok(Json(state.with_job(id, |j| JobEvents {
        state: j.info.state,
        events: j.events.get(q.since..).unwrap_or_default().to_vec(),
        next: j.events.len(),
    })?))
}

fn finished<T>(j: &Job, pick: impl FnOnce(&Job) -> Option<T>) -> Result<T, AppError> {
    match j.info.state {
        JobState::Running => Err(AppError(ApiError::new(
            ErrorKind::Usage,
            format!("job {} is still running", j.info.id),
        ))),
        JobState::Failed => Err(AppError(j.info.error.clone().unwrap_or_else(|| {
            ApiError::new(ErrorKind::Internal, format!("job {} failed", j.info.id))
        }))),
        JobState::Succeeded => pick(j).ok_or_else(|| AppError(ApiError::new(ErrorKind::Internal, "job result missing"))),
    }
}

async fn job_metrics(State(state): State<AppState>, UrlPath(id): UrlPath<u64>) -> Result<Response, AppError> {
    let csv = state.with_job(id, |j| finished(j, |j| j.metrics.clone()))??;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

async fn job_summary(State(state): State<AppState>, UrlPath(id): UrlPath<u64>) -> ApiResult<Summary> {
    Ok(Json(state.with_job(id, |j| finished(j, |j| j.summary.clone()))??))
}

async fn eval(State(state): State<AppState>, Json(req): Json<EvalRequest>) -> ApiResult<EvalResponse> {
    let dir = state.resolve(&req.checkpoint);
    let (variant, seed, episodes) =
        blocking(move || harness::evaluate_checkpoint(&dir, req.episodes, &req.overrides)).await?;
    Ok(Json(EvalResponse {
        variant,
        seed,
        episodes,
    }))
}

async fn export_plots(State(state): State<AppState>, Json(req): Json<ExportPlotsRequest>) -> ApiResult<ExportPlotsResponse> {
    let metrics = state.resolve(&req.metrics);
    let out = state.resolve(&req.out_dir);
    let files = blocking(move || harness::export_plots(&metrics, &out)).await?;
    Ok(Json(ExportPlotsResponse {
        files: files.iter().map(|p| p.display().to_string()).collect(),
    }))
}
