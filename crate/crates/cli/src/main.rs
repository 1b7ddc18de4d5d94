//! `hdwdrl`: command-line client of the experiment service.
//!
//! Every subcommand except `serve` talks to a service over HTTP. Without
//! `--server` (or `HDWDRL_SERVER`) an in-process service is started on a
//! loopback port for the duration of the command.
//!
//! Exit codes: 0 success, 1 usage or I/O, 2 configuration, 3 runtime
//! invariant violation or failed gradient check.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use hdwdrl_client::{Client, ClientError};
use hdwdrl_core::api::{
    ApiError, ConfigSource, ErrorKind, EvalRequest, ExportPlotsRequest, GradCheckRequest, JobKind, JobRequest,
    ValidateEnvRequest,
};
use hdwdrl_core::harness::Variant;
use hdwdrl_service::{serve, AppState};

#[derive(Parser)]
#[command(name = "hdwdrl", version, about = "Multi-UAV coverage and uplink training with hierarchical dynamic reward weighting")]
struct Cli {
    /// Base URL of a running service. An embedded service is used when unset.
    #[arg(long, env = "HDWDRL_SERVER", global = true)]
    server: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML config file. Built-in defaults apply to anything it leaves out.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Override one config value, e.g. `--set scenario.grid_h=6`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Comma-separated master seeds; replaces `training.seeds`.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service in the foreground.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
    /// Train one variant on every configured seed.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// hdwdrl, no_eac, no_sws or static_weight.
        #[arg(long, default_value = "hdwdrl")]
        variant: String,
        /// Output directory. Defaults to a fresh directory under the
        /// service's output root (`HDWDRL_OUTPUT_ROOT`).
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Seeds trained in parallel.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Train several variants on every configured seed.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "hdwdrl,no_eac,no_sws,static_weight")]
        variants: Vec<String>,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run greedy episodes from a checkpoint directory.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 3)]
        episodes: usize,
        /// Override a value of the checkpoint's config. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Finite-difference check of every network the config instantiates.
    CheckGradients {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random inputs per network.
        #[arg(long, default_value_t = 20)]
        inputs: usize,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        /// Largest acceptable relative error.
        #[arg(long, default_value_t = 1e-4, allow_negative_numbers = true)]
        tolerance: f64,
    },
    /// Random-policy rollouts with every simulator invariant checked.
    ValidateEnv {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        slots: usize,
        /// Write a JSON-lines slot trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Turn a metrics.csv into per-variant median and quartile series.
    ExportPlots {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Config(String),
    Invariant(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Config(_) => 2,
            Failure::Invariant(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Config(m) | Failure::Invariant(m) => m,
        }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Api(ApiError { kind, message, .. }) => match kind {
                ErrorKind::Config => Failure::Config(message),
                ErrorKind::Invariant | ErrorKind::Internal => Failure::Invariant(message),
                ErrorKind::Usage | ErrorKind::Io | ErrorKind::Format | ErrorKind::NotFound => Failure::Usage(message),
            },
            other => Failure::Usage(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::from(1);
        }
    };
    match rt.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

async fn run(cli: Cli) -> Outcome {
    if let Command::Serve { bind } = cli.command {
        return serve_foreground(bind).await;
    }
    let (client, _embedded) = match cli.server {
        Some(url) => (Client::new(url), None),
        None => {
            let (client, stop) = embedded().await?;
            (client, Some(stop))
        }
    };
    match cli.command {
        Command::Serve { .. } => unreachable!(),
        Command::Train {
            config,
            variant,
            output,
            workers,
        } => {
            let variant: Variant = variant.parse().map_err(|e: hdwdrl_core::Error| Failure::Usage(e.to_string()))?;
            run_job(&client, JobKind::Train { variant }, &config, output, workers).await
        }
        Command::Sweep {
            config,
            variants,
            output,
            workers,
        } => {
            let variants = variants
                .iter()
                .map(|v| v.parse())
                .collect::<Result<Vec<Variant>, _>>()
                .map_err(|e| Failure::Usage(e.to_string()))?;
            run_job(&client, JobKind::Sweep { variants }, &config, output, workers).await
        }
        Command::Eval {
            checkpoint,
            episodes,
            overrides,
        } => {
            let resp = client
                .eval(&EvalRequest {
                    checkpoint: absolute(&checkpoint)?,
                    episodes,
                    overrides,
                })
                .await?;
            for e in &resp.episodes {
                println!(
                    "{} seed={} eval {} C={:.3} R={:.3} T={} success={}",
                    resp.variant, resp.seed, e.index, e.coverage, e.comm, e.slots, e.success
                );
            }
            Ok(())
        }
        Command::CheckGradients {
            config,
            seed,
            inputs,
            eps,
            tolerance,
        } => {
            let resp = client
                .check_gradients(&GradCheckRequest {
                    source: source(&config)?,
                    seed,
                    inputs,
                    eps,
                    tolerance,
                })
                .await?;
            for n in &resp.networks {
                println!(
                    "{} {:<24} params={:<7} max_rel_error={:.3e}",
                    if n.passed { "PASS" } else { "FAIL" },
                    n.name,
                    n.parameters,
                    n.max_rel_error
                );
            }
            if resp.passed {
                Ok(())
            } else {
                Err(Failure::Invariant("gradient check failed".into()))
            }
        }
        Command::ValidateEnv {
            config,
            seed,
            slots,
            trace,
        } => {
            let resp = client
                .validate_env(&ValidateEnvRequest {
                    source: source(&config)?,
                    seed,
                    slots,
                    trace: trace.is_some(),
                })
                .await?;
            if let (Some(path), Some(text)) = (trace, resp.trace) {
                std::fs::write(&path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            }
            let r = &resp.report;
            println!(
                "ok: {} slots, {} episodes ({} successful, {} out of energy), longest {} slots",
                r.slots, r.episodes, r.successes, r.exhausted, r.max_episode_slots
            );
            println!(
                "mean final C={:.3} R={:.3}, {} served links, {:.3e} bits uploaded",
                r.mean_final_coverage, r.mean_final_comm, r.served_links, r.uploaded_bits
            );
            Ok(())
        }
        Command::ExportPlots { metrics, out } => {
            let resp = client
                .export_plots(&ExportPlotsRequest {
                    metrics: absolute(&metrics)?,
                    out_dir: absolute(&out)?,
                })
                .await?;
            for f in resp.files {
                println!("{f}");
            }
            Ok(())
        }
    }
}

fn source(args: &ConfigArgs) -> Result<ConfigSource, Failure> {
    let config_toml = match &args.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let mut overrides = args.overrides.clone();
    if !args.seeds.is_empty() {
        let list: Vec<String> = args.seeds.iter().map(u64::to_string).collect();
        overrides.push(format!("training.seeds=[{}]", list.join(", ")));
    }
    Ok(ConfigSource {
        config_toml,
        overrides,
    })
}

fn absolute(p: &Path) -> Result<String, Failure> {
    std::path::absolute(p)
        .map(|p| p.display().to_string())
        .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
}

async fn run_job(
    client: &Client,
    kind: JobKind,
    config: &ConfigArgs,
    output: Option<PathBuf>,
    workers: Option<usize>,
) -> Outcome {
    let info = client
        .submit_job(&JobRequest {
            kind,
            source: source(config)?,
            output: output.as_deref().map(absolute).transpose()?,
            workers,
        })
        .await?;
    println!("job {} writing to {}", info.id, info.output);
    client.wait(info.id, Duration::from_millis(200), |p| println!("{p}")).await?;
    let summary = client.summary(info.id).await?;
    for v in &summary.variants {
        let first = v
            .median_first_threshold_episode
            .map_or_else(|| "never".to_string(), |k| format!("{k}"));
        let t = v
            .final_eval_median_slots
            .map_or_else(|| "n/a".to_string(), |t| format!("{t}"));
        println!(
            "{}: median first episode meeting thresholds {first}, final greedy median T {t}",
            v.variant
        );
    }
    Ok(())
}

async fn embedded() -> Result<(Client, tokio::sync::oneshot::Sender<()>), Failure> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
        .await
        .map_err(|e| Failure::Usage(format!("cannot start embedded service: {e}")))?;
    let addr = listener
        .local_addr()
        .map_err(|e| Failure::Usage(format!("cannot start embedded service: {e}")))?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    tokio::spawn(serve(listener, AppState::from_env(), async {
        let _ = rx.await;
    }));
    Ok((Client::new(format!("http://{addr}")), tx))
}

async fn serve_foreground(bind: SocketAddr) -> Outcome {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| Failure::Usage(format!("cannot bind {bind}: {e}")))?;
    let state = AppState::from_env();
    println!(
        "listening on http://{}, outputs under {}",
        listener.local_addr().map_err(|e| Failure::Usage(e.to_string()))?,
        state.output_root().display()
    );
    serve(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
    .map_err(|e| Failure::Usage(e.to_string()))
}
