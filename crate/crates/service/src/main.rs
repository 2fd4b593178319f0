use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use mosaic_core::studio::{Studio, StudioOptions, ENV_WORKSPACE};
use mosaic_service::{router, AppState, DEFAULT_MAX_RUNS};

const ENV_PORT: &str = "MOSAIC_PORT";
const ENV_MAX_RUNS: &str = "MOSAIC_MAX_RUNS";

fn env_number<T: std::str::FromStr>(name: &str, default: T) -> Result<T, String> {
    match std::env::var(name) {
        Ok(v) => v.parse().map_err(|_| format!("{name}={v} is not a valid number")),
        Err(_) => Ok(default),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    match serve() {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("mosaic-server: {message}");
            ExitCode::FAILURE
        }
    }
}

fn serve() -> Result<(), String> {
    let workspace = std::env::var_os(ENV_WORKSPACE).ok_or(format!("{ENV_WORKSPACE} must name a workspace directory"))?;
    let port: u16 = env_number(ENV_PORT, 8080)?;
    let max_runs: usize = env_number(ENV_MAX_RUNS, DEFAULT_MAX_RUNS)?;

    // Blocking HTTP clients must be built outside the async runtime.
    let options = StudioOptions::from_env(PathBuf::from(workspace)).map_err(|e| e.to_string())?;
    let studio = Studio::open(options).map_err(|e| e.to_string())?;
    let state = AppState::new(studio, max_runs);
    let app = router(state.clone());

    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let served = runtime.block_on(async move {
        let addr = SocketAddr::from(([0, 0, 0, 0], port));
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| format!("bind {addr}: {e}"))?;
        tracing::info!(%addr, "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| e.to_string())
    });
    // The last reference to the blocking clients is dropped here, outside
    // the runtime.
    drop(runtime);
    drop(state);
    served
}
