//! HTTP service for dose-finding designs, live trials and simulation studies.
//!
//! Every endpoint speaks JSON under `/api`; see `docs/api.md` for the schema.

mod error;
pub mod jobs;
mod routes;
pub mod store;

use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;

pub use error::{ApiError, ApiResult};
use jobs::Jobs;
use store::Store;

#[derive(Debug, Clone)]
pub struct Options {
    /// Simulation jobs allowed to run at once.
    pub workers: usize,
    /// Queued plus running jobs accepted before new submissions are refused.
    pub max_pending_jobs: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            workers: 2,
            max_pending_jobs: 32,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<Store>,
    jobs: Arc<Jobs>,
}

impl AppState {
    /// Opens `data_dir`, replaying every stored trial.
    pub fn open(data_dir: impl Into<PathBuf>, options: &Options) -> io::Result<Self> {
        Ok(Self {
            store: Arc::new(Store::open(data_dir)?),
            jobs: Arc::new(Jobs::new(options.workers, options.max_pending_jobs)),
        })
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(routes::health))
        .route("/api/designs/table", post(routes::design_table))
        .route("/api/decisions", post(routes::decision))
        .route(
            "/api/trials",
            post(routes::create_trial).get(routes::list_trials),
        )
        .route("/api/trials/{id}", get(routes::get_trial))
        .route("/api/trials/{id}/cohorts", post(routes::post_cohort))
        .route("/api/trials/{id}/whatif", post(routes::whatif))
        .route("/api/trials/{id}/finalize", post(routes::finalize))
        .route("/api/simulations", post(routes::submit_simulation))
        .route("/api/simulations/{id}", get(routes::get_simulation))
        .route(
            "/api/simulations/{id}/reports.csv",
            get(routes::simulation_reports_csv),
        )
        .route(
            "/api/simulations/{id}/comparison.csv",
            get(routes::simulation_comparison_csv),
        )
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(
    addr: SocketAddr,
    data_dir: impl Into<PathBuf>,
    options: Options,
) -> io::Result<()> {
    let app = router(AppState::open(data_dir, &options)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
