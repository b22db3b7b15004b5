//! HTTP session service for interactive editing.
//!
//! A session holds an image, its mask and the current recipe. Clients start
//! optimization jobs, patch parameters and fetch previews rendered at any
//! strength `alpha` in `[0, 1.5]`.
//!
//! | Route | |
//! |---|---|
//! | `POST /sessions` | multipart `image`, `mask`, optional `resize_mask=true` |
//! | `GET`/`DELETE /sessions/{id}` | summary / drop |
//! | `POST /sessions/{id}/optimize` | `{mode, iters, seed, styles}`, 202 |
//! | `GET /sessions/{id}/status` | job state and trace |
//! | `GET /sessions/{id}/render?alpha=&max_dim=` | PNG preview |
//! | `GET`/`PATCH /sessions/{id}/params` | recipe document / merge patch |
//! | `GET /sessions/{id}/styles` | every style of the last job |
//! | `GET /sessions/{id}/saliency?stage=before\|after` | 16-bit PGM |
//! | `GET /sessions/{id}/metrics` | metric report (values x100) |

pub mod config;
pub mod error;
mod handlers;
pub mod session;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::DefaultBodyLimit;
use axum::http::HeaderValue;
use axum::routing::{get, post};
use axum::Router;
use tower_http::cors::{Any, CorsLayer};
use tower_http::limit::RequestBodyLimitLayer;
use tower_http::services::ServeDir;

pub use config::ServiceConfig;
pub use error::ApiError;
pub use session::{JobStatus, SessionStore};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        AppState {
            store: Arc::new(SessionStore::new(config.persist_dir.clone())),
            config: Arc::new(config),
        }
    }
}

pub fn router(state: AppState) -> Router {
    let cors = match &state.config.cors_origin {
        Some(origin) => match HeaderValue::from_str(origin) {
            Ok(v) => CorsLayer::new().allow_origin(v),
            Err(_) => {
                log::warn!("ignoring invalid CORS origin {origin:?}");
                CorsLayer::new().allow_origin(Any)
            }
        },
        None => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods(Any)
    .allow_headers(Any);

    let limit = state.config.upload_limit;
    let api = Router::new()
        .route("/health", get(handlers::health))
        .route("/sessions", post(handlers::create_session))
        .route("/sessions/{id}", get(handlers::get_session).delete(handlers::delete_session))
        .route("/sessions/{id}/optimize", post(handlers::start_optimize))
        .route("/sessions/{id}/status", get(handlers::status))
        .route("/sessions/{id}/render", get(handlers::render))
        .route("/sessions/{id}/params", get(handlers::get_params).patch(handlers::patch_params))
        .route("/sessions/{id}/styles", get(handlers::styles))
        .route("/sessions/{id}/saliency", get(handlers::saliency))
        .route("/sessions/{id}/metrics", get(handlers::metrics));
    let app = match &state.config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(DefaultBodyLimit::max(limit))
        .layer(RequestBodyLimitLayer::new(limit))
        .layer(cors)
        .with_state(state)
}

/// Periodically drops idle sessions.
pub fn spawn_reaper(state: &AppState, every: Duration) -> tokio::task::JoinHandle<()> {
    let store = state.store.clone();
    let ttl = state.config.session_ttl;
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every);
        loop {
            tick.tick().await;
            let n = store.evict_idle(ttl, Instant::now());
            if n > 0 {
                log::info!("dropped {n} idle sessions");
            }
        }
    })
}

/// Binds `addr` and serves until interrupted.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let state = AppState::new(config);
    spawn_reaper(&state, Duration::from_secs(60));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
