use std::path::PathBuf;
use std::time::Duration;

pub const DEFAULT_UPLOAD_LIMIT: usize = 32 * 1024 * 1024;
pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(3600);
pub const DEFAULT_PREVIEW_DIM: usize = 512;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Largest accepted request body, in bytes.
    pub upload_limit: usize,
    /// Idle time after which a session is dropped.
    pub session_ttl: Duration,
    /// Served at `/` when set.
    pub static_dir: Option<PathBuf>,
    /// Sessions are mirrored here and reloaded on startup when set.
    pub persist_dir: Option<PathBuf>,
    /// Allowed CORS origin; any origin when unset.
    pub cors_origin: Option<String>,
    pub preview_dim: usize,
    /// Largest `iters` an optimize request may ask for.
    pub max_iterations: usize,
    pub max_styles: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            upload_limit: DEFAULT_UPLOAD_LIMIT,
            session_ttl: DEFAULT_SESSION_TTL,
            static_dir: None,
            persist_dir: None,
            cors_origin: None,
            preview_dim: DEFAULT_PREVIEW_DIM,
            max_iterations: 1000,
            max_styles: 8,
        }
    }
}

impl ServiceConfig {
    /// Overrides defaults from `ATTNSHIFT_UPLOAD_LIMIT` (bytes),
    /// `ATTNSHIFT_SESSION_TTL` (seconds), `ATTNSHIFT_STATIC_DIR`,
    /// `ATTNSHIFT_PERSIST_DIR` and `ATTNSHIFT_CORS_ORIGIN`.
    pub fn from_env() -> Self {
        let mut cfg = ServiceConfig::default();
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        if let Some(v) = var("ATTNSHIFT_UPLOAD_LIMIT").and_then(|v| v.parse().ok()) {
            cfg.upload_limit = v;
        }
        if let Some(v) = var("ATTNSHIFT_SESSION_TTL").and_then(|v| v.parse().ok()) {
            cfg.session_ttl = Duration::from_secs(v);
        }
        cfg.static_dir = var("ATTNSHIFT_STATIC_DIR").map(PathBuf::from);
        cfg.persist_dir = var("ATTNSHIFT_PERSIST_DIR").map(PathBuf::from);
        cfg.cors_origin = var("ATTNSHIFT_CORS_ORIGIN");
        cfg
    }
}
