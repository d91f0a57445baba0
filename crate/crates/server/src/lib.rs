//! HTTP adapter over [`ocelink_core::pipeline`].
//!
//! Every route lives under `/api/v1`; payloads are JSON except uploads and
//! the store download, which are raw bytes. Each workspace is a directory
//! below the configured base directory.

mod error;
mod openapi;
mod routes;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::Router;

pub use error::ApiError;
pub use openapi::openapi_document;

pub const BASE_PATH: &str = "/api/v1";
/// Response header carrying the SHA-256 of a downloaded store.
pub const CONTENT_HASH_HEADER: &str = "x-content-sha256";

#[derive(Debug, Clone, Default)]
pub struct ServerConfig {
    /// Directory holding one subdirectory per workspace.
    pub base_dir: PathBuf,
    /// Shared bearer token; requests are unauthenticated when unset.
    pub token: Option<String>,
    /// Allowed CORS origin; any origin when unset.
    pub cors_origin: Option<String>,
}

pub fn router(config: ServerConfig) -> Router {
    routes::build(Arc::new(config))
}

pub async fn serve(config: ServerConfig, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(config)).await
}
