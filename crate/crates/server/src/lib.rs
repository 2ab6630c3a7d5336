//! HTTP service for triadic story sessions.

pub mod api;
pub mod config;
pub mod error;
pub mod idempotency;
pub mod view;

use std::future::Future;
use std::net::SocketAddr;

use triadtale_core::Engine;

pub use api::router;
pub use config::{ConfigError, ServeArgs};

/// Opens the engine and binds the listener. Returns the bound address
/// together with a future that serves until `shutdown` resolves, then
/// drains jobs.
pub async fn bind(
    args: &ServeArgs,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(SocketAddr, impl Future<Output = std::io::Result<()>>), ConfigError> {
    let engine = Engine::open(config::engine_config(args)?).await?;
    let addr = args.addr();
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ConfigError::Bind { addr, source })?;
    let local = listener.local_addr().map_err(|source| ConfigError::Bind { addr, source })?;
    let grace = args.grace();
    let app = router(engine.clone());
    let run = async move {
        axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
        engine.shutdown(grace).await;
        Ok(())
    };
    Ok((local, run))
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
}
