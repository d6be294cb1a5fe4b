//! HTTP service and CLI around `kgtriage-core`.
//!
//! The [`service::Service`] type owns the graph, review queue and sessions;
//! [`http::router`] and [`cli::run`] are two thin front ends over it.

pub mod cli;
pub mod config;
pub mod http;
pub mod service;
pub mod session;

use std::sync::Arc;

use kgtriage_core::diagnosis::DiagnosisOutcome;
use serde::Serialize;

use crate::service::Service;

/// Canonical rendering of a diagnosis outcome, shared by `POST /diagnose`
/// and `kgtriage diagnose`.
pub fn render(outcome: &DiagnosisOutcome) -> String {
    render_json(outcome)
}

pub fn render_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("response types serialize");
    s.push('\n');
    s
}

/// Serves the HTTP API until ctrl-c.
pub fn serve(service: Arc<Service>) -> std::io::Result<()> {
    let addr = service.config().listen;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(%addr, "listening");
        axum::serve(listener, http::router(service))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
}
