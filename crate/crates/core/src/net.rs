//! Small helpers for running HTTP services.

use std::net::SocketAddr;

use tokio::net::TcpListener;
use tokio::task::JoinHandle;
use tokio_util::sync::CancellationToken;

/// Binds `addr` (port 0 picks a free port) and serves `router` until
/// `cancel` fires. Returns the bound address.
pub async fn spawn_http(
    addr: &str,
    router: axum::Router,
    cancel: CancellationToken,
) -> std::io::Result<(SocketAddr, JoinHandle<()>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let task = tokio::spawn(async move {
        let served = axum::serve(listener, router)
            .with_graceful_shutdown(async move { cancel.cancelled().await })
            .await;
        if let Err(e) = served {
            tracing::error!(%local, error = %e, "server stopped");
        }
    });
    Ok((local, task))
}

/// Counts queued work items so callers can wait until none are left.
#[derive(Debug, Default)]
pub struct Backlog {
    pending: std::sync::atomic::AtomicI64,
    idle: tokio::sync::Notify,
}

impl Backlog {
    pub fn add(&self) {
        self.pending.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
    }

    pub fn done(&self) {
        if self.pending.fetch_sub(1, std::sync::atomic::Ordering::SeqCst) <= 1 {
            self.idle.notify_waiters();
        }
    }

    pub fn pending(&self) -> i64 {
        self.pending.load(std::sync::atomic::Ordering::SeqCst)
    }

    pub async fn wait_idle(&self) {
        loop {
            let notified = self.idle.notified();
            tokio::pin!(notified);
            notified.as_mut().enable();
            if self.pending() <= 0 {
                return;
            }
            tokio::select! {
                _ = notified => {}
                _ = tokio::time::sleep(std::time::Duration::from_millis(50)) => {}
            }
        }
    }
}
