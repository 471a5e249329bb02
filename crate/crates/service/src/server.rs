//! Running an axum router on a background thread with its own runtime.

use std::future::IntoFuture;
use std::io;
use std::net::{SocketAddr, TcpListener};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::Router;
use log::error;
use tokio::sync::oneshot;

/// A server running on its own thread. Dropping the handle (or calling
/// [`ServerHandle::kill`]) closes the listener and every open connection.
#[derive(Debug)]
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn kill(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_now();
    }
}

pub fn spawn_router(router: Router, listener: TcpListener) -> io::Result<ServerHandle> {
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let (stop, stopped) = oneshot::channel::<()>();
    let thread = std::thread::Builder::new()
        .name(format!("http-{addr}"))
        .spawn(move || {
            runtime.block_on(async move {
                let listener = match tokio::net::TcpListener::from_std(listener) {
                    Ok(l) => l,
                    Err(e) => {
                        error!("{addr}: {e}");
                        return;
                    }
                };
                tokio::select! {
                    r = axum::serve(listener, router).into_future() => {
                        if let Err(e) = r {
                            error!("{addr}: {e}");
                        }
                    }
                    _ = stopped => {}
                }
            });
            // Drops in-flight connection tasks along with the runtime.
            runtime.shutdown_timeout(Duration::from_secs(1));
        })?;
    Ok(ServerHandle {
        addr,
        stop: Some(stop),
        thread: Some(thread),
    })
}

/// Binds `addr` and serves `router` in the background.
pub fn spawn_on(router: Router, addr: &str) -> io::Result<ServerHandle> {
    spawn_router(router, TcpListener::bind(addr)?)
}
