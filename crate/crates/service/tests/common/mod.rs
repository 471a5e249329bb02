//! Stub generation servers shared by the integration tests.
#![allow(dead_code)]

use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Router;
use rumour_mill::{BuiltinBackend, GenreMap};
use rumour_mill_service::{reference_router, spawn_router, RemoteBackendConfig, ServerHandle};

#[derive(Debug, Clone)]
pub enum Fault {
    /// Answers {"text": ...} after this delay.
    Slow(Duration),
    Status(u16),
    Garbage,
    MissingText,
    /// 200 with a text naming the request's headline, if any.
    Echo,
}

pub struct Stub {
    pub server: ServerHandle,
    pub hits: Arc<AtomicUsize>,
    pub bodies: Arc<Mutex<Vec<String>>>,
}

impl Stub {
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn config(&self) -> RemoteBackendConfig {
        RemoteBackendConfig::new(self.server.base_url())
    }
}

pub fn stub(fault: Fault) -> Stub {
    let hits = Arc::new(AtomicUsize::new(0));
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let (h, b) = (hits.clone(), bodies.clone());
    let router = Router::new().fallback(move |body: String| {
        let fault = fault.clone();
        let (h, b) = (h.clone(), b.clone());
        async move {
            h.fetch_add(1, Ordering::SeqCst);
            b.lock().unwrap().push(body.clone());
            respond(fault, &body).await
        }
    });
    Stub {
        server: spawn_router(router, TcpListener::bind("127.0.0.1:0").unwrap()).unwrap(),
        hits,
        bodies,
    }
}

async fn respond(fault: Fault, body: &str) -> Response {
    match fault {
        Fault::Slow(d) => {
            tokio::time::sleep(d).await;
            axum::Json(serde_json::json!({"text": "late"})).into_response()
        }
        Fault::Status(code) => (
            StatusCode::from_u16(code).unwrap(),
            axum::Json(serde_json::json!({"error": "injected"})),
        )
            .into_response(),
        Fault::Garbage => (StatusCode::OK, "<html>not json").into_response(),
        Fault::MissingText => axum::Json(serde_json::json!({"txet": "X"})).into_response(),
        Fault::Echo => {
            let req: serde_json::Value = serde_json::from_str(body).unwrap_or_default();
            let text = match req.get("headline").and_then(|h| h.as_str()) {
                Some(h) => format!("Sources confirm: {h} More at eleven."),
                None => "X".to_string(),
            };
            axum::Json(serde_json::json!({ "text": text })).into_response()
        }
    }
}

/// A URL nothing listens on.
pub fn refused_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}")
}

pub fn reference_server() -> ServerHandle {
    let router = reference_router(Arc::new(BuiltinBackend::bundled().unwrap()), Arc::new(GenreMap::default()));
    spawn_router(router, TcpListener::bind("127.0.0.1:0").unwrap()).unwrap()
}

pub fn quick(config: RemoteBackendConfig) -> RemoteBackendConfig {
    RemoteBackendConfig {
        timeout_ms: 300,
        ..config
    }
}
