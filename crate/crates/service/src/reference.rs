//! A generation server speaking the remote wire protocol over the builtin
//! backend. Seeds a fresh ChaCha8 stream per request, so the same request
//! always yields the same text.

use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rumour_mill::params::parse_links_date;
use rumour_mill::textgen::{BackendError, BuiltinBackend, GenerationBackend, DEFAULT_MAX_TOKENS};
use rumour_mill::{ControlSpec, Genre, GenreMap};
use serde::de::DeserializeOwned;
use serde_json::json;

use crate::remote::{ErrorResponse, HeadlineRequest, StoryRequest, TextResponse};

#[derive(Clone)]
struct Generator {
    backend: Arc<BuiltinBackend>,
    genre_map: Arc<GenreMap>,
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(ErrorResponse { error: msg.into() })).into_response()
}

/// Decodes a request body, rejecting non-positive temperatures. Errors are
/// messages for a 400.
fn parse<T: DeserializeOwned>(body: &str, temperature: impl Fn(&T) -> f64) -> Result<T, String> {
    let req: T = serde_json::from_str(body).map_err(|e| e.to_string())?;
    let t = temperature(&req);
    if t.is_finite() && t > 0.0 {
        Ok(req)
    } else {
        Err("temperature must be a positive number".into())
    }
}

fn reply(result: Result<String, BackendError>) -> Response {
    match result {
        Ok(text) => Json(TextResponse { text }).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

/// Rebuilds the control spec a story request describes.
pub fn spec_from_request(req: &StoryRequest, genre_map: &GenreMap) -> Option<ControlSpec> {
    Some(ControlSpec {
        temperature: req.temperature,
        genre_code: req.genre_code.clone(),
        links_code: req.links_code.clone(),
        target_date: parse_links_date(&req.links_code)?,
        effective_genre: genre_map.genre_for_code(&req.genre_code)?,
    })
}

async fn headline(State(g): State<Generator>, body: String) -> Response {
    let req = match parse(&body, |r: &HeadlineRequest| r.temperature) {
        Ok(r) => r,
        Err(msg) => return error(StatusCode::BAD_REQUEST, msg),
    };
    let genre = match req.genre.parse::<Genre>() {
        Ok(g) if g != Genre::Random => g,
        _ => return error(StatusCode::BAD_REQUEST, format!("unknown genre {:?}", req.genre)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    reply(g.backend.generate_headline(req.temperature, genre, &mut rng))
}

async fn story(State(g): State<Generator>, body: String) -> Response {
    let req = match parse(&body, |r: &StoryRequest| r.temperature) {
        Ok(r) => r,
        Err(msg) => return error(StatusCode::BAD_REQUEST, msg),
    };
    if req.headline.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "headline is empty");
    }
    let Some(spec) = spec_from_request(&req, &g.genre_map) else {
        return error(StatusCode::BAD_REQUEST, "unknown genre_code or malformed links_code");
    };
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    reply(g.backend.generate_story(&req.headline, &spec, &mut rng, DEFAULT_MAX_TOKENS))
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

pub fn reference_router(backend: Arc<BuiltinBackend>, genre_map: Arc<GenreMap>) -> Router {
    Router::new()
        .route("/v1/headline", post(headline))
        .route("/v1/story", post(story))
        .route("/v1/health", get(health))
        .with_state(Generator { backend, genre_map })
}
