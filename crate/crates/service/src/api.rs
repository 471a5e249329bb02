//! The mill's HTTP API and the threads behind it.

use std::collections::{BTreeMap, VecDeque};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use log::{error, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rumour_mill::mill::REFILL_BATCH;
use rumour_mill::ticket::Spool;
use rumour_mill::{run_mill_loop, Controller, EventKind, Health, InputEvent, MillContext, PanelState, TicketRecord};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::watch;

use crate::remote::ErrorResponse;

/// What the feed hands out for one ticket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TicketView {
    pub id: String,
    pub lines: Vec<String>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub pot: u16,
    pub switch: u8,
    pub toggle: String,
    pub crank_deg: f64,
    pub backend: String,
    pub cache_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventBody {
    pub kind: EventKind,
    pub value: i64,
}

/// Recently printed tickets, oldest first. Bounded; the spool keeps the
/// full history on disk.
#[derive(Debug)]
pub struct TicketFeed {
    tickets: Mutex<VecDeque<TicketRecord>>,
    retain: usize,
    seq: watch::Sender<u64>,
}

impl TicketFeed {
    pub fn new(retain: usize) -> Self {
        Self {
            tickets: Mutex::new(VecDeque::new()),
            retain: retain.max(1),
            seq: watch::Sender::new(0),
        }
    }

    pub fn push(&self, record: TicketRecord) {
        {
            let mut t = self.tickets.lock().unwrap();
            t.push_back(record);
            while t.len() > self.retain {
                t.pop_front();
            }
        }
        self.seq.send_modify(|s| *s += 1);
    }

    /// Tickets after `since`. An unknown or absent id yields everything
    /// still retained.
    pub fn after(&self, since: Option<&str>) -> Vec<TicketView> {
        let t = self.tickets.lock().unwrap();
        let start = since
            .and_then(|id| t.iter().position(|r| r.id == id))
            .map_or(0, |i| i + 1);
        t.iter()
            .skip(start)
            .map(|r| TicketView {
                id: r.id.clone(),
                lines: r.lines.clone(),
                created_at: r.created_at,
            })
            .collect()
    }

    pub fn get(&self, id: &str) -> Option<TicketRecord> {
        self.tickets.lock().unwrap().iter().find(|r| r.id == id).cloned()
    }

    pub fn len(&self) -> usize {
        self.tickets.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn subscribe(&self) -> watch::Receiver<u64> {
        self.seq.subscribe()
    }
}

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub long_poll: Duration,
    pub refill_interval: Duration,
    /// 0 disables the refill loop.
    pub refill_target: usize,
    pub seed: Option<u64>,
    pub feed_retain: usize,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self {
            long_poll: Duration::from_secs(25),
            refill_interval: Duration::from_secs(60),
            refill_target: 1,
            seed: None,
            feed_retain: 1024,
        }
    }
}

struct AppState {
    controller: Mutex<Controller>,
    ctx: MillContext,
    feed: Arc<TicketFeed>,
    long_poll: Duration,
}

/// A running mill: the mill loop and refill loop threads plus the state
/// the HTTP API serves.
pub struct MillService {
    state: Arc<AppState>,
    refill_stop: Option<mpsc::Sender<()>>,
    refill_thread: Option<JoinHandle<()>>,
}

fn rng_for(seed: Option<u64>, stream: u64) -> ChaCha8Rng {
    match seed {
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            rng.set_stream(stream);
            rng
        }
        None => ChaCha8Rng::from_entropy(),
    }
}

impl MillService {
    pub fn start(ctx: MillContext, spool: Spool, opts: ServiceOptions) -> Self {
        let feed = Arc::new(TicketFeed::new(opts.feed_retain));
        let (jobs, queue) = mpsc::channel();

        let mill_ctx = ctx.clone();
        let mill_feed = feed.clone();
        let mut rng = rng_for(opts.seed, 0);
        std::thread::Builder::new()
            .name("mill-loop".into())
            .spawn(move || {
                run_mill_loop(queue, &mill_ctx, &mut rng, |record| {
                    if let Err(e) = spool.write_text(&record.id, &record.text()) {
                        error!("spooling ticket {}: {e}", record.id);
                    }
                    mill_feed.push(record.clone());
                });
            })
            .expect("spawning the mill loop");

        let (refill_stop, refill_thread) = if opts.refill_target > 0 {
            let (stop, wake) = mpsc::channel::<()>();
            let refill_ctx = ctx.clone();
            let mut rng = rng_for(opts.seed, 1);
            let (interval, target) = (opts.refill_interval, opts.refill_target);
            let thread = std::thread::Builder::new()
                .name("refill-loop".into())
                .spawn(move || loop {
                    let report = refill_ctx.refill_once(target, REFILL_BATCH, &mut rng);
                    if report.attempted > 0 {
                        info!("refill: {report:?}");
                    }
                    if !matches!(wake.recv_timeout(interval), Err(RecvTimeoutError::Timeout)) {
                        return;
                    }
                })
                .expect("spawning the refill loop");
            (Some(stop), Some(thread))
        } else {
            (None, None)
        };

        let state = Arc::new(AppState {
            controller: Mutex::new(Controller::new(PanelState::default(), jobs)),
            ctx,
            feed,
            long_poll: opts.long_poll,
        });
        Self {
            state,
            refill_stop,
            refill_thread,
        }
    }

    pub fn feed(&self) -> Arc<TicketFeed> {
        self.state.feed.clone()
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/api/state", get(get_state))
            .route("/api/events", post(post_event))
            .route("/api/mill", post(post_mill))
            .route("/api/tickets", get(get_tickets))
            .route("/api/tickets/{id}/escpos", get(get_escpos))
            .with_state(self.state.clone())
    }
}

impl Drop for MillService {
    fn drop(&mut self) {
        drop(self.refill_stop.take());
        if let Some(t) = self.refill_thread.take() {
            let _ = t.join();
        }
    }
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(ErrorResponse { error: msg.into() })).into_response()
}

async fn get_state(State(s): State<Arc<AppState>>) -> Json<StateView> {
    let panel = s.controller.lock().unwrap().panel().clone();
    let now = s.ctx.clock.now();
    let cache_counts = s
        .ctx
        .cache
        .lock()
        .unwrap()
        .counts()
        .into_iter()
        .map(|(k, n)| (k.to_string(), n))
        .collect();
    let backend = match s.ctx.backend.health() {
        Health::Up => "up",
        Health::Down => "down",
    };
    Json(StateView {
        pot: panel.pot_raw,
        switch: panel.switch_pos,
        toggle: panel.toggle_pos.slug().to_string(),
        crank_deg: panel.crank_deg_at(now),
        backend: backend.to_string(),
        cache_counts,
    })
}

async fn post_event(State(s): State<Arc<AppState>>, body: String) -> Response {
    let body: EventBody = match serde_json::from_str(&body) {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let event = InputEvent::new(body.kind, body.value, s.ctx.clock.now());
    let result = s.controller.lock().unwrap().handle_event(&event);
    match result {
        Ok(triggered) => (StatusCode::ACCEPTED, Json(json!({"triggered": triggered}))).into_response(),
        Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    }
}

async fn post_mill(State(s): State<Arc<AppState>>) -> Response {
    let (reply, done) = mpsc::channel();
    s.controller.lock().unwrap().trigger(Some(reply));
    match tokio::task::spawn_blocking(move || done.recv()).await {
        Ok(Ok(record)) => (StatusCode::CREATED, Json(json!({"ticket_id": record.id}))).into_response(),
        _ => error(StatusCode::SERVICE_UNAVAILABLE, "mill loop is not running"),
    }
}

#[derive(Debug, Deserialize)]
struct Since {
    since: Option<String>,
}

async fn get_tickets(State(s): State<Arc<AppState>>, Query(q): Query<Since>) -> Json<Vec<TicketView>> {
    // Subscribe before looking so a ticket landing in between still wakes us.
    let mut changes = s.feed.subscribe();
    let since = q.since.as_deref();
    let found = s.feed.after(since);
    if since.is_none() || !found.is_empty() {
        return Json(found);
    }
    let deadline = tokio::time::sleep(s.long_poll);
    tokio::pin!(deadline);
    loop {
        tokio::select! {
            _ = &mut deadline => return Json(Vec::new()),
            changed = changes.changed() => {
                if changed.is_err() {
                    return Json(Vec::new());
                }
                let found = s.feed.after(since);
                if !found.is_empty() {
                    return Json(found);
                }
            }
        }
    }
}

async fn get_escpos(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match s.feed.get(&id) {
        Some(record) => ([(header::CONTENT_TYPE, "application/octet-stream")], record.escpos).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("no ticket {id}")),
    }
}
