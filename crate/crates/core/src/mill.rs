//! Milling and restocking: the glue between panel triggers, generation,
//! the cache and printed tickets.

use std::sync::mpsc::{Receiver, Sender};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use log::{error, info, warn};
use rand::RngCore;
use serde::Serialize;

use crate::cache::{CacheKey, CacheStore};
use crate::clock::Clock;
use crate::panel::{InputEvent, InvalidEvent, PanelState};
use crate::params::{build_control_spec, GenreMap, MillSettings};
use crate::textgen::pipeline::random_uuid;
use crate::textgen::{mill_once, GenerationBackend, Health, Provenance, Rumour, DEFAULT_MAX_TOKENS};
use crate::ticket::{render_apology, render_ticket, Ticket, DEFAULT_WIDTH};

/// Most generations one refill cycle may issue.
pub const REFILL_BATCH: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TicketKind {
    Live,
    Cache,
    Apology,
}

impl From<Provenance> for TicketKind {
    fn from(p: Provenance) -> Self {
        match p {
            Provenance::Live => TicketKind::Live,
            Provenance::Cache => TicketKind::Cache,
        }
    }
}

/// A printed ticket together with what produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TicketRecord {
    pub id: String,
    pub lines: Vec<String>,
    pub created_at: DateTime<Utc>,
    pub kind: TicketKind,
    pub settings: MillSettings,
    #[serde(skip)]
    pub escpos: Vec<u8>,
    #[serde(skip)]
    pub rumour: Option<Rumour>,
}

impl TicketRecord {
    fn new(ticket: Ticket, created_at: DateTime<Utc>, kind: TicketKind, settings: MillSettings) -> Self {
        Self {
            id: ticket.id,
            lines: ticket.lines,
            created_at,
            kind,
            settings,
            escpos: ticket.escpos,
            rumour: None,
        }
    }

    pub fn text(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }
}

/// Everything a milling needs apart from the rng.
#[derive(Clone)]
pub struct MillContext {
    pub backend: Arc<dyn GenerationBackend>,
    pub cache: Arc<Mutex<CacheStore>>,
    pub genre_map: Arc<GenreMap>,
    pub clock: Arc<dyn Clock>,
    pub width: usize,
    pub max_tokens: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RefillReport {
    pub attempted: usize,
    pub stocked: usize,
    pub failed: usize,
}

impl MillContext {
    pub fn new(
        backend: Arc<dyn GenerationBackend>,
        cache: Arc<Mutex<CacheStore>>,
        genre_map: Arc<GenreMap>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            backend,
            cache,
            genre_map,
            clock,
            width: DEFAULT_WIDTH,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    /// Mills one rumour and renders it. Never fails: when nothing can be
    /// produced the visitor gets an apology ticket instead.
    pub fn mill(&self, settings: &MillSettings, rng: &mut dyn RngCore) -> TicketRecord {
        match mill_once(
            settings,
            self.backend.as_ref(),
            &self.cache,
            &self.genre_map,
            self.clock.as_ref(),
            rng,
            self.max_tokens,
        ) {
            Ok(rumour) => {
                let ticket = render_ticket(&rumour, self.width);
                let mut record = TicketRecord::new(ticket, rumour.created_at, rumour.provenance.into(), *settings);
                record.rumour = Some(rumour);
                record
            }
            Err(e) => {
                warn!("issuing apology ticket: {e}");
                let now = self.clock.now();
                let id = random_uuid(rng).to_string();
                let ticket = render_apology(&id, settings, now, self.width);
                TicketRecord::new(ticket, now, TicketKind::Apology, *settings)
            }
        }
    }

    fn stock_one(&self, key: CacheKey, rng: &mut dyn RngCore) -> Result<(), String> {
        let settings = MillSettings {
            wackiness: key.representative_wackiness(),
            genre: key.genre,
            when: key.when,
        };
        let spec = build_control_spec(&settings, self.clock.today(), &self.genre_map, rng).map_err(|e| e.to_string())?;
        let id = random_uuid(rng);
        let headline = self
            .backend
            .generate_headline(spec.temperature, spec.effective_genre, rng)
            .map_err(|e| e.to_string())?;
        let body = self
            .backend
            .generate_story(&headline, &spec, rng, self.max_tokens)
            .map_err(|e| e.to_string())?;
        if headline.trim().is_empty() || body.trim().is_empty() {
            return Err("backend returned empty text".into());
        }
        let rumour = Rumour {
            id,
            headline,
            body,
            settings,
            spec,
            created_at: self.clock.now(),
            provenance: Provenance::Live,
        };
        if let Err(e) = self.cache.lock().unwrap().put(key, rumour) {
            warn!("{e}");
        }
        Ok(())
    }

    /// One restocking cycle: works through the refill plan for `target`,
    /// issuing at most `max_generations` generations, and only while the
    /// backend reports healthy. The cache lock is not held while generating.
    pub fn refill_once(&self, target: usize, max_generations: usize, rng: &mut dyn RngCore) -> RefillReport {
        let mut report = RefillReport::default();
        if self.backend.health() == Health::Down {
            info!("backend down, skipping refill");
            return report;
        }
        let plan = self.cache.lock().unwrap().refill_plan(target);
        let work = plan
            .into_iter()
            .flat_map(|(key, deficit)| std::iter::repeat_n(key, deficit))
            .take(max_generations);
        for key in work {
            report.attempted += 1;
            match self.stock_one(key, rng) {
                Ok(()) => report.stocked += 1,
                Err(e) => {
                    report.failed += 1;
                    warn!("refill for {key} failed: {e}");
                }
            }
        }
        report
    }
}

/// A queued milling request. `settings` is the panel snapshot taken at
/// trigger time.
#[derive(Debug)]
pub struct MillJob {
    pub settings: MillSettings,
    pub reply: Option<Sender<TicketRecord>>,
}

/// Owns the panel state and turns completed cranks into queued jobs.
#[derive(Debug)]
pub struct Controller {
    panel: PanelState,
    jobs: Sender<MillJob>,
    triggers: u64,
}

impl Controller {
    pub fn new(panel: PanelState, jobs: Sender<MillJob>) -> Self {
        Self {
            panel,
            jobs,
            triggers: 0,
        }
    }

    pub fn panel(&self) -> &PanelState {
        &self.panel
    }

    pub fn triggers(&self) -> u64 {
        self.triggers
    }

    /// Applies an event; a completed crank enqueues a milling of the
    /// settings as they stand right now.
    pub fn handle_event(&mut self, event: &InputEvent) -> Result<bool, InvalidEvent> {
        let fired = self.panel.apply_event(event)?;
        if fired {
            self.trigger(None);
        }
        Ok(fired)
    }

    /// Software trigger, equivalent to a full crank.
    pub fn trigger(&mut self, reply: Option<Sender<TicketRecord>>) {
        self.triggers += 1;
        let job = MillJob {
            settings: self.panel.current_settings(),
            reply,
        };
        if self.jobs.send(job).is_err() {
            error!("mill loop has stopped; trigger dropped");
        }
    }
}

/// Serves queued jobs in order until every sender is gone. Each job yields
/// exactly one ticket, handed to `sink` before any reply is sent.
pub fn run_mill_loop(
    jobs: Receiver<MillJob>,
    ctx: &MillContext,
    rng: &mut dyn RngCore,
    mut sink: impl FnMut(&TicketRecord),
) {
    for job in jobs {
        let record = ctx.mill(&job.settings, rng);
        sink(&record);
        if let Some(reply) = job.reply {
            let _ = reply.send(record);
        }
    }
}
