//! Core of the rumour mill: panel settings become generation controls, a
//! two-stage generator produces a headline and story, a local cache keeps
//! the mill printing through outages, and rumours are rendered as
//! thermal-printer tickets.

pub mod assets;
pub mod cache;
pub mod clock;
pub mod mill;
pub mod panel;
pub mod params;
pub mod textgen;
pub mod ticket;

pub use cache::{cache_key, CacheError, CacheKey, CacheStore};
pub use clock::{Clock, FixedClock, SystemClock};
pub use mill::{run_mill_loop, Controller, MillContext, MillJob, RefillReport, TicketKind, TicketRecord};
pub use panel::{EventKind, InputEvent, PanelState};
pub use params::{ControlSpec, DateWindow, Genre, GenreMap, MillSettings, Wackiness, WhenSetting};
pub use textgen::{BackendError, BuiltinBackend, GenerationBackend, Health, Provenance, Rumour};
pub use ticket::{render_ticket, Ticket};
