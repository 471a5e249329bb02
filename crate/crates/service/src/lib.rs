//! Network side of the rumour mill: the remote generation client, a
//! reference generation server, the mill's HTTP API and its configuration.

pub mod api;
pub mod config;
pub mod reference;
pub mod remote;
pub mod server;

pub use api::{MillService, ServiceOptions, StateView, TicketFeed, TicketView};
pub use config::{BackendChoice, Config};
pub use reference::reference_router;
pub use remote::{
    health, remote_generate_headline, remote_generate_story, RemoteBackend, RemoteBackendConfig, RemoteClient,
    RemoteError,
};
pub use server::{spawn_on, spawn_router, ServerHandle};
