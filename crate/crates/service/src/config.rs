//! TOML service configuration.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! backend = "remote"          # or "builtin"
//! width = 32
//! spool_dir = "spool"
//! genre_map = "genres.conf"   # optional, bundled map otherwise
//! seed = 7                    # optional
//! long_poll_secs = 25
//!
//! [remote]
//! base_url = "http://gpu-box:8700"
//! timeout_ms = 8000
//! retries = 1
//! health_interval_ms = 10000
//!
//! [cache]
//! path = "cache.journal"      # optional, in memory otherwise
//! capacity = 8
//!
//! [refill]
//! interval_secs = 60
//! target = 1
//! ```

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::{bail, Context};
use rumour_mill::cache::DEFAULT_CAPACITY;
use rumour_mill::textgen::DEFAULT_MAX_TOKENS;
use rumour_mill::ticket::{DEFAULT_WIDTH, MIN_WIDTH};
use rumour_mill::{BuiltinBackend, CacheStore, Clock, GenerationBackend, GenreMap, MillContext};
use serde::{Deserialize, Serialize};

use crate::api::ServiceOptions;
use crate::remote::{HealthPoller, RemoteBackend, RemoteBackendConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    #[default]
    Builtin,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    pub path: Option<PathBuf>,
    pub capacity: usize,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            path: None,
            capacity: DEFAULT_CAPACITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefillConfig {
    pub interval_secs: u64,
    pub target: usize,
}

impl Default for RefillConfig {
    fn default() -> Self {
        Self {
            interval_secs: 60,
            target: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: String,
    pub backend: BackendChoice,
    pub remote: RemoteBackendConfig,
    pub cache: CacheConfig,
    pub width: usize,
    pub max_tokens: usize,
    pub spool_dir: PathBuf,
    pub genre_map: Option<PathBuf>,
    pub refill: RefillConfig,
    pub seed: Option<u64>,
    pub long_poll_secs: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            backend: BackendChoice::Builtin,
            remote: RemoteBackendConfig::default(),
            cache: CacheConfig::default(),
            width: DEFAULT_WIDTH,
            max_tokens: DEFAULT_MAX_TOKENS,
            spool_dir: PathBuf::from("spool"),
            genre_map: None,
            refill: RefillConfig::default(),
            seed: None,
            long_poll_secs: 25,
        }
    }
}

/// Backend plus whatever keeps its health snapshot fresh.
pub struct Backend {
    pub backend: Arc<dyn GenerationBackend>,
    pub poller: Option<HealthPoller>,
}

impl Config {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Relative paths are taken from the config file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config = Self::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(base) = path.parent() {
            let rebase = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            rebase(&mut config.spool_dir);
            config.cache.path.as_mut().map(rebase);
            config.genre_map.as_mut().map(rebase);
        }
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.width < MIN_WIDTH {
            bail!("width must be at least {MIN_WIDTH}");
        }
        if self.cache.capacity == 0 {
            bail!("cache capacity must be positive");
        }
        if self.refill.target > self.cache.capacity {
            bail!("refill target {} exceeds cache capacity {}", self.refill.target, self.cache.capacity);
        }
        if self.refill.interval_secs == 0 {
            bail!("refill interval must be positive");
        }
        if self.max_tokens == 0 {
            bail!("max_tokens must be positive");
        }
        if self.backend == BackendChoice::Remote {
            self.remote.validate()?;
        }
        Ok(())
    }

    pub fn genre_map(&self) -> anyhow::Result<GenreMap> {
        Ok(match &self.genre_map {
            Some(p) => GenreMap::load(p)?,
            None => GenreMap::default(),
        })
    }

    pub fn open_cache(&self) -> anyhow::Result<CacheStore> {
        Ok(match &self.cache.path {
            Some(p) => CacheStore::open(p, self.cache.capacity).with_context(|| format!("opening {}", p.display()))?,
            None => CacheStore::in_memory(self.cache.capacity),
        })
    }

    pub fn backend(&self) -> anyhow::Result<Backend> {
        Ok(match self.backend {
            BackendChoice::Builtin => Backend {
                backend: Arc::new(BuiltinBackend::bundled()?),
                poller: None,
            },
            BackendChoice::Remote => {
                let remote = RemoteBackend::new(self.remote.clone())?;
                let poller = remote.spawn_health_poller();
                Backend {
                    backend: Arc::new(remote),
                    poller: Some(poller),
                }
            }
        })
    }

    pub fn mill_context(&self, backend: Arc<dyn GenerationBackend>, clock: Arc<dyn Clock>) -> anyhow::Result<MillContext> {
        let mut ctx = MillContext::new(
            backend,
            Arc::new(Mutex::new(self.open_cache()?)),
            Arc::new(self.genre_map()?),
            clock,
        );
        ctx.width = self.width;
        ctx.max_tokens = self.max_tokens;
        Ok(ctx)
    }

    pub fn service_options(&self) -> ServiceOptions {
        ServiceOptions {
            long_poll: Duration::from_secs(self.long_poll_secs),
            refill_interval: Duration::from_secs(self.refill.interval_secs),
            refill_target: self.refill.target,
            seed: self.seed,
            ..ServiceOptions::default()
        }
    }
}
