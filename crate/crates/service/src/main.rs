use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rumour_mill::mill::REFILL_BATCH;
use rumour_mill::ticket::Spool;
use rumour_mill::{BuiltinBackend, Clock, FixedClock, Genre, GenreMap, MillSettings, SystemClock, Wackiness, WhenSetting};
use rumour_mill_service::{reference_router, BackendChoice, Config, MillService};

#[derive(Parser)]
#[command(name = "mill", about = "Crank out printer-ready rumours")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mill one rumour and print the ticket text.
    Once {
        #[arg(long)]
        wackiness: f64,
        #[arg(long)]
        genre: Genre,
        #[arg(long)]
        when: WhenSetting,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        backend: Option<BackendChoice>,
        #[arg(long)]
        remote_url: Option<String>,
        /// Pin the clock, e.g. 2020-05-04T09:30:00Z.
        #[arg(long)]
        now: Option<DateTime<Utc>>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the mill service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one cache refill cycle.
    Refill {
        #[arg(long)]
        target: usize,
        #[arg(long, default_value_t = REFILL_BATCH)]
        max_generations: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Serve the remote generation protocol over the builtin backend.
    ReferenceServer {
        #[arg(long, default_value = "127.0.0.1:8700")]
        listen: String,
        #[arg(long)]
        genre_map: Option<PathBuf>,
    },
}

fn load(config: Option<&PathBuf>) -> anyhow::Result<Config> {
    match config {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn rng(seed: Option<u64>) -> ChaCha8Rng {
    seed.map_or_else(ChaCha8Rng::from_entropy, ChaCha8Rng::seed_from_u64)
}

fn runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

async fn serve(listen: &str, router: axum::Router) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen)
        .await
        .with_context(|| format!("binding {listen}"))?;
    info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Once {
            wackiness,
            genre,
            when,
            seed,
            backend,
            remote_url,
            now,
            width,
            config,
        } => {
            let mut config = load(config.as_ref())?;
            if let Some(b) = backend {
                config.backend = b;
            }
            if let Some(url) = remote_url {
                config.remote.base_url = url;
            }
            if let Some(w) = width {
                config.width = w;
            }
            config.validate()?;
            let settings = MillSettings {
                wackiness: Wackiness::new(wackiness)?,
                genre,
                when,
            };
            let clock: Arc<dyn Clock> = match now {
                Some(t) => Arc::new(FixedClock(t)),
                None => Arc::new(SystemClock),
            };
            let backend = config.backend()?;
            let ctx = config.mill_context(backend.backend, clock)?;
            let record = ctx.mill(&settings, &mut rng(seed));
            print!("{}", record.text());
        }
        Command::Serve { config } => {
            let config = Config::load(&config)?;
            let backend = config.backend()?;
            let ctx = config.mill_context(backend.backend.clone(), Arc::new(SystemClock))?;
            let spool = Spool::new(&config.spool_dir).with_context(|| format!("spool {}", config.spool_dir.display()))?;
            let service = MillService::start(ctx, spool, config.service_options());
            runtime()?.block_on(serve(&config.listen, service.router()))?;
        }
        Command::Refill {
            target,
            max_generations,
            config,
        } => {
            let config = load(config.as_ref())?;
            anyhow::ensure!(
                target <= config.cache.capacity,
                "target {target} exceeds cache capacity {}",
                config.cache.capacity
            );
            let backend = config.backend()?;
            let ctx = config.mill_context(backend.backend, Arc::new(SystemClock))?;
            let report = ctx.refill_once(target, max_generations, &mut rng(config.seed));
            println!(
                "attempted {} stocked {} failed {} cached {}",
                report.attempted,
                report.stocked,
                report.failed,
                ctx.cache.lock().unwrap().total()
            );
        }
        Command::ReferenceServer { listen, genre_map } => {
            let map = match genre_map {
                Some(p) => GenreMap::load(&p)?,
                None => GenreMap::default(),
            };
            let router = reference_router(Arc::new(BuiltinBackend::bundled()?), Arc::new(map));
            runtime()?.block_on(serve(&listen, router))?;
        }
    }
    Ok(())
}
