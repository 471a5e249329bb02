use std::sync::Mutex;

use log::warn;
use rand::RngCore;
use thiserror::Error;
use uuid::Uuid;

use super::{GenerationBackend, Provenance, Rumour};
use crate::cache::{cache_key, CacheKey, CacheStore};
use crate::clock::Clock;
use crate::params::{build_control_spec, GenreMap, MillSettings, ParamsError};

pub const DEFAULT_MAX_TOKENS: usize = 120;

#[derive(Debug, Error, PartialEq)]
pub enum MillError {
    #[error(transparent)]
    Config(#[from] ParamsError),
    #[error("backend failed and no cached rumour for {0}")]
    NoRumourAvailable(CacheKey),
}

pub(crate) fn random_uuid(rng: &mut dyn RngCore) -> Uuid {
    let mut bytes = [0u8; 16];
    rng.fill_bytes(&mut bytes);
    uuid::Builder::from_random_bytes(bytes).into_uuid()
}

/// One milling: headline, then a story seeded by that headline. Live
/// results are also deposited in the cache; when the backend fails the
/// cache answers instead.
pub fn mill_once(
    settings: &MillSettings,
    backend: &dyn GenerationBackend,
    cache: &Mutex<CacheStore>,
    genre_map: &GenreMap,
    clock: &dyn Clock,
    rng: &mut dyn RngCore,
    max_tokens: usize,
) -> Result<Rumour, MillError> {
    let spec = build_control_spec(settings, clock.today(), genre_map, rng)?;
    let id = random_uuid(rng);
    let key = cache_key(settings, spec.effective_genre);

    let generated = backend
        .generate_headline(spec.temperature, spec.effective_genre, rng)
        .and_then(|headline| {
            let body = backend.generate_story(&headline, &spec, rng, max_tokens)?;
            Ok((headline, body))
        });

    match generated {
        Ok((headline, body)) if !headline.trim().is_empty() && !body.trim().is_empty() => {
            let rumour = Rumour {
                id,
                headline,
                body,
                settings: *settings,
                spec,
                created_at: clock.now(),
                provenance: Provenance::Live,
            };
            if let Err(e) = cache.lock().unwrap().put(key, rumour.clone()) {
                warn!("{e}");
            }
            Ok(rumour)
        }
        outcome => {
            match outcome {
                Err(e) => warn!("backend failed, trying cache for {key}: {e}"),
                Ok(_) => warn!("backend returned empty text, trying cache for {key}"),
            }
            let mut rumour = cache
                .lock()
                .unwrap()
                .take(key)
                .ok_or(MillError::NoRumourAvailable(key))?;
            rumour.settings = *settings;
            rumour.created_at = clock.now();
            rumour.provenance = Provenance::Cache;
            Ok(rumour)
        }
    }
}
