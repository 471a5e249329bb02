//! Local rumour store that keeps the mill printing through backend outages.
//!
//! Rumours are queued FIFO per `(genre, when, wackiness bucket)`. Mutations
//! are appended to a line journal (`PUT <key> <base64 json>` /
//! `TAKE <key> <id>`) which is replayed and compacted when the store opens.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use log::{error, warn};
use thiserror::Error;
use uuid::Uuid;

use crate::params::{Genre, MillSettings, Wackiness, WhenSetting};
use crate::textgen::{Provenance, Rumour};

pub const BUCKETS: u8 = 4;
pub const DEFAULT_CAPACITY: usize = 8;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache journal I/O: {0}")]
    Io(#[from] io::Error),
    #[error("cache journal line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("cache persistence failed, running from memory: {0}")]
    PersistenceFailure(String),
    #[error("invalid cache key {0:?}")]
    BadKey(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey {
    pub genre: Genre,
    pub when: WhenSetting,
    pub bucket: u8,
}

impl CacheKey {
    /// The full key space in key order: 11 genres x 3 whens x 4 buckets.
    pub fn all() -> Vec<CacheKey> {
        let mut keys = Vec::with_capacity(132);
        for genre in Genre::CONCRETE {
            for when in WhenSetting::ALL {
                for bucket in 0..BUCKETS {
                    keys.push(CacheKey { genre, when, bucket });
                }
            }
        }
        keys
    }

    pub fn bucket_for(w: Wackiness) -> u8 {
        ((w.value() * f64::from(BUCKETS)).floor() as u8).min(BUCKETS - 1)
    }

    /// Midpoint of the bucket, used when generating stock for it.
    pub fn representative_wackiness(self) -> Wackiness {
        Wackiness::new((f64::from(self.bucket) + 0.5) / f64::from(BUCKETS)).expect("midpoint in range")
    }

    fn sibling(self, bucket: u8) -> CacheKey {
        CacheKey { bucket, ..self }
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.genre.slug(), self.when.slug(), self.bucket)
    }
}

impl FromStr for CacheKey {
    type Err = CacheError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CacheError::BadKey(s.to_string());
        let mut parts = s.split(':');
        let (Some(g), Some(w), Some(b), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let genre: Genre = g.parse().map_err(|_| bad())?;
        let when: WhenSetting = w.parse().map_err(|_| bad())?;
        let bucket: u8 = b.parse().map_err(|_| bad())?;
        if genre == Genre::Random || bucket >= BUCKETS || g != genre.slug() {
            return Err(bad());
        }
        Ok(CacheKey { genre, when, bucket })
    }
}

pub fn cache_key(settings: &MillSettings, effective_genre: Genre) -> CacheKey {
    assert_ne!(effective_genre, Genre::Random, "cache keys need a resolved genre");
    CacheKey {
        genre: effective_genre,
        when: settings.when,
        bucket: CacheKey::bucket_for(settings.wackiness),
    }
}

#[derive(Debug)]
struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    fn append(&mut self, line: &str) -> io::Result<()> {
        self.file.write_all(line.as_bytes())?;
        self.file.write_all(b"\n")?;
        self.file.flush()?;
        self.file.sync_data()
    }
}

enum Record {
    Put(CacheKey, Rumour),
    Take(CacheKey, Uuid),
}

fn encode_put(key: CacheKey, rumour: &Rumour) -> String {
    let json = serde_json::to_vec(rumour).expect("rumour serializes");
    format!("PUT {key} {}", BASE64.encode(json))
}

fn parse_record(line: &str) -> Result<Record, String> {
    let mut parts = line.split(' ');
    let (Some(op), Some(key), Some(arg), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err("expected '<OP> <key> <arg>'".into());
    };
    let key: CacheKey = key.parse().map_err(|e: CacheError| e.to_string())?;
    match op {
        "PUT" => {
            let blob = BASE64.decode(arg).map_err(|e| format!("bad base64: {e}"))?;
            let rumour = serde_json::from_slice(&blob).map_err(|e| format!("bad rumour: {e}"))?;
            Ok(Record::Put(key, rumour))
        }
        "TAKE" => Ok(Record::Take(key, arg.parse().map_err(|e| format!("bad id: {e}"))?)),
        other => Err(format!("unknown record type {other:?}")),
    }
}

#[derive(Debug)]
pub struct CacheStore {
    queues: BTreeMap<CacheKey, VecDeque<Rumour>>,
    capacity: usize,
    journal: Option<Journal>,
    degraded: bool,
}

impl CacheStore {
    pub fn in_memory(capacity: usize) -> Self {
        assert!(capacity > 0, "cache capacity must be positive");
        Self {
            queues: BTreeMap::new(),
            capacity,
            journal: None,
            degraded: false,
        }
    }

    /// Opens a journal-backed store, replaying and compacting any existing
    /// journal. A torn final line (no trailing newline) is dropped.
    pub fn open(path: impl AsRef<Path>, capacity: usize) -> Result<Self, CacheError> {
        let path = path.as_ref().to_path_buf();
        let mut store = Self::in_memory(capacity);
        match std::fs::read(&path) {
            Ok(bytes) => {
                let text = String::from_utf8(bytes).map_err(|e| CacheError::Corrupt {
                    line: 0,
                    reason: format!("not UTF-8: {e}"),
                })?;
                let mut lines: Vec<&str> = text.split('\n').collect();
                if let Some(tail) = lines.pop() {
                    if !tail.is_empty() {
                        warn!("dropping torn journal tail in {}", path.display());
                    }
                }
                for (idx, line) in lines.iter().enumerate() {
                    let corrupt = |reason: String| CacheError::Corrupt { line: idx + 1, reason };
                    match parse_record(line).map_err(corrupt)? {
                        Record::Put(key, rumour) => store.push(key, rumour),
                        Record::Take(key, id) => {
                            let queue = store.queues.entry(key).or_default();
                            let pos = queue
                                .iter()
                                .position(|r| r.id == id)
                                .ok_or_else(|| corrupt(format!("TAKE of unknown rumour {id}")))?;
                            queue.remove(pos);
                        }
                    }
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        store.compact_to(&path)?;
        let file = OpenOptions::new().append(true).create(true).open(&path)?;
        store.journal = Some(Journal { path, file });
        Ok(store)
    }

    fn compact_to(&self, path: &Path) -> Result<(), CacheError> {
        let tmp = path.with_extension("compact");
        {
            let mut out = File::create(&tmp)?;
            for (key, queue) in &self.queues {
                for rumour in queue {
                    out.write_all(encode_put(*key, rumour).as_bytes())?;
                    out.write_all(b"\n")?;
                }
            }
            out.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    fn push(&mut self, key: CacheKey, rumour: Rumour) {
        let queue = self.queues.entry(key).or_default();
        queue.push_back(rumour);
        while queue.len() > self.capacity {
            queue.pop_front();
        }
    }

    fn log(&mut self, line: String) -> Result<(), CacheError> {
        let Some(journal) = self.journal.as_mut() else {
            return Ok(());
        };
        journal.append(&line).map_err(|e| {
            self.degraded = true;
            CacheError::PersistenceFailure(format!("{}: {e}", journal.path.display()))
        })
    }

    /// Appends to the key's queue, evicting the oldest entry when full. The
    /// in-memory update happens even when the journal write fails.
    pub fn put(&mut self, key: CacheKey, rumour: Rumour) -> Result<(), CacheError> {
        let line = encode_put(key, &rumour);
        self.push(key, rumour);
        self.log(line)
    }

    /// Removes the oldest rumour for `key`, falling back to the nearest
    /// bucket of the same genre and time setting (ties toward the lower
    /// bucket).
    pub fn take(&mut self, key: CacheKey) -> Option<Rumour> {
        let mut buckets: Vec<u8> = (0..BUCKETS).collect();
        buckets.sort_by_key(|b| (b.abs_diff(key.bucket), *b));
        let source = buckets
            .into_iter()
            .map(|b| key.sibling(b))
            .find(|k| self.queues.get(k).is_some_and(|q| !q.is_empty()))?;
        let mut rumour = self.queues.get_mut(&source)?.pop_front()?;
        if let Err(e) = self.log(format!("TAKE {source} {}", rumour.id)) {
            error!("{e}");
        }
        rumour.provenance = Provenance::Cache;
        Some(rumour)
    }

    pub fn len(&self, key: CacheKey) -> usize {
        self.queues.get(&key).map_or(0, VecDeque::len)
    }

    pub fn is_empty(&self) -> bool {
        self.queues.values().all(VecDeque::is_empty)
    }

    pub fn total(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// True once a journal write has failed.
    pub fn is_degraded(&self) -> bool {
        self.degraded
    }

    /// Queue length for every key in the key space.
    pub fn counts(&self) -> BTreeMap<CacheKey, usize> {
        CacheKey::all().into_iter().map(|k| (k, self.len(k))).collect()
    }

    /// Queue contents in order, for inspection and tests.
    pub fn queue(&self, key: CacheKey) -> Vec<&Rumour> {
        self.queues.get(&key).map(|q| q.iter().collect()).unwrap_or_default()
    }

    /// Keys below `target`, most depleted first, then in key order.
    pub fn refill_plan(&self, target: usize) -> Vec<(CacheKey, usize)> {
        let target = target.min(self.capacity);
        let mut plan: Vec<(CacheKey, usize)> = CacheKey::all()
            .into_iter()
            .filter_map(|k| {
                let len = self.len(k);
                (len < target).then(|| (k, target - len))
            })
            .collect();
        plan.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        plan
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::params::ControlSpec;
    use chrono::{NaiveDate, TimeZone, Utc};

    pub(crate) fn rumour(n: u128, genre: Genre, when: WhenSetting, w: f64) -> Rumour {
        Rumour {
            id: Uuid::from_u128(n),
            headline: format!("Headline {n}"),
            body: format!("Body {n}."),
            settings: MillSettings {
                wackiness: Wackiness::new(w).unwrap(),
                genre,
                when,
            },
            spec: ControlSpec {
                temperature: 0.5,
                genre_code: "Politics".into(),
                links_code: "Links https://example.com/2020/01/01/".into(),
                target_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
                effective_genre: genre,
            },
            created_at: Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(),
            provenance: Provenance::Live,
        }
    }

    fn key(genre: Genre, when: WhenSetting, bucket: u8) -> CacheKey {
        CacheKey { genre, when, bucket }
    }

    fn settings(w: f64, genre: Genre, when: WhenSetting) -> MillSettings {
        MillSettings {
            wackiness: Wackiness::new(w).unwrap(),
            genre,
            when,
        }
    }

    #[test]
    fn bucket_rule() {
        let k = |w, g, when| cache_key(&settings(w, g, when), g).bucket;
        assert_eq!(k(0.0, Genre::Politics, WhenSetting::Past), 0);
        assert_eq!(k(1.0, Genre::Politics, WhenSetting::Past), 3);
        assert_eq!(k(0.49, Genre::FoxSports, WhenSetting::Future), 1);
        assert_eq!(k(0.75, Genre::FoxSports, WhenSetting::Future), 3);
        assert_eq!(k(0.7499, Genre::FoxSports, WhenSetting::Future), 2);
    }

    #[test]
    #[should_panic]
    fn random_genre_has_no_key() {
        cache_key(&settings(0.1, Genre::Random, WhenSetting::Past), Genre::Random);
    }

    #[test]
    fn key_space_and_text_form() {
        let all = CacheKey::all();
        assert_eq!(all.len(), 132);
        for k in &all {
            assert_eq!(k.to_string().parse::<CacheKey>().unwrap(), *k);
        }
        assert_eq!(key(Genre::ChiTweets, WhenSetting::Future, 2).to_string(), "chi-tweets:future:2");
        for bad in ["random:past:0", "politics:past:4", "politics:past", "Politics:past:0", "politics:later:1"] {
            assert!(bad.parse::<CacheKey>().is_err(), "{bad}");
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut store = CacheStore::in_memory(8);
        let k = key(Genre::Politics, WhenSetting::Past, 0);
        for n in 0..9 {
            store.put(k, rumour(n, Genre::Politics, WhenSetting::Past, 0.1)).unwrap();
        }
        let ids: Vec<u128> = store.queue(k).iter().map(|r| r.id.as_u128()).collect();
        assert_eq!(ids, (1..9).collect::<Vec<_>>());
    }

    #[test]
    fn take_is_fifo_and_marks_provenance() {
        let mut store = CacheStore::in_memory(8);
        let k = key(Genre::Politics, WhenSetting::Past, 0);
        store.put(k, rumour(1, Genre::Politics, WhenSetting::Past, 0.1)).unwrap();
        store.put(k, rumour(2, Genre::Politics, WhenSetting::Past, 0.1)).unwrap();
        let r = store.take(k).unwrap();
        assert_eq!(r.id.as_u128(), 1);
        assert_eq!(r.provenance, Provenance::Cache);
        assert_eq!(store.len(k), 1);
    }

    #[test]
    fn nearest_bucket_fallback() {
        let mut store = CacheStore::in_memory(8);
        let g = Genre::FoxSports;
        let w = WhenSetting::Present;
        store.put(key(g, w, 0), rumour(10, g, w, 0.1)).unwrap();
        store.put(key(g, w, 2), rumour(12, g, w, 0.6)).unwrap();
        store.put(key(g, w, 3), rumour(13, g, w, 0.9)).unwrap();
        // bucket 1 empty: 0 and 2 tie at distance 1, lower wins
        assert_eq!(store.take(key(g, w, 1)).unwrap().id.as_u128(), 10);
        assert_eq!(store.take(key(g, w, 1)).unwrap().id.as_u128(), 12);
        assert_eq!(store.take(key(g, w, 1)).unwrap().id.as_u128(), 13);
        assert!(store.take(key(g, w, 1)).is_none());
        // other (genre, when) pairs are never used
        store.put(key(g, WhenSetting::Past, 1), rumour(14, g, WhenSetting::Past, 0.3)).unwrap();
        assert!(store.take(key(g, w, 1)).is_none());
    }

    #[test]
    fn refill_plans() {
        let mut store = CacheStore::in_memory(8);
        let plan = store.refill_plan(2);
        assert_eq!(plan.len(), 132);
        assert!(plan.iter().all(|(_, d)| *d == 2));
        assert_eq!(plan[0].0, CacheKey::all()[0]);

        for k in CacheKey::all() {
            store.put(k, rumour(k.bucket as u128, k.genre, k.when, 0.1)).unwrap();
            store.put(k, rumour(100 + k.bucket as u128, k.genre, k.when, 0.1)).unwrap();
        }
        assert!(store.refill_plan(2).is_empty());
        let k = key(Genre::ScienceNews, WhenSetting::Future, 3);
        store.take(k).unwrap();
        assert_eq!(store.refill_plan(2), vec![(k, 1)]);
    }

    #[test]
    fn refill_plan_orders_by_deficit() {
        let mut store = CacheStore::in_memory(8);
        let first = CacheKey::all()[0];
        store.put(first, rumour(1, first.genre, first.when, 0.1)).unwrap();
        let plan = store.refill_plan(2);
        assert_eq!(plan.last().unwrap(), &(first, 1));
        assert_eq!(plan[0], (CacheKey::all()[1], 2));
    }

    #[test]
    fn journal_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.journal");
        let k = key(Genre::Politics, WhenSetting::Present, 2);
        {
            let mut store = CacheStore::open(&path, 8).unwrap();
            store.put(k, rumour(1, Genre::Politics, WhenSetting::Present, 0.6)).unwrap();
            store.put(k, rumour(2, Genre::Politics, WhenSetting::Present, 0.6)).unwrap();
            store.put(k, rumour(3, Genre::Politics, WhenSetting::Present, 0.6)).unwrap();
            store.take(k).unwrap();
        }
        let store = CacheStore::open(&path, 8).unwrap();
        let ids: Vec<u128> = store.queue(k).iter().map(|r| r.id.as_u128()).collect();
        assert_eq!(ids, vec![2, 3]);
        // compaction leaves only live PUTs
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().all(|l| l.starts_with("PUT politics:present:2 ")));
    }

    #[test]
    fn torn_tail_is_dropped_and_garbage_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.journal");
        let k = key(Genre::Politics, WhenSetting::Past, 0);
        let good = encode_put(k, &rumour(1, Genre::Politics, WhenSetting::Past, 0.1));
        std::fs::write(&path, format!("{good}\nPUT politics:past:0 AAA")).unwrap();
        let store = CacheStore::open(&path, 8).unwrap();
        assert_eq!(store.len(k), 1);

        std::fs::write(&path, format!("{good}\nHELLO world\n")).unwrap();
        assert!(matches!(CacheStore::open(&path, 8), Err(CacheError::Corrupt { line: 2, .. })));
        std::fs::write(&path, format!("TAKE politics:past:0 {}\n", Uuid::from_u128(7))).unwrap();
        assert!(matches!(CacheStore::open(&path, 8), Err(CacheError::Corrupt { line: 1, .. })));
    }

    #[test]
    fn persistence_failure_keeps_memory_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.journal");
        let mut store = CacheStore::open(&path, 8).unwrap();
        // Swap the journal handle for a read-only one so writes fail.
        store.journal.as_mut().unwrap().file = File::open(&path).unwrap();
        let k = key(Genre::Politics, WhenSetting::Past, 0);
        let err = store.put(k, rumour(1, Genre::Politics, WhenSetting::Past, 0.1)).unwrap_err();
        assert!(matches!(err, CacheError::PersistenceFailure(_)));
        assert!(store.is_degraded());
        assert_eq!(store.len(k), 1);
        assert!(store.take(k).is_some());
    }
}
