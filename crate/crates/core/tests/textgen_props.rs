use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, Mutex};

use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rumour_mill::textgen::{
    build_ngram_model, entropy, mill_once, temperature_distribution, temperature_sample, tokenize, BackendError,
    BuiltinBackend, GenerationBackend, PhraseLists,
};
use rumour_mill::{assets, CacheStore, ControlSpec, FixedClock, Genre, GenreMap, MillSettings, Wackiness, WhenSetting};

/// Direct evaluation of w^(1/T) / sum, independent of the log-space path.
fn brute_force_p(weights: &[f64], t: f64) -> Vec<f64> {
    let powered: Vec<f64> = weights.iter().map(|w| w.powf(1.0 / t)).collect();
    let total: f64 = powered.iter().sum();
    powered.iter().map(|x| x / total).collect()
}

proptest! {
    #[test]
    fn distribution_normalizes_and_matches_oracle(
        weights in prop::collection::vec(0.01f64..50.0, 1..=5),
        t in 0.1f64..3.0,
    ) {
        let p = temperature_distribution(&weights, t).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (a, b) in p.iter().zip(brute_force_p(&weights, t)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn entropy_grows_with_temperature(weights in prop::collection::vec(0.01f64..50.0, 2..=8)) {
        let h: Vec<f64> = [0.2, 0.5, 1.0, 1.5]
            .iter()
            .map(|t| entropy(&temperature_distribution(&weights, *t).unwrap()))
            .collect();
        for pair in h.windows(2) {
            prop_assert!(pair[1] >= pair[0] - 1e-12);
        }
    }

    #[test]
    fn sample_index_in_range(weights in prop::collection::vec(0.01f64..50.0, 1..=10), seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let i = temperature_sample(&weights, 0.7, &mut rng).unwrap();
        prop_assert!(i < weights.len());
    }

    #[test]
    fn ngram_counts_match_brute_force(
        docs in prop::collection::vec(prop::collection::vec(0usize..4, 3..20), 1..5),
        n in 2usize..=3,
    ) {
        let vocab = ["a", "b", "c.", "d"];
        let corpus: Vec<String> = docs
            .iter()
            .map(|d| d.iter().map(|i| vocab[*i]).collect::<Vec<_>>().join(" "))
            .collect();
        let model = build_ngram_model(&corpus, n, Genre::Politics).unwrap();

        let mut expected: BTreeMap<(Vec<String>, String), u32> = BTreeMap::new();
        for doc in &corpus {
            let toks = tokenize(doc);
            for i in 0..toks.len() + 1 - n {
                let ctx = toks[i..i + n - 1].to_vec();
                *expected.entry((ctx, toks[i + n - 1].clone())).or_default() += 1;
            }
        }
        let mut actual = BTreeMap::new();
        for (ctx, succ) in model.contexts() {
            for (tok, count) in succ {
                prop_assert!(*count > 0);
                actual.insert((ctx.clone(), tok.clone()), *count);
            }
        }
        prop_assert_eq!(actual, expected);
    }
}

#[test]
fn empirical_frequencies_track_analytic_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let weights = [5.0, 3.0, 1.0, 1.0];
    let draws = 100_000;
    for t in [0.2, 1.0, 1.5] {
        let p = brute_force_p(&weights, t);
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[temperature_sample(&weights, t, &mut rng).unwrap()] += 1;
        }
        for (i, pi) in p.iter().enumerate() {
            let sd = (draws as f64 * pi * (1.0 - pi)).sqrt();
            let diff = (counts[i] as f64 - draws as f64 * pi).abs();
            assert!(diff <= 3.0 * sd + 1e-9, "T={t} i={i} diff={diff} sd={sd}");
        }
    }
}

#[test]
fn headline_vocabularies_are_genre_specific() {
    let backend = BuiltinBackend::bundled().unwrap();
    let shipped = |g: Genre| PhraseLists::parse_tsv(assets::bundled(g).1).unwrap();
    let politics = shipped(Genre::Politics);
    let sports = shipped(Genre::FoxSports);
    let pv: HashSet<&String> = politics.vocabulary().collect();
    let sv: HashSet<&String> = sports.vocabulary().collect();
    assert!(pv.is_disjoint(&sv));

    for (genre, lists) in [(Genre::Politics, &politics), (Genre::FoxSports, &sports)] {
        let combos: HashSet<String> = lists
            .subjects
            .iter()
            .flat_map(|s| {
                lists.predicates.iter().flat_map(move |p| {
                    lists.objects.iter().map(move |o| {
                        let line = format!("{s} {p} {o}");
                        let mut c = line.chars();
                        let first = c.next().unwrap().to_uppercase().collect::<String>();
                        first + c.as_str()
                    })
                })
            })
            .collect();
        for seed in 0..1000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = backend.generate_headline_builtin(0.8, genre, &mut rng).unwrap();
            assert!(combos.contains(&h), "{genre}: {h}");
            let words = h.split_whitespace().count();
            assert!((4..=14).contains(&words));
        }
    }
}

#[test]
fn every_bundled_phrase_list_is_disjoint() {
    let mut seen: HashSet<String> = HashSet::new();
    for g in Genre::CONCRETE {
        let lists = PhraseLists::parse_tsv(assets::bundled(g).1).unwrap();
        for phrase in lists.vocabulary() {
            assert!(seen.insert(phrase.clone()), "{phrase} reused by {g}");
        }
    }
}

#[test]
fn headline_is_deterministic() {
    let backend = BuiltinBackend::bundled().unwrap();
    let gen = || backend.generate_headline_builtin(1.0, Genre::Politics, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
    assert_eq!(gen(), gen());
}

/// Records the prompt handed to the story stage.
struct Recording {
    inner: BuiltinBackend,
    headlines: Mutex<Vec<String>>,
    seeds: Mutex<Vec<String>>,
}

impl GenerationBackend for Recording {
    fn generate_headline(&self, t: f64, g: Genre, rng: &mut dyn RngCore) -> Result<String, BackendError> {
        let h = self.inner.generate_headline(t, g, rng)?;
        self.headlines.lock().unwrap().push(h.clone());
        Ok(h)
    }

    fn generate_story(&self, h: &str, s: &ControlSpec, rng: &mut dyn RngCore, n: usize) -> Result<String, BackendError> {
        self.seeds.lock().unwrap().push(h.to_string());
        self.inner.generate_story(h, s, rng, n)
    }
}

#[test]
fn story_stage_receives_exact_headline() {
    let backend = Recording {
        inner: BuiltinBackend::bundled().unwrap(),
        headlines: Mutex::new(Vec::new()),
        seeds: Mutex::new(Vec::new()),
    };
    let cache = Mutex::new(CacheStore::in_memory(8));
    let clock = FixedClock(Utc.with_ymd_and_hms(2020, 5, 4, 9, 30, 0).unwrap());
    let map = GenreMap::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..50 {
        let settings = MillSettings {
            wackiness: Wackiness::new((i % 11) as f64 / 10.0).unwrap(),
            genre: Genre::ALL[i % 12],
            when: WhenSetting::ALL[i % 3],
        };
        let r = mill_once(&settings, &backend, &cache, &map, &clock, &mut rng, 120).unwrap();
        assert_eq!(&r.headline, backend.headlines.lock().unwrap().last().unwrap());
    }
    assert_eq!(*backend.headlines.lock().unwrap(), *backend.seeds.lock().unwrap());
}

#[test]
fn end_to_end_determinism() {
    let backend = Arc::new(BuiltinBackend::bundled().unwrap());
    let clock = FixedClock(Utc.with_ymd_and_hms(2020, 5, 4, 9, 30, 0).unwrap());
    let map = GenreMap::default();
    let settings = MillSettings {
        wackiness: Wackiness::new(0.9).unwrap(),
        genre: Genre::Random,
        when: WhenSetting::Past,
    };
    let run = || {
        let cache = Mutex::new(CacheStore::in_memory(8));
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let r = mill_once(&settings, backend.as_ref(), &cache, &map, &clock, &mut rng, 120).unwrap();
        serde_json::to_string(&r).unwrap()
    };
    assert_eq!(run(), run());
}
