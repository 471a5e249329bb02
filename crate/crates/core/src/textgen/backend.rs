use std::collections::HashMap;
use std::path::Path;

use rand::RngCore;
use thiserror::Error;

use super::headline::PhraseLists;
use super::ngram::{build_ngram_model, tokenize, NgramModel};
use super::TextgenError;
use crate::assets;
use crate::params::{ControlSpec, Genre};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Health {
    Up,
    Down,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend protocol error: {0}")]
    Protocol(String),
    #[error("generation failed: {0}")]
    Generation(#[from] TextgenError),
}

/// A two-stage generator: a headline stage whose output seeds a
/// style-conditioned story stage. Implementations must be deterministic in
/// their inputs and the rng stream.
pub trait GenerationBackend: Send + Sync {
    fn generate_headline(
        &self,
        temperature: f64,
        genre: Genre,
        rng: &mut dyn RngCore,
    ) -> Result<String, BackendError>;

    fn generate_story(
        &self,
        headline: &str,
        spec: &ControlSpec,
        rng: &mut dyn RngCore,
        max_tokens: usize,
    ) -> Result<String, BackendError>;

    fn health(&self) -> Health {
        Health::Up
    }
}

/// The prompt handed to the story stage: the headline with a closing period.
pub fn story_seed(headline: &str) -> String {
    let h = headline.trim_end();
    if h.ends_with(['.', '!', '?']) {
        h.to_string()
    } else {
        format!("{h}.")
    }
}

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_STOP_SENTENCES: usize = 4;

/// Deterministic desk-scale backend: template headlines plus per-genre
/// n-gram stories.
#[derive(Debug, Clone)]
pub struct BuiltinBackend {
    models: HashMap<Genre, NgramModel>,
    phrases: HashMap<Genre, PhraseLists>,
    stop_sentences: usize,
}

/// Splits a corpus file into documents on blank lines.
pub fn split_documents(text: &str) -> Vec<String> {
    text.split("\n\n")
        .map(|d| d.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|d| !d.is_empty())
        .collect()
}

impl BuiltinBackend {
    /// Backend over the bundled corpora and phrase lists.
    pub fn bundled() -> Result<Self, TextgenError> {
        let mut backend = Self::empty();
        for genre in Genre::CONCRETE {
            let (corpus, tsv) = assets::bundled(genre);
            backend.add_genre(genre, corpus, tsv, DEFAULT_ORDER)?;
        }
        Ok(backend)
    }

    /// Loads `<genre>.txt` and `<genre>.headlines.tsv` for every genre
    /// present in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, TextgenError> {
        let mut backend = Self::empty();
        for genre in Genre::CONCRETE {
            let corpus_path = dir.join(format!("{}.txt", genre.slug()));
            let tsv_path = dir.join(format!("{}.headlines.tsv", genre.slug()));
            if !corpus_path.exists() && !tsv_path.exists() {
                continue;
            }
            let read = |p: &Path| {
                std::fs::read_to_string(p).map_err(|e| TextgenError::Asset(format!("{}: {e}", p.display())))
            };
            backend.add_genre(genre, &read(&corpus_path)?, &read(&tsv_path)?, DEFAULT_ORDER)?;
        }
        Ok(backend)
    }

    fn empty() -> Self {
        Self {
            models: HashMap::new(),
            phrases: HashMap::new(),
            stop_sentences: DEFAULT_STOP_SENTENCES,
        }
    }

    pub fn add_genre(&mut self, genre: Genre, corpus: &str, tsv: &str, order: usize) -> Result<(), TextgenError> {
        let model = build_ngram_model(&split_documents(corpus), order, genre)?;
        let phrases = PhraseLists::parse_tsv(tsv)?;
        self.models.insert(genre, model);
        self.phrases.insert(genre, phrases);
        Ok(())
    }

    pub fn with_stop_sentences(mut self, stop: usize) -> Self {
        self.stop_sentences = stop;
        self
    }

    pub fn phrases(&self, genre: Genre) -> Option<&PhraseLists> {
        self.phrases.get(&genre)
    }

    pub fn model(&self, genre: Genre) -> Option<&NgramModel> {
        self.models.get(&genre)
    }

    pub fn generate_headline_builtin(
        &self,
        temperature: f64,
        genre: Genre,
        rng: &mut dyn RngCore,
    ) -> Result<String, TextgenError> {
        if genre == Genre::Random {
            return Err(TextgenError::UnresolvedGenre);
        }
        self.phrases
            .get(&genre)
            .ok_or(TextgenError::ConfigMissing(genre))?
            .generate(temperature, rng)
    }
}

impl GenerationBackend for BuiltinBackend {
    fn generate_headline(
        &self,
        temperature: f64,
        genre: Genre,
        rng: &mut dyn RngCore,
    ) -> Result<String, BackendError> {
        Ok(self.generate_headline_builtin(temperature, genre, rng)?)
    }

    fn generate_story(
        &self,
        headline: &str,
        spec: &ControlSpec,
        rng: &mut dyn RngCore,
        max_tokens: usize,
    ) -> Result<String, BackendError> {
        let model = self
            .models
            .get(&spec.effective_genre)
            .ok_or(TextgenError::ConfigMissing(spec.effective_genre))?;
        let prompt = tokenize(&story_seed(headline));
        let text = model.continue_text(&prompt, spec.temperature, rng, max_tokens, self.stop_sentences)?;
        let dateline = spec.target_date.format("%B %-d, %Y");
        Ok(format!("{dateline} - {text}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{build_control_spec, GenreMap, MillSettings, Wackiness, WhenSetting};
    use chrono::NaiveDate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn seed_gets_a_period() {
        assert_eq!(story_seed("Cats rule"), "Cats rule.");
        assert_eq!(story_seed("Cats rule?"), "Cats rule?");
        assert_eq!(story_seed("Cats rule. "), "Cats rule.");
    }

    #[test]
    fn documents_split_on_blank_lines() {
        assert_eq!(split_documents("a b\nc\n\n\n d e \n"), vec!["a b c", "d e"]);
    }

    #[test]
    fn bundled_backend_covers_every_genre() {
        let backend = BuiltinBackend::bundled().unwrap();
        for genre in Genre::CONCRETE {
            assert!(backend.model(genre).is_some());
            assert!(backend.phrases(genre).is_some());
            assert_eq!(backend.model(genre).unwrap().skipped_documents(), 0);
        }
    }

    #[test]
    fn headline_rejects_random_and_missing() {
        let backend = BuiltinBackend::bundled().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            backend.generate_headline_builtin(1.0, Genre::Random, &mut rng),
            Err(TextgenError::UnresolvedGenre)
        );
        let empty = BuiltinBackend::empty();
        assert_eq!(
            empty.generate_headline_builtin(1.0, Genre::Politics, &mut rng),
            Err(TextgenError::ConfigMissing(Genre::Politics))
        );
    }

    #[test]
    fn story_has_dateline_and_text() {
        let backend = BuiltinBackend::bundled().unwrap();
        let settings = MillSettings {
            wackiness: Wackiness::new(0.5).unwrap(),
            genre: Genre::ScienceNews,
            when: WhenSetting::Past,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let today = NaiveDate::from_ymd_opt(2020, 5, 4).unwrap();
        let spec = build_control_spec(&settings, today, &GenreMap::default(), &mut rng).unwrap();
        let story = backend.generate_story("Robots cure hiccups", &spec, &mut rng, 120).unwrap();
        let dateline = spec.target_date.format("%B %-d, %Y").to_string();
        assert!(story.starts_with(&dateline), "{story}");
        assert!(story.split_whitespace().count() > 4);
        let one = backend.generate_story("Robots cure hiccups", &spec, &mut rng, 1).unwrap();
        assert_eq!(one.split(" - ").nth(1).unwrap().split_whitespace().count(), 1);
    }
}
