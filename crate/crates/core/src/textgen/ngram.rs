//! Word-level n-gram model used by the built-in story backend.

use std::collections::BTreeMap;

use log::warn;
use rand::Rng;

use super::sampling::temperature_sample;
use super::TextgenError;
use crate::params::Genre;

pub type Context = Vec<String>;

#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    table: BTreeMap<Context, BTreeMap<String, u32>>,
    start_contexts: Vec<Context>,
    genre: Genre,
    skipped_documents: usize,
}

fn is_terminator(token: &str) -> bool {
    token.ends_with(['.', '!', '?'])
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

pub fn build_ngram_model<S: AsRef<str>>(
    corpus: &[S],
    n: usize,
    genre: Genre,
) -> Result<NgramModel, TextgenError> {
    if n < 2 {
        return Err(TextgenError::InvalidOrder(n));
    }
    if corpus.is_empty() {
        return Err(TextgenError::EmptyCorpus);
    }
    let mut table: BTreeMap<Context, BTreeMap<String, u32>> = BTreeMap::new();
    let mut start_contexts = Vec::new();
    let mut skipped = 0;
    for doc in corpus {
        let tokens = tokenize(doc.as_ref());
        if tokens.len() < n {
            skipped += 1;
            continue;
        }
        for window in tokens.windows(n) {
            *table
                .entry(window[..n - 1].to_vec())
                .or_default()
                .entry(window[n - 1].clone())
                .or_default() += 1;
        }
        let mut sentence_start = 0;
        for (i, tok) in tokens.iter().enumerate() {
            if i == sentence_start && i + n - 1 <= tokens.len() {
                start_contexts.push(tokens[i..i + n - 1].to_vec());
            }
            if is_terminator(tok) {
                sentence_start = i + 1;
            }
        }
    }
    if skipped == corpus.len() {
        return Err(TextgenError::DocumentTooShort { skipped });
    }
    if skipped > 0 {
        warn!("{genre}: skipped {skipped} document(s) shorter than {n} tokens");
    }
    Ok(NgramModel {
        order: n,
        table,
        start_contexts,
        genre,
        skipped_documents: skipped,
    })
}

impl NgramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn genre(&self) -> Genre {
        self.genre
    }

    pub fn skipped_documents(&self) -> usize {
        self.skipped_documents
    }

    pub fn start_contexts(&self) -> &[Context] {
        &self.start_contexts
    }

    /// Successor counts for a context, in token order.
    pub fn successors(&self, context: &[String]) -> Option<&BTreeMap<String, u32>> {
        self.table.get(context)
    }

    pub fn contexts(&self) -> impl Iterator<Item = (&Context, &BTreeMap<String, u32>)> {
        self.table.iter()
    }

    /// Generates from a random start context.
    pub fn generate_text<R: Rng + ?Sized>(
        &self,
        temperature: f64,
        rng: &mut R,
        max_tokens: usize,
        stop_sentences: usize,
    ) -> Result<String, TextgenError> {
        self.continue_text(&[], temperature, rng, max_tokens, stop_sentences)
    }

    /// Continues after `prompt`, returning only the new tokens. The prompt's
    /// trailing context is used when the model knows it, otherwise generation
    /// opens a fresh sentence.
    pub fn continue_text<R: Rng + ?Sized>(
        &self,
        prompt: &[String],
        temperature: f64,
        rng: &mut R,
        max_tokens: usize,
        stop_sentences: usize,
    ) -> Result<String, TextgenError> {
        if max_tokens == 0 {
            return Err(TextgenError::ZeroMaxTokens);
        }
        let k = self.order - 1;
        let mut history: Vec<String> = prompt.to_vec();
        let mut out: Vec<String> = Vec::new();
        let mut sentences = 0;
        while out.len() < max_tokens && sentences < stop_sentences.max(1) {
            let next = match history
                .len()
                .checked_sub(k)
                .and_then(|from| self.table.get(&history[from..]))
            {
                Some(successors) => {
                    let tokens: Vec<&String> = successors.keys().collect();
                    let weights: Vec<f64> = successors.values().map(|c| f64::from(*c)).collect();
                    if weights.is_empty() {
                        return Err(TextgenError::DeadEnd(history[history.len() - k..].join(" ")));
                    }
                    vec![tokens[temperature_sample(&weights, temperature, rng)?].clone()]
                }
                // End of a document or an unknown prompt: open a new sentence.
                None => {
                    let pick = rng.gen_range(0..self.start_contexts.len());
                    self.start_contexts[pick].clone()
                }
            };
            for tok in next {
                if out.len() == max_tokens {
                    break;
                }
                if is_terminator(&tok) {
                    sentences += 1;
                }
                history.push(tok.clone());
                out.push(tok);
                if sentences >= stop_sentences.max(1) {
                    break;
                }
            }
        }
        Ok(detokenize(&out))
    }
}

fn detokenize(tokens: &[String]) -> String {
    let text = tokens.join(" ");
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => text,
    }
}
