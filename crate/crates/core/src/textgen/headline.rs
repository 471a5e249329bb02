//! Claim-style headline grammar: `<subject> <predicate> <object>`.

use rand::Rng;

use super::sampling::temperature_sample;
use super::TextgenError;

pub const MIN_HEADLINE_WORDS: usize = 4;
pub const MAX_HEADLINE_WORDS: usize = 14;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseLists {
    pub subjects: Vec<String>,
    pub predicates: Vec<String>,
    pub objects: Vec<String>,
}

fn words(s: &str) -> usize {
    s.split_whitespace().count()
}

fn push_unique(list: &mut Vec<String>, phrase: &str) {
    if !list.iter().any(|p| p == phrase) {
        list.push(phrase.to_string());
    }
}

impl PhraseLists {
    /// Parses tab-separated subject/predicate/object rows. Lines starting
    /// with `#` and blank lines are ignored. Every combination must land in
    /// the allowed headline length.
    pub fn parse_tsv(text: &str) -> Result<Self, TextgenError> {
        let mut lists = PhraseLists {
            subjects: Vec::new(),
            predicates: Vec::new(),
            objects: Vec::new(),
        };
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 3 || cols.iter().any(|c| c.is_empty()) {
                return Err(TextgenError::PhraseList(format!(
                    "line {}: expected 3 non-empty tab-separated columns",
                    idx + 1
                )));
            }
            push_unique(&mut lists.subjects, cols[0]);
            push_unique(&mut lists.predicates, cols[1]);
            push_unique(&mut lists.objects, cols[2]);
        }
        if lists.subjects.is_empty() {
            return Err(TextgenError::PhraseList("no phrase rows".into()));
        }
        let span = |l: &[String]| {
            let counts = l.iter().map(|p| words(p));
            (counts.clone().min().unwrap(), counts.max().unwrap())
        };
        let (s, p, o) = (span(&lists.subjects), span(&lists.predicates), span(&lists.objects));
        let (lo, hi) = (s.0 + p.0 + o.0, s.1 + p.1 + o.1);
        if lo < MIN_HEADLINE_WORDS || hi > MAX_HEADLINE_WORDS {
            return Err(TextgenError::PhraseList(format!(
                "headline length can range {lo}..={hi} words, allowed {MIN_HEADLINE_WORDS}..={MAX_HEADLINE_WORDS}"
            )));
        }
        Ok(lists)
    }

    /// Every phrase in any slot.
    pub fn vocabulary(&self) -> impl Iterator<Item = &String> {
        self.subjects.iter().chain(&self.predicates).chain(&self.objects)
    }

    pub fn generate<R: Rng + ?Sized>(&self, temperature: f64, rng: &mut R) -> Result<String, TextgenError> {
        let mut pick = |slot: &[String]| -> Result<usize, TextgenError> {
            let weights = vec![1.0; slot.len()];
            Ok(temperature_sample(&weights, temperature, rng)?)
        };
        let subject = &self.subjects[pick(&self.subjects)?];
        let predicate = &self.predicates[pick(&self.predicates)?];
        let object = &self.objects[pick(&self.objects)?];
        let line = format!("{subject} {predicate} {object}");
        let line = line.trim_end_matches('.');
        let mut chars = line.chars();
        Ok(match chars.next() {
            Some(c) => c.to_uppercase().chain(chars).collect(),
            None => String::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parses_and_generates() {
        let lists = PhraseLists::parse_tsv("# s\tp\to\nthe cat\tsat on\tthe mat.\nA dog\tate\tmy homework\n").unwrap();
        assert_eq!(lists.subjects, vec!["the cat", "A dog"]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let h = lists.generate(0.7, &mut rng).unwrap();
            let n = h.split_whitespace().count();
            assert!((4..=14).contains(&n), "{h}");
            assert!(!h.ends_with('.'));
            assert!(h.chars().next().unwrap().is_uppercase());
        }
    }

    #[test]
    fn rejects_bad_rows_and_lengths() {
        assert!(PhraseLists::parse_tsv("a\tb\n").is_err());
        assert!(PhraseLists::parse_tsv("a\t\tc\n").is_err());
        assert!(PhraseLists::parse_tsv("").is_err());
        // 1 + 1 + 1 words is too short.
        assert!(PhraseLists::parse_tsv("a\tb\tc\n").is_err());
        let long = "one two three four five";
        assert!(PhraseLists::parse_tsv(&format!("{long}\t{long}\t{long}\n")).is_err());
    }
}
