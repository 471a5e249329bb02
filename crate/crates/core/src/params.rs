//! Panel readings to validated settings, and settings to generation controls.
//!
//! The knob (wackiness) becomes a sampling temperature, the 12-step switch
//! becomes a genre control code, and the when-toggle becomes a date window
//! from which a target date is drawn and embedded in a dated `Links` code.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Days, Months, NaiveDate};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Temperature at wackiness 0.
pub const T_MIN: f64 = 0.2;
/// Temperature at wackiness 1.
pub const T_MAX: f64 = 1.5;
/// Full-scale reading of the 10-bit potentiometer ADC.
pub const POT_MAX: u16 = 1023;

const DEFAULT_GENRE_MAP: &str = include_str!("../assets/genres.conf");

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("value {value} out of range {min}..={max}")]
    OutOfRange { value: f64, min: f64, max: f64 },
    #[error("no genre-mapping entry for {0}")]
    ConfigMissing(Genre),
    #[error("genre map line {line}: {reason}")]
    ConfigParse { line: usize, reason: String },
    #[error("unknown genre {0:?}")]
    UnknownGenre(String),
    #[error("unknown time setting {0:?}")]
    UnknownWhen(String),
    #[error("reading genre map: {0}")]
    Io(String),
}

/// How wacky the story should be, 0 = conventional, 1 = maximally wacky.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Wackiness(f64);

impl Wackiness {
    pub fn new(value: f64) -> Result<Self, ParamsError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(ParamsError::OutOfRange {
                value,
                min: 0.0,
                max: 1.0,
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Wackiness {
    type Error = ParamsError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<Wackiness> for f64 {
    fn from(w: Wackiness) -> f64 {
        w.0
    }
}

/// The twelve positions of the genre switch, in switch order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Genre {
    Politics,
    ConspiracyTheory,
    ScienceNews,
    CnnBusiness,
    EntertainmentTonight,
    DailyMailHealth,
    FoxSports,
    IndependentWorldNews,
    CelebrityGossip,
    ChiTweets,
    RussiaToday,
    Random,
}

impl Genre {
    pub const ALL: [Genre; 12] = [
        Genre::Politics,
        Genre::ConspiracyTheory,
        Genre::ScienceNews,
        Genre::CnnBusiness,
        Genre::EntertainmentTonight,
        Genre::DailyMailHealth,
        Genre::FoxSports,
        Genre::IndependentWorldNews,
        Genre::CelebrityGossip,
        Genre::ChiTweets,
        Genre::RussiaToday,
        Genre::Random,
    ];

    /// Every genre a story can actually be written in.
    pub const CONCRETE: [Genre; 11] = [
        Genre::Politics,
        Genre::ConspiracyTheory,
        Genre::ScienceNews,
        Genre::CnnBusiness,
        Genre::EntertainmentTonight,
        Genre::DailyMailHealth,
        Genre::FoxSports,
        Genre::IndependentWorldNews,
        Genre::CelebrityGossip,
        Genre::ChiTweets,
        Genre::RussiaToday,
    ];

    /// Switch position, 1..=12.
    pub fn position(self) -> u8 {
        Self::ALL.iter().position(|g| *g == self).unwrap() as u8 + 1
    }

    pub fn from_position(pos: u8) -> Option<Genre> {
        Self::ALL.get(usize::from(pos).checked_sub(1)?).copied()
    }

    /// The identifier used in the genre-mapping config.
    pub fn name(self) -> &'static str {
        match self {
            Genre::Politics => "Politics",
            Genre::ConspiracyTheory => "ConspiracyTheory",
            Genre::ScienceNews => "ScienceNews",
            Genre::CnnBusiness => "CnnBusiness",
            Genre::EntertainmentTonight => "EntertainmentTonight",
            Genre::DailyMailHealth => "DailyMailHealth",
            Genre::FoxSports => "FoxSports",
            Genre::IndependentWorldNews => "IndependentWorldNews",
            Genre::CelebrityGossip => "CelebrityGossip",
            Genre::ChiTweets => "ChiTweets",
            Genre::RussiaToday => "RussiaToday",
            Genre::Random => "Random",
        }
    }

    /// Kebab-case form used on the wire, in file names and on the CLI.
    pub fn slug(self) -> &'static str {
        match self {
            Genre::Politics => "politics",
            Genre::ConspiracyTheory => "conspiracy-theory",
            Genre::ScienceNews => "science-news",
            Genre::CnnBusiness => "cnn-business",
            Genre::EntertainmentTonight => "entertainment-tonight",
            Genre::DailyMailHealth => "daily-mail-health",
            Genre::FoxSports => "fox-sports",
            Genre::IndependentWorldNews => "independent-world-news",
            Genre::CelebrityGossip => "celebrity-gossip",
            Genre::ChiTweets => "chi-tweets",
            Genre::RussiaToday => "russia-today",
            Genre::Random => "random",
        }
    }

    /// Lowercase label printed on tickets.
    pub fn label(self) -> &'static str {
        match self {
            Genre::Politics => "politics",
            Genre::ConspiracyTheory => "conspiracy theory",
            Genre::ScienceNews => "science news",
            Genre::CnnBusiness => "cnn business",
            Genre::EntertainmentTonight => "entertainment tonight",
            Genre::DailyMailHealth => "daily mail health",
            Genre::FoxSports => "fox sports",
            Genre::IndependentWorldNews => "independent world news",
            Genre::CelebrityGossip => "celebrity gossip",
            Genre::ChiTweets => "chi tweets",
            Genre::RussiaToday => "russia today",
            Genre::Random => "random",
        }
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

impl FromStr for Genre {
    type Err = ParamsError;

    /// Accepts the config name, the slug or the label, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = squash(s);
        Genre::ALL
            .into_iter()
            .find(|g| squash(g.name()) == wanted)
            .ok_or_else(|| ParamsError::UnknownGenre(s.to_string()))
    }
}

impl From<Genre> for String {
    fn from(g: Genre) -> String {
        g.slug().to_string()
    }
}

impl TryFrom<String> for Genre {
    type Error = ParamsError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WhenSetting {
    Past,
    Present,
    Future,
}

impl WhenSetting {
    pub const ALL: [WhenSetting; 3] = [WhenSetting::Past, WhenSetting::Present, WhenSetting::Future];

    /// Toggle index: Past = 0, Present = 1, Future = 2.
    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Option<WhenSetting> {
        Self::ALL.get(usize::from(i)).copied()
    }

    pub fn slug(self) -> &'static str {
        match self {
            WhenSetting::Past => "past",
            WhenSetting::Present => "present",
            WhenSetting::Future => "future",
        }
    }
}

impl fmt::Display for WhenSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for WhenSetting {
    type Err = ParamsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WhenSetting::ALL
            .into_iter()
            .find(|w| w.slug().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ParamsError::UnknownWhen(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MillSettings {
    pub wackiness: Wackiness,
    pub genre: Genre,
    pub when: WhenSetting,
}

/// Inclusive calendar-date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn len_days(&self) -> u64 {
        (self.end - self.start).num_days() as u64 + 1
    }
}

/// Conditioning handed to the story backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub temperature: f64,
    pub genre_code: String,
    pub links_code: String,
    pub target_date: NaiveDate,
    pub effective_genre: Genre,
}

pub fn pot_to_wackiness(raw: i64) -> Result<Wackiness, ParamsError> {
    if !(0..=i64::from(POT_MAX)).contains(&raw) {
        return Err(ParamsError::OutOfRange {
            value: raw as f64,
            min: 0.0,
            max: f64::from(POT_MAX),
        });
    }
    Wackiness::new(raw as f64 / f64::from(POT_MAX))
}

pub fn wackiness_to_temperature(w: Wackiness) -> f64 {
    T_MIN + w.value() * (T_MAX - T_MIN)
}

/// Same month and day `years` years away; Feb 29 clamps to Feb 28.
pub fn shift_years(date: NaiveDate, years: i32) -> NaiveDate {
    let months = Months::new(12 * years.unsigned_abs());
    let shifted = if years >= 0 {
        date.checked_add_months(months)
    } else {
        date.checked_sub_months(months)
    };
    shifted.expect("date out of representable range")
}

fn next_day(date: NaiveDate) -> NaiveDate {
    date.checked_add_days(Days::new(1)).expect("date overflow")
}

fn prev_day(date: NaiveDate) -> NaiveDate {
    date.checked_sub_days(Days::new(1)).expect("date underflow")
}

pub fn when_to_date_window(when: WhenSetting, today: NaiveDate) -> DateWindow {
    let present = DateWindow {
        start: next_day(shift_years(today, -1)),
        end: today,
    };
    match when {
        WhenSetting::Present => present,
        WhenSetting::Past => DateWindow {
            start: shift_years(present.start, -10),
            end: prev_day(present.start),
        },
        WhenSetting::Future => {
            let start = shift_years(next_day(today), 1);
            DateWindow {
                start,
                end: prev_day(shift_years(start, 1)),
            }
        }
    }
}

/// Story control code and Links domain for one genre.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenreCodes {
    pub code: String,
    pub domain: String,
}

/// Genre-to-control-code configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenreMap {
    entries: HashMap<Genre, GenreCodes>,
}

impl GenreMap {
    pub fn parse(text: &str) -> Result<Self, ParamsError> {
        let mut entries = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: &str| ParamsError::ConfigParse {
                line: line_no,
                reason: reason.to_string(),
            };
            let (name, rest) = line.split_once('=').ok_or_else(|| err("expected '='"))?;
            let genre: Genre = name.trim().parse().map_err(|_| {
                err(&format!("unknown genre name {:?}", name.trim()))
            })?;
            let (code, domain) = rest
                .split_once(',')
                .ok_or_else(|| err("expected '<code_token> , <links_domain>'"))?;
            let (code, domain) = (code.trim(), domain.trim());
            if code.is_empty() || code.contains(char::is_whitespace) {
                return Err(err("code token must be a single non-empty token"));
            }
            if domain.is_empty() || domain.contains(|c: char| c.is_whitespace() || c == '/') {
                return Err(err("links domain must be a bare host name"));
            }
            let codes = GenreCodes {
                code: code.to_string(),
                domain: domain.to_string(),
            };
            if entries.insert(genre, codes).is_some() {
                return Err(err(&format!("duplicate entry for {}", genre.name())));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ParamsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ParamsError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, genre: Genre) -> Result<&GenreCodes, ParamsError> {
        self.entries.get(&genre).ok_or(ParamsError::ConfigMissing(genre))
    }

    /// Reverse lookup by code token.
    pub fn genre_for_code(&self, code: &str) -> Option<Genre> {
        Genre::CONCRETE
            .into_iter()
            .find(|g| self.entries.get(g).is_some_and(|c| c.code == code))
    }
}

impl Default for GenreMap {
    fn default() -> Self {
        Self::parse(DEFAULT_GENRE_MAP).expect("bundled genre map is valid")
    }
}

pub fn links_code(domain: &str, date: NaiveDate) -> String {
    format!(
        "Links https://{}/{:04}/{:02}/{:02}/",
        domain,
        date.year(),
        date.month(),
        date.day()
    )
}

/// Extracts the date from a `Links https://<domain>/YYYY/MM/DD/` code.
pub fn parse_links_date(code: &str) -> Option<NaiveDate> {
    let url = code.strip_prefix("Links https://")?;
    let parts: Vec<&str> = url.trim_end_matches('/').split('/').collect();
    if parts.len() != 4 {
        return None;
    }
    let [y, m, d] = [parts[1], parts[2], parts[3]];
    if y.len() != 4 || m.len() != 2 || d.len() != 2 {
        return None;
    }
    NaiveDate::from_ymd_opt(y.parse().ok()?, m.parse().ok()?, d.parse().ok()?)
}

pub fn build_control_spec<R: Rng + ?Sized>(
    settings: &MillSettings,
    today: NaiveDate,
    genre_map: &GenreMap,
    rng: &mut R,
) -> Result<ControlSpec, ParamsError> {
    let effective_genre = match settings.genre {
        Genre::Random => Genre::CONCRETE[rng.gen_range(0..Genre::CONCRETE.len())],
        g => g,
    };
    let window = when_to_date_window(settings.when, today);
    let offset = rng.gen_range(0..window.len_days());
    let target_date = window
        .start
        .checked_add_days(Days::new(offset))
        .expect("window end is representable");
    let codes = genre_map.get(effective_genre)?;
    Ok(ControlSpec {
        temperature: wackiness_to_temperature(settings.wackiness),
        genre_code: codes.code.clone(),
        links_code: links_code(&codes.domain, target_date),
        target_date,
        effective_genre,
    })
}
