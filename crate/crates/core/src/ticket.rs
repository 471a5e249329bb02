//! Thermal-printer tickets: plain-text layout plus an ESC/POS byte stream.

use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};

use crate::params::{Genre, MillSettings};
use crate::textgen::Rumour;

pub const DEFAULT_WIDTH: usize = 32;
pub const MIN_WIDTH: usize = 8;
pub const MARKER: &str = "*** RUMOUR ***";
pub const SUBTITLE: &str = "automatically generated";
pub const APOLOGY_MARKER: &str = "*** MILL RESTING ***";
const APOLOGY_TEXT: &str = "The mill is resting and could not produce a rumour just now. \
Please give the crank another turn in a little while.";

const ESC_INIT: [u8; 2] = [0x1B, 0x40];
const ESC_BOLD_ON: [u8; 3] = [0x1B, 0x45, 0x01];
const ESC_BOLD_OFF: [u8; 3] = [0x1B, 0x45, 0x00];
const ESC_FEED_4: [u8; 3] = [0x1B, 0x64, 0x04];
const GS_PARTIAL_CUT: [u8; 3] = [0x1D, 0x56, 0x01];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ticket {
    pub id: String,
    pub lines: Vec<String>,
    /// Indices into `lines` printed in emphasized style.
    pub emphasized: Vec<usize>,
    pub escpos: Vec<u8>,
}

impl Ticket {
    pub fn text(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }
}

/// Greedy word wrap; words longer than `width` are split.
pub fn wrap_text(text: &str, width: usize) -> Vec<String> {
    assert!(width > 0, "width must be positive");
    let mut lines = Vec::new();
    let mut current = String::new();
    let mut current_len = 0;
    for word in text.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        for piece in chars.chunks(width) {
            let piece_len = piece.len();
            if current_len > 0 && current_len + 1 + piece_len <= width {
                current.push(' ');
                current.extend(piece);
                current_len += 1 + piece_len;
            } else {
                if current_len > 0 {
                    lines.push(std::mem::take(&mut current));
                }
                current.extend(piece);
                current_len = piece_len;
            }
        }
    }
    if current_len > 0 {
        lines.push(current);
    }
    lines
}

fn centered(text: &str, width: usize) -> Vec<String> {
    wrap_text(text, width)
        .into_iter()
        .map(|line| {
            let pad = (width - line.chars().count()) / 2;
            format!("{}{line}", " ".repeat(pad))
        })
        .collect()
}

fn genre_text(settings: &MillSettings, effective: Option<Genre>) -> String {
    match effective {
        Some(g) if settings.genre == Genre::Random => format!("genre: random ({})", g.label()),
        _ => format!("genre: {}", settings.genre.label()),
    }
}

fn settings_lines(settings: &MillSettings, effective: Option<Genre>, width: usize) -> Vec<String> {
    [
        format!("wackiness: {:.2}", settings.wackiness.value()),
        genre_text(settings, effective),
        format!("when: {}", settings.when.slug()),
    ]
    .iter()
    .flat_map(|s| wrap_text(s, width))
    .collect()
}

fn timestamp(at: DateTime<Utc>) -> String {
    at.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn render_ticket(rumour: &Rumour, width: usize) -> Ticket {
    assert!(width >= MIN_WIDTH, "ticket width must be at least {MIN_WIDTH}");
    let rule = "=".repeat(width);
    let mut lines = vec![rule.clone()];
    lines.extend(centered(MARKER, width));
    lines.extend(centered(SUBTITLE, width));
    lines.push(String::new());
    let headline_start = lines.len();
    lines.extend(wrap_text(&rumour.headline, width));
    let emphasized: Vec<usize> = (headline_start..lines.len()).collect();
    lines.push(String::new());
    lines.extend(wrap_text(&rumour.body, width));
    lines.push(String::new());
    lines.extend(settings_lines(&rumour.settings, Some(rumour.spec.effective_genre), width));
    lines.extend(wrap_text(&format!("source: {}", rumour.provenance.slug()), width));
    lines.extend(wrap_text(&timestamp(rumour.created_at), width));
    lines.push(rule);
    let escpos = encode_escpos(&lines, &emphasized);
    Ticket {
        id: rumour.id.to_string(),
        lines,
        emphasized,
        escpos,
    }
}

/// The fixed printout issued when no rumour can be produced.
pub fn render_apology(id: &str, settings: &MillSettings, at: DateTime<Utc>, width: usize) -> Ticket {
    assert!(width >= MIN_WIDTH, "ticket width must be at least {MIN_WIDTH}");
    let rule = "=".repeat(width);
    let mut lines = vec![rule.clone()];
    let marker_start = lines.len();
    lines.extend(centered(APOLOGY_MARKER, width));
    let emphasized: Vec<usize> = (marker_start..lines.len()).collect();
    lines.push(String::new());
    lines.extend(wrap_text(APOLOGY_TEXT, width));
    lines.push(String::new());
    lines.extend(settings_lines(settings, None, width));
    lines.extend(wrap_text(&timestamp(at), width));
    lines.push(rule);
    let escpos = encode_escpos(&lines, &emphasized);
    Ticket {
        id: id.to_string(),
        lines,
        emphasized,
        escpos,
    }
}

const CP437_HIGH: [char; 128] = [
    'Ç', 'ü', 'é', 'â', 'ä', 'à', 'å', 'ç', 'ê', 'ë', 'è', 'ï', 'î', 'ì', 'Ä', 'Å', //
    'É', 'æ', 'Æ', 'ô', 'ö', 'ò', 'û', 'ù', 'ÿ', 'Ö', 'Ü', '¢', '£', '¥', '₧', 'ƒ', //
    'á', 'í', 'ó', 'ú', 'ñ', 'Ñ', 'ª', 'º', '¿', '⌐', '¬', '½', '¼', '¡', '«', '»', //
    '░', '▒', '▓', '│', '┤', '╡', '╢', '╖', '╕', '╣', '║', '╗', '╝', '╜', '╛', '┐', //
    '└', '┴', '┬', '├', '─', '┼', '╞', '╟', '╚', '╔', '╩', '╦', '╠', '═', '╬', '╧', //
    '╨', '╤', '╥', '╙', '╘', '╒', '╓', '╫', '╪', '┘', '┌', '█', '▄', '▌', '▐', '▀', //
    'α', 'ß', 'Γ', 'π', 'Σ', 'σ', 'µ', 'τ', 'Φ', 'Θ', 'Ω', 'δ', '∞', 'φ', 'ε', '∩', //
    '≡', '±', '≥', '≤', '⌠', '⌡', '÷', '≈', '°', '∙', '·', '√', 'ⁿ', '²', '■', '\u{a0}',
];

/// Code page 437 byte for `c`, or `?` when it has none. Control characters
/// are never emitted.
pub fn cp437_encode(c: char) -> u8 {
    match c {
        ' '..='~' => c as u8,
        _ => CP437_HIGH
            .iter()
            .position(|h| *h == c)
            .map_or(b'?', |i| 0x80 + i as u8),
    }
}

pub fn cp437_decode(b: u8) -> char {
    if b >= 0x80 {
        CP437_HIGH[usize::from(b - 0x80)]
    } else {
        char::from(b)
    }
}

pub fn encode_escpos<S: AsRef<str>>(lines: &[S], emphasized: &[usize]) -> Vec<u8> {
    let mut out = ESC_INIT.to_vec();
    for (i, line) in lines.iter().enumerate() {
        if emphasized.contains(&i) {
            out.extend_from_slice(&ESC_BOLD_ON);
        } else {
            out.extend_from_slice(&ESC_BOLD_OFF);
        }
        out.extend(line.as_ref().chars().map(cp437_encode));
        out.push(b'\n');
    }
    out.extend_from_slice(&ESC_FEED_4);
    out.extend_from_slice(&GS_PARTIAL_CUT);
    out
}

/// Recovers the printed lines from a stream produced by [`encode_escpos`].
pub fn decode_escpos_text(bytes: &[u8]) -> Option<Vec<String>> {
    let body = bytes.strip_prefix(&ESC_INIT)?;
    let mut tail = ESC_FEED_4.to_vec();
    tail.extend_from_slice(&GS_PARTIAL_CUT);
    let mut rest = body.strip_suffix(tail.as_slice())?;
    let mut lines = Vec::new();
    while !rest.is_empty() {
        rest = rest
            .strip_prefix(&ESC_BOLD_ON)
            .or_else(|| rest.strip_prefix(&ESC_BOLD_OFF))?;
        let end = rest.iter().position(|b| *b == b'\n')?;
        lines.push(rest[..end].iter().map(|b| cp437_decode(*b)).collect());
        rest = &rest[end + 1..];
    }
    Some(lines)
}

/// Directory of plain-text tickets named `<ticket-id>.txt`.
#[derive(Debug, Clone)]
pub struct Spool {
    dir: PathBuf,
}

impl Spool {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&self, ticket: &Ticket) -> io::Result<PathBuf> {
        self.write_text(&ticket.id, &ticket.text())
    }

    /// Writes via a temporary file so readers never see half a ticket.
    pub fn write_text(&self, id: &str, text: &str) -> io::Result<PathBuf> {
        let path = self.dir.join(format!("{id}.txt"));
        let tmp = self.dir.join(format!(".{id}.tmp"));
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }

    pub fn count(&self) -> io::Result<usize> {
        Ok(std::fs::read_dir(&self.dir)?
            .filter_map(Result::ok)
            .filter(|e| e.path().extension().is_some_and(|x| x == "txt"))
            .count())
    }
}
