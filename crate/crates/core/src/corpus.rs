//! External text corpus ingestion: keep only what the bank can draw.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on characters per output line.
pub const DEFAULT_MAX_LINE_LEN: usize = 120;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    /// Drop any line containing a character outside the alphabet.
    SkipLine,
    /// Remove offending characters and keep the rest of the line.
    DropChars,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub total_lines: usize,
    /// Input lines that produced at least one non-empty output line.
    pub usable_lines: usize,
    pub skipped_lines: usize,
    pub output_lines: usize,
    pub input_chars: usize,
    pub output_chars: usize,
    /// Spaces consumed as break points when splitting long lines.
    pub split_spaces: usize,
    /// Out-of-alphabet characters seen, counted per character.
    pub dropped_chars: BTreeMap<char, usize>,
}

impl CorpusStats {
    pub fn dropped_total(&self) -> usize {
        self.dropped_chars.values().sum()
    }
}

/// Break `chars` into pieces of at most `max_len`, at the last space that
/// fits when there is one. Break spaces are consumed.
fn split_long(mut chars: &[char], max_len: usize, stats: &mut CorpusStats) -> Vec<String> {
    let mut out = Vec::new();
    while chars.len() > max_len {
        match chars[1..=max_len].iter().rposition(|&c| c == ' ') {
            Some(p) => {
                let at = p + 1;
                out.push(chars[..at].iter().collect());
                chars = &chars[at + 1..];
                stats.split_spaces += 1;
            }
            None => {
                out.push(chars[..max_len].iter().collect());
                chars = &chars[max_len..];
            }
        }
    }
    out.push(chars.iter().collect());
    out
}

/// Filter one line (without terminator) into zero or more output lines.
fn filter_line(
    line: &str,
    accept: &impl Fn(char) -> bool,
    mode: FilterMode,
    max_len: Option<usize>,
    stats: &mut CorpusStats,
) -> Vec<String> {
    stats.total_lines += 1;
    let n_in = line.chars().count();
    stats.input_chars += n_in;
    let mut kept = Vec::with_capacity(n_in);
    let mut bad = 0;
    for c in line.chars() {
        if accept(c) {
            kept.push(c);
        } else {
            *stats.dropped_chars.entry(c).or_insert(0) += 1;
            bad += 1;
        }
    }
    if bad > 0 && mode == FilterMode::SkipLine {
        stats.skipped_lines += 1;
        return Vec::new();
    }
    let pieces = match max_len {
        Some(m) if m > 0 => split_long(&kept, m, stats),
        _ => vec![kept.iter().collect()],
    };
    stats.output_lines += pieces.len();
    stats.output_chars += pieces.iter().map(|p| p.chars().count()).sum::<usize>();
    if pieces.iter().any(|p| !p.is_empty()) {
        stats.usable_lines += 1;
    }
    pieces
}

/// In-memory filtering of `text`, one output string per output line.
pub fn filter_lines(
    text: &str,
    accept: impl Fn(char) -> bool,
    mode: FilterMode,
    max_len: Option<usize>,
) -> (Vec<String>, CorpusStats) {
    let mut stats = CorpusStats::default();
    let mut out = Vec::new();
    for line in text.lines() {
        out.extend(filter_line(line, &accept, mode, max_len, &mut stats));
    }
    (out, stats)
}

/// Streaming filter. Line terminators (`\n` or `\r\n`) are reproduced as
/// found, so an input that passes untouched comes out byte-identical.
pub fn filter_corpus<R: BufRead, W: Write>(
    mut input: R,
    mut output: W,
    accept: impl Fn(char) -> bool,
    mode: FilterMode,
    max_len: Option<usize>,
) -> Result<CorpusStats> {
    let mut stats = CorpusStats::default();
    let mut buf = Vec::new();
    let mut offset = 0usize;
    loop {
        buf.clear();
        let n = input.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        let term_len = if buf.ends_with(b"\r\n") {
            2
        } else if buf.ends_with(b"\n") {
            1
        } else {
            0
        };
        let (body, term) = buf.split_at(n - term_len);
        let line = std::str::from_utf8(body).map_err(|e| Error::Utf8 { offset: offset + e.valid_up_to() })?;
        for piece in filter_line(line, &accept, mode, max_len, &mut stats) {
            output.write_all(piece.as_bytes())?;
            output.write_all(if term.is_empty() { b"\n" } else { term })?;
        }
        offset += n;
        if term.is_empty() {
            // Last line had no terminator; do not invent one.
            break;
        }
    }
    output.flush()?;
    Ok(stats)
}
