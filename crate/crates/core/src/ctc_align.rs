//! Character boundaries from CTC output.
//!
//! A network trained with CTC emits, for each of `N` timesteps, a
//! distribution over the alphabet plus blank. Forcing the known transcript
//! through that matrix (Viterbi over the blank-interleaved label sequence)
//! assigns every timestep to a character or to blank. A character held for
//! `k` timesteps on an image `W` pixels wide is about `k * W / N` pixels
//! wide, which gives the pixel spans used to cut segments.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::manifest::DatasetEntry;

/// Log-probability used in place of `ln(0)`.
pub const LOG_ZERO: f64 = -1e30;

/// Character classes of the CTC output layer, with one extra index for blank.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AlphabetRepr", into = "AlphabetRepr")]
pub struct Alphabet {
    symbols: Vec<char>,
    blank_index: usize,
}

#[derive(Serialize, Deserialize)]
struct AlphabetRepr {
    symbols: String,
    #[serde(default)]
    blank_index: usize,
}

impl TryFrom<AlphabetRepr> for Alphabet {
    type Error = Error;

    fn try_from(r: AlphabetRepr) -> Result<Self> {
        Alphabet::new(r.symbols.chars().collect(), r.blank_index)
    }
}

impl From<Alphabet> for AlphabetRepr {
    fn from(a: Alphabet) -> Self {
        AlphabetRepr { symbols: a.symbols.iter().collect(), blank_index: a.blank_index }
    }
}

impl Alphabet {
    /// `blank_index` is the class index of blank; symbols fill the remaining
    /// indices in order.
    pub fn new(symbols: Vec<char>, blank_index: usize) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = symbols.iter().find(|c| !seen.insert(**c)) {
            return Err(domain(format!("duplicate alphabet symbol {dup:?}")));
        }
        if blank_index > symbols.len() {
            return Err(domain(format!(
                "blank index {blank_index} outside 0..={}",
                symbols.len()
            )));
        }
        Ok(Self { symbols, blank_index })
    }

    /// Alphabet of the distinct characters of `text`, sorted, blank first.
    pub fn from_text(text: &str) -> Self {
        let mut symbols: Vec<char> = text.chars().collect();
        symbols.sort_unstable();
        symbols.dedup();
        Self { symbols, blank_index: 0 }
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn blank_index(&self) -> usize {
        self.blank_index
    }

    pub fn num_classes(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn contains(&self, c: char) -> bool {
        self.symbols.contains(&c)
    }

    pub fn class_of(&self, c: char) -> Option<usize> {
        let i = self.symbols.iter().position(|&s| s == c)?;
        Some(if i < self.blank_index { i } else { i + 1 })
    }

    pub fn symbol_of(&self, class: usize) -> Option<char> {
        match class.cmp(&self.blank_index) {
            std::cmp::Ordering::Less => self.symbols.get(class).copied(),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => self.symbols.get(class - 1).copied(),
        }
    }
}

/// Softmax output of the recognizer for one line image.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMatrix {
    timesteps: usize,
    classes: usize,
    source_width: usize,
    data: Vec<f32>,
}

const MAGIC: &[u8; 4] = b"CTCP";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 4;

impl ProbMatrix {
    /// `data` is row-major, `timesteps x classes`. Rows must be probability
    /// vectors summing to 1 within 1e-4.
    pub fn new(timesteps: usize, classes: usize, source_width: usize, data: Vec<f32>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidMatrix(m));
        if timesteps == 0 || classes == 0 {
            return bad(format!("shape {timesteps}x{classes} is empty"));
        }
        if source_width == 0 {
            return bad("source width must be positive".into());
        }
        if data.len() != timesteps * classes {
            return bad(format!("{} values for shape {timesteps}x{classes}", data.len()));
        }
        for (t, row) in data.chunks_exact(classes).enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return bad(format!("row {t} has a negative or non-finite entry"));
            }
            let sum: f64 = row.iter().map(|&p| p as f64).sum();
            if (sum - 1.0).abs() > 1e-4 {
                return bad(format!("row {t} sums to {sum}"));
            }
        }
        Ok(Self { timesteps, classes, source_width, data })
    }

    pub fn from_rows(rows: &[Vec<f32>], source_width: usize) -> Result<Self> {
        let classes = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::InvalidMatrix("ragged rows".into()));
        }
        Self::new(rows.len(), classes, source_width, rows.concat())
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn source_width(&self) -> usize {
        self.source_width
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * self.classes..(t + 1) * self.classes]
    }

    /// Copy with the class columns reordered: new column `i` is old column
    /// `order[i]`.
    pub fn permute_classes(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.classes {
            return Err(domain("permutation length differs from class count"));
        }
        let data = (0..self.timesteps)
            .flat_map(|t| order.iter().map(move |&c| self.data[t * self.classes + c]))
            .collect();
        Self::new(self.timesteps, self.classes, self.source_width, data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [self.timesteps, self.classes, self.source_width] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for p in &self.data {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::InvalidMatrix(m.to_string());
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(bad("missing CTCP header"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::InvalidMatrix(format!("unsupported version {version}")));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let (n, c, w) = (word(6), word(10), word(14));
        let body = &bytes[HEADER_LEN..];
        if n.checked_mul(c).and_then(|x| x.checked_mul(4)) != Some(body.len()) {
            return Err(Error::InvalidMatrix(format!(
                "body of {} bytes does not hold {n}x{c} floats",
                body.len()
            )));
        }
        let data = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Self::new(n, c, w, data)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

/// Pixel span `[start_px, end_px)` of one transcript character.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharBoundary {
    #[serde(rename = "char")]
    pub ch: char,
    #[serde(rename = "start")]
    pub start_px: usize,
    #[serde(rename = "end")]
    pub end_px: usize,
    /// Timesteps assigned to the character.
    pub k: usize,
}

impl CharBoundary {
    pub fn width(&self) -> usize {
        self.end_px - self.start_px
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    /// State per timestep, indexing the sequence `blank, c1, blank, ..., cU, blank`.
    pub path: Vec<usize>,
    /// Summed natural-log probability of the path.
    pub score: f64,
    pub boundaries: Vec<CharBoundary>,
}

/// Class of each state of the blank-interleaved label sequence.
pub fn extended_labels(transcript: &str, alphabet: &Alphabet) -> Result<Vec<usize>> {
    let blank = alphabet.blank_index();
    let mut ext = vec![blank];
    for c in transcript.chars() {
        ext.push(alphabet.class_of(c).ok_or(Error::Vocabulary(c))?);
        ext.push(blank);
    }
    Ok(ext)
}

/// Fewest timesteps that can emit the transcript: one per label plus one
/// blank between each pair of equal neighbours.
pub fn min_timesteps(transcript: &str) -> usize {
    let chars: Vec<char> = transcript.chars().collect();
    chars.len() + chars.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Whether the step `from -> to` between states is a legal CTC move.
pub fn legal_step(ext: &[usize], from: usize, to: usize) -> bool {
    match to.checked_sub(from) {
        Some(0) | Some(1) => true,
        Some(2) => to % 2 == 1 && ext[to] != ext[from],
        _ => false,
    }
}

pub fn log_prob(p: f32) -> f64 {
    if p > 0.0 {
        (p as f64).ln()
    } else {
        LOG_ZERO
    }
}

/// Summed log-probability of a state path, accumulated in time order.
pub fn path_score(probs: &ProbMatrix, ext: &[usize], path: &[usize]) -> f64 {
    path.iter()
        .enumerate()
        .fold(0.0, |acc, (t, &s)| acc + log_prob(probs.row(t)[ext[s]]))
}

/// Maximum-probability CTC path that spells `transcript`.
///
/// Paths whose scores differ by less than `1e-9` (relative) count as tied;
/// among tied paths the one that stays in its state longest is returned,
/// then the one that advances by one, then by two.
pub fn forced_align(probs: &ProbMatrix, transcript: &str, alphabet: &Alphabet) -> Result<Alignment> {
    if probs.classes() != alphabet.num_classes() {
        return Err(Error::InvalidMatrix(format!(
            "matrix has {} classes, alphabet needs {}",
            probs.classes(),
            alphabet.num_classes()
        )));
    }
    let ext = extended_labels(transcript, alphabet)?;
    let n = probs.timesteps();
    let needed = min_timesteps(transcript);
    if n < needed {
        return Err(Error::AlignmentInfeasible { needed, timesteps: n });
    }
    let states = ext.len();
    let lp: Vec<Vec<f64>> = (0..n)
        .map(|t| ext.iter().map(|&c| log_prob(probs.row(t)[c])).collect())
        .collect();

    // best[t][s]: score of the best prefix ending in state s at time t.
    let mut best = vec![vec![f64::NEG_INFINITY; states]; n];
    best[0][0] = lp[0][0];
    if states > 1 {
        best[0][1] = lp[0][1];
    }
    for t in 1..n {
        for s in 0..states {
            let mut m = best[t - 1][s];
            for p in [s.wrapping_sub(1), s.wrapping_sub(2)] {
                if p < states && legal_step(&ext, p, s) && best[t - 1][p] > m {
                    m = best[t - 1][p];
                }
            }
            if m > f64::NEG_INFINITY {
                best[t][s] = m + lp[t][s];
            }
        }
    }

    let finals: Vec<usize> = (states.saturating_sub(2)..states).rev().collect();
    let top = finals.iter().map(|&s| best[n - 1][s]).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * top.abs().max(1.0);
    let near = |v: f64, rest: f64| v + rest >= top - tol;

    let mut path = vec![0usize; n];
    path[n - 1] = *finals.iter().find(|&&s| near(best[n - 1][s], 0.0)).expect("final state reachable");
    let mut rest = 0.0;
    for t in (1..n).rev() {
        let s = path[t];
        rest += lp[t][s];
        let candidates = [s, s.wrapping_sub(1), s.wrapping_sub(2)];
        let pick = candidates
            .iter()
            .copied()
            .filter(|&p| p < states && legal_step(&ext, p, s))
            .find(|&p| near(best[t - 1][p], rest))
            .or_else(|| {
                candidates
                    .iter()
                    .copied()
                    .filter(|&p| p < states && legal_step(&ext, p, s))
                    .max_by(|&a, &b| best[t - 1][a].total_cmp(&best[t - 1][b]))
            })
            .expect("some predecessor is legal");
        path[t - 1] = pick;
    }

    let score = path_score(probs, &ext, &path);
    let chars: Vec<char> = transcript.chars().collect();
    let boundaries = boundaries_from_path(&path, &chars, n, probs.source_width());
    Ok(Alignment { path, score, boundaries })
}

/// Pixel spans of the characters along a state path.
///
/// A character held on timesteps `t_first..=t_last` spans
/// `[floor(t_first * W / N), ceil((t_last + 1) * W / N))`. Where two
/// characters touch without a blank between them the shared edge is rounded
/// to the nearest pixel instead, so spans never overlap.
pub fn boundaries_from_path(path: &[usize], transcript: &[char], timesteps: usize, width: usize) -> Vec<CharBoundary> {
    let (n, w) = (timesteps, width);
    let mut spans: Vec<(usize, usize)> = vec![(usize::MAX, 0); transcript.len()];
    for (t, &s) in path.iter().enumerate() {
        if s % 2 == 1 {
            let span = &mut spans[s / 2];
            span.0 = span.0.min(t);
            span.1 = t;
        }
    }
    let mut out: Vec<CharBoundary> = spans
        .iter()
        .zip(transcript)
        .map(|(&(first, last), &ch)| CharBoundary {
            ch,
            start_px: first * w / n,
            end_px: ((last + 1) * w).div_ceil(n),
            k: last + 1 - first,
        })
        .collect();
    for u in 1..out.len() {
        if out[u - 1].end_px > out[u].start_px {
            let t = spans[u].0;
            let edge = (2 * t * w + n) / (2 * n);
            out[u - 1].end_px = edge;
            out[u].start_px = edge;
        }
    }
    // Only reachable when the image has fewer pixels than timesteps.
    for b in &mut out {
        if b.end_px <= b.start_px {
            b.end_px = (b.start_px + 1).min(w.max(1));
            b.start_px = b.end_px - 1;
        }
    }
    out
}

/// One line of the boundary annotation file (JSON lines).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub line_id: String,
    pub transcript: String,
    pub boundaries: Vec<CharBoundary>,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignFailure {
    pub line_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AlignReport {
    pub records: Vec<AnnotationRecord>,
    pub failures: Vec<AlignFailure>,
}

/// Location of the probability matrix of `line_id`.
pub fn matrix_path(probs_dir: &Path, line_id: &str) -> PathBuf {
    probs_dir.join(format!("{line_id}.ctcp"))
}

/// Align every manifest line against `probs_dir/<line_id>.ctcp`. Failing
/// lines are reported and skipped; output keeps manifest order.
pub fn align_dataset(entries: &[DatasetEntry], probs_dir: &Path, alphabet: &Alphabet) -> AlignReport {
    let results: Vec<Result<AnnotationRecord, AlignFailure>> = entries
        .par_iter()
        .map(|e| {
            let align = || -> Result<AnnotationRecord> {
                let probs = ProbMatrix::read(matrix_path(probs_dir, &e.line_id))?;
                let a = forced_align(&probs, &e.transcript, alphabet)?;
                Ok(AnnotationRecord {
                    line_id: e.line_id.clone(),
                    transcript: e.transcript.clone(),
                    boundaries: a.boundaries,
                    score: a.score,
                })
            };
            align().map_err(|err| AlignFailure { line_id: e.line_id.clone(), reason: err.to_string() })
        })
        .collect();
    let mut report = AlignReport::default();
    for r in results {
        match r {
            Ok(rec) => report.records.push(rec),
            Err(f) => {
                log::warn!("alignment failed for {}: {}", f.line_id, f.reason);
                report.failures.push(f);
            }
        }
    }
    report
}

pub fn write_annotations(path: impl AsRef<Path>, records: &[AnnotationRecord]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.write_all(b"\n")?;
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(no, l)| {
            serde_json::from_str(l).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                reason: format!("line {}: {e}", no + 1),
            })
        })
        .collect()
}
