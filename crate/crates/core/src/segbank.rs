//! Token to image-segment bank.
//!
//! Every run of 1..=`max_token_len` consecutive characters of an aligned
//! training line (spaces and punctuation included) is cropped at full height
//! and filed under its text. Crops are rescaled to a common height so they
//! can be stacked side by side.
//!
//! On disk a bank is a directory holding `manifest.json` and one PNG per
//! segment under `segments/`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::ctc_align::{AnnotationRecord, CharBoundary};
use crate::error::{domain, Error, Result};
use crate::image::LineImage;
use crate::seed::Rng;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub token: String,
    pub image: LineImage,
    pub source_line_id: String,
}

impl Segment {
    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    pub max_token_len: usize,
    pub norm_height: usize,
    /// Reservoir size per token.
    pub max_per_token: usize,
    /// Seed of the reservoir sampling.
    pub seed: u64,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self { max_token_len: 8, norm_height: 128, max_per_token: 500, seed: 0 }
    }
}

/// Immutable once built; share it freely between threads.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentBank {
    entries: BTreeMap<String, Vec<Segment>>,
    norm_height: usize,
    max_token_len: usize,
}

impl SegmentBank {
    pub fn norm_height(&self) -> usize {
        self.norm_height
    }

    pub fn max_token_len(&self) -> usize {
        self.max_token_len
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn segments(&self, token: &str) -> &[Segment] {
        self.entries.get(token).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    /// Characters that have a single-character segment.
    pub fn alphabet(&self) -> Vec<char> {
        self.entries
            .keys()
            .filter_map(|k| {
                let mut it = k.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Some(c),
                    _ => None,
                }
            })
            .collect()
    }

    pub fn has_char(&self, c: char) -> bool {
        let mut buf = [0u8; 4];
        self.entries.contains_key(c.encode_utf8(&mut buf) as &str)
    }

    /// Draw one segment for `token`, uniformly among its crops.
    ///
    /// A token with no crops of its own is assembled from the longest known
    /// pieces, left to right.
    pub fn sample_segment(&self, token: &str, rng: &mut Rng) -> Result<Segment> {
        if token.is_empty() {
            return Err(domain("cannot sample an empty token"));
        }
        if let Some(segs) = self.entries.get(token) {
            return Ok(segs[rng.gen_range(0..segs.len())].clone());
        }
        let chars: Vec<char> = token.chars().collect();
        let mut parts = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let longest = (1..=(chars.len() - i).min(self.max_token_len.max(1)))
                .rev()
                .map(|len| chars[i..i + len].iter().collect::<String>())
                .find(|piece| self.entries.contains_key(piece))
                .ok_or(Error::Vocabulary(chars[i]))?;
            i += longest.chars().count();
            let segs = &self.entries[&longest];
            parts.push(segs[rng.gen_range(0..segs.len())].clone());
        }
        let images: Vec<LineImage> = parts.iter().map(|p| p.image.clone()).collect();
        Ok(Segment {
            token: token.to_string(),
            image: LineImage::hconcat(&images)?,
            source_line_id: parts.iter().map(|p| p.source_line_id.as_str()).collect::<Vec<_>>().join("+"),
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("segments"))?;
        let mut manifest = BankManifest {
            norm_height: self.norm_height,
            max_token_len: self.max_token_len,
            alphabet: self.alphabet().into_iter().collect(),
            entries: Vec::with_capacity(self.entries.len()),
        };
        let mut n = 0usize;
        for (token, segs) in &self.entries {
            let mut files = Vec::with_capacity(segs.len());
            for seg in segs {
                let file = format!("segments/{n:07}.png");
                seg.image.save_png(dir.join(&file))?;
                files.push(StoredSegment { file, source_line_id: seg.source_line_id.clone(), width: seg.width() });
                n += 1;
            }
            manifest.entries.push(StoredToken { token: token.clone(), count: segs.len(), segments: files });
        }
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest: BankManifest = serde_json::from_slice(&fs::read(&manifest_path)?)?;
        let bad = |reason: String| Error::Format { path: manifest_path.clone(), reason };
        let mut entries = BTreeMap::new();
        for stored in manifest.entries {
            if stored.token.is_empty() || stored.segments.is_empty() {
                return Err(bad(format!("token {:?} is empty or has no segments", stored.token)));
            }
            let mut segs = Vec::with_capacity(stored.segments.len());
            for s in stored.segments {
                let image = LineImage::load_png(dir.join(&s.file))?;
                if image.height() != manifest.norm_height {
                    return Err(bad(format!("{} has height {}", s.file, image.height())));
                }
                segs.push(Segment { token: stored.token.clone(), image, source_line_id: s.source_line_id });
            }
            entries.insert(stored.token, segs);
        }
        Ok(Self { entries, norm_height: manifest.norm_height, max_token_len: manifest.max_token_len })
    }
}

#[derive(Serialize, Deserialize)]
struct BankManifest {
    norm_height: usize,
    max_token_len: usize,
    alphabet: String,
    entries: Vec<StoredToken>,
}

#[derive(Serialize, Deserialize)]
struct StoredToken {
    token: String,
    count: usize,
    segments: Vec<StoredSegment>,
}

#[derive(Serialize, Deserialize)]
struct StoredSegment {
    file: String,
    source_line_id: String,
    width: usize,
}

/// Incremental bank construction, one aligned line at a time.
pub struct BankBuilder {
    config: BankConfig,
    entries: BTreeMap<String, Vec<Segment>>,
    seen: HashMap<String, usize>,
    rng: Rng,
    skipped: Vec<(String, String)>,
}

impl BankBuilder {
    pub fn new(config: BankConfig) -> Result<Self> {
        if config.max_token_len == 0 || config.norm_height == 0 || config.max_per_token == 0 {
            return Err(domain("max_token_len, norm_height and max_per_token must be positive"));
        }
        let rng = crate::seed::rng_from_seed(config.seed);
        Ok(Self { config, entries: BTreeMap::new(), seen: HashMap::new(), rng, skipped: Vec::new() })
    }

    /// Add every token crop of one line. Returns `false` and records the
    /// reason when the line is unusable.
    pub fn add_line(&mut self, line_id: &str, image: &LineImage, transcript: &str, boundaries: &[CharBoundary]) -> bool {
        match self.try_add_line(line_id, image, transcript, boundaries) {
            Ok(()) => true,
            Err(e) => {
                log::warn!("skipping line {line_id}: {e}");
                self.skipped.push((line_id.to_string(), e.to_string()));
                false
            }
        }
    }

    fn try_add_line(&mut self, line_id: &str, image: &LineImage, transcript: &str, boundaries: &[CharBoundary]) -> Result<()> {
        let chars: Vec<char> = transcript.chars().collect();
        if chars.len() != boundaries.len() || chars.iter().zip(boundaries).any(|(c, b)| *c != b.ch) {
            return Err(domain("boundaries do not spell the transcript"));
        }
        if let Some(b) = boundaries.iter().find(|b| b.start_px >= b.end_px || b.end_px > image.width()) {
            return Err(domain(format!(
                "boundary [{}, {}) of {:?} outside image of width {}",
                b.start_px,
                b.end_px,
                b.ch,
                image.width()
            )));
        }
        let mut crops = Vec::new();
        for i in 0..chars.len() {
            for len in 1..=self.config.max_token_len.min(chars.len() - i) {
                let j = i + len - 1;
                let (x0, x1) = (boundaries[i].start_px, boundaries[j].end_px);
                if x0 >= x1 {
                    continue;
                }
                let token: String = chars[i..=j].iter().collect();
                let mut crop = image.crop_columns(x0, x1)?.resize_to_height(self.config.norm_height)?;
                crop.max_normalize();
                crops.push(Segment { token, image: crop, source_line_id: line_id.to_string() });
            }
        }
        for seg in crops {
            self.insert(seg);
        }
        Ok(())
    }

    /// Reservoir sampling keeps a uniform subset of at most `max_per_token`.
    fn insert(&mut self, seg: Segment) {
        let seen = self.seen.entry(seg.token.clone()).or_insert(0);
        *seen += 1;
        let slot = self.entries.entry(seg.token.clone()).or_default();
        if slot.len() < self.config.max_per_token {
            slot.push(seg);
        } else {
            let j = self.rng.gen_range(0..*seen);
            if j < slot.len() {
                slot[j] = seg;
            }
        }
    }

    /// Lines rejected so far, as `(line_id, reason)`.
    pub fn skipped(&self) -> &[(String, String)] {
        &self.skipped
    }

    pub fn finish(self) -> SegmentBank {
        SegmentBank {
            entries: self.entries,
            norm_height: self.config.norm_height,
            max_token_len: self.config.max_token_len,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BankBuildSummary {
    pub lines_used: usize,
    pub lines_skipped: usize,
    pub tokens: usize,
    pub segments: usize,
    pub skipped: Vec<(String, String)>,
}

/// Build a bank from annotation records, loading images through `image_of`.
pub fn build_bank<F>(annotations: &[AnnotationRecord], mut image_of: F, config: BankConfig) -> Result<(SegmentBank, BankBuildSummary)>
where
    F: FnMut(&str) -> Result<LineImage>,
{
    let mut builder = BankBuilder::new(config)?;
    let mut used = 0;
    for rec in annotations {
        let image = match image_of(&rec.line_id) {
            Ok(img) => img,
            Err(e) => {
                log::warn!("skipping line {}: {e}", rec.line_id);
                builder.skipped.push((rec.line_id.clone(), e.to_string()));
                continue;
            }
        };
        used += usize::from(builder.add_line(&rec.line_id, &image, &rec.transcript, &rec.boundaries));
    }
    let skipped = builder.skipped.clone();
    let bank = builder.finish();
    let summary = BankBuildSummary {
        lines_used: used,
        lines_skipped: skipped.len(),
        tokens: bank.len(),
        segments: bank.entries.values().map(Vec::len).sum(),
        skipped,
    };
    Ok((bank, summary))
}

/// Map from line id to image path, for [`build_bank`].
pub fn image_paths(entries: &[crate::manifest::DatasetEntry], include_all_splits: bool) -> HashMap<String, PathBuf> {
    entries
        .iter()
        .filter(|e| include_all_splits || e.is_train())
        .map(|e| (e.line_id.clone(), e.image_path.clone()))
        .collect()
}
