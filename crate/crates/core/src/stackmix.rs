//! StackMix: new labeled lines from corpus text and bank segments.
//!
//! Each line picks a maximum token length from a [`TokenizerMixture`],
//! splits the text greedily into the longest tokens the bank knows, draws one
//! crop per token and places the crops side by side.

use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{filter_lines, FilterMode};
use crate::error::{domain, Error, Result};
use crate::image::LineImage;
use crate::manifest::{write_manifest, DatasetEntry};
use crate::segbank::SegmentBank;
use crate::seed::{derive_seed, rng_from_seed, Rng};

/// Distribution over the maximum token length used for one line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizerMixture {
    pub max_lens: Vec<usize>,
    pub probs: Vec<f64>,
}

impl Default for TokenizerMixture {
    fn default() -> Self {
        Self { max_lens: vec![3, 4, 5, 6, 7, 8], probs: vec![0.05, 0.15, 0.2, 0.2, 0.2, 0.2] }
    }
}

impl TokenizerMixture {
    pub fn validate(&self) -> Result<()> {
        if self.max_lens.is_empty() || self.max_lens.len() != self.probs.len() {
            return Err(domain("max_lens and probs must be non-empty and of equal length"));
        }
        if self.max_lens.contains(&0) {
            return Err(domain("max_lens must be positive"));
        }
        if self.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(domain("mixture probabilities must be non-negative"));
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(domain(format!("mixture probabilities sum to {sum}")));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut Rng) -> Result<usize> {
        let dist = WeightedIndex::new(&self.probs).map_err(|e| domain(e.to_string()))?;
        Ok(self.max_lens[dist.sample(rng)])
    }
}

/// Split `text` left to right into the longest bank tokens of at most
/// `max_len` characters. The tokens concatenate back to `text`.
pub fn mwe_tokenize(text: &str, bank: &SegmentBank, max_len: usize) -> Result<Vec<String>> {
    if max_len == 0 {
        return Err(domain("max_len must be positive"));
    }
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let token = (1..=max_len.min(chars.len() - i))
            .rev()
            .map(|len| chars[i..i + len].iter().collect::<String>())
            .find(|t| bank.contains(t))
            .ok_or(Error::Vocabulary(chars[i]))?;
        i += token.chars().count();
        tokens.push(token);
    }
    Ok(tokens)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratedLine {
    pub image: LineImage,
    pub transcript: String,
    /// `(token, source_line_id)` for every stacked segment, in order.
    pub provenance: Vec<(String, String)>,
    /// Width of every stacked segment, in order.
    pub segment_widths: Vec<usize>,
}

/// Generate one synthetic line spelling `text`.
pub fn stackmix_line(text: &str, bank: &SegmentBank, mix: &TokenizerMixture, rng: &mut Rng) -> Result<GeneratedLine> {
    if text.is_empty() {
        return Err(domain("cannot generate an empty line"));
    }
    mix.validate()?;
    let max_len = mix.sample(rng)?;
    let tokens = mwe_tokenize(text, bank, max_len)?;
    let mut images = Vec::with_capacity(tokens.len());
    let mut provenance = Vec::with_capacity(tokens.len());
    let mut segment_widths = Vec::with_capacity(tokens.len());
    for token in tokens {
        let seg = bank.sample_segment(&token, rng)?;
        segment_widths.push(seg.width());
        images.push(seg.image);
        provenance.push((token, seg.source_line_id));
    }
    Ok(GeneratedLine { image: LineImage::hconcat(&images)?, transcript: text.to_string(), provenance, segment_widths })
}

/// Generate `n_lines` lines, cycling through `lines`. Line `i` uses its own
/// random stream seeded with `base_seed + i`, so output does not depend on
/// the number of worker threads.
pub fn generate_lines(
    lines: &[String],
    bank: &SegmentBank,
    mix: &TokenizerMixture,
    n_lines: usize,
    base_seed: u64,
) -> Result<Vec<GeneratedLine>> {
    let usable: Vec<&String> = lines.iter().filter(|l| !l.is_empty()).collect();
    if n_lines == 0 {
        return Ok(Vec::new());
    }
    if usable.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    mix.validate()?;
    (0..n_lines)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(base_seed, i));
            stackmix_line(usable[i % usable.len()], bank, mix, &mut rng)
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GenerateSummary {
    pub generated: usize,
    pub corpus_lines: usize,
    pub usable_lines: usize,
    pub skipped_lines: usize,
    pub manifest: PathBuf,
}

/// Filter `corpus` to the bank's alphabet, generate `n_lines` lines into
/// `out_dir/images/` and write `out_dir/manifest.tsv`.
pub fn generate_corpus(
    corpus: &str,
    bank: &SegmentBank,
    mix: &TokenizerMixture,
    n_lines: usize,
    base_seed: u64,
    mode: FilterMode,
    out_dir: &Path,
) -> Result<GenerateSummary> {
    let alphabet = bank.alphabet();
    let (filtered, stats) = filter_lines(corpus, |c| alphabet.contains(&c), mode, None);
    let usable: Vec<String> = filtered.into_iter().filter(|l| !l.is_empty()).collect();
    if usable.is_empty() && n_lines > 0 {
        return Err(Error::EmptyCorpus);
    }
    let generated = generate_lines(&usable, bank, mix, n_lines, base_seed)?;

    fs::create_dir_all(out_dir.join("images"))?;
    let mut entries = Vec::with_capacity(generated.len());
    for (i, line) in generated.iter().enumerate() {
        let line_id = format!("sm{i:07}");
        let rel = PathBuf::from("images").join(format!("{line_id}.png"));
        line.image.save_png(out_dir.join(&rel))?;
        entries.push(DatasetEntry::new(line_id, rel, line.transcript.clone()));
    }
    let manifest = out_dir.join("manifest.tsv");
    write_manifest(&manifest, &entries)?;
    Ok(GenerateSummary {
        generated: generated.len(),
        corpus_lines: stats.total_lines,
        usable_lines: usable.len(),
        skipped_lines: stats.total_lines - stats.usable_lines,
        manifest,
    })
}
