//! Synthetic line renderer with known character extents.
//!
//! Glyphs are procedural strokes in fixed-width cells, so every character's
//! true pixel extent is known exactly. Paired with near-one-hot probability
//! matrices this gives a ground-truth dataset for checking alignment, bank
//! building and generation end to end.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;

use crate::ctc_align::{Alphabet, ProbMatrix};
use crate::error::{domain, Result};
use crate::image::LineImage;
use crate::manifest::{write_manifest, DatasetEntry};
use crate::seed::{rng_from_seed, Rng};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthFont {
    pub cell_width: usize,
    pub height: usize,
    /// Blank columns on each side of a glyph inside its cell.
    pub margin: usize,
    /// Seed of the glyph shapes.
    pub style_seed: u64,
}

impl Default for SynthFont {
    fn default() -> Self {
        Self { cell_width: 32, height: 48, margin: 5, style_seed: 0 }
    }
}

impl SynthFont {
    /// Ink bitmap of one glyph cell, row-major `cell_width x height`.
    pub fn glyph(&self, c: char) -> Vec<u8> {
        let (w, h) = (self.cell_width, self.height);
        let mut cell = vec![255u8; w * h];
        if c.is_whitespace() {
            return cell;
        }
        let mut rng = rng_from_seed(self.style_seed ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (x0, x1) = (self.margin, w - self.margin);
        let (top, bottom) = (h / 6, h - h / 6);
        for x in x0..x1 {
            // Outer columns always carry a full stroke so the extent is exact.
            let (y0, y1) = if x == x0 || x == x1 - 1 {
                (top, bottom)
            } else {
                let a = rng.gen_range(top..bottom);
                let b = rng.gen_range(top..bottom);
                (a.min(b), a.max(b) + 1)
            };
            let shade = rng.gen_range(0..60u8);
            for y in y0..y1 {
                cell[y * w + x] = shade;
            }
        }
        cell
    }

    /// True ink extent `[start, end)` of the `i`-th character of a line.
    pub fn extent(&self, i: usize) -> (usize, usize) {
        let left = i * self.cell_width;
        (left + self.margin, left + self.cell_width - self.margin)
    }

    pub fn render(&self, text: &str) -> Result<(LineImage, Vec<(usize, usize)>)> {
        let chars: Vec<char> = text.chars().collect();
        if chars.is_empty() {
            return Err(domain("cannot render an empty line"));
        }
        let cells: Vec<LineImage> = chars
            .iter()
            .map(|&c| LineImage::new(self.cell_width, self.height, self.glyph(c)))
            .collect::<Result<_>>()?;
        let extents = (0..chars.len()).map(|i| self.extent(i)).collect();
        Ok((LineImage::hconcat(&cells)?, extents))
    }
}

/// Near-one-hot matrix for a rendered line: timestep `t` covers pixels
/// `[t * stride, (t + 1) * stride)` and peaks on the character whose extent
/// holds its center, or on blank. Peak mass is uniform in `peak`.
pub fn emit_probs(
    text: &str,
    extents: &[(usize, usize)],
    width: usize,
    alphabet: &Alphabet,
    stride: usize,
    peak: (f32, f32),
    rng: &mut Rng,
) -> Result<ProbMatrix> {
    if stride == 0 || !width.is_multiple_of(stride) {
        return Err(domain(format!("width {width} is not a multiple of stride {stride}")));
    }
    let chars: Vec<char> = text.chars().collect();
    let n = width / stride;
    let classes = alphabet.num_classes();
    let mut data = Vec::with_capacity(n * classes);
    for t in 0..n {
        let center = t * stride + stride / 2;
        let label = extents
            .iter()
            .position(|&(a, b)| a <= center && center < b)
            .map(|i| alphabet.class_of(chars[i]).ok_or(crate::Error::Vocabulary(chars[i])))
            .transpose()?
            .unwrap_or(alphabet.blank_index());
        let p = rng.gen_range(peak.0..=peak.1);
        let rest = (1.0 - p) / (classes - 1).max(1) as f32;
        data.extend((0..classes).map(|c| if c == label { p } else { rest }));
    }
    ProbMatrix::new(n, classes, width, data)
}

/// A rendered dataset with its ground truth.
#[derive(Clone, Debug)]
pub struct SynthLine {
    pub line_id: String,
    pub text: String,
    pub image: LineImage,
    pub extents: Vec<(usize, usize)>,
    pub probs: ProbMatrix,
}

pub fn synth_lines(texts: &[String], font: &SynthFont, alphabet: &Alphabet, stride: usize, seed: u64) -> Result<Vec<SynthLine>> {
    let mut rng = rng_from_seed(seed);
    texts
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let (image, extents) = font.render(text)?;
            let probs = emit_probs(text, &extents, image.width(), alphabet, stride, (0.7, 0.95), &mut rng)?;
            Ok(SynthLine { line_id: format!("syn{i:05}"), text: text.clone(), image, extents, probs })
        })
        .collect()
}

/// Write `images/`, `probs/` and `manifest.tsv` under `dir`. Returns the
/// manifest path.
pub fn write_dataset(dir: &Path, lines: &[SynthLine]) -> Result<PathBuf> {
    fs::create_dir_all(dir.join("images"))?;
    fs::create_dir_all(dir.join("probs"))?;
    let mut entries = Vec::with_capacity(lines.len());
    for l in lines {
        let rel = PathBuf::from("images").join(format!("{}.png", l.line_id));
        l.image.save_png(dir.join(&rel))?;
        l.probs.write(crate::ctc_align::matrix_path(&dir.join("probs"), &l.line_id))?;
        entries.push(DatasetEntry::new(l.line_id.clone(), rel, l.text.clone()));
    }
    let manifest = dir.join("manifest.tsv");
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}

/// Random words over `letters`, joined by single spaces.
pub fn random_text(letters: &[char], words: std::ops::RangeInclusive<usize>, word_len: std::ops::RangeInclusive<usize>, rng: &mut Rng) -> String {
    let n = rng.gen_range(words);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(word_len.clone());
            (0..len).map(|_| letters[rng.gen_range(0..letters.len())]).collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(" ")
}
