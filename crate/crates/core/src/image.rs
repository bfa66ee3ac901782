//! Grayscale line images.

use std::path::Path;

use ::image::imageops::{self, FilterType};
use ::image::{GrayImage, ImageReader};

use crate::error::{domain, Error, Result};

/// One handwritten text line as row-major 8-bit grayscale (0 = ink, 255 = paper).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl LineImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(domain(format!("image must be at least 1x1, got {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(domain(format!(
                "buffer length {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    /// A blank (paper-colored) image.
    pub fn blank(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![255; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    /// Full-height crop of the half-open column range `[x0, x1)`.
    pub fn crop_columns(&self, x0: usize, x1: usize) -> Result<Self> {
        if x0 >= x1 || x1 > self.width {
            return Err(domain(format!(
                "column range [{x0}, {x1}) outside image of width {}",
                self.width
            )));
        }
        let w = x1 - x0;
        let mut pixels = Vec::with_capacity(w * self.height);
        for row in self.pixels.chunks_exact(self.width) {
            pixels.extend_from_slice(&row[x0..x1]);
        }
        Self::new(w, self.height, pixels)
    }

    /// Rescale to `height` rows, keeping the aspect ratio.
    pub fn resize_to_height(&self, height: usize) -> Result<Self> {
        if height == 0 {
            return Err(domain("target height must be positive"));
        }
        if height == self.height {
            return Ok(self.clone());
        }
        let width = ((self.width as f64 * height as f64 / self.height as f64).round() as usize).max(1);
        let resized = imageops::resize(&self.to_gray(), width as u32, height as u32, FilterType::Triangle);
        Self::from_gray(resized)
    }

    /// Stretch intensities so the brightest pixel becomes 255.
    pub fn max_normalize(&mut self) {
        let max = self.pixels.iter().copied().max().unwrap_or(255);
        if max == 0 || max == 255 {
            return;
        }
        for p in &mut self.pixels {
            *p = ((*p as u32 * 255 + max as u32 / 2) / max as u32) as u8;
        }
    }

    /// Horizontal concatenation. All parts must share one height.
    pub fn hconcat(parts: &[LineImage]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| domain("nothing to concatenate"))?;
        let height = first.height;
        if let Some(bad) = parts.iter().find(|p| p.height != height) {
            return Err(domain(format!(
                "height mismatch in concatenation: {} vs {height}",
                bad.height
            )));
        }
        let width: usize = parts.iter().map(|p| p.width).sum();
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for part in parts {
                pixels.extend_from_slice(&part.pixels[y * part.width..(y + 1) * part.width]);
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .expect("buffer length checked at construction")
    }

    pub fn from_gray(img: GrayImage) -> Result<Self> {
        let (w, h) = img.dimensions();
        Self::new(w as usize, h as usize, img.into_raw())
    }

    /// Load any PNG, converting color input to luma.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img_err = |source| Error::Image { path: path.to_path_buf(), source };
        let decoded = ImageReader::open(path)?
            .with_guessed_format()?
            .decode()
            .map_err(img_err)?;
        Self::from_gray(decoded.to_luma8())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_gray()
            .save_with_format(path, ::image::ImageFormat::Png)
            .map_err(|source| Error::Image { path: path.to_path_buf(), source })
    }
}
