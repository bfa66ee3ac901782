//! Strikethrough ("blot") augmentation.
//!
//! A blot is drawn in four steps: pick a rectangle on the line, split it into
//! vertical bands, draw Bezier control points from the bands, and composite
//! the rasterized curve over the image as dark ink.
//!
//! All randomness comes from the caller's [`Rng`]; the draw order is fixed so
//! identical seeds give identical bytes.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::{rasterize_curve, ControlPolygon, Point2};
use crate::image::LineImage;
use crate::seed::Rng;

/// Knobs of the strikethrough generator.
///
/// `transparency` is used as the opacity of the ink stroke: 1.0 paints solid
/// black where the stroke covers a pixel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlotParams {
    pub min_h: usize,
    pub max_h: usize,
    pub min_w: usize,
    pub max_w: usize,
    pub incline: f64,
    pub intensity: f64,
    pub transparency: f64,
    pub count_min: usize,
    pub count_max: usize,
    pub proba: f64,
    /// Pen diameter in pixels.
    pub thickness: u32,
    /// Curve samples per blot; `None` means 10 per control point.
    pub samples: Option<usize>,
    /// Nominal width of one control-point band.
    pub band_width: f64,
    /// Chance that a control point is repeated to make the curve loop.
    pub dup_proba: f64,
}

impl Default for BlotParams {
    fn default() -> Self {
        Self {
            min_h: 50,
            max_h: 100,
            min_w: 10,
            max_w: 50,
            incline: 15.0,
            intensity: 0.9,
            transparency: 0.95,
            count_min: 1,
            count_max: 11,
            proba: 0.5,
            thickness: 3,
            samples: None,
            band_width: 8.0,
            dup_proba: 0.2,
        }
    }
}

impl BlotParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(domain(format!("{name} = {v} outside [0, 1]")))
            }
        };
        if self.min_h > self.max_h {
            return Err(domain(format!("min_h {} > max_h {}", self.min_h, self.max_h)));
        }
        if self.min_w > self.max_w {
            return Err(domain(format!("min_w {} > max_w {}", self.min_w, self.max_w)));
        }
        if self.count_min > self.count_max {
            return Err(domain(format!(
                "count_min {} > count_max {}",
                self.count_min, self.count_max
            )));
        }
        if !(self.intensity > 0.0 && self.intensity <= 1.0) {
            return Err(domain(format!("intensity = {} outside (0, 1]", self.intensity)));
        }
        unit("transparency", self.transparency)?;
        unit("proba", self.proba)?;
        unit("dup_proba", self.dup_proba)?;
        if !(self.incline.is_finite() && self.incline >= 0.0) {
            return Err(domain(format!("incline = {} must be finite and non-negative", self.incline)));
        }
        if self.thickness == 0 {
            return Err(domain("thickness must be at least 1"));
        }
        if !(self.band_width.is_finite() && self.band_width > 0.0) {
            return Err(domain("band_width must be positive"));
        }
        if matches!(self.samples, Some(s) if s < 2) {
            return Err(domain("samples must be at least 2"));
        }
        Ok(())
    }
}

/// Pixel rectangle `[x0, x1) x [y0, y1)` that one blot is drawn in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlotRegion {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BlotRegion {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    /// Whether `(x, y)` lies in the rectangle grown by `margin` on every side.
    pub fn contains_with_margin(&self, x: usize, y: usize, margin: usize) -> bool {
        x + margin >= self.x0 && x < self.x1 + margin && y + margin >= self.y0 && y < self.y1 + margin
    }
}

/// Pick the rectangle for one blot, or `None` when the image is narrower
/// than `min_w`.
///
/// Width is uniform in `[min_w, min(max_w, W)]` and height uniform in
/// `[min_h, max_h]` clamped to the image. The rectangle sits at a uniform x
/// offset, centered on the midline with a jitter of up to a quarter of its
/// height.
pub fn choose_region(img: &LineImage, params: &BlotParams, rng: &mut Rng) -> Option<BlotRegion> {
    let (w_img, h_img) = (img.width(), img.height());
    if w_img < params.min_w.max(1) {
        return None;
    }
    let width = rng.gen_range(params.min_w.max(1)..=params.max_w.min(w_img));
    let height = rng.gen_range(params.min_h..=params.max_h).clamp(1, h_img);
    let x0 = rng.gen_range(0..=w_img - width);
    let quarter = height as f64 / 4.0;
    let jitter = if quarter > 0.0 { rng.gen_range(-quarter..=quarter) } else { 0.0 };
    let top = (h_img as f64 / 2.0 + jitter - height as f64 / 2.0).round();
    let y0 = (top.max(0.0) as usize).min(h_img - height);
    Some(BlotRegion { x0, y0, x1: x0 + width, y1: y0 + height })
}

/// Draw the control points of one blot curve.
///
/// The region is cut into bands along x. Each band emits a point with
/// probability `intensity`; if fewer than two distinct points come out, the
/// missing outer band gets a point at its center. A point's y is uniform over
/// the band height, offset by a straight slope of up to `incline` pixels
/// across the region. With probability `dup_proba` a point is repeated.
pub fn generate_blot_points(region: &BlotRegion, params: &BlotParams, rng: &mut Rng) -> ControlPolygon {
    let width = region.width() as f64;
    let bands = ((width / params.band_width).floor() as usize).max(2);
    let band = width / bands as f64;
    let span = (region.height() - 1) as f64;
    let slope = if params.incline > 0.0 {
        rng.gen_range(-params.incline..=params.incline).clamp(-span, span)
    } else {
        0.0
    };
    let free = span - slope.abs();

    let lift = |x: f64| {
        let frac = (x - region.x0 as f64) / width;
        if slope >= 0.0 {
            slope * frac
        } else {
            -slope * (1.0 - frac)
        }
    };

    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(bands + 2);
    let mut first_band_kept = false;
    for j in 0..bands {
        // Every band consumes the same draws whether or not it emits.
        let keep = rng.gen_bool(params.intensity);
        let left = region.x0 as f64 + j as f64 * band;
        let x = rng.gen_range(left..left + band);
        let base = region.y0 as f64 + if free > 0.0 { rng.gen_range(0.0..=free) } else { 0.0 };
        let dup = rng.gen_bool(params.dup_proba);
        if keep {
            first_band_kept |= j == 0;
            let p = (x, base + lift(x));
            pts.push(p);
            if dup {
                pts.push(p);
            }
        }
    }
    let distinct = pts.windows(2).filter(|w| w[0] != w[1]).count() + usize::from(!pts.is_empty());
    if distinct < 2 {
        let mid = |j: usize| {
            let x = region.x0 as f64 + (j as f64 + 0.5) * band;
            (x, region.y0 as f64 + free / 2.0 + lift(x))
        };
        if pts.is_empty() {
            pts = vec![mid(0), mid(bands - 1)];
        } else if first_band_kept {
            pts.push(mid(bands - 1));
        } else {
            pts.insert(0, mid(0));
        }
    }
    to_polygon(pts)
}

fn to_polygon(pts: Vec<(f64, f64)>) -> ControlPolygon {
    ControlPolygon::new(pts.into_iter().map(|(x, y)| Point2::new(x, y)).collect())
        .expect("at least two finite points")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlotStatus {
    Applied,
    /// The `proba` draw decided against augmenting.
    NotSelected,
    /// The image is narrower than `min_w`.
    TooNarrow,
}

/// One drawn blot.
#[derive(Clone, Debug)]
pub struct BlotTrace {
    pub region: BlotRegion,
    pub polygon: ControlPolygon,
}

#[derive(Clone, Debug)]
pub struct BlotOutcome {
    pub image: LineImage,
    pub status: BlotStatus,
    pub blots: Vec<BlotTrace>,
}

/// Apply the augmentation and report what was drawn.
pub fn apply_blot_traced(img: &LineImage, params: &BlotParams, rng: &mut Rng) -> Result<BlotOutcome> {
    params.validate()?;
    let mut out = img.clone();
    if !rng.gen_bool(params.proba) {
        return Ok(BlotOutcome { image: out, status: BlotStatus::NotSelected, blots: Vec::new() });
    }
    let count = rng.gen_range(params.count_min..=params.count_max);
    let mut blots = Vec::with_capacity(count);
    for _ in 0..count {
        let Some(region) = choose_region(img, params, rng) else {
            return Ok(BlotOutcome { image: out, status: BlotStatus::TooNarrow, blots });
        };
        let polygon = generate_blot_points(&region, params, rng);
        let samples = params.samples.unwrap_or_else(|| polygon.default_samples());
        let mask = rasterize_curve(&polygon, samples, params.thickness)?;
        composite_ink(&mut out, &mask, params.transparency);
        blots.push(BlotTrace { region, polygon });
    }
    Ok(BlotOutcome { image: out, status: BlotStatus::Applied, blots })
}

/// Apply the strikethrough augmentation with probability `params.proba`.
pub fn apply_blot(img: &LineImage, params: &BlotParams, rng: &mut Rng) -> Result<LineImage> {
    apply_blot_traced(img, params, rng).map(|o| o.image)
}

/// `out = round((1 - opacity * coverage) * src)` on every covered pixel.
fn composite_ink(img: &mut LineImage, mask: &crate::geometry::CoverageMask, opacity: f64) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    for (x, y, c) in mask.covered() {
        if x < 0 || y < 0 || x >= w || y >= h {
            continue;
        }
        let src = img.get(x as usize, y as usize) as f64;
        let value = ((1.0 - opacity * c as f64) * src).round().clamp(0.0, 255.0);
        img.set(x as usize, y as usize, value as u8);
    }
}
