//! Bernstein polynomials, Bezier curves and their rasterization.
//!
//! Curve math is done in `f64`; quantization to pixels happens only when a
//! curve is rasterized.

use crate::error::{domain, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Control points `v_0..v_n` of a degree-`n` Bezier curve.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPolygon(Vec<Point2>);

impl ControlPolygon {
    pub fn new(points: Vec<Point2>) -> Result<Self> {
        if points.len() < 2 {
            return Err(domain(format!(
                "control polygon needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(domain("control points must be finite"));
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &[Point2] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }

    /// Sample count used when the caller does not pick one.
    pub fn default_samples(&self) -> usize {
        10 * self.0.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveSample {
    pub s: f64,
    pub position: Point2,
}

fn check_parameter(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(domain(format!("curve parameter {s} outside [0, 1]")));
    }
    Ok(())
}

fn binomial(n: usize, j: usize) -> f64 {
    let j = j.min(n - j);
    (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Bernstein basis polynomial `C(n, j) s^j (1 - s)^(n - j)`.
pub fn bernstein(j: usize, n: usize, s: f64) -> Result<f64> {
    if j > n {
        return Err(domain(format!("basis index {j} exceeds degree {n}")));
    }
    check_parameter(s)?;
    Ok(binomial(n, j) * s.powi(j as i32) * (1.0 - s).powi((n - j) as i32))
}

/// Point on the curve at parameter `s`, as the Bernstein-weighted sum of the
/// control points.
pub fn bezier_point(poly: &ControlPolygon, s: f64) -> Result<Point2> {
    check_parameter(s)?;
    let n = poly.degree();
    // Exact endpoints; the weighted sum only reaches them up to rounding.
    if s == 0.0 {
        return Ok(poly.0[0]);
    }
    if s == 1.0 {
        return Ok(poly.0[n]);
    }
    let mut acc = Point2::new(0.0, 0.0);
    for (j, v) in poly.0.iter().enumerate() {
        let b = bernstein(j, n, s)?;
        acc.x += b * v.x;
        acc.y += b * v.y;
    }
    Ok(acc)
}

/// `count` evenly spaced samples from `s = 0` to `s = 1`.
pub fn sample_curve(poly: &ControlPolygon, count: usize) -> Result<Vec<CurveSample>> {
    if count < 2 {
        return Err(domain(format!("need at least 2 curve samples, got {count}")));
    }
    (0..count)
        .map(|i| {
            let s = i as f64 / (count - 1) as f64;
            Ok(CurveSample { s, position: bezier_point(poly, s)? })
        })
        .collect()
}

/// Per-pixel coverage in `[0, 1]` over a rectangular window whose top-left
/// pixel is `(x0, y0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageMask {
    pub x0: i64,
    pub y0: i64,
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl CoverageMask {
    pub fn coverage(&self, x: i64, y: i64) -> f32 {
        if x < self.x0 || y < self.y0 {
            return 0.0;
        }
        let (dx, dy) = ((x - self.x0) as usize, (y - self.y0) as usize);
        if dx >= self.width || dy >= self.height {
            return 0.0;
        }
        self.data[dy * self.width + dx]
    }

    /// Pixels with nonzero coverage as `(x, y, coverage)`.
    pub fn covered(&self) -> impl Iterator<Item = (i64, i64, f32)> + '_ {
        self.data.iter().enumerate().filter(|(_, c)| **c > 0.0).map(move |(i, c)| {
            (self.x0 + (i % self.width) as i64, self.y0 + (i / self.width) as i64, *c)
        })
    }
}

/// Integer pixels on the line between two pixel centers, endpoints included.
pub fn bresenham(from: (i64, i64), to: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = from;
    let dx = (to.0 - x).abs();
    let dy = -(to.1 - y).abs();
    let sx = if x < to.0 { 1 } else { -1 };
    let sy = if y < to.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push((x, y));
        if (x, y) == to {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Offsets of a round stamp of diameter `thickness`.
fn disc_offsets(thickness: u32) -> Vec<(i64, i64)> {
    let r = thickness as f64 / 2.0;
    let reach = r.floor() as i64;
    let mut out = Vec::new();
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            if ((dx * dx + dy * dy) as f64) <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Rasterize the polyline through `samples` evenly spaced curve points,
/// stamping a round pen of diameter `thickness` at every pixel it passes.
pub fn rasterize_curve(poly: &ControlPolygon, samples: usize, thickness: u32) -> Result<CoverageMask> {
    if thickness < 1 {
        return Err(domain("stroke thickness must be at least 1"));
    }
    let pts = sample_curve(poly, samples)?;
    let pixel = |p: Point2| (p.x.round() as i64, p.y.round() as i64);

    let mut spine = vec![pixel(pts[0].position)];
    for pair in pts.windows(2) {
        let line = bresenham(pixel(pair[0].position), pixel(pair[1].position));
        spine.extend_from_slice(&line[1..]);
    }

    let pen = disc_offsets(thickness);
    let reach = pen.iter().map(|(dx, _)| dx.abs()).max().unwrap_or(0);
    let min_x = spine.iter().map(|p| p.0).min().unwrap() - reach;
    let max_x = spine.iter().map(|p| p.0).max().unwrap() + reach;
    let min_y = spine.iter().map(|p| p.1).min().unwrap() - reach;
    let max_y = spine.iter().map(|p| p.1).max().unwrap() + reach;
    let width = (max_x - min_x + 1) as usize;
    let height = (max_y - min_y + 1) as usize;
    let mut data = vec![0.0f32; width * height];
    for &(x, y) in &spine {
        for &(dx, dy) in &pen {
            let (px, py) = ((x + dx - min_x) as usize, (y + dy - min_y) as usize);
            data[py * width + px] = 1.0;
        }
    }
    Ok(CoverageMask { x0: min_x, y0: min_y, width, height, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly(pts: &[(f64, f64)]) -> ControlPolygon {
        ControlPolygon::new(pts.iter().map(|&(x, y)| Point2::new(x, y)).collect()).unwrap()
    }

    /// de Casteljau evaluation, an independent route to the same point.
    fn de_casteljau(poly: &ControlPolygon, s: f64) -> Point2 {
        let mut pts = poly.points().to_vec();
        while pts.len() > 1 {
            pts = pts
                .windows(2)
                .map(|w| Point2::new(w[0].x + s * (w[1].x - w[0].x), w[0].y + s * (w[1].y - w[0].y)))
                .collect();
        }
        pts[0]
    }

    #[test]
    fn bernstein_fixtures() {
        assert_eq!(bernstein(0, 0, 0.3).unwrap(), 1.0);
        assert!((bernstein(1, 2, 0.5).unwrap() - 0.5).abs() < 1e-15);
        let sum: f64 = (0..=5).map(|j| bernstein(j, 5, 0.37).unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bernstein_domain_errors() {
        assert!(bernstein(3, 2, 0.5).is_err());
        assert!(bernstein(0, 2, -0.1).is_err());
        assert!(bernstein(0, 2, 1.5).is_err());
        assert!(bernstein(0, 2, f64::NAN).is_err());
    }

    #[test]
    fn bezier_fixtures() {
        let line = poly(&[(0.0, 0.0), (10.0, 0.0)]);
        assert_eq!(bezier_point(&line, 0.0).unwrap(), Point2::new(0.0, 0.0));
        assert_eq!(bezier_point(&line, 0.5).unwrap(), Point2::new(5.0, 0.0));
        let arc = poly(&[(0.0, 0.0), (5.0, 10.0), (10.0, 0.0)]);
        // 0.25*(0,0) + 0.5*(5,10) + 0.25*(10,0)
        let p = bezier_point(&arc, 0.5).unwrap();
        assert!((p.x - 5.0).abs() < 1e-12 && (p.y - 5.0).abs() < 1e-12);
        assert!(bezier_point(&arc, 1.01).is_err());
    }

    #[test]
    fn polygon_needs_two_points() {
        assert!(ControlPolygon::new(vec![]).is_err());
        assert!(ControlPolygon::new(vec![Point2::new(1.0, 1.0)]).is_err());
        assert!(ControlPolygon::new(vec![Point2::new(f64::NAN, 0.0), Point2::new(1.0, 1.0)]).is_err());
    }

    #[test]
    fn straight_thin_line_is_bresenham() {
        let p = poly(&[(1.0, 2.0), (13.0, 7.0)]);
        let mask = rasterize_curve(&p, 2, 1).unwrap();
        let mut got: Vec<_> = mask.covered().map(|(x, y, _)| (x, y)).collect();
        let mut want = bresenham((1, 2), (13, 7));
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn two_samples_give_the_chord() {
        let p = poly(&[(0.0, 0.0), (4.0, 20.0), (9.0, -3.0), (20.0, 5.0)]);
        let mask = rasterize_curve(&p, 2, 1).unwrap();
        let mut got: Vec<_> = mask.covered().map(|(x, y, _)| (x, y)).collect();
        got.sort();
        let mut want = bresenham((0, 0), (20, 5));
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn arc_mask_stays_near_the_curve() {
        let p = poly(&[(0.0, 0.0), (5.0, 10.0), (10.0, 0.0)]);
        let dense: Vec<Point2> = (0..=10_000).map(|i| de_casteljau(&p, i as f64 / 10_000.0)).collect();
        for thickness in [1u32, 2, 3, 5] {
            let mask = rasterize_curve(&p, 101, thickness).unwrap();
            let limit = thickness as f64 / 2.0 + 1.0;
            for (x, y, _) in mask.covered() {
                let d = dense
                    .iter()
                    .map(|q| ((q.x - x as f64).powi(2) + (q.y - y as f64).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min);
                assert!(d <= limit, "pixel ({x},{y}) is {d} from the curve, thickness {thickness}");
            }
        }
    }

    #[test]
    fn rasterize_rejects_bad_args() {
        let p = poly(&[(0.0, 0.0), (1.0, 1.0)]);
        assert!(rasterize_curve(&p, 1, 1).is_err());
        assert!(rasterize_curve(&p, 2, 0).is_err());
    }

    proptest! {
        #[test]
        fn partition_of_unity(n in 0usize..=10, s in 0.0f64..=1.0) {
            let sum: f64 = (0..=n).map(|j| bernstein(j, n, s).unwrap()).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn matches_de_casteljau(
            pts in prop::collection::vec((-500.0f64..500.0, -500.0f64..500.0), 2..8),
            s in 0.0f64..=1.0,
        ) {
            let p = poly(&pts);
            let a = bezier_point(&p, s).unwrap();
            let b = de_casteljau(&p, s);
            prop_assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
        }

        #[test]
        fn mask_inside_expanded_hull_box(
            pts in prop::collection::vec((0.0f64..200.0, 0.0f64..100.0), 2..7),
            thickness in 1u32..8,
        ) {
            let p = poly(&pts);
            let mask = rasterize_curve(&p, p.default_samples(), thickness).unwrap();
            let t = thickness as f64;
            let min_x = pts.iter().map(|q| q.0).fold(f64::INFINITY, f64::min) - t;
            let max_x = pts.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max) + t;
            let min_y = pts.iter().map(|q| q.1).fold(f64::INFINITY, f64::min) - t;
            let max_y = pts.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max) + t;
            for (x, y, c) in mask.covered() {
                prop_assert!((0.0..=1.0).contains(&c));
                prop_assert!((x as f64) >= min_x && (x as f64) <= max_x);
                prop_assert!((y as f64) >= min_y && (y as f64) <= max_y);
            }
        }
    }
}
