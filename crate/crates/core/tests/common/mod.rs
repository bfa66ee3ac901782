//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use rand::Rng;
use scribeforge::ctc_align::{Alphabet, ProbMatrix};
use scribeforge::geometry::Point2;
use scribeforge::seed::Rng as SeededRng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Floor used for `ln(0)`; part of the scoring convention being checked.
const LOG_ZERO: f64 = -1e30;

fn ln_or_floor(p: f32) -> f64 {
    if p > 0.0 {
        f64::from(p).ln()
    } else {
        LOG_ZERO
    }
}

/// Every state path over `blank, c1, blank, ..., cU, blank` that collapses
/// to the transcript, found by depth-first enumeration.
pub fn all_ctc_paths(labels: &[usize], blank: usize, n: usize) -> Vec<Vec<usize>> {
    let mut ext = vec![blank];
    for &l in labels {
        ext.push(l);
        ext.push(blank);
    }
    let s_len = ext.len();
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(n);

    fn walk(ext: &[usize], n: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let s_len = ext.len();
        if path.len() == n {
            let last = *path.last().unwrap();
            if last + 2 >= s_len {
                out.push(path.clone());
            }
            return;
        }
        let next: Vec<usize> = match path.last() {
            None => (0..s_len.min(2)).collect(),
            Some(&s) => {
                let mut v = vec![s];
                if s + 1 < s_len {
                    v.push(s + 1);
                }
                if s + 2 < s_len && ext[s + 2] != blank_of(ext) && ext[s + 2] != ext[s] {
                    v.push(s + 2);
                }
                v
            }
        };
        for s in next {
            path.push(s);
            walk(ext, n, path, out);
            path.pop();
        }
    }
    fn blank_of(ext: &[usize]) -> usize {
        ext[0]
    }

    if s_len > 0 && n > 0 {
        walk(&ext, n, &mut path, &mut out);
    }
    out
}

/// Collapse a state path to its label sequence (drop repeats, then blanks).
pub fn collapse(classes: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &c in classes {
        if Some(c) != prev && c != blank {
            out.push(c);
        }
        prev = Some(c);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleAlignment {
    pub path: Vec<usize>,
    pub score: f64,
}

/// Best path by exhaustive enumeration. Scores within `1e-9` (relative) of
/// the best tie; ties go to the path that is largest when compared from the
/// last timestep backwards.
pub fn brute_force_align(probs: &ProbMatrix, transcript: &str, alphabet: &Alphabet) -> Option<OracleAlignment> {
    let labels: Vec<usize> = transcript.chars().map(|c| alphabet.class_of(c).unwrap()).collect();
    let blank = alphabet.blank_index();
    let n = probs.timesteps();
    let mut ext = vec![blank];
    for &l in &labels {
        ext.push(l);
        ext.push(blank);
    }
    let paths = all_ctc_paths(&labels, blank, n);
    let scored: Vec<(Vec<usize>, f64)> = paths
        .into_iter()
        .map(|p| {
            let classes: Vec<usize> = p.iter().map(|&s| ext[s]).collect();
            assert_eq!(collapse(&classes, blank), labels, "enumerated path does not spell transcript");
            let mut score = 0.0;
            for (t, &s) in p.iter().enumerate() {
                score += ln_or_floor(probs.row(t)[ext[s]]);
            }
            (p, score)
        })
        .collect();
    let best = scored.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return None;
    }
    let tol = 1e-9 * best.abs().max(1.0);
    scored
        .into_iter()
        .filter(|(_, s)| *s >= best - tol)
        .max_by(|(a, _), (b, _)| a.iter().rev().cmp(b.iter().rev()))
        .map(|(path, score)| OracleAlignment { path, score })
}

/// Random row on a coarse grid: multiples of `1 / steps`, summing to 1.
pub fn grid_row(classes: usize, steps: u32, allow_zero: bool, rng: &mut SeededRng) -> Vec<f32> {
    loop {
        let mut units = vec![0u32; classes];
        for _ in 0..steps {
            units[rng.gen_range(0..classes)] += 1;
        }
        if allow_zero || units.iter().all(|&u| u > 0) {
            return units.iter().map(|&u| u as f32 / steps as f32).collect();
        }
    }
}

/// Convex hull (Andrew's monotone chain), counter-clockwise.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Point2, a: Point2, b: Point2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut lower: Vec<Point2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0) };
    ((p.x - a.x - t * dx).powi(2) + (p.y - a.y - t * dy).powi(2)).sqrt()
}

/// Distance from `p` to the hull, 0 when inside.
pub fn hull_distance(hull: &[Point2], p: Point2) -> f64 {
    match hull.len() {
        0 => f64::INFINITY,
        1 => ((p.x - hull[0].x).powi(2) + (p.y - hull[0].y).powi(2)).sqrt(),
        2 => segment_distance(p, hull[0], hull[1]),
        n => {
            let inside = (0..n).all(|i| {
                let (a, b) = (hull[i], hull[(i + 1) % n]);
                (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= 0.0
            });
            if inside {
                0.0
            } else {
                (0..n).map(|i| segment_distance(p, hull[i], hull[(i + 1) % n])).fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Pearson chi-square statistic and its p-value.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> (f64, f64) {
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).unwrap();
    (stat, 1.0 - dist.cdf(stat))
}
