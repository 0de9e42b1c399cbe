//! Rotation-invariant circular local binary patterns.
//!
//! Each interior pixel is compared against `P` neighbours sampled on a circle
//! of radius `R` (bilinear interpolation for fractional positions). The
//! resulting `P`-bit word is reduced to the minimum over its cyclic rotations
//! and mapped to a dense bin index, so the histogram has exactly one bin per
//! binary necklace of length `P`.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::GrayImage;
use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 2;
pub const MAX_POINTS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbpParams {
    pub points: usize,
    pub radius: f64,
}

impl LbpParams {
    pub fn new(points: usize, radius: f64) -> Result<Self> {
        if !(MIN_POINTS..=MAX_POINTS).contains(&points) {
            return Err(Error::param(format!(
                "LBP points must be in [{MIN_POINTS}, {MAX_POINTS}], got {points}"
            )));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::param(format!("LBP radius must be > 0, got {radius}")));
        }
        Ok(LbpParams { points, radius })
    }

    /// Number of pixels skipped at each image edge.
    pub fn margin(&self) -> usize {
        snap(self.radius).ceil() as usize
    }
}

impl Default for LbpParams {
    fn default() -> Self {
        LbpParams {
            points: 14,
            radius: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbpHistogram {
    pub bins: Vec<f64>,
    pub params: LbpParams,
    pub normalized: bool,
}

fn euler_phi(mut n: usize) -> usize {
    let mut result = n;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            while n.is_multiple_of(p) {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

/// Number of binary necklaces of length `points`, counted with Burnside's lemma.
pub fn necklace_count(points: usize) -> Result<u64> {
    if !(1..=MAX_POINTS).contains(&points) {
        return Err(Error::param(format!(
            "necklace length must be in [1, {MAX_POINTS}], got {points}"
        )));
    }
    let sum: u64 = (1..=points)
        .filter(|d| points.is_multiple_of(*d))
        .map(|d| euler_phi(d) as u64 * (1u64 << (points / d)))
        .sum();
    Ok(sum / points as u64)
}

/// Smallest value among all cyclic rotations of a `points`-bit word.
pub fn min_rotation(word: u32, points: usize) -> u32 {
    let mask = if points == 32 { u32::MAX } else { (1u32 << points) - 1 };
    let mut w = word & mask;
    let mut best = w;
    for _ in 1..points {
        w = ((w >> 1) | (w << (points - 1))) & mask;
        best = best.min(w);
    }
    best
}

/// Word → dense necklace id lookup for one pattern length.
#[derive(Debug)]
pub struct NecklaceTable {
    points: usize,
    ids: Vec<u32>,
    count: usize,
}

impl NecklaceTable {
    fn build(points: usize) -> Self {
        let size = 1usize << points;
        let mut ids = vec![u32::MAX; size];
        let mut count = 0u32;
        // Ascending scan: a word is a representative iff it is its own minimum
        // rotation, and those are met in ascending order.
        for w in 0..size as u32 {
            let m = min_rotation(w, points);
            if m == w {
                ids[w as usize] = count;
                count += 1;
            } else {
                ids[w as usize] = ids[m as usize];
            }
        }
        NecklaceTable {
            points,
            ids,
            count: count as usize,
        }
    }

    /// Shared table for `points`, built on first use.
    pub fn get(points: usize) -> Result<&'static NecklaceTable> {
        static TABLES: [OnceLock<NecklaceTable>; MAX_POINTS + 1] = [const { OnceLock::new() }; MAX_POINTS + 1];
        if !(MIN_POINTS..=MAX_POINTS).contains(&points) {
            return Err(Error::param(format!(
                "LBP points must be in [{MIN_POINTS}, {MAX_POINTS}], got {points}"
            )));
        }
        Ok(TABLES[points].get_or_init(|| NecklaceTable::build(points)))
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    pub fn id(&self, word: u32) -> usize {
        self.ids[word as usize] as usize
    }
}

// Trig on multiples of π/2 leaves residue around 1e-16; snap it away so that
// axis-aligned neighbours are read without interpolation.
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 { r } else { v }
}

/// `(dx, dy)` of neighbour `k`: angle `2πk/P` counter-clockwise from due east,
/// with image y growing downwards.
pub fn circle_offsets(params: &LbpParams) -> Vec<(f64, f64)> {
    let p = params.points as f64;
    (0..params.points)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / p;
            let dx = snap(params.radius * theta.cos());
            let dy = snap(-params.radius * theta.sin());
            (if dx == 0.0 { 0.0 } else { dx }, if dy == 0.0 { 0.0 } else { dy })
        })
        .collect()
}

#[inline]
fn bilinear(img: &GrayImage, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as usize, y0 as usize);
    let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
    let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
    let a = img.get(x0, y0);
    let b = img.get(x1, y0);
    let c = img.get(x0, y1);
    let d = img.get(x1, y1);
    let top = a + fx * (b - a);
    let bottom = c + fx * (d - c);
    top + fy * (bottom - top)
}

/// Samples the `P` circle neighbours of `(cx, cy)`, or `None` when the circle
/// leaves the image.
pub fn sample_circle(img: &GrayImage, cx: usize, cy: usize, params: &LbpParams) -> Option<Vec<f64>> {
    let m = params.margin();
    if cx < m || cy < m || cx + m >= img.width() || cy + m >= img.height() {
        return None;
    }
    Some(
        circle_offsets(params)
            .into_iter()
            .map(|(dx, dy)| bilinear(img, cx as f64 + dx, cy as f64 + dy))
            .collect(),
    )
}

#[inline]
fn pattern_word(neighbors: &[f64], center: f64) -> u32 {
    neighbors
        .iter()
        .enumerate()
        .fold(0u32, |w, (k, &v)| if v >= center { w | (1 << k) } else { w })
}

/// Dense necklace id of the pattern formed by `neighbors` against `center`.
pub fn lbp_code(neighbors: &[f64], center: f64) -> Result<usize> {
    let table = NecklaceTable::get(neighbors.len())?;
    Ok(table.id(pattern_word(neighbors, center)))
}

/// Histogram of necklace ids over all interior pixels.
pub fn lbp_histogram(img: &GrayImage, params: &LbpParams, normalize: bool) -> Result<LbpHistogram> {
    let params = LbpParams::new(params.points, params.radius)?;
    let min_side = 2.0 * params.radius + 1.0;
    if img.width() as f64 <= min_side || img.height() as f64 <= min_side {
        return Err(Error::param(format!(
            "image {}x{} too small for LBP radius {}",
            img.width(),
            img.height(),
            params.radius
        )));
    }
    let table = NecklaceTable::get(params.points)?;
    let offsets = circle_offsets(&params);
    let m = params.margin();
    let (w, h) = (img.width(), img.height());
    if w <= 2 * m || h <= 2 * m {
        return Err(Error::param("image has no interior pixels for this radius"));
    }

    let counts = (m..h - m)
        .into_par_iter()
        .fold(
            || vec![0u64; table.len()],
            |mut acc, y| {
                let mut neigh = vec![0.0; offsets.len()];
                for x in m..w - m {
                    for (n, &(dx, dy)) in neigh.iter_mut().zip(&offsets) {
                        *n = bilinear(img, x as f64 + dx, y as f64 + dy);
                    }
                    acc[table.id(pattern_word(&neigh, img.get(x, y)))] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; table.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let mut bins: Vec<f64> = counts.into_iter().map(|c| c as f64).collect();
    if normalize {
        let total: f64 = bins.iter().sum();
        if total > 0.0 {
            bins.iter_mut().for_each(|b| *b /= total);
        }
    }
    Ok(LbpHistogram {
        bins,
        params,
        normalized: normalize,
    })
}
