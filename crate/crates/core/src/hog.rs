//! Histogram of oriented gradients.
//!
//! Pipeline: per-pixel gradients → per-cell orientation histograms with
//! linear vote interpolation between neighbouring bin centres → L2 block
//! normalisation with a small regulariser. Blocks tile the cell grid without
//! overlap; with the default 1×1 block every cell is normalised on its own.

use serde::{Deserialize, Serialize};

use crate::dataset::GrayImage;
use crate::error::{Error, Result};

/// Regulariser in `v / sqrt(|v|² + ε²)`.
pub const NORM_EPSILON: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HogParams {
    pub cell_size: usize,
    pub block_size: usize,
    pub orientation_bins: usize,
    pub signed: bool,
}

impl Default for HogParams {
    fn default() -> Self {
        HogParams {
            cell_size: 18,
            block_size: 1,
            orientation_bins: 8,
            signed: false,
        }
    }
}

impl HogParams {
    pub fn validate(&self) -> Result<()> {
        if self.cell_size < 2 {
            return Err(Error::param("HOG cell size must be >= 2"));
        }
        if self.block_size < 1 {
            return Err(Error::param("HOG block size must be >= 1"));
        }
        if self.orientation_bins < 2 {
            return Err(Error::param("HOG needs at least 2 orientation bins"));
        }
        Ok(())
    }

    /// Orientation range in degrees: 180 unsigned, 360 signed.
    pub fn orientation_range(&self) -> f64 {
        if self.signed { 360.0 } else { 180.0 }
    }

    /// `(blocks_x, blocks_y)` for an image of the given size.
    pub fn block_grid(&self, width: usize, height: usize) -> (usize, usize) {
        let cells = (width / self.cell_size, height / self.cell_size);
        (cells.0 / self.block_size, cells.1 / self.block_size)
    }

    /// Descriptor length for an image of the given size.
    pub fn descriptor_len(&self, width: usize, height: usize) -> usize {
        let (bx, by) = self.block_grid(width, height);
        bx * by * self.block_size * self.block_size * self.orientation_bins
    }
}

/// Per-pixel gradient magnitude and orientation (degrees).
#[derive(Clone, Debug)]
pub struct Gradients {
    pub width: usize,
    pub height: usize,
    pub magnitude: Vec<f64>,
    pub orientation: Vec<f64>,
}

#[inline]
fn derivative(at: impl Fn(usize) -> f64, i: usize, len: usize) -> f64 {
    if i == 0 {
        at(1) - at(0)
    } else if i == len - 1 {
        at(len - 1) - at(len - 2)
    } else {
        0.5 * (at(i + 1) - at(i - 1))
    }
}

/// Centred `[-1, 0, 1] / 2` differences inside, one-sided differences on the border.
pub fn gradients(img: &GrayImage, signed: bool) -> Result<Gradients> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::param(format!(
            "gradients need at least a 3x3 image, got {w}x{h}"
        )));
    }
    let range = if signed { 360.0 } else { 180.0 };
    let mut magnitude = Vec::with_capacity(w * h);
    let mut orientation = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let gx = derivative(|i| img.get(i, y), x, w);
            let gy = derivative(|j| img.get(x, j), y, h);
            magnitude.push(gx.hypot(gy));
            let mut deg = gy.atan2(gx).to_degrees().rem_euclid(range);
            if deg >= range {
                deg = 0.0;
            }
            orientation.push(deg);
        }
    }
    Ok(Gradients {
        width: w,
        height: h,
        magnitude,
        orientation,
    })
}

/// Orientation histograms over the full-cell grid, cells row-major, bins innermost.
#[derive(Clone, Debug)]
pub struct CellHistograms {
    pub cells_x: usize,
    pub cells_y: usize,
    pub bins: usize,
    pub values: Vec<f64>,
}

impl CellHistograms {
    pub fn cell(&self, cx: usize, cy: usize) -> &[f64] {
        let start = (cy * self.cells_x + cx) * self.bins;
        &self.values[start..start + self.bins]
    }
}

pub fn cell_histograms(grad: &Gradients, params: &HogParams) -> Result<CellHistograms> {
    params.validate()?;
    let cells_x = grad.width / params.cell_size;
    let cells_y = grad.height / params.cell_size;
    if cells_x == 0 || cells_y == 0 {
        return Err(Error::param(format!(
            "{}x{} image holds no full {}-pixel cell",
            grad.width, grad.height, params.cell_size
        )));
    }
    let nbins = params.orientation_bins;
    let bin_width = params.orientation_range() / nbins as f64;
    let mut values = vec![0.0; cells_x * cells_y * nbins];
    for y in 0..cells_y * params.cell_size {
        let cy = y / params.cell_size;
        for x in 0..cells_x * params.cell_size {
            let cx = x / params.cell_size;
            let idx = y * grad.width + x;
            let mag = grad.magnitude[idx];
            if mag == 0.0 {
                continue;
            }
            // Bin b is centred at (b + 0.5) * bin_width; votes wrap cyclically.
            let pos = grad.orientation[idx] / bin_width - 0.5;
            let lo = pos.floor();
            let frac = pos - lo;
            let lo = (lo as i64).rem_euclid(nbins as i64) as usize;
            let hi = (lo + 1) % nbins;
            let base = (cy * cells_x + cx) * nbins;
            values[base + lo] += mag * (1.0 - frac);
            values[base + hi] += mag * frac;
        }
    }
    Ok(CellHistograms {
        cells_x,
        cells_y,
        bins: nbins,
        values,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HogDescriptor {
    pub values: Vec<f64>,
    /// Block grid `(x, y)`; equals the cell grid for 1×1 blocks.
    pub grid: (usize, usize),
    pub params: HogParams,
}

pub fn hog_features(img: &GrayImage, params: &HogParams) -> Result<HogDescriptor> {
    params.validate()?;
    let grad = gradients(img, params.signed)?;
    let cells = cell_histograms(&grad, params)?;
    let b = params.block_size;
    let (bx, by) = (cells.cells_x / b, cells.cells_y / b);
    if bx == 0 || by == 0 {
        return Err(Error::param(format!(
            "cell grid {}x{} smaller than a {b}x{b} block",
            cells.cells_x, cells.cells_y
        )));
    }
    let mut values = Vec::with_capacity(params.descriptor_len(img.width(), img.height()));
    let mut block = Vec::with_capacity(b * b * cells.bins);
    for j in 0..by {
        for i in 0..bx {
            block.clear();
            for cy in j * b..(j + 1) * b {
                for cx in i * b..(i + 1) * b {
                    block.extend_from_slice(cells.cell(cx, cy));
                }
            }
            let norm = (block.iter().map(|v| v * v).sum::<f64>() + NORM_EPSILON * NORM_EPSILON).sqrt();
            values.extend(block.iter().map(|v| v / norm));
        }
    }
    Ok(HogDescriptor {
        values,
        grid: (bx, by),
        params: *params,
    })
}
