//! Contrast-limited adaptive histogram equalization of CIELAB lightness.
//!
//! Lightness is quantized to 256 bins over `[0, 100]`. Each tile gets a
//! clipped-histogram CDF lookup table; a pixel's new level is the bilinear
//! blend of the four nearest tile tables, evaluated at the pixel's bin.

use super::color::{lab_pixel_to_rgb, rgb_to_lab, LabImage, RgbImage};
use crate::error::{Error, Result};

pub const BINS: usize = 256;
const MAX_BIN: f64 = (BINS - 1) as f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaheParams {
    pub tiles_x: usize,
    pub tiles_y: usize,
    /// Multiple of the mean bin height at which tile histograms are clipped.
    /// `f64::INFINITY` disables clipping.
    pub clip_limit: f64,
}

impl Default for ClaheParams {
    fn default() -> Self {
        ClaheParams {
            tiles_x: 8,
            tiles_y: 8,
            clip_limit: 2.0,
        }
    }
}

impl ClaheParams {
    fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.tiles_x == 0 || self.tiles_y == 0 {
            return Err(Error::InvalidInput(format!(
                "tile grid {}x{} must be at least 1x1",
                self.tiles_x, self.tiles_y
            )));
        }
        if self.clip_limit.is_nan() || self.clip_limit < 1.0 {
            return Err(Error::InvalidInput(format!(
                "clip limit {} must be >= 1",
                self.clip_limit
            )));
        }
        if width < self.tiles_x || height < self.tiles_y {
            return Err(Error::ImageTooSmall {
                width,
                height,
                tiles_x: self.tiles_x,
                tiles_y: self.tiles_y,
            });
        }
        Ok(())
    }
}

/// Histogram bin of a lightness value.
pub fn lightness_bin(l: f64) -> usize {
    (l * MAX_BIN / 100.0).round().clamp(0.0, MAX_BIN) as usize
}

/// Start offsets and sizes of `tiles` spans over `len`; the last span takes the remainder.
fn tile_spans(len: usize, tiles: usize) -> Vec<(usize, usize)> {
    let base = len / tiles;
    (0..tiles)
        .map(|i| {
            let size = if i + 1 == tiles { len - base * i } else { base };
            (base * i, size)
        })
        .collect()
}

/// Clipped-CDF lookup table for one tile histogram, in bin units.
///
/// A tile whose pixels all share one bin carries no contrast and keeps the
/// identity mapping.
fn tile_lut(hist: &[u64; BINS], clip_limit: f64) -> [f64; BINS] {
    let mut lut = [0.0; BINS];
    let occupied = hist.iter().filter(|&&h| h > 0).count();
    if occupied <= 1 {
        for (b, v) in lut.iter_mut().enumerate() {
            *v = b as f64;
        }
        return lut;
    }

    let total: u64 = hist.iter().sum();
    let limit = clip_limit * total as f64 / BINS as f64;
    let mut clipped = [0.0; BINS];
    let mut excess = 0.0;
    for (c, &h) in clipped.iter_mut().zip(hist) {
        let h = h as f64;
        if h > limit {
            excess += h - limit;
            *c = limit;
        } else {
            *c = h;
        }
    }
    let share = excess / BINS as f64;

    let mut cdf = 0.0;
    for (v, c) in lut.iter_mut().zip(clipped) {
        cdf += c + share;
        *v = (MAX_BIN * cdf / total as f64).min(MAX_BIN);
    }
    lut
}

/// For every coordinate along an axis: the two neighbouring tile indices
/// and the weight of the second one.
fn axis_weights(spans: &[(usize, usize)], len: usize) -> Vec<(usize, usize, f64)> {
    let centers: Vec<f64> = spans
        .iter()
        .map(|&(start, size)| start as f64 + (size as f64 - 1.0) / 2.0)
        .collect();
    let last = centers.len() - 1;
    (0..len)
        .map(|x| {
            let x = x as f64;
            if x <= centers[0] {
                return (0, 0, 0.0);
            }
            if x >= centers[last] {
                return (last, last, 0.0);
            }
            let i = centers.windows(2).position(|w| x < w[1]).unwrap_or(last - 1);
            let w = (x - centers[i]) / (centers[i + 1] - centers[i]);
            (i, i + 1, w)
        })
        .collect()
}

/// Adaptive equalization of the L channel; a and b pass through untouched.
pub fn equalize_lightness(lab: &LabImage, params: &ClaheParams) -> Result<LabImage> {
    let (width, height) = (lab.width(), lab.height());
    params.validate(width, height)?;

    let col_spans = tile_spans(width, params.tiles_x);
    let row_spans = tile_spans(height, params.tiles_y);
    let bins: Vec<usize> = lab.data().iter().map(|p| lightness_bin(p[0])).collect();

    let mut luts = Vec::with_capacity(params.tiles_x * params.tiles_y);
    for &(r0, rh) in &row_spans {
        for &(c0, cw) in &col_spans {
            let mut hist = [0u64; BINS];
            for r in r0..r0 + rh {
                for &b in &bins[r * width + c0..r * width + c0 + cw] {
                    hist[b] += 1;
                }
            }
            luts.push(tile_lut(&hist, params.clip_limit));
        }
    }

    let xs = axis_weights(&col_spans, width);
    let ys = axis_weights(&row_spans, height);
    let tiles_x = params.tiles_x;
    let lut_at = |ty: usize, tx: usize, bin: usize| luts[ty * tiles_x + tx][bin];

    let mut out = Vec::with_capacity(width * height);
    for (r, &(y0, y1, wy)) in ys.iter().enumerate() {
        for (c, &(x0, x1, wx)) in xs.iter().enumerate() {
            let px = lab.data()[r * width + c];
            let bin = bins[r * width + c];
            let top = (1.0 - wx) * lut_at(y0, x0, bin) + wx * lut_at(y0, x1, bin);
            let bottom = (1.0 - wx) * lut_at(y1, x0, bin) + wx * lut_at(y1, x1, bin);
            let mapped = (1.0 - wy) * top + wy * bottom;
            // shift by the bin displacement so sub-bin detail survives
            let l = if (mapped - bin as f64).abs() < 1e-9 {
                px[0]
            } else {
                (px[0] + (mapped - bin as f64) * 100.0 / MAX_BIN).clamp(0.0, 100.0)
            };
            out.push([l, px[1], px[2]]);
        }
    }
    LabImage::new(width, height, out)
}

/// CLAHE on the lightness channel of an RGB image.
pub fn clahe_l(img: &RgbImage, params: &ClaheParams) -> Result<RgbImage> {
    params.validate(img.width(), img.height())?;
    let lab = rgb_to_lab(img);
    let equalized = equalize_lightness(&lab, params)?;
    let data = img
        .pixels()
        .zip(lab.data().iter().zip(equalized.data()))
        .flat_map(|(orig, (before, after))| {
            if before[0] == after[0] {
                orig
            } else {
                lab_pixel_to_rgb(*after)
            }
        })
        .collect();
    RgbImage::new(img.width(), img.height(), data)
}
