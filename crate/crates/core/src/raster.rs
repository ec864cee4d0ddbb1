//! Saliency maps, binary masks and bounding boxes, plus the geometric
//! operations that relate them.
//!
//! All grids are row-major with the origin at the top-left pixel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidRaster(format!(
            "dimensions must be nonzero, got {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::InvalidRaster(format!(
            "{width}x{height} grid needs {} values, got {len}",
            width.saturating_mul(height)
        )));
    }
    Ok(())
}

/// Per-pixel importance scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::InvalidRaster(format!(
                "saliency value {v} at index {i} is outside [0, 1]"
            )));
        }
        Ok(SaliencyMap {
            width,
            height,
            values,
        })
    }

    /// Builds a map from nested rows, mostly useful for small fixtures.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let (width, height, values) = flatten_rows(rows)?;
        SaliencyMap::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.width + c]
    }
}

/// A {0, 1} label grid; `true` marks the region of interest.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    values: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, values: Vec<bool>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        Ok(BinaryMask {
            width,
            height,
            values,
        })
    }

    /// Builds a mask from 0/1 labels; any other label is rejected.
    pub fn from_labels(width: usize, height: usize, labels: &[u8]) -> Result<Self> {
        let values = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| match l {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidRaster(format!(
                    "mask label {other} at index {i} is not 0 or 1"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        BinaryMask::new(width, height, values)
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let (width, height, labels) = flatten_rows(rows)?;
        BinaryMask::from_labels(width, height, &labels)
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        BinaryMask::new(width, height, vec![false; width.saturating_mul(height)])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.values[r * self.width + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.values[r * self.width + c] = value;
    }

    /// Labels as 0/1 bytes in row-major order.
    pub fn labels(&self) -> Vec<u8> {
        self.values.iter().map(|&v| u8::from(v)).collect()
    }

    pub fn positives(&self) -> u64 {
        self.values.iter().filter(|&&v| v).count() as u64
    }

    /// True when every positive pixel of `self` is also positive in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.shape() == other.shape()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(&a, &b)| !a || b)
    }
}

fn flatten_rows<T: Copy, R: AsRef<[T]>>(rows: &[R]) -> Result<(usize, usize, Vec<T>)> {
    let height = rows.len();
    let width = rows.first().map_or(0, |r| r.as_ref().len());
    if let Some(bad) = rows.iter().position(|r| r.as_ref().len() != width) {
        return Err(Error::InvalidRaster(format!(
            "row {bad} has {} values, expected {width}",
            rows[bad].as_ref().len()
        )));
    }
    let values = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
    Ok((width, height, values))
}

/// Axis-aligned box with inclusive min/max row and column indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_r: usize,
    pub min_c: usize,
    pub max_r: usize,
    pub max_c: usize,
}

impl BoundingBox {
    pub fn new(min_r: usize, min_c: usize, max_r: usize, max_c: usize) -> Result<Self> {
        let bbox = BoundingBox {
            min_r,
            min_c,
            max_r,
            max_c,
        };
        bbox.validate()?;
        Ok(bbox)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_r > self.max_r || self.min_c > self.max_c {
            return Err(Error::InvalidInput(format!(
                "bounding box {self:?} has min greater than max"
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> u64 {
        ((self.max_r - self.min_r + 1) as u64) * ((self.max_c - self.min_c + 1) as u64)
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.max_r < height && self.max_c < width
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        (self.min_r..=self.max_r).contains(&r) && (self.min_c..=self.max_c).contains(&c)
    }
}

/// Min-max normalizes a raw heat grid into a [`SaliencyMap`].
///
/// A constant grid has no ordering to preserve and becomes all zeros.
pub fn normalize_saliency(width: usize, height: usize, raw: &[f64]) -> Result<SaliencyMap> {
    check_dims(width, height, raw.len())?;
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidRaster(format!(
            "non-finite saliency value at index {i}"
        )));
    }
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let values = if max > min {
        let span = max - min;
        raw.iter()
            .map(|&v| ((v - min) / span).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.0; raw.len()]
    };
    SaliencyMap::new(width, height, values)
}

pub fn rasterize_box(bbox: &BoundingBox, width: usize, height: usize) -> Result<BinaryMask> {
    bbox.validate()?;
    if !bbox.fits(width, height) {
        return Err(Error::BoxOutOfBounds {
            bbox: *bbox,
            width,
            height,
        });
    }
    let mut mask = BinaryMask::zeros(width, height)?;
    for r in bbox.min_r..=bbox.max_r {
        let row = &mut mask.values[r * width..(r + 1) * width];
        row[bbox.min_c..=bbox.max_c].fill(true);
    }
    Ok(mask)
}

/// Pixelwise OR of equally shaped masks.
pub fn union_masks<'a, I>(masks: I) -> Result<BinaryMask>
where
    I: IntoIterator<Item = &'a BinaryMask>,
{
    let mut iter = masks.into_iter();
    let mut out = iter
        .next()
        .ok_or_else(|| Error::InvalidInput("union of an empty mask list".into()))?
        .clone();
    for mask in iter {
        ensure_same_shape(out.shape(), mask.shape())?;
        for (o, &m) in out.values.iter_mut().zip(&mask.values) {
            *o |= m;
        }
    }
    Ok(out)
}

/// Fraction of `inner`'s positives that are also positive in `outer`.
pub fn containment(inner: &BinaryMask, outer: &BinaryMask) -> Result<f64> {
    ensure_same_shape(outer.shape(), inner.shape())?;
    let (inside, total) = inner
        .values
        .iter()
        .zip(&outer.values)
        .filter(|(&i, _)| i)
        .fold((0u64, 0u64), |(inside, total), (_, &o)| {
            (inside + u64::from(o), total + 1)
        });
    if total == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(inside as f64 / total as f64)
}

/// Positive and negative pixel counts.
pub fn mask_counts(mask: &BinaryMask) -> (u64, u64) {
    let p = mask.positives();
    (p, mask.values.len() as u64 - p)
}

pub(crate) fn ensure_same_shape(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected != found {
        return Err(Error::ShapeMismatch { expected, found });
    }
    Ok(())
}
