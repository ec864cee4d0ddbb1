use super::color::RgbImage;
use crate::error::{Error, Result};
use crate::raster::BinaryMask;

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Marks pixels whose every channel lies within `[lower, upper]`.
pub fn color_range_mask(img: &RgbImage, lower: [u8; 3], upper: [u8; 3]) -> Result<BinaryMask> {
    if lower.iter().zip(&upper).any(|(l, u)| l > u) {
        return Err(Error::InvalidRange { lower, upper });
    }
    let values = img
        .pixels()
        .map(|px| (0..3).all(|ch| (lower[ch]..=upper[ch]).contains(&px[ch])))
        .collect();
    BinaryMask::new(img.width(), img.height(), values)
}

/// `clamp(round(alpha * v + beta))` on every channel.
pub fn linear_contrast(img: &RgbImage, alpha: f64, beta: f64) -> Result<RgbImage> {
    if !alpha.is_finite() || alpha < 0.0 || !beta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "contrast gain {alpha} must be finite and >= 0, bias {beta} finite"
        )));
    }
    Ok(img.map_channels(|v| to_u8(alpha * f64::from(v) + beta)))
}

/// Per-channel `w * enhanced + (1 - w) * original`.
pub fn weighted_blend(original: &RgbImage, enhanced: &RgbImage, weight: f64) -> Result<RgbImage> {
    crate::raster::ensure_same_shape(original.shape(), enhanced.shape())?;
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::InvalidInput(format!("blend weight {weight} outside [0, 1]")));
    }
    let data = original
        .data()
        .iter()
        .zip(enhanced.data())
        .map(|(&o, &e)| to_u8(weight * f64::from(e) + (1.0 - weight) * f64::from(o)))
        .collect();
    RgbImage::new(original.width(), original.height(), data)
}

/// Blacks out every pixel outside `mask`.
pub fn apply_mask(img: &RgbImage, mask: &BinaryMask) -> Result<RgbImage> {
    crate::raster::ensure_same_shape(img.shape(), mask.shape())?;
    let data = img
        .data()
        .chunks_exact(3)
        .zip(mask.values())
        .flat_map(|(px, &keep)| if keep { [px[0], px[1], px[2]] } else { [0, 0, 0] })
        .collect();
    RgbImage::new(img.width(), img.height(), data)
}
