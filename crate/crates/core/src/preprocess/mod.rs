//! Image enhancement ahead of segmentation.
//!
//! Two pipelines are offered: a color-range mask refined by morphology and
//! followed by a linear contrast stretch, and CLAHE on CIELAB lightness,
//! optionally blended back with the original and contrast-adjusted.

mod adjust;
mod clahe;
mod color;
mod morphology;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use adjust::{apply_mask, color_range_mask, linear_contrast, weighted_blend};
pub use clahe::{clahe_l, equalize_lightness, lightness_bin, ClaheParams, BINS};
pub use color::{lab_pixel_to_rgb, lab_to_rgb, rgb_pixel_to_lab, rgb_to_lab, LabImage, RgbImage};
pub use morphology::{close, dilate, erode, fill_holes, morph_refine, open};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// color_range_mask, morph_refine, mask the image, linear_contrast
    RangeMorph,
    Clahe,
    /// clahe_l, weighted_blend with the original, linear_contrast
    ClaheBlend,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::RangeMorph => "range_morph",
            Method::Clahe => "clahe",
            Method::ClaheBlend => "clahe_blend",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "range_morph" => Ok(Method::RangeMorph),
            "clahe" => Ok(Method::Clahe),
            "clahe_blend" => Ok(Method::ClaheBlend),
            other => Err(Error::InvalidInput(format!("unknown preprocess method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PreprocessParams {
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub clip_limit: f64,
    pub kernel: usize,
    pub fill_holes: bool,
    pub alpha: f64,
    pub beta: f64,
    pub blend_weight: f64,
    pub lower: [u8; 3],
    pub upper: [u8; 3],
}

impl Default for PreprocessParams {
    fn default() -> Self {
        let clahe = ClaheParams::default();
        PreprocessParams {
            tiles_x: clahe.tiles_x,
            tiles_y: clahe.tiles_y,
            clip_limit: clahe.clip_limit,
            kernel: 3,
            fill_holes: true,
            alpha: 1.2,
            beta: 0.0,
            blend_weight: 0.5,
            lower: [0; 3],
            upper: [255; 3],
        }
    }
}

impl PreprocessParams {
    pub fn clahe(&self) -> ClaheParams {
        ClaheParams {
            tiles_x: self.tiles_x,
            tiles_y: self.tiles_y,
            clip_limit: self.clip_limit,
        }
    }
}

pub fn run_pipeline(img: &RgbImage, method: Method, params: &PreprocessParams) -> Result<RgbImage> {
    match method {
        Method::RangeMorph => {
            let mask = color_range_mask(img, params.lower, params.upper)?;
            let mask = morph_refine(&mask, params.kernel, params.fill_holes)?;
            linear_contrast(&apply_mask(img, &mask)?, params.alpha, params.beta)
        }
        Method::Clahe => clahe_l(img, &params.clahe()),
        Method::ClaheBlend => {
            let enhanced = clahe_l(img, &params.clahe())?;
            let blended = weighted_blend(img, &enhanced, params.blend_weight)?;
            linear_contrast(&blended, params.alpha, params.beta)
        }
    }
}
