//! 8-bit sRGB images and their CIELAB (D65) counterpart.

use crate::error::{Error, Result};

/// Interleaved 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || width.checked_mul(height).and_then(|n| n.checked_mul(3)) != Some(data.len()) {
            return Err(Error::InvalidRaster(format!(
                "{width}x{height} RGB image cannot hold {} bytes",
                data.len()
            )));
        }
        Ok(RgbImage {
            width,
            height,
            data,
        })
    }

    pub fn from_pixel(width: usize, height: usize, px: [u8; 3]) -> Result<Self> {
        let data = px.iter().copied().cycle().take(width * height * 3).collect();
        RgbImage::new(width, height, data)
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, r: usize, c: usize) -> [u8; 3] {
        let i = (r * self.width + c) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub(crate) fn map_channels(&self, f: impl Fn(u8) -> u8) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl From<&image::RgbImage> for RgbImage {
    fn from(img: &image::RgbImage) -> Self {
        RgbImage {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.as_raw().clone(),
        }
    }
}

impl From<&RgbImage> for image::RgbImage {
    fn from(img: &RgbImage) -> Self {
        image::RgbImage::from_raw(img.width as u32, img.height as u32, img.data.clone())
            .expect("buffer length checked at construction")
    }
}

/// CIELAB pixels stored as `[L, a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

impl LabImage {
    pub fn new(width: usize, height: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || width.checked_mul(height) != Some(data.len()) {
            return Err(Error::InvalidRaster(format!(
                "{width}x{height} Lab image cannot hold {} pixels",
                data.len()
            )));
        }
        if let Some(px) = data.iter().find(|p| !(0.0..=100.0).contains(&p[0])) {
            return Err(Error::InvalidRaster(format!("L = {} outside [0, 100]", px[0])));
        }
        Ok(LabImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn pixel(&self, r: usize, c: usize) -> [f64; 3] {
        self.data[r * self.width + c]
    }
}

// D65 reference white, Y normalized to 1.
const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];

const DELTA: f64 = 6.0 / 29.0;

fn srgb_to_linear(v: u8) -> f64 {
    let c = f64::from(v) / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    let v = if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    };
    v * 255.0
}

fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn lab_f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

fn mat_mul(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn rgb_pixel_to_lab(px: [u8; 3]) -> [f64; 3] {
    let lin = px.map(srgb_to_linear);
    let xyz = mat_mul(&RGB_TO_XYZ, lin);
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    [
        (116.0 * fy - 16.0).clamp(0.0, 100.0),
        (500.0 * (fx - fy)).clamp(-128.0, 127.0),
        (200.0 * (fy - fz)).clamp(-128.0, 127.0),
    ]
}

pub fn lab_pixel_to_rgb(lab: [f64; 3]) -> [u8; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [
        WHITE[0] * lab_f_inv(fx),
        WHITE[1] * lab_f_inv(fy),
        WHITE[2] * lab_f_inv(fz),
    ];
    mat_mul(&XYZ_TO_RGB, xyz).map(|c| linear_to_srgb(c.max(0.0)).round().clamp(0.0, 255.0) as u8)
}

pub fn rgb_to_lab(img: &RgbImage) -> LabImage {
    LabImage {
        width: img.width,
        height: img.height,
        data: img.pixels().map(rgb_pixel_to_lab).collect(),
    }
}

pub fn lab_to_rgb(img: &LabImage) -> RgbImage {
    RgbImage {
        width: img.width,
        height: img.height,
        data: img.data.iter().flat_map(|&p| lab_pixel_to_rgb(p)).collect(),
    }
}
