//! Binary morphology with a square structuring element.
//!
//! Pixels outside the image count as background for both dilation and
//! erosion, so erosion eats into regions touching the border.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

fn check_kernel(kernel: usize) -> Result<usize> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(Error::InvalidKernel(kernel));
    }
    Ok(kernel / 2)
}

/// One separable pass along rows (`horizontal`) or columns. `any` selects
/// dilation (OR over the window) versus erosion (AND, with background outside).
fn pass(src: &[bool], width: usize, height: usize, radius: usize, horizontal: bool, any: bool) -> Vec<bool> {
    let mut out = vec![false; src.len()];
    let (outer, inner) = if horizontal { (height, width) } else { (width, height) };
    let at = |o: usize, i: usize| if horizontal { o * width + i } else { i * width + o };
    for o in 0..outer {
        for i in 0..inner {
            let lo = i as isize - radius as isize;
            let hi = i + radius;
            let value = if any {
                (lo.max(0) as usize..=hi.min(inner - 1)).any(|j| src[at(o, j)])
            } else {
                lo >= 0 && hi < inner && (lo as usize..=hi).all(|j| src[at(o, j)])
            };
            out[at(o, i)] = value;
        }
    }
    out
}

fn apply(mask: &BinaryMask, radius: usize, any: bool) -> BinaryMask {
    let (w, h) = mask.shape();
    let rows = pass(mask.values(), w, h, radius, true, any);
    let both = pass(&rows, w, h, radius, false, any);
    BinaryMask::new(w, h, both).expect("shape preserved")
}

pub fn dilate(mask: &BinaryMask, kernel: usize) -> Result<BinaryMask> {
    Ok(apply(mask, check_kernel(kernel)?, true))
}

pub fn erode(mask: &BinaryMask, kernel: usize) -> Result<BinaryMask> {
    Ok(apply(mask, check_kernel(kernel)?, false))
}

/// Dilation followed by erosion.
pub fn close(mask: &BinaryMask, kernel: usize) -> Result<BinaryMask> {
    erode(&dilate(mask, kernel)?, kernel)
}

/// Erosion followed by dilation.
pub fn open(mask: &BinaryMask, kernel: usize) -> Result<BinaryMask> {
    dilate(&erode(mask, kernel)?, kernel)
}

/// Sets every background pixel that cannot reach the border through
/// 4-connected background pixels.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.shape();
    let src = mask.values();
    let mut outside = vec![false; src.len()];
    let mut queue = VecDeque::new();
    let seed = |i: usize, outside: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
        if !src[i] && !outside[i] {
            outside[i] = true;
            queue.push_back(i);
        }
    };
    for c in 0..w {
        seed(c, &mut outside, &mut queue);
        seed((h - 1) * w + c, &mut outside, &mut queue);
    }
    for r in 0..h {
        seed(r * w, &mut outside, &mut queue);
        seed(r * w + w - 1, &mut outside, &mut queue);
    }
    while let Some(i) = queue.pop_front() {
        let (r, c) = (i / w, i % w);
        if r > 0 {
            seed(i - w, &mut outside, &mut queue);
        }
        if r + 1 < h {
            seed(i + w, &mut outside, &mut queue);
        }
        if c > 0 {
            seed(i - 1, &mut outside, &mut queue);
        }
        if c + 1 < w {
            seed(i + 1, &mut outside, &mut queue);
        }
    }
    BinaryMask::new(w, h, outside.into_iter().map(|o| !o).collect()).expect("shape preserved")
}

/// Closing to bridge gaps, opening to drop specks, then optional hole filling.
pub fn morph_refine(mask: &BinaryMask, kernel: usize, fill: bool) -> Result<BinaryMask> {
    let refined = open(&close(mask, kernel)?, kernel)?;
    Ok(if fill { fill_holes(&refined) } else { refined })
}
