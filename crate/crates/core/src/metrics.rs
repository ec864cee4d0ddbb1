//! Threshold-sweep localization metrics: AUC-Judd and AUPRC.
//!
//! Both metrics depend only on the ordering and tie structure of the saliency
//! values, so any strictly increasing remapping of a map yields bit-identical
//! scores.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{containment, ensure_same_shape, mask_counts, BinaryMask, SaliencyMap};

/// Where the ground-truth mask for an evaluation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSource {
    /// Union of rasterized human bounding boxes.
    AnnotationBox,
    /// Union of masks produced by an external segmentation model.
    ExternalMask,
}

impl MaskSource {
    pub const ALL: [MaskSource; 2] = [MaskSource::AnnotationBox, MaskSource::ExternalMask];

    pub fn as_str(&self) -> &'static str {
        match self {
            MaskSource::AnnotationBox => "annotation_box",
            MaskSource::ExternalMask => "external_mask",
        }
    }
}

impl fmt::Display for MaskSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MaskSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "annotation_box" => Ok(MaskSource::AnnotationBox),
            "external_mask" => Ok(MaskSource::ExternalMask),
            other => Err(Error::InvalidInput(format!("unknown mask source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
}

impl CurvePoint {
    fn new(x: f64, y: f64) -> Self {
        CurvePoint { x, y }
    }
}

/// Per-image, per-source metric bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub image_id: String,
    pub mask_source: MaskSource,
    pub positives: u64,
    pub negatives: u64,
    pub baseline_auprc: f64,
    pub auprc: f64,
    pub auc_judd: f64,
    pub containment_in_box: Option<f64>,
}

/// Pixels sorted by decreasing saliency, grouped into runs of equal value.
/// Each block carries its (positives, negatives) counts.
fn tie_blocks(sal: &SaliencyMap, truth: &BinaryMask) -> Vec<(f64, u64, u64)> {
    let mut pixels: Vec<(f64, bool)> = sal
        .values()
        .iter()
        .copied()
        .zip(truth.values().iter().copied())
        .collect();
    pixels.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));

    let mut blocks: Vec<(f64, u64, u64)> = Vec::new();
    for (value, positive) in pixels {
        match blocks.last_mut() {
            Some(last) if last.0 == value => {
                if positive {
                    last.1 += 1;
                } else {
                    last.2 += 1;
                }
            }
            _ => blocks.push((value, u64::from(positive), u64::from(!positive))),
        }
    }
    blocks
}

fn check_pair(sal: &SaliencyMap, truth: &BinaryMask) -> Result<(u64, u64)> {
    ensure_same_shape(sal.shape(), truth.shape())?;
    Ok(mask_counts(truth))
}

/// ROC points of the Judd variant: thresholds are the saliency values found
/// at ground-truth positive pixels, and `sal >= threshold` predicts positive.
pub fn roc_points_judd(sal: &SaliencyMap, truth: &BinaryMask) -> Result<Vec<CurvePoint>> {
    let (p, n) = check_pair(sal, truth)?;
    if p == 0 || n == 0 {
        return Err(Error::DegenerateMask {
            positives: p,
            negatives: n,
        });
    }
    let (pf, nf) = (p as f64, n as f64);

    let mut points = vec![CurvePoint::new(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    for (_, block_pos, block_neg) in tie_blocks(sal, truth) {
        tp += block_pos;
        fp += block_neg;
        // only values present at a positive pixel are thresholds
        if block_pos > 0 {
            points.push(CurvePoint::new(fp as f64 / nf, tp as f64 / pf));
        }
    }
    points.push(CurvePoint::new(1.0, 1.0));
    points.dedup();
    Ok(points)
}

/// Trapezoidal area under a curve given in nondecreasing x order.
pub fn trapezoid_area(points: &[CurvePoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].x - w[0].x) * (w[1].y + w[0].y) / 2.0)
        .sum()
}

pub fn auc_judd(sal: &SaliencyMap, truth: &BinaryMask) -> Result<f64> {
    Ok(trapezoid_area(&roc_points_judd(sal, truth)?))
}

/// Precision-recall points, one per tie block in decreasing saliency order.
pub fn pr_points(sal: &SaliencyMap, truth: &BinaryMask) -> Result<Vec<CurvePoint>> {
    let (p, n) = check_pair(sal, truth)?;
    if p == 0 {
        return Err(Error::DegenerateMask {
            positives: p,
            negatives: n,
        });
    }
    let pf = p as f64;
    let (mut tp, mut fp) = (0u64, 0u64);
    Ok(tie_blocks(sal, truth)
        .into_iter()
        .map(|(_, block_pos, block_neg)| {
            tp += block_pos;
            fp += block_neg;
            CurvePoint::new(tp as f64 / pf, tp as f64 / (tp + fp) as f64)
        })
        .collect())
}

/// Step-interpolated area under the PR curve (average-precision style).
pub fn auprc(sal: &SaliencyMap, truth: &BinaryMask) -> Result<f64> {
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for pt in pr_points(sal, truth)? {
        area += (pt.x - prev_recall) * pt.y;
        prev_recall = pt.x;
    }
    Ok(area)
}

/// AUPRC of an uninformative map: the positive-pixel prevalence.
pub fn prevalence_baseline(truth: &BinaryMask) -> f64 {
    let (p, n) = mask_counts(truth);
    p as f64 / (p + n) as f64
}

/// Scores one saliency map against one ground truth.
///
/// `box_mask` is only consulted for external masks, where it yields the
/// fraction of the external mask lying inside the annotation boxes.
pub fn evaluate_pair(
    image_id: &str,
    sal: &SaliencyMap,
    truth: &BinaryMask,
    mask_source: MaskSource,
    box_mask: Option<&BinaryMask>,
) -> Result<EvalRecord> {
    let tag = |e: Error| e.for_image(image_id);
    let auprc = auprc(sal, truth).map_err(tag)?;
    let auc_judd = auc_judd(sal, truth).map_err(tag)?;
    let (positives, negatives) = mask_counts(truth);
    let containment_in_box = match (mask_source, box_mask) {
        (MaskSource::ExternalMask, Some(boxes)) => Some(containment(truth, boxes).map_err(tag)?),
        _ => None,
    };
    Ok(EvalRecord {
        image_id: image_id.to_string(),
        mask_source,
        positives,
        negatives,
        baseline_auprc: prevalence_baseline(truth),
        auprc,
        auc_judd,
        containment_in_box,
    })
}

/// Writes a curve as `x,y` CSV with 17 significant digits per coordinate.
pub fn write_curve_csv(path: &Path, points: &[CurvePoint]) -> Result<()> {
    let mut text = String::from("x,y\n");
    for pt in points {
        text.push_str(&format!("{:.16e},{:.16e}\n", pt.x, pt.y));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
