//! Saliency-map localization scoring.
//!
//! Scores saliency maps against ground-truth regions (rasterized annotation
//! boxes or externally produced segmentation masks) with AUC-Judd and AUPRC,
//! aggregates the scores per mask source, and bundles the image
//! preprocessing pipelines used ahead of segmentation.

pub mod cli;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod preprocess;
pub mod raster;
pub mod report;

pub use error::{Error, Result};
pub use metrics::{auc_judd, auprc, evaluate_pair, CurvePoint, EvalRecord, MaskSource};
pub use raster::{BinaryMask, BoundingBox, SaliencyMap};
