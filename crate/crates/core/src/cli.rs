//! Batch commands behind the `saliency-eval` binary.
//!
//! Images are independent work units evaluated on a bounded rayon pool;
//! results are gathered in manifest order and sorted before any reduction,
//! so the worker count never changes an output byte.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{self, ImageEntry};
use crate::metrics::{self, EvalRecord, MaskSource};
use crate::preprocess::{self, Method, PreprocessParams, RgbImage};
use crate::raster::BinaryMask;
use crate::report::{self, ComparisonTable, Metric, Report, SkippedImage, SummaryTable};

pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct EvalConfig {
    pub manifest: PathBuf,
    pub sources: Vec<MaskSource>,
    pub bins: usize,
    pub out_dir: PathBuf,
    /// Not echoed into the report: results must not depend on it.
    #[serde(skip)]
    pub workers: Option<usize>,
    pub svg: bool,
    /// Also dump per-image ROC and PR curves under `out_dir/curves`.
    pub curves: bool,
}

impl EvalConfig {
    pub fn new(manifest: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        EvalConfig {
            manifest: manifest.into(),
            sources: MaskSource::ALL.to_vec(),
            bins: DEFAULT_BINS,
            out_dir: out_dir.into(),
            workers: None,
            svg: false,
            curves: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub records: Vec<EvalRecord>,
    pub skipped: Vec<SkippedImage>,
    pub summary: SummaryTable,
    pub comparison: Option<ComparisonTable>,
}

impl EvalOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &SkippedImage> {
        self.skipped.iter().filter(|s| s.failure)
    }
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    if workers == Some(0) {
        return Err(Error::InvalidInput("worker count must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))
}

/// Errors that mark an image as out of scope rather than broken.
fn is_exclusion(err: &Error) -> bool {
    matches!(
        err.root(),
        Error::EmptyGroundTruth(_) | Error::DegenerateMask { .. }
    )
}

/// File-name-safe rendering of an image id.
pub fn file_stem_for(image_id: &str) -> String {
    image_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

type Outcome = std::result::Result<EvalRecord, SkippedImage>;

fn skip(entry: &ImageEntry, source: MaskSource, err: &Error) -> SkippedImage {
    SkippedImage {
        image_id: entry.image_id().to_string(),
        mask_source: source,
        reason: err.root().to_string(),
        failure: !is_exclusion(err),
    }
}

fn evaluate_entry(entry: &ImageEntry, sources: &[MaskSource], curves: Option<&Path>) -> Vec<Outcome> {
    let id = entry.image_id();
    if !entry.image.is_evaluable() {
        let err = Error::EmptyGroundTruth(id.to_string());
        return sources.iter().map(|&s| Err(skip(entry, s, &err))).collect();
    }
    let sal = match ingest::load_saliency_for(entry) {
        Ok(sal) => sal,
        Err(e) => {
            log::warn!("{id}: {e}");
            return sources.iter().map(|&s| Err(skip(entry, s, &e))).collect();
        }
    };
    let boxes = ingest::box_mask(&entry.image);

    sources
        .iter()
        .map(|&source| {
            let result = (|| {
                let boxes = boxes.as_ref().map_err(|e| Error::InvalidInput(e.to_string()))?;
                let truth: BinaryMask = match source {
                    MaskSource::AnnotationBox => boxes.clone(),
                    MaskSource::ExternalMask => ingest::ground_truth_mask(entry, source)?,
                };
                let record = metrics::evaluate_pair(id, &sal, &truth, source, Some(boxes))?;
                if let Some(dir) = curves {
                    let stem = format!("{}_{source}", file_stem_for(id));
                    metrics::write_curve_csv(
                        &dir.join(format!("{stem}_roc.csv")),
                        &metrics::roc_points_judd(&sal, &truth)?,
                    )?;
                    metrics::write_curve_csv(
                        &dir.join(format!("{stem}_pr.csv")),
                        &metrics::pr_points(&sal, &truth)?,
                    )?;
                }
                Ok(record)
            })();
            result.map_err(|e: Error| {
                if is_exclusion(&e) {
                    log::info!("{id} [{source}]: skipped, {}", e.root());
                } else {
                    log::warn!("{id} [{source}]: {e}");
                }
                skip(entry, source, &e)
            })
        })
        .collect()
}

/// Evaluates every manifest entry against each requested mask source and
/// writes the report. Per-image problems are recorded as skips; only
/// configuration problems abort the run.
pub fn run_eval(config: &EvalConfig) -> Result<EvalOutcome> {
    if config.bins == 0 {
        return Err(Error::InvalidInput("--bins must be at least 1".into()));
    }
    let mut sources = config.sources.clone();
    sources.sort();
    sources.dedup();
    if sources.is_empty() {
        return Err(Error::InvalidInput("no mask sources requested".into()));
    }
    let pool = thread_pool(config.workers)?;

    let entries = ingest::load_manifest(&config.manifest)?;
    let evaluable: Vec<ImageEntry> = entries
        .iter()
        .filter(|e| e.image.is_evaluable())
        .cloned()
        .collect();
    ingest::preflight(&evaluable, &sources)?;

    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let curves_dir = config.out_dir.join("curves");
    if config.curves {
        fs::create_dir_all(&curves_dir).map_err(|e| Error::io(&curves_dir, e))?;
    }
    let curves = config.curves.then_some(curves_dir.as_path());

    let outcomes: Vec<Outcome> = pool.install(|| {
        entries
            .par_iter()
            .flat_map_iter(|e| evaluate_entry(e, &sources, curves))
            .collect()
    });

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(s) => skipped.push(s),
        }
    }
    records.sort_by(|a, b| (&a.image_id, a.mask_source).cmp(&(&b.image_id, b.mask_source)));
    skipped.sort();

    let summary = report::aggregate(&records, &skipped);
    let comparison = if sources.len() >= 2 {
        report::compare_sources(&summary).ok()
    } else {
        None
    };
    let histograms = Metric::ALL
        .iter()
        .flat_map(|&m| sources.iter().map(move |&s| (m, s)))
        .map(|(m, s)| report::histogram(&records, m, s, config.bins))
        .collect::<Result<Vec<_>>>()?;

    let config_echo = serde_json::to_value(config).expect("config serializes");
    report::emit_report(
        &Report {
            summary: &summary,
            comparison: comparison.as_ref(),
            records: &records,
            skipped: &skipped,
            histograms: &histograms,
            config: &config_echo,
            svg: config.svg,
        },
        &config.out_dir,
    )?;

    Ok(EvalOutcome {
        records,
        skipped,
        summary,
        comparison,
    })
}

#[derive(Debug, Clone, Default)]
pub struct RasterizeOutcome {
    pub written: Vec<PathBuf>,
    /// Images without infected annotations.
    pub skipped: Vec<String>,
}

/// Writes one union-of-infected-boxes mask PNG per image.
pub fn run_rasterize(annotations: &Path, out_dir: &Path) -> Result<RasterizeOutcome> {
    let images = ingest::load_annotations(annotations)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut outcome = RasterizeOutcome::default();
    for img in &images {
        if !img.is_evaluable() {
            log::info!("{}: no infected cells, no mask written", img.image_id);
            outcome.skipped.push(img.image_id.clone());
            continue;
        }
        let mask = ingest::box_mask(img)?;
        let path = out_dir.join(format!("{}.png", file_stem_for(&img.image_id)));
        ingest::save_mask(&path, &mask)?;
        outcome.written.push(path);
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Default)]
pub struct PreprocessOutcome {
    pub written: Vec<PathBuf>,
    pub failures: Vec<(PathBuf, String)>,
}

fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        .unwrap_or(false)
}

fn preprocess_file(input: &Path, output: &Path, method: Method, params: &PreprocessParams) -> Result<()> {
    let decoded = image::open(input).map_err(|e| Error::format(input, e.to_string()))?;
    let img = RgbImage::from(&decoded.to_rgb8());
    let out = preprocess::run_pipeline(&img, method, params)?;
    image::RgbImage::from(&out)
        .save_with_format(output, image::ImageFormat::Png)
        .map_err(|e| Error::format(output, e.to_string()))
}

/// Runs one preprocessing pipeline over every PNG/JPEG in `in_dir`.
pub fn run_preprocess(
    in_dir: &Path,
    out_dir: &Path,
    method: Method,
    params: &PreprocessParams,
    workers: Option<usize>,
) -> Result<PreprocessOutcome> {
    let pool = thread_pool(workers)?;
    let mut inputs: Vec<PathBuf> = fs::read_dir(in_dir)
        .map_err(|e| Error::io(in_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image_file(p))
        .collect();
    inputs.sort();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let results: Vec<(PathBuf, Result<PathBuf>)> = pool.install(|| {
        inputs
            .par_iter()
            .map(|input| {
                let stem = input.file_stem().unwrap_or_default().to_string_lossy();
                let output = out_dir.join(format!("{stem}.png"));
                let r = preprocess_file(input, &output, method, params).map(|_| output);
                (input.clone(), r)
            })
            .collect()
    });

    let mut outcome = PreprocessOutcome::default();
    for (input, r) in results {
        match r {
            Ok(out) => outcome.written.push(out),
            Err(e) => {
                log::warn!("{}: {e}", input.display());
                outcome.failures.push((input, e.to_string()));
            }
        }
    }
    Ok(outcome)
}

/// Plain-text rendering of the summary: one row per statistic, one column per source.
pub fn format_table(summary: &SummaryTable) -> String {
    let sources: Vec<MaskSource> = summary.sources.keys().copied().collect();
    let mut out = format!("{:<18}", "Metric");
    for s in &sources {
        out.push_str(&format!("{:>16}", s.as_str()));
    }
    out.push('\n');
    for (row, cells) in summary.table_rows() {
        out.push_str(&format!("{row:<18}"));
        for s in &sources {
            match cells.get(s).copied().flatten() {
                Some(v) => out.push_str(&format!("{v:>16.4}")),
                None => out.push_str(&format!("{:>16}", "-")),
            }
        }
        out.push('\n');
    }
    for (s, sum) in &summary.sources {
        out.push_str(&format!(
            "{s}: {} evaluated, {} skipped\n",
            sum.evaluated, sum.skipped
        ));
    }
    out
}
