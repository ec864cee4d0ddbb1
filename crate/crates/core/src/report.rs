//! Aggregation of per-image records into summary tables, score
//! distributions and report files.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{EvalRecord, MaskSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Auprc,
    AucJudd,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Auprc, Metric::AucJudd];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Auprc => "auprc",
            Metric::AucJudd => "auc_judd",
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Metric::Auprc => "AUPRC",
            Metric::AucJudd => "AUC Judd",
        }
    }

    pub fn of(&self, record: &EvalRecord) -> f64 {
        match self {
            Metric::Auprc => record.auprc,
            Metric::AucJudd => record.auc_judd,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An image that was submitted for a source but produced no record.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SkippedImage {
    pub image_id: String,
    pub mask_source: MaskSource,
    pub reason: String,
    /// True for unexpected errors (unreadable files, shape mismatches);
    /// false for images that are excluded by definition.
    pub failure: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceSummary {
    pub evaluated: usize,
    pub skipped: usize,
    pub skipped_ids: Vec<String>,
    pub mean_auprc: Option<f64>,
    pub median_auprc: Option<f64>,
    pub mean_auc_judd: Option<f64>,
    pub median_auc_judd: Option<f64>,
    /// Mean fraction of external-mask pixels inside the annotation boxes.
    pub mean_containment: Option<f64>,
    pub containment_records: usize,
    pub containment_at_one: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub sources: BTreeMap<MaskSource, SourceSummary>,
}

impl SummaryTable {
    pub fn get(&self, source: MaskSource) -> Option<&SourceSummary> {
        self.sources.get(&source)
    }

    /// `{Average, Median} x {AUPRC, AUC Judd}` rows, one column per source.
    pub fn table_rows(&self) -> BTreeMap<String, BTreeMap<MaskSource, Option<f64>>> {
        let mut rows = BTreeMap::new();
        for metric in Metric::ALL {
            for (stat, pick) in [("Average", true), ("Median", false)] {
                let cells = self
                    .sources
                    .iter()
                    .map(|(src, s)| {
                        let value = match (metric, pick) {
                            (Metric::Auprc, true) => s.mean_auprc,
                            (Metric::Auprc, false) => s.median_auprc,
                            (Metric::AucJudd, true) => s.mean_auc_judd,
                            (Metric::AucJudd, false) => s.median_auc_judd,
                        };
                        (*src, value)
                    })
                    .collect();
                rows.insert(format!("{stat} {}", metric.label()), cells);
            }
        }
        rows
    }
}

fn sorted(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values
}

/// Mean of values summed in sorted order, so the result does not depend on input order.
fn mean(sorted: &[f64]) -> Option<f64> {
    (!sorted.is_empty()).then(|| sorted.iter().sum::<f64>() / sorted.len() as f64)
}

fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0),
    }
}

/// Groups records by mask source and computes mean and median of each metric.
pub fn aggregate(records: &[EvalRecord], skipped: &[SkippedImage]) -> SummaryTable {
    let mut table = SummaryTable::default();
    for source in MaskSource::ALL {
        let mine: Vec<&EvalRecord> = records.iter().filter(|r| r.mask_source == source).collect();
        let mut skipped_ids: Vec<String> = skipped
            .iter()
            .filter(|s| s.mask_source == source)
            .map(|s| s.image_id.clone())
            .collect();
        if mine.is_empty() && skipped_ids.is_empty() {
            continue;
        }
        skipped_ids.sort();

        let auprc = sorted(mine.iter().map(|r| r.auprc).collect());
        let judd = sorted(mine.iter().map(|r| r.auc_judd).collect());
        let contained = sorted(mine.iter().filter_map(|r| r.containment_in_box).collect());
        table.sources.insert(
            source,
            SourceSummary {
                evaluated: mine.len(),
                skipped: skipped_ids.len(),
                skipped_ids,
                mean_auprc: mean(&auprc),
                median_auprc: median(&auprc),
                mean_auc_judd: mean(&judd),
                median_auc_judd: median(&judd),
                mean_containment: mean(&contained),
                containment_records: contained.len(),
                containment_at_one: contained.iter().filter(|&&c| c == 1.0).count(),
            },
        );
    }
    table
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub metric: Metric,
    pub mask_source: MaskSource,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width histogram over `[0, 1]`; bins are half-open except the last,
/// which also takes 1.0.
pub fn histogram(
    records: &[EvalRecord],
    metric: Metric,
    mask_source: MaskSource,
    bins: usize,
) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidInput("histogram needs at least one bin".into()));
    }
    let bin_edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let mut counts = vec![0usize; bins];
    for r in records.iter().filter(|r| r.mask_source == mask_source) {
        let v = metric.of(r);
        let mut idx = ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        // settle floating-point disagreement with the stored edges
        while idx + 1 < bins && v >= bin_edges[idx + 1] {
            idx += 1;
        }
        while idx > 0 && v < bin_edges[idx] {
            idx -= 1;
        }
        counts[idx] += 1;
    }
    Ok(Histogram {
        metric,
        mask_source,
        bin_edges,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    /// external_mask minus annotation_box.
    pub delta_mean_auprc: Option<f64>,
    pub delta_median_auprc: Option<f64>,
    pub delta_mean_auc_judd: Option<f64>,
    pub delta_median_auc_judd: Option<f64>,
    pub mean_containment: Option<f64>,
    pub containment_records: usize,
    pub containment_at_one: usize,
}

pub fn compare_sources(summary: &SummaryTable) -> Result<ComparisonTable> {
    let (Some(ext), Some(boxes)) = (
        summary.get(MaskSource::ExternalMask),
        summary.get(MaskSource::AnnotationBox),
    ) else {
        return Err(Error::InsufficientSources(summary.sources.len()));
    };
    let delta = |a: Option<f64>, b: Option<f64>| Some(a? - b?);
    Ok(ComparisonTable {
        delta_mean_auprc: delta(ext.mean_auprc, boxes.mean_auprc),
        delta_median_auprc: delta(ext.median_auprc, boxes.median_auprc),
        delta_mean_auc_judd: delta(ext.mean_auc_judd, boxes.mean_auc_judd),
        delta_median_auc_judd: delta(ext.median_auc_judd, boxes.median_auc_judd),
        mean_containment: ext.mean_containment,
        containment_records: ext.containment_records,
        containment_at_one: ext.containment_at_one,
    })
}

pub const RECORDS_HEADER: &str =
    "image_id,mask_source,positives,negatives,baseline_auprc,auprc,auc_judd,containment_in_box";

#[derive(Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    tool: Tool,
    config: &'a serde_json::Value,
    sources: &'a BTreeMap<MaskSource, SourceSummary>,
    table: BTreeMap<String, BTreeMap<MaskSource, Option<f64>>>,
    comparison: Option<&'a ComparisonTable>,
    failures: Vec<&'a SkippedImage>,
}

pub struct Report<'a> {
    pub summary: &'a SummaryTable,
    pub comparison: Option<&'a ComparisonTable>,
    pub records: &'a [EvalRecord],
    pub skipped: &'a [SkippedImage],
    pub histograms: &'a [Histogram],
    /// Echo of the run configuration, embedded verbatim in summary.json.
    pub config: &'a serde_json::Value,
    pub svg: bool,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn records_csv(records: &[EvalRecord]) -> String {
    let mut rows: Vec<&EvalRecord> = records.iter().collect();
    rows.sort_by(|a, b| (&a.image_id, a.mask_source).cmp(&(&b.image_id, b.mask_source)));
    let mut out = String::from(RECORDS_HEADER);
    out.push('\n');
    for r in rows {
        let containment = r
            .containment_in_box
            .map(|c| format!("{c:.6}"))
            .unwrap_or_default();
        // image ids come from our own JSON; quote any that would break the row
        let id = if r.image_id.contains([',', '"', '\n']) {
            format!("\"{}\"", r.image_id.replace('"', "\"\""))
        } else {
            r.image_id.clone()
        };
        let _ = writeln!(
            out,
            "{id},{},{},{},{:.6},{:.6},{:.6},{containment}",
            r.mask_source, r.positives, r.negatives, r.baseline_auprc, r.auprc, r.auc_judd
        );
    }
    out
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("bin_start,bin_end,count\n");
    for (i, count) in h.counts.iter().enumerate() {
        let _ = writeln!(out, "{:.6},{:.6},{count}", h.bin_edges[i], h.bin_edges[i + 1]);
    }
    out
}

pub fn histogram_svg(h: &Histogram) -> String {
    let (width, height, margin) = (400.0, 240.0, 30.0);
    let max = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let bar_w = (width - 2.0 * margin) / h.counts.len() as f64;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\">\n\
         <text x=\"{margin}\" y=\"18\" font-size=\"12\">{} / {}</text>\n",
        h.metric, h.mask_source
    );
    for (i, &count) in h.counts.iter().enumerate() {
        let bar_h = (height - 2.0 * margin) * count as f64 / max;
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"steelblue\"/>",
            margin + i as f64 * bar_w,
            height - margin - bar_h,
            (bar_w - 1.0).max(0.5),
            bar_h
        );
    }
    let _ = writeln!(
        out,
        "<line x1=\"{margin}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n</svg>",
        height - margin,
        width - margin
    );
    out
}

/// Writes records.csv, summary.json and one histogram CSV (plus optional
/// SVG) per histogram. Identical inputs give byte-identical files.
pub fn emit_report(report: &Report<'_>, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_file(&out_dir.join("records.csv"), &records_csv(report.records))?;

    let mut failures: Vec<&SkippedImage> = report.skipped.iter().filter(|s| s.failure).collect();
    failures.sort();
    let doc = SummaryDocument {
        tool: Tool {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        config: report.config,
        sources: &report.summary.sources,
        table: report.summary.table_rows(),
        comparison: report.comparison,
        failures,
    };
    let json = serde_json::to_string_pretty(&doc).expect("summary serializes");
    write_file(&out_dir.join("summary.json"), &(json + "\n"))?;

    for h in report.histograms {
        let stem = format!("histogram_{}_{}", h.metric, h.mask_source);
        write_file(&out_dir.join(format!("{stem}.csv")), &histogram_csv(h))?;
        if report.svg {
            write_file(&out_dir.join(format!("{stem}.svg")), &histogram_svg(h))?;
        }
    }
    Ok(())
}
