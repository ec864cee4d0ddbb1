//! Annotation documents, evaluation manifests and raster interchange files.
//!
//! Annotation JSON is a list of images, each with its dimensions and a list
//! of categorized objects whose boxes use inclusive row/column bounds:
//!
//! ```json
//! [{ "image": "smear_001", "width": 1600, "height": 1200,
//!    "objects": [{ "category": "trophozoite",
//!                  "bounding_box": { "min_r": 10, "min_c": 20, "max_r": 40, "max_c": 55 } }] }]
//! ```
//!
//! The manifest is a CSV with header `image_id,annotation_path,saliency_path,mask_paths`;
//! `mask_paths` is a `;`-separated, possibly empty, list. Relative paths are
//! resolved against the manifest's directory.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MaskSource;
use crate::raster::{rasterize_box, union_masks, BinaryMask, BoundingBox, SaliencyMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfectionLabel {
    Infected,
    Uninfected,
}

/// Collapses the six blood-smear cell categories into infected/uninfected.
pub fn group_binary(category: &str) -> Result<InfectionLabel> {
    match category.trim().to_lowercase().as_str() {
        "red blood cell" | "rbc" | "leukocyte" => Ok(InfectionLabel::Uninfected),
        "gametocyte" | "ring" | "trophozoite" | "schizont" => Ok(InfectionLabel::Infected),
        _ => Err(Error::UnknownCategory(category.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub category: String,
    #[serde(rename = "bounding_box")]
    pub bbox: BoundingBox,
}

/// One annotated image as stored in an annotation document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedImage {
    #[serde(rename = "image")]
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    #[serde(rename = "objects")]
    pub annotations: Vec<AnnotationRecord>,
}

impl AnnotatedImage {
    pub fn infected_boxes(&self) -> impl Iterator<Item = &BoundingBox> {
        self.annotations
            .iter()
            .filter(|a| matches!(group_binary(&a.category), Ok(InfectionLabel::Infected)))
            .map(|a| &a.bbox)
    }

    /// Images without infected cells have no ground truth and are not scored.
    pub fn is_evaluable(&self) -> bool {
        self.infected_boxes().next().is_some()
    }

    fn validate(&self) -> Result<()> {
        if self.image_id.is_empty() {
            return Err(Error::InvalidInput("empty image id".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidRaster(format!(
                "image dimensions {}x{} must be nonzero",
                self.width, self.height
            )));
        }
        for ann in &self.annotations {
            if ann.category.trim().is_empty() {
                return Err(Error::InvalidInput("empty category".into()));
            }
            group_binary(&ann.category)?;
            ann.bbox.validate()?;
            if !ann.bbox.fits(self.width, self.height) {
                return Err(Error::BoxOutOfBounds {
                    bbox: ann.bbox,
                    width: self.width,
                    height: self.height,
                });
            }
        }
        Ok(())
    }
}

fn parse_error(path: &Path, err: serde_json::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: err.line(),
        column: err.column(),
        message: err.to_string(),
    }
}

/// Parses and validates an annotation document already in memory.
pub fn parse_annotations(text: &str, path: &Path) -> Result<Vec<AnnotatedImage>> {
    let images: Vec<AnnotatedImage> =
        serde_json::from_str(text).map_err(|e| parse_error(path, e))?;
    let mut seen = HashSet::new();
    for img in &images {
        img.validate().map_err(|e| e.for_image(&img.image_id))?;
        if !seen.insert(img.image_id.as_str()) {
            return Err(Error::InvalidInput(format!(
                "{}: duplicate image id {:?}",
                path.display(),
                img.image_id
            )));
        }
    }
    Ok(images)
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotatedImage>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text, path)
}

pub fn write_annotations(path: &Path, images: &[AnnotatedImage]) -> Result<()> {
    let text = serde_json::to_string_pretty(images).expect("annotations serialize");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Public malaria bounding-box export: `image.pathname`, `image.shape.{r,c}`,
/// and objects with `bounding_box.{minimum,maximum}.{r,c}`.
mod bbbc041 {
    use serde::Deserialize;

    #[derive(Deserialize)]
    pub struct Image {
        pub image: Meta,
        pub objects: Vec<Object>,
    }

    #[derive(Deserialize)]
    pub struct Meta {
        pub pathname: String,
        pub shape: Shape,
    }

    #[derive(Deserialize)]
    pub struct Shape {
        pub r: usize,
        pub c: usize,
    }

    #[derive(Deserialize)]
    pub struct Object {
        pub category: String,
        pub bounding_box: Corners,
    }

    #[derive(Deserialize)]
    pub struct Corners {
        pub minimum: Point,
        pub maximum: Point,
    }

    #[derive(Deserialize)]
    pub struct Point {
        pub r: usize,
        pub c: usize,
    }
}

/// Result of converting a dataset export to the canonical schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Conversion {
    pub images: Vec<AnnotatedImage>,
    /// Objects whose category is outside the six known cell types
    /// (the export's "difficult" label, for instance), dropped per image id.
    pub dropped: BTreeMap<String, usize>,
}

/// Converts the public malaria dataset's JSON export.
///
/// Image ids are the file stems of `pathname`. The export's maximum corner is
/// taken as inclusive and clamped to the last row/column, since some boxes
/// touch or overrun the image edge.
pub fn convert_bbbc041(text: &str, path: &Path) -> Result<Conversion> {
    let raw: Vec<bbbc041::Image> = serde_json::from_str(text).map_err(|e| parse_error(path, e))?;
    let mut images = Vec::with_capacity(raw.len());
    let mut dropped = BTreeMap::new();
    for entry in raw {
        let image_id = Path::new(&entry.image.pathname)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| entry.image.pathname.clone());
        let (height, width) = (entry.image.shape.r, entry.image.shape.c);
        let mut annotations = Vec::new();
        for obj in entry.objects {
            if group_binary(&obj.category).is_err() {
                *dropped.entry(image_id.clone()).or_insert(0) += 1;
                continue;
            }
            let bb = &obj.bounding_box;
            let max_r = bb.maximum.r.min(height.saturating_sub(1));
            let max_c = bb.maximum.c.min(width.saturating_sub(1));
            let bbox = BoundingBox::new(bb.minimum.r, bb.minimum.c, max_r, max_c)
                .map_err(|e| e.for_image(&image_id))?;
            annotations.push(AnnotationRecord {
                category: obj.category,
                bbox,
            });
        }
        let img = AnnotatedImage {
            image_id,
            width,
            height,
            annotations,
        };
        img.validate().map_err(|e| e.for_image(&img.image_id))?;
        images.push(img);
    }
    Ok(Conversion { images, dropped })
}

/// Everything needed to evaluate one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEntry {
    pub image: AnnotatedImage,
    pub saliency_path: PathBuf,
    pub external_mask_paths: Vec<PathBuf>,
}

impl ImageEntry {
    pub fn image_id(&self) -> &str {
        &self.image.image_id
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.image.width, self.image.height)
    }
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    image_id: String,
    annotation_path: String,
    saliency_path: String,
    #[serde(default)]
    mask_paths: String,
}

pub const MANIFEST_HEADER: [&str; 4] = ["image_id", "annotation_path", "saliency_path", "mask_paths"];

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p.trim());
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads a manifest and joins every row with its annotation document.
pub fn load_manifest(path: &Path) -> Result<Vec<ImageEntry>> {
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != MANIFEST_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 1,
            message: format!("expected header {:?}, found {header:?}", MANIFEST_HEADER.join(",")),
        });
    }

    let mut documents: HashMap<PathBuf, HashMap<String, AnnotatedImage>> = HashMap::new();
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for row in reader.deserialize::<ManifestRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        if !seen.insert(row.image_id.clone()) {
            return Err(Error::InvalidInput(format!(
                "{}: duplicate image id {:?}",
                path.display(),
                row.image_id
            )));
        }
        let ann_path = resolve(&base, &row.annotation_path);
        if !documents.contains_key(&ann_path) {
            let doc = load_annotations(&ann_path)?
                .into_iter()
                .map(|img| (img.image_id.clone(), img))
                .collect();
            documents.insert(ann_path.clone(), doc);
        }
        let image = documents[&ann_path].get(&row.image_id).cloned().ok_or_else(|| {
            Error::InvalidInput(format!(
                "image {:?} not found in {}",
                row.image_id,
                ann_path.display()
            ))
        })?;
        let external_mask_paths = row
            .mask_paths
            .split(';')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| resolve(&base, p))
            .collect();
        entries.push(ImageEntry {
            image,
            saliency_path: resolve(&base, &row.saliency_path),
            external_mask_paths,
        });
    }
    Ok(entries)
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |pos| pos.line() as usize);
    let message = err.to_string();
    match err.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        _ => Error::Parse {
            path: path.to_path_buf(),
            line,
            column: 0,
            message,
        },
    }
}

/// Checks that every file an evaluation will read exists, listing all that do not.
pub fn preflight(entries: &[ImageEntry], sources: &[MaskSource]) -> Result<()> {
    let mut missing = Vec::new();
    for entry in entries {
        if !entry.saliency_path.is_file() {
            missing.push(entry.saliency_path.display().to_string());
        }
        if sources.contains(&MaskSource::ExternalMask) {
            missing.extend(
                entry
                    .external_mask_paths
                    .iter()
                    .filter(|p| !p.is_file())
                    .map(|p| p.display().to_string()),
            );
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{} referenced file(s) missing: {}",
            missing.len(),
            missing.join(", ")
        )))
    }
}

/// Union of rasterized infected-cell boxes.
pub fn box_mask(image: &AnnotatedImage) -> Result<BinaryMask> {
    let masks = image
        .infected_boxes()
        .map(|b| rasterize_box(b, image.width, image.height))
        .collect::<Result<Vec<_>>>()?;
    if masks.is_empty() {
        return Err(Error::EmptyGroundTruth(image.image_id.clone()));
    }
    union_masks(&masks)
}

pub fn ground_truth_mask(entry: &ImageEntry, source: MaskSource) -> Result<BinaryMask> {
    match source {
        MaskSource::AnnotationBox => box_mask(&entry.image),
        MaskSource::ExternalMask => {
            if entry.external_mask_paths.is_empty() {
                return Err(Error::EmptyGroundTruth(entry.image_id().to_string()));
            }
            let masks = entry
                .external_mask_paths
                .iter()
                .map(|p| {
                    let m = load_mask(p)?;
                    check_shape(p, entry.shape(), m.shape())?;
                    Ok(m)
                })
                .collect::<Result<Vec<_>>>()?;
            union_masks(&masks)
        }
    }
}

fn check_shape(path: &Path, expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected != found {
        log::debug!("{}: {found:?} != manifest {expected:?}", path.display());
        return Err(Error::ShapeMismatch { expected, found });
    }
    Ok(())
}

fn decode(path: &Path) -> Result<DynamicImage> {
    image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Reads a single-channel 8- or 16-bit PNG as saliency in `[0, 1]`.
pub fn load_saliency(path: &Path) -> Result<SaliencyMap> {
    let (w, h, values) = match decode(path)? {
        DynamicImage::ImageLuma16(img) => (
            img.width(),
            img.height(),
            img.as_raw().iter().map(|&v| f64::from(v) / 65535.0).collect(),
        ),
        DynamicImage::ImageLuma8(img) => (
            img.width(),
            img.height(),
            img.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect(),
        ),
        other => {
            return Err(Error::format(
                path,
                format!("saliency must be 8/16-bit grayscale, found {:?}", other.color()),
            ))
        }
    };
    SaliencyMap::new(w as usize, h as usize, values)
}

/// Like [`load_saliency`] but also checks dimensions against the manifest.
pub fn load_saliency_for(entry: &ImageEntry) -> Result<SaliencyMap> {
    let sal = load_saliency(&entry.saliency_path)?;
    check_shape(&entry.saliency_path, entry.shape(), sal.shape())?;
    Ok(sal)
}

/// Reads a single-channel 8-bit PNG; any nonzero value is positive.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    match decode(path)? {
        DynamicImage::ImageLuma8(img) => BinaryMask::new(
            img.width() as usize,
            img.height() as usize,
            img.as_raw().iter().map(|&v| v != 0).collect(),
        ),
        other => Err(Error::format(
            path,
            format!("mask must be 8-bit grayscale, found {:?}", other.color()),
        )),
    }
}

/// Writes a saliency map as a 16-bit grayscale PNG.
pub fn save_saliency(path: &Path, sal: &SaliencyMap) -> Result<()> {
    let raw: Vec<u16> = sal
        .values()
        .iter()
        .map(|&v| (v * 65535.0).round() as u16)
        .collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(sal.width() as u32, sal.height() as u32, raw)
            .expect("dimensions validated");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Writes a mask as an 8-bit PNG with values 0 and 255.
pub fn save_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let raw: Vec<u8> = mask.values().iter().map(|&v| if v { 255 } else { 0 }).collect();
    let img: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, raw)
            .expect("dimensions validated");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(images: &[(&str, usize, usize, &[(&str, [usize; 4])])]) -> String {
        let list: Vec<serde_json::Value> = images
            .iter()
            .map(|(id, w, h, objs)| {
                serde_json::json!({
                    "image": id, "width": w, "height": h,
                    "objects": objs.iter().map(|(cat, b)| serde_json::json!({
                        "category": cat,
                        "bounding_box": {"min_r": b[0], "min_c": b[1], "max_r": b[2], "max_c": b[3]}
                    })).collect::<Vec<_>>()
                })
            })
            .collect();
        serde_json::to_string(&list).unwrap()
    }

    #[test]
    fn grouping() {
        assert_eq!(group_binary("trophozoite").unwrap(), InfectionLabel::Infected);
        assert_eq!(group_binary("leukocyte").unwrap(), InfectionLabel::Uninfected);
        assert_eq!(group_binary("Schizont").unwrap(), InfectionLabel::Infected);
        assert_eq!(group_binary("red blood cell").unwrap(), InfectionLabel::Uninfected);
        assert_eq!(group_binary("RBC").unwrap(), InfectionLabel::Uninfected);
        assert_eq!(group_binary("ring").unwrap(), InfectionLabel::Infected);
        assert_eq!(group_binary("gametocyte").unwrap(), InfectionLabel::Infected);
        match group_binary("difficult") {
            Err(Error::UnknownCategory(c)) => assert_eq!(c, "difficult"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_single_image() {
        let text = doc(&[(
            "a",
            10,
            8,
            &[("ring", [0, 0, 2, 2]), ("trophozoite", [3, 3, 7, 9])],
        )]);
        let images = parse_annotations(&text, Path::new("a.json")).unwrap();
        assert_eq!(images.len(), 1);
        assert_eq!(images[0].annotations.len(), 2);
        assert!(images[0].is_evaluable());
    }

    #[test]
    fn flags_images_without_infection() {
        let text = doc(&[("a", 4, 4, &[("red blood cell", [0, 0, 1, 1])]), ("b", 4, 4, &[])]);
        let images = parse_annotations(&text, Path::new("a.json")).unwrap();
        assert!(images.iter().all(|i| !i.is_evaluable()));
    }

    #[test]
    fn ten_image_document_counts() {
        let counts = [0usize, 1, 2, 3, 1, 0, 5, 2, 1, 4];
        let boxes: Vec<Vec<(&str, [usize; 4])>> = counts
            .iter()
            .map(|&n| (0..n).map(|k| (if k % 2 == 0 { "ring" } else { "rbc" }, [k, k, k + 1, k + 1])).collect())
            .collect();
        let ids: Vec<String> = (0..10).map(|i| format!("img{i}")).collect();
        let layout: Vec<(&str, usize, usize, &[(&str, [usize; 4])])> = ids
            .iter()
            .zip(&boxes)
            .map(|(id, b)| (id.as_str(), 16, 16, b.as_slice()))
            .collect();
        let images = parse_annotations(&doc(&layout), Path::new("d.json")).unwrap();
        assert_eq!(images.len(), 10);
        for (img, &n) in images.iter().zip(&counts) {
            assert_eq!(img.annotations.len(), n);
            assert_eq!(img.infected_boxes().count(), n.div_ceil(2));
        }
    }

    #[test]
    fn rejects_bad_documents() {
        let err = parse_annotations("[{\"image\": \"a\",\n \"width\": \"x\"}]", Path::new("bad.json"))
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let oob = doc(&[("a", 4, 4, &[("ring", [0, 0, 4, 1])])]);
        assert!(matches!(
            parse_annotations(&oob, Path::new("x")).unwrap_err().root(),
            Error::BoxOutOfBounds { .. }
        ));
        let unknown = doc(&[("a", 4, 4, &[("platelet", [0, 0, 1, 1])])]);
        assert!(matches!(
            parse_annotations(&unknown, Path::new("x")).unwrap_err().root(),
            Error::UnknownCategory(_)
        ));
        let dup = doc(&[("a", 4, 4, &[]), ("a", 4, 4, &[])]);
        assert!(parse_annotations(&dup, Path::new("x")).is_err());
    }

    #[test]
    fn box_ground_truth() {
        let one = AnnotatedImage {
            image_id: "one".into(),
            width: 6,
            height: 6,
            annotations: vec![AnnotationRecord {
                category: "ring".into(),
                bbox: BoundingBox::new(1, 1, 2, 3).unwrap(),
            }],
        };
        assert_eq!(
            box_mask(&one).unwrap(),
            rasterize_box(&BoundingBox::new(1, 1, 2, 3).unwrap(), 6, 6).unwrap()
        );

        let mut two = one.clone();
        two.annotations = vec![
            AnnotationRecord {
                category: "ring".into(),
                bbox: BoundingBox::new(0, 0, 2, 2).unwrap(),
            },
            AnnotationRecord {
                category: "schizont".into(),
                bbox: BoundingBox::new(1, 1, 4, 3).unwrap(),
            },
            AnnotationRecord {
                category: "leukocyte".into(),
                bbox: BoundingBox::new(5, 5, 5, 5).unwrap(),
            },
        ];
        let mut expected = 0;
        for r in 0..6 {
            for c in 0..6 {
                if (r <= 2 && c <= 2) || ((1..=4).contains(&r) && (1..=3).contains(&c)) {
                    expected += 1;
                }
            }
        }
        let m = box_mask(&two).unwrap();
        assert_eq!(m.positives(), expected);
        assert!(m.positives() < 9 + 12);
        assert!(!m.get(5, 5));

        let mut none = one.clone();
        none.annotations.clear();
        assert!(matches!(box_mask(&none), Err(Error::EmptyGroundTruth(_))));
    }

    #[test]
    fn png_interchange() {
        let dir = tempfile::tempdir().unwrap();
        let full = dir.path().join("full.png");
        save_saliency(&full, &SaliencyMap::new(2, 1, vec![1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(load_saliency(&full).unwrap().values(), &[1.0, 0.0]);

        let gradient: Vec<u16> = (0..64).map(|i| (i * 1000) as u16).collect();
        let grad_path = dir.path().join("grad.png");
        ImageBuffer::<Luma<u16>, _>::from_raw(8, 8, gradient.clone())
            .unwrap()
            .save(&grad_path)
            .unwrap();
        let sal = load_saliency(&grad_path).unwrap();
        for (v, raw) in sal.values().iter().zip(&gradient) {
            assert_eq!(*v, f64::from(*raw) / 65535.0);
        }

        let mask_path = dir.path().join("m.png");
        ImageBuffer::<Luma<u8>, _>::from_raw(2, 1, vec![0u8, 200])
            .unwrap()
            .save(&mask_path)
            .unwrap();
        assert_eq!(load_mask(&mask_path).unwrap().labels(), vec![0, 1]);

        let eight = dir.path().join("eight.png");
        ImageBuffer::<Luma<u8>, _>::from_raw(2, 1, vec![255u8, 51])
            .unwrap()
            .save(&eight)
            .unwrap();
        assert_eq!(load_saliency(&eight).unwrap().values(), &[1.0, 0.2]);

        let rgb = dir.path().join("rgb.png");
        image::RgbImage::new(2, 2).save(&rgb).unwrap();
        assert!(matches!(load_mask(&rgb), Err(Error::Format { .. })));
        assert!(matches!(load_saliency(&rgb), Err(Error::Format { .. })));
        // 16-bit is not a valid mask depth
        assert!(matches!(load_mask(&grad_path), Err(Error::Format { .. })));
    }

    #[test]
    fn manifest_join_and_preflight() {
        let dir = tempfile::tempdir().unwrap();
        let ann = doc(&[("a", 2, 2, &[("ring", [0, 0, 0, 0])]), ("b", 2, 2, &[])]);
        fs::write(dir.path().join("ann.json"), ann).unwrap();
        save_saliency(
            &dir.path().join("a.png"),
            &SaliencyMap::new(2, 2, vec![0.0; 4]).unwrap(),
        )
        .unwrap();
        let m1 = BinaryMask::from_labels(2, 2, &[1, 0, 0, 0]).unwrap();
        let m2 = BinaryMask::from_labels(2, 2, &[0, 0, 0, 1]).unwrap();
        save_mask(&dir.path().join("m1.png"), &m1).unwrap();
        save_mask(&dir.path().join("m2.png"), &m2).unwrap();
        let manifest = dir.path().join("manifest.csv");
        fs::write(
            &manifest,
            "image_id,annotation_path,saliency_path,mask_paths\n\
             a,ann.json,a.png,m1.png;m2.png\n\
             b,ann.json,b.png,\n",
        )
        .unwrap();
        let entries = load_manifest(&manifest).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].external_mask_paths.len(), 2);
        assert!(entries[1].external_mask_paths.is_empty());

        let ext = ground_truth_mask(&entries[0], MaskSource::ExternalMask).unwrap();
        assert_eq!(ext.labels(), vec![1, 0, 0, 1]);
        assert!(matches!(
            ground_truth_mask(&entries[1], MaskSource::ExternalMask),
            Err(Error::EmptyGroundTruth(_))
        ));

        // b.png is missing
        let err = preflight(&entries, &[MaskSource::AnnotationBox]).unwrap_err();
        assert!(err.to_string().contains("b.png"));
        assert!(preflight(&entries[..1], &MaskSource::ALL).is_ok());

        let mut wrong = entries[0].clone();
        wrong.image.width = 3;
        assert!(matches!(
            load_saliency_for(&wrong),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            ground_truth_mask(&wrong, MaskSource::ExternalMask),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn manifest_errors() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("ann.json"), doc(&[("a", 2, 2, &[])])).unwrap();
        let bad_header = dir.path().join("h.csv");
        fs::write(&bad_header, "id,ann,sal,masks\na,ann.json,a.png,\n").unwrap();
        assert!(matches!(load_manifest(&bad_header), Err(Error::Parse { .. })));

        let missing_id = dir.path().join("m.csv");
        fs::write(
            &missing_id,
            "image_id,annotation_path,saliency_path,mask_paths\nzzz,ann.json,a.png,\n",
        )
        .unwrap();
        assert!(load_manifest(&missing_id).is_err());

        let dup = dir.path().join("d.csv");
        fs::write(
            &dup,
            "image_id,annotation_path,saliency_path,mask_paths\na,ann.json,a.png,\na,ann.json,a.png,\n",
        )
        .unwrap();
        assert!(load_manifest(&dup).is_err());
    }

    #[test]
    fn converts_dataset_export() {
        let text = r#"[
          {"image": {"checksum": "x", "pathname": "/images/abc.png", "shape": {"r": 10, "c": 12, "channels": 3}},
           "objects": [
             {"bounding_box": {"minimum": {"r": 1, "c": 2}, "maximum": {"r": 3, "c": 4}}, "category": "trophozoite"},
             {"bounding_box": {"minimum": {"r": 5, "c": 5}, "maximum": {"r": 10, "c": 12}}, "category": "red blood cell"},
             {"bounding_box": {"minimum": {"r": 0, "c": 0}, "maximum": {"r": 1, "c": 1}}, "category": "difficult"}
           ]}
        ]"#;
        let conv = convert_bbbc041(text, Path::new("training.json")).unwrap();
        assert_eq!(conv.images.len(), 1);
        let img = &conv.images[0];
        assert_eq!((img.image_id.as_str(), img.width, img.height), ("abc", 12, 10));
        assert_eq!(img.annotations.len(), 2);
        assert_eq!(img.annotations[1].bbox, BoundingBox::new(5, 5, 9, 11).unwrap());
        assert_eq!(conv.dropped.get("abc"), Some(&1));

        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("canonical.json");
        write_annotations(&out, &conv.images).unwrap();
        assert_eq!(load_annotations(&out).unwrap(), conv.images);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn mask_png_is_lossless(
            (w, h, labels) in (1usize..20, 1usize..20)
                .prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(any::<bool>(), w * h)))
        ) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("m.png");
            let m = BinaryMask::new(w, h, labels).unwrap();
            save_mask(&p, &m).unwrap();
            prop_assert_eq!(load_mask(&p).unwrap(), m);
        }

        #[test]
        fn saliency_png_quantization_bounded(values in proptest::collection::vec(0.0f64..=1.0, 1..64)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("s.png");
            let sal = SaliencyMap::new(values.len(), 1, values.clone()).unwrap();
            save_saliency(&p, &sal).unwrap();
            let back = load_saliency(&p).unwrap();
            for (a, b) in values.iter().zip(back.values()) {
                prop_assert!((a - b).abs() <= 1.0 / (2.0 * 65535.0) + 1e-15);
            }
        }
    }
}
