//! Loader for IVUS-challenge-style directories: one raster per frame plus
//! optional lumen / EEL contour text files per frame.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use ndarray::s;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::contour::{read_contour_file, ContourAnnotation};
use crate::error::{Error, Result};
use crate::imaging::CartesianImage;
use crate::raster;

/// Directory layout. Patterns for contour files are templates in which
/// `{id}` is replaced by the image id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetLayout {
    /// Relative to the dataset root.
    pub image_dir: PathBuf,
    /// Regex over image file names; capture group 1 (if any) is the image
    /// id, otherwise the file stem.
    pub image_pattern: String,
    /// Relative to the dataset root; defaults to `image_dir`.
    #[serde(default)]
    pub contour_dir: Option<PathBuf>,
    pub lumen_contour_pattern: String,
    pub eel_contour_pattern: String,
    /// Regex over image ids; capture group 1 is the patient id.
    pub patient_id_regex: String,
}

impl Default for DatasetLayout {
    fn default() -> Self {
        Self {
            image_dir: PathBuf::from("images"),
            image_pattern: r"^(.+)\.png$".into(),
            contour_dir: None,
            lumen_contour_pattern: "lum_{id}.txt".into(),
            eel_contour_pattern: "med_{id}.txt".into(),
            patient_id_regex: r"^(?:patient)?(\d+)".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub id: String,
    pub patient_id: Option<String>,
    pub image: CartesianImage,
    pub annotation: Option<ContourAnnotation>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadCounts {
    pub images: usize,
    pub annotated: usize,
    pub skipped_images: usize,
    pub rejected_annotations: usize,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedDataset {
    pub items: Vec<DatasetItem>,
    pub counts: LoadCounts,
}

pub fn load_dataset(root: &Path, layout: &DatasetLayout) -> Result<LoadedDataset> {
    let image_re = Regex::new(&layout.image_pattern).map_err(|e| Error::Config(format!("image_pattern: {e}")))?;
    let patient_re = Regex::new(&layout.patient_id_regex).map_err(|e| Error::Config(format!("patient_id_regex: {e}")))?;
    let image_dir = root.join(&layout.image_dir);
    let contour_dir = root.join(layout.contour_dir.as_ref().unwrap_or(&layout.image_dir));

    let entries = fs::read_dir(&image_dir).map_err(|e| Error::io(&image_dir, e))?;
    let mut names = BTreeSet::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&image_dir, e))?;
        if let Some(name) = entry.file_name().to_str() {
            if image_re.is_match(name) {
                names.insert(name.to_string());
            }
        }
    }

    let mut out = LoadedDataset::default();
    for name in names {
        let caps = image_re.captures(&name).expect("filtered above");
        let id = match caps.get(1) {
            Some(m) => m.as_str().to_string(),
            None => Path::new(&name).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or(name.clone()),
        };
        let path = image_dir.join(&name);
        let image = match read_square(&path) {
            Ok(img) => img,
            Err(e) => {
                warn!("skipping unreadable image: {e}");
                out.counts.skipped_images += 1;
                continue;
            }
        };
        let patient_id = patient_re.captures(&id).and_then(|c| c.get(1)).map(|m| m.as_str().to_string());

        let lumen_path = contour_dir.join(layout.lumen_contour_pattern.replace("{id}", &id));
        let eel_path = contour_dir.join(layout.eel_contour_pattern.replace("{id}", &id));
        let annotation = if lumen_path.is_file() && eel_path.is_file() {
            match read_annotation(&lumen_path, &eel_path, &id) {
                Ok(a) => Some(a),
                Err(e) => {
                    warn!("rejecting annotation: {e}");
                    out.counts.rejected_annotations += 1;
                    None
                }
            }
        } else {
            None
        };
        out.counts.images += 1;
        out.counts.annotated += annotation.is_some() as usize;
        out.items.push(DatasetItem { id, patient_id, image, annotation });
    }
    Ok(out)
}

fn read_annotation(lumen: &Path, eel: &Path, id: &str) -> Result<ContourAnnotation> {
    ContourAnnotation::new(read_contour_file(lumen)?, read_contour_file(eel)?, id)
}

/// Reads a raster, center-cropping non-square frames.
fn read_square(path: &Path) -> Result<CartesianImage> {
    let data = raster::read_gray(path)?;
    let (h, w) = data.dim();
    let side = h.min(w);
    if side == 0 {
        return Err(Error::format(path, "empty image"));
    }
    let (r0, c0) = ((h - side) / 2, (w - side) / 2);
    CartesianImage::new(data.slice(s![r0..r0 + side, c0..c0 + side]).to_owned())
}

/// Train/test partition by patient.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetSplit {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Items whose patient id is listed in `test_patients` go to the test set,
/// everything else to training.
pub fn split_by_patient(items: &[DatasetItem], test_patients: &[String]) -> DatasetSplit {
    let mut split = DatasetSplit::default();
    for item in items {
        let is_test = item.patient_id.as_ref().is_some_and(|p| test_patients.iter().any(|t| t == p));
        if is_test {
            split.test_ids.push(item.id.clone());
        } else {
            split.train_ids.push(item.id.clone());
        }
    }
    split
}
