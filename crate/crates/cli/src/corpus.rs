//! Directory corpora. An item `id` is stored as `id.polar.png` (image)
//! and/or `id.mask.polar.png` (tissue mask) in one directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ivus_core::dataset::augment::read_manifest;
use ivus_core::dataset::{Domain, TissueLabelMask};
use ivus_core::eval::AnnotatedImage;
use ivus_core::raster::{self, MASK_POLAR_SUFFIX, POLAR_SUFFIX};
use ivus_core::PolarImage;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent per-item seed: word 0 of stream `index` of the run seed.
pub fn item_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.next_u64()
}

/// Echogenicity and scatterer seeds of the `index`-th tissue map, shared
/// by Stage 0 simulation and generation so both see the same speckle.
pub fn stage0_seeds(seed: u64, index: usize) -> (u64, u64) {
    let s = item_seed(seed, index);
    (item_seed(s, 0), item_seed(s, 1))
}

pub fn image_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}{POLAR_SUFFIX}"))
}

pub fn mask_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}{MASK_POLAR_SUFFIX}"))
}

fn ids_with(dir: &Path, keep: impl Fn(&str) -> Option<&str>) -> Result<Vec<String>> {
    let entries = fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))?;
    let mut ids = Vec::new();
    for e in entries {
        let name = e?.file_name().to_string_lossy().into_owned();
        if let Some(id) = keep(&name) {
            ids.push(id.to_string());
        }
    }
    ids.sort();
    Ok(ids)
}

/// Ids of polar images (masks excluded), sorted.
pub fn image_ids(dir: &Path) -> Result<Vec<String>> {
    ids_with(dir, |n| if n.ends_with(MASK_POLAR_SUFFIX) { None } else { n.strip_suffix(POLAR_SUFFIX) })
}

/// Ids of polar masks, sorted.
pub fn mask_ids(dir: &Path) -> Result<Vec<String>> {
    ids_with(dir, |n| n.strip_suffix(MASK_POLAR_SUFFIX))
}

pub fn read_image(dir: &Path, id: &str) -> Result<PolarImage> {
    let path = image_path(dir, id);
    PolarImage::new(raster::read_gray(&path)?).with_context(|| path.display().to_string())
}

pub fn read_mask(dir: &Path, id: &str) -> Result<TissueLabelMask> {
    let path = mask_path(dir, id);
    TissueLabelMask::new(raster::read_labels(&path)?, Domain::Polar).with_context(|| path.display().to_string())
}

pub fn write_image(dir: &Path, id: &str, img: &PolarImage) -> Result<()> {
    Ok(raster::write_gray(&image_path(dir, id), img.data())?)
}

pub fn write_mask(dir: &Path, id: &str, mask: &TissueLabelMask) -> Result<()> {
    Ok(raster::write_labels(&mask_path(dir, id), mask.data())?)
}

pub fn read_images(dir: &Path) -> Result<Vec<(String, PolarImage)>> {
    let ids = image_ids(dir)?;
    if ids.is_empty() {
        bail!("no *{POLAR_SUFFIX} images in {}", dir.display());
    }
    ids.into_iter().map(|id| read_image(dir, &id).map(|img| (id, img))).collect()
}

/// Every item that has both an image and a mask of the same size.
pub fn read_annotated(dir: &Path) -> Result<Vec<AnnotatedImage>> {
    let masks = mask_ids(dir)?;
    let mut out = Vec::new();
    for id in image_ids(dir)? {
        if masks.binary_search(&id).is_err() {
            continue;
        }
        let image = read_image(dir, &id)?;
        let mask = read_mask(dir, &id)?;
        if mask.dim() != image.data().dim() {
            bail!("{id}: mask {:?} does not match image {:?}", mask.dim(), image.data().dim());
        }
        out.push(AnnotatedImage { id, image, mask });
    }
    if out.is_empty() {
        bail!("no annotated items (image plus mask) in {}", dir.display());
    }
    Ok(out)
}

/// Tissue maps named by an augmentation manifest (masks next to it) or
/// every mask in a directory.
pub fn read_maps(path: &Path) -> Result<Vec<(String, TissueLabelMask)>> {
    let (dir, ids) = if path.is_dir() {
        (path.to_path_buf(), mask_ids(path)?)
    } else {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        (dir, read_manifest(path)?.into_iter().map(|e| e.id).collect())
    };
    if ids.is_empty() {
        bail!("no tissue maps found in {}", path.display());
    }
    ids.into_iter().map(|id| read_mask(&dir, &id).map(|m| (id, m))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ivus_core::TissueClass;

    #[test]
    fn item_seeds_differ_and_repeat() {
        assert_eq!(item_seed(5, 3), item_seed(5, 3));
        assert_ne!(item_seed(5, 3), item_seed(5, 4));
        assert_ne!(item_seed(5, 3), item_seed(6, 3));
    }

    #[test]
    fn images_and_masks_are_listed_separately() {
        let dir = tempfile::tempdir().unwrap();
        let img = PolarImage::from_fn(4, 4, |(r, _)| r as f64 / 4.0);
        write_image(dir.path(), "a", &img).unwrap();
        write_image(dir.path(), "b", &img).unwrap();
        let labels = ndarray::Array2::from_shape_fn((4, 4), |(r, _)| TissueClass::ALL[r.min(2)]);
        let mask = TissueLabelMask::new(labels, Domain::Polar).unwrap();
        write_mask(dir.path(), "b", &mask).unwrap();
        assert_eq!(image_ids(dir.path()).unwrap(), ["a", "b"]);
        assert_eq!(mask_ids(dir.path()).unwrap(), ["b"]);
        let annotated = read_annotated(dir.path()).unwrap();
        assert_eq!(annotated.len(), 1);
        assert_eq!(annotated[0].mask, mask);
    }
}
