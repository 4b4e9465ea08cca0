//! Polar-domain augmentation of tissue masks: 12 rotations by 30 degrees,
//! each at three radial offsets (none, +2 %, -2 % of the depth axis).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::mask::{Domain, TissueLabelMask};
use crate::error::{Error, Result};

pub const ROTATION_STEPS: usize = 12;
pub const RADIAL_SHIFT_FRACTION: f64 = 0.02;
pub const VARIANTS_PER_MASK: usize = ROTATION_STEPS * 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RotationRounding {
    /// Column offset of step `j` is `round(j * n_angular / 12)`.
    #[default]
    Nearest,
    /// Reject grids whose angular size is not a multiple of 12.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedMask {
    pub rotation_step: usize,
    /// Signed row offset; positive moves content away from the catheter.
    pub radial_shift: isize,
    pub mask: TissueLabelMask,
}

pub fn rotation_offset(step: usize, n_angular: usize) -> usize {
    ((step * n_angular) as f64 / ROTATION_STEPS as f64).round() as usize % n_angular.max(1)
}

pub fn radial_shift_rows(n_radial: usize) -> isize {
    (RADIAL_SHIFT_FRACTION * n_radial as f64).round() as isize
}

/// Circular column shift: output column `j` takes input column `j - k`.
pub fn rotate<T: Clone>(data: &Array2<T>, k: usize) -> Array2<T> {
    let n = data.ncols();
    Array2::from_shape_fn(data.dim(), |(r, c)| data[[r, (c + n - k % n) % n]].clone())
}

/// Row translation with edge replication: output row `r` takes input row
/// `clamp(r - k)`.
pub fn shift_rows<T: Clone>(data: &Array2<T>, k: isize) -> Array2<T> {
    let last = data.nrows() as isize - 1;
    Array2::from_shape_fn(data.dim(), |(r, c)| data[[(r as isize - k).clamp(0, last) as usize, c]].clone())
}

pub fn augment(mask: &TissueLabelMask) -> Result<Vec<AugmentedMask>> {
    augment_with(mask, RotationRounding::Nearest)
}

pub fn augment_with(mask: &TissueLabelMask, rounding: RotationRounding) -> Result<Vec<AugmentedMask>> {
    mask.require_polar()?;
    let (nr, na) = mask.dim();
    if rounding == RotationRounding::Exact && na % ROTATION_STEPS != 0 {
        return Err(Error::Dims(format!("n_angular = {na} is not divisible by {ROTATION_STEPS}")));
    }
    let k = radial_shift_rows(nr);
    let mut out = Vec::with_capacity(VARIANTS_PER_MASK);
    for step in 0..ROTATION_STEPS {
        let rotated = rotate(mask.data(), rotation_offset(step, na));
        for shift in [0, k, -k] {
            let data = if shift == 0 { rotated.clone() } else { shift_rows(&rotated, shift) };
            out.push(AugmentedMask {
                rotation_step: step,
                radial_shift: shift,
                mask: TissueLabelMask::new(data, Domain::Polar)?,
            });
        }
    }
    Ok(out)
}

/// One line of the augmented-corpus manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub source_id: String,
    pub rotation_step: usize,
    pub radial_shift: isize,
}

impl ManifestEntry {
    pub fn variant_id(source_id: &str, rotation_step: usize, radial_shift: isize) -> String {
        format!("{source_id}_r{rotation_step:02}_s{radial_shift:+}")
    }
}

pub const MANIFEST_HEADER: &str = "id\tsource_id\trotation_step\tradial_shift";

pub fn format_manifest(entries: &[ManifestEntry]) -> String {
    let mut s = String::from(MANIFEST_HEADER);
    s.push('\n');
    for e in entries {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", e.id, e.source_id, e.rotation_step, e.radial_shift);
    }
    s
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || Error::format(path, format!("line {}: malformed manifest row {line:?}", i + 1));
        if f.len() != 4 {
            return Err(bad());
        }
        entries.push(ManifestEntry {
            id: f[0].to_string(),
            source_id: f[1].to_string(),
            rotation_step: f[2].parse().map_err(|_| bad())?,
            radial_shift: f[3].parse().map_err(|_| bad())?,
        });
    }
    Ok(entries)
}
