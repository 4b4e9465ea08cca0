//! Image containers for the two coordinate domains used throughout the
//! pipeline, plus scan conversion, intensity normalization and resizing.
//!
//! Polar images are stored with rows along depth (row `k` sits at radius
//! `k * R / n_radial`, so row 0 is the catheter center) and columns along
//! angle (column `j` sits at `2 * pi * j / n_angular`, measured from the +x
//! axis towards +y, i.e. clockwise on screen since image rows grow downward).
//! Cartesian images are square with the catheter at the geometric center and
//! a valid disk of radius `side / 2`.

use std::f64::consts::TAU;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tissue region label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TissueClass {
    Lumen,
    Media,
    Externa,
}

impl TissueClass {
    pub const ALL: [TissueClass; 3] = [TissueClass::Lumen, TissueClass::Media, TissueClass::Externa];

    pub fn index(self) -> usize {
        match self {
            TissueClass::Lumen => 0,
            TissueClass::Media => 1,
            TissueClass::Externa => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TissueClass::Lumen => "lumen",
            TissueClass::Media => "media",
            TissueClass::Externa => "externa",
        }
    }
}

impl fmt::Display for TissueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Depth x angle intensity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarImage {
    data: Array2<f64>,
}

impl PolarImage {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (r, a) = data.dim();
        if r == 0 || a == 0 {
            return Err(Error::Dims(format!("polar image must be non-empty, got {r}x{a}")));
        }
        Ok(Self { data })
    }

    pub fn zeros(n_radial: usize, n_angular: usize) -> Self {
        Self { data: Array2::zeros((n_radial.max(1), n_angular.max(1))) }
    }

    pub fn from_fn(n_radial: usize, n_angular: usize, f: impl FnMut((usize, usize)) -> f64) -> Self {
        Self { data: Array2::from_shape_fn((n_radial.max(1), n_angular.max(1)), f) }
    }

    pub fn n_radial(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_angular(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    /// Circularly shifts columns so that new column `j` holds old column `j - k`.
    pub fn rotate_columns(&self, k: isize) -> Self {
        Self { data: roll_columns(&self.data, k) }
    }

    pub fn normalized(&self) -> Result<Self> {
        Ok(Self { data: normalize_intensity(&self.data)? })
    }
}

/// Square display-domain image with the catheter at the center.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianImage {
    data: Array2<f64>,
}

impl CartesianImage {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (h, w) = data.dim();
        if h != w || h == 0 {
            return Err(Error::Dims(format!("cartesian image must be square and non-empty, got {h}x{w}")));
        }
        Ok(Self { data })
    }

    pub fn side(&self) -> usize {
        self.data.nrows()
    }

    pub fn valid_radius(&self) -> f64 {
        self.side() as f64 / 2.0
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }
}

pub(crate) fn roll_columns(data: &Array2<f64>, k: isize) -> Array2<f64> {
    let n = data.ncols() as isize;
    Array2::from_shape_fn(data.dim(), |(r, c)| {
        let src = (c as isize - k).rem_euclid(n) as usize;
        data[[r, src]]
    })
}

pub(crate) fn check_finite(data: &Array2<f64>) -> Result<()> {
    for ((row, col), &value) in data.indexed_iter() {
        if !value.is_finite() {
            return Err(Error::NonFinite { row, col, value });
        }
    }
    Ok(())
}

/// Bilinear sample of a polar grid at fractional (row, col); rows clamp at
/// the edges, columns wrap around.
pub(crate) fn sample_polar(data: &Array2<f64>, u: f64, v: f64) -> f64 {
    let (nr, na) = data.dim();
    let u = u.clamp(0.0, (nr - 1) as f64);
    let r0 = u.floor() as usize;
    let r1 = (r0 + 1).min(nr - 1);
    let fu = u - r0 as f64;

    let v = v.rem_euclid(na as f64);
    let c0 = (v.floor() as usize) % na;
    let c1 = (c0 + 1) % na;
    let fv = v - v.floor();

    let top = data[[r0, c0]] * (1.0 - fv) + data[[r0, c1]] * fv;
    let bottom = data[[r1, c0]] * (1.0 - fv) + data[[r1, c1]] * fv;
    top * (1.0 - fu) + bottom * fu
}

/// Bilinear sample of a square grid at fractional pixel-center coordinates,
/// clamped to the border.
pub(crate) fn sample_clamped(data: &Array2<f64>, py: f64, px: f64) -> f64 {
    let (h, w) = data.dim();
    let py = py.clamp(0.0, (h - 1) as f64);
    let px = px.clamp(0.0, (w - 1) as f64);
    let y0 = py.floor() as usize;
    let x0 = px.floor() as usize;
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let fy = py - y0 as f64;
    let fx = px - x0 as f64;
    let top = data[[y0, x0]] * (1.0 - fx) + data[[y0, x1]] * fx;
    let bottom = data[[y1, x0]] * (1.0 - fx) + data[[y1, x1]] * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Polar coordinates of the center of Cartesian pixel (row, col), in units
/// of the polar grid: (fractional row, fractional column). `None` outside
/// the valid disk.
pub(crate) fn cartesian_pixel_to_polar(
    row: usize,
    col: usize,
    side: usize,
    n_radial: usize,
    n_angular: usize,
) -> Option<(f64, f64)> {
    let c = side as f64 / 2.0;
    let dx = col as f64 + 0.5 - c;
    let dy = row as f64 + 0.5 - c;
    let r = dx.hypot(dy);
    if r > c {
        return None;
    }
    let alpha = dy.atan2(dx).rem_euclid(TAU);
    Some((r / c * n_radial as f64, alpha / TAU * n_angular as f64))
}

/// Scan-converts a polar image to a `side x side` Cartesian image.
pub fn polar_to_cartesian(img: &PolarImage, side: usize) -> Result<CartesianImage> {
    if side < 2 {
        return Err(Error::Dims(format!("cartesian side must be >= 2, got {side}")));
    }
    check_finite(&img.data)?;
    let (nr, na) = img.data.dim();
    let data = Array2::from_shape_fn((side, side), |(row, col)| match cartesian_pixel_to_polar(row, col, side, nr, na) {
        Some((u, v)) => sample_polar(&img.data, u, v),
        None => 0.0,
    });
    Ok(CartesianImage { data })
}

/// Resamples a Cartesian image onto an `n_radial x n_angular` polar grid
/// along rays from the center.
pub fn cartesian_to_polar(img: &CartesianImage, n_radial: usize, n_angular: usize) -> Result<PolarImage> {
    if n_radial < 2 || n_angular < 2 {
        return Err(Error::Dims(format!("polar grid must be at least 2x2, got {n_radial}x{n_angular}")));
    }
    check_finite(&img.data)?;
    let c = img.valid_radius();
    let data = Array2::from_shape_fn((n_radial, n_angular), |(k, j)| {
        let r = k as f64 / n_radial as f64 * c;
        let alpha = j as f64 / n_angular as f64 * TAU;
        let x = c + r * alpha.cos();
        let y = c + r * alpha.sin();
        sample_clamped(&img.data, y - 0.5, x - 0.5)
    });
    Ok(PolarImage { data })
}

/// Affine rescale of the finite pixels to [0, 1]. Constant images map to
/// zeros; non-finite pixels map to 0.
pub fn normalize_intensity(data: &Array2<f64>) -> Result<Array2<f64>> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in data.iter().filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        return Err(Error::NoFinitePixels);
    }
    let span = hi - lo;
    Ok(data.mapv(|v| if !v.is_finite() || span == 0.0 { 0.0 } else { ((v - lo) / span).clamp(0.0, 1.0) }))
}

/// Resizes a polar image: area averaging along an axis that shrinks,
/// bilinear along an axis that grows.
pub fn resize(img: &PolarImage, n_radial: usize, n_angular: usize) -> Result<PolarImage> {
    Ok(PolarImage { data: resize_array(&img.data, n_radial, n_angular)? })
}

pub fn resize_array(data: &Array2<f64>, rows: usize, cols: usize) -> Result<Array2<f64>> {
    if rows < 2 || cols < 2 {
        return Err(Error::Dims(format!("resize target must be at least 2x2, got {rows}x{cols}")));
    }
    check_finite(data)?;
    let (h, w) = data.dim();
    let row_weights = axis_weights(h, rows);
    let col_weights = axis_weights(w, cols);

    // rows first, then columns
    let mut tmp = Array2::zeros((rows, w));
    for (i, wts) in row_weights.iter().enumerate() {
        for c in 0..w {
            tmp[[i, c]] = weighted_mean(wts.iter().map(|&(k, wt)| (data[[k, c]], wt)));
        }
    }
    let mut out = Array2::zeros((rows, cols));
    for r in 0..rows {
        for (j, wts) in col_weights.iter().enumerate() {
            out[[r, j]] = weighted_mean(wts.iter().map(|&(k, wt)| (tmp[[r, k]], wt)));
        }
    }
    Ok(out)
}

/// Mean written as `first + sum(w * (v - first)) / sum(w)` so that equal
/// inputs reproduce the input bit-for-bit.
fn weighted_mean(it: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut first = None;
    let mut acc = 0.0;
    let mut total = 0.0;
    for (v, wt) in it {
        let base = *first.get_or_insert(v);
        acc += wt * (v - base);
        total += wt;
    }
    match first {
        Some(base) => base + acc / total,
        None => 0.0,
    }
}

/// Source taps and weights for each output sample along one axis.
fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    if src == dst {
        return (0..dst).map(|i| vec![(i, 1.0)]).collect();
    }
    if dst < src {
        let scale = src as f64 / dst as f64;
        (0..dst)
            .map(|i| {
                let start = i as f64 * scale;
                let end = (i + 1) as f64 * scale;
                let mut taps = Vec::new();
                let mut k = start.floor() as usize;
                while (k as f64) < end && k < src {
                    let overlap = (end.min((k + 1) as f64) - start.max(k as f64)).max(0.0);
                    if overlap > 0.0 {
                        taps.push((k, overlap));
                    }
                    k += 1;
                }
                taps
            })
            .collect()
    } else {
        let scale = src as f64 / dst as f64;
        (0..dst)
            .map(|i| {
                let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let k0 = pos.floor() as usize;
                let k1 = (k0 + 1).min(src - 1);
                let f = pos - k0 as f64;
                if f == 0.0 || k0 == k1 {
                    vec![(k0, 1.0)]
                } else {
                    vec![(k0, 1.0 - f), (k1, f)]
                }
            })
            .collect()
    }
}

/// Peak signal-to-noise ratio in dB for signals with unit peak.
pub fn psnr(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mse = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}
