use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mask::TissueLabelMask;
use crate::error::{Error, Result};
use crate::imaging::{PolarImage, TissueClass};

/// Per-pixel mean reflectivity on the polar grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EchogenicityMap {
    data: Array2<f64>,
}

impl EchogenicityMap {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        for ((row, col), &value) in data.indexed_iter() {
            if !value.is_finite() {
                return Err(Error::NonFinite { row, col, value });
            }
            if value < 0.0 {
                return Err(Error::Param(format!("negative echogenicity {value} at ({row}, {col})")));
            }
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn scaled(&self, a: f64) -> Result<Self> {
        Self::new(self.data.mapv(|v| v * a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassEcho {
    pub mean: f64,
    pub spread: f64,
}

/// Echogenicity assigned to each tissue class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EchoParams {
    pub lumen: ClassEcho,
    pub media: ClassEcho,
    pub externa: ClassEcho,
}

impl Default for EchoParams {
    fn default() -> Self {
        Self {
            lumen: ClassEcho { mean: 0.05, spread: 0.1 },
            media: ClassEcho { mean: 0.35, spread: 0.1 },
            externa: ClassEcho { mean: 0.60, spread: 0.1 },
        }
    }
}

impl EchoParams {
    pub fn class(&self, c: TissueClass) -> ClassEcho {
        match c {
            TissueClass::Lumen => self.lumen,
            TissueClass::Media => self.media,
            TissueClass::Externa => self.externa,
        }
    }

    pub fn with_spread(mut self, spread: f64) -> Self {
        self.lumen.spread = spread;
        self.media.spread = spread;
        self.externa.spread = spread;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for c in TissueClass::ALL {
            let e = self.class(c);
            if !(e.mean.is_finite() && e.mean >= 0.0) {
                return Err(Error::Param(format!("{c} echogenicity mean must be finite and >= 0, got {}", e.mean)));
            }
            if !(0.0..=1.0).contains(&e.spread) {
                return Err(Error::Param(format!("{c} echogenicity spread must be in [0, 1], got {}", e.spread)));
            }
        }
        Ok(())
    }
}

/// Assigns `mean * (1 + spread * u)`, `u ~ U[-1, 1]`, per pixel.
pub fn mask_to_echogenicity(mask: &TissueLabelMask, params: &EchoParams, seed: u64) -> Result<EchogenicityMap> {
    mask.require_polar()?;
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Array2::zeros(mask.dim());
    for (out, &cls) in data.iter_mut().zip(mask.data().iter()) {
        let e = params.class(cls);
        let u: f64 = rng.random_range(-1.0..=1.0);
        *out = if e.spread == 0.0 { e.mean } else { e.mean * (1.0 + e.spread * u) };
    }
    EchogenicityMap::new(data)
}

/// Per-class mean intensities measured on annotated images.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCalibration {
    /// Pooled mean per class over all images.
    pub means: [f64; 3],
    /// Smallest and largest per-image region mean per class.
    pub ranges: [(f64, f64); 3],
    pub n_images: usize,
}

/// Measures region mean intensities; images lacking a class do not
/// contribute to that class.
pub fn calibrate_region_means(corpus: &[(&PolarImage, &TissueLabelMask)]) -> Result<RegionCalibration> {
    let mut sums = [0.0; 3];
    let mut counts = [0usize; 3];
    let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); 3];
    for (img, mask) in corpus {
        if img.data().dim() != mask.dim() {
            return Err(Error::Dims(format!("image {:?} vs mask {:?}", img.data().dim(), mask.dim())));
        }
        let mut s = [0.0; 3];
        let mut n = [0usize; 3];
        for (&v, &c) in img.data().iter().zip(mask.data().iter()) {
            s[c.index()] += v;
            n[c.index()] += 1;
        }
        for k in 0..3 {
            if n[k] > 0 {
                let m = s[k] / n[k] as f64;
                ranges[k].0 = ranges[k].0.min(m);
                ranges[k].1 = ranges[k].1.max(m);
                sums[k] += s[k];
                counts[k] += n[k];
            }
        }
    }
    let mut means = [0.0; 3];
    for (k, c) in TissueClass::ALL.iter().enumerate() {
        if counts[k] == 0 {
            return Err(Error::EmptyRegion(*c));
        }
        means[k] = sums[k] / counts[k] as f64;
    }
    Ok(RegionCalibration { means, ranges, n_images: corpus.len() })
}

impl RegionCalibration {
    /// Echo parameters whose class means are the calibrated region means.
    pub fn to_echo_params(&self, spread: f64) -> EchoParams {
        let class = |k: usize| ClassEcho { mean: self.means[k], spread };
        EchoParams { lumen: class(0), media: class(1), externa: class(2) }
    }
}
