use crate::dataset::TissueLabelMask;
use crate::error::{Error, Result};
use crate::imaging::{PolarImage, TissueClass};

pub const N_BINS: usize = 256;

/// Normalized intensity histogram of one tissue region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPmf {
    pub mass: Vec<f64>,
    pub region: TissueClass,
    pub n_pixels: usize,
}

pub fn bin_of(v: f64) -> usize {
    ((v * N_BINS as f64).floor().max(0.0) as usize).min(N_BINS - 1)
}

pub fn region_pmf(img: &PolarImage, mask: &TissueLabelMask, cls: TissueClass) -> Result<RegionPmf> {
    pooled_region_pmf([(img, mask)], cls)
}

/// One histogram over the region pixels of every image.
pub fn pooled_region_pmf<'a>(
    items: impl IntoIterator<Item = (&'a PolarImage, &'a TissueLabelMask)>,
    cls: TissueClass,
) -> Result<RegionPmf> {
    let mut counts = vec![0u64; N_BINS];
    let mut n = 0usize;
    for (img, mask) in items {
        if img.data().dim() != mask.dim() {
            return Err(Error::Dims(format!("image {:?} vs mask {:?}", img.data().dim(), mask.dim())));
        }
        for (&v, &c) in img.data().iter().zip(mask.data().iter()) {
            if c == cls {
                if !v.is_finite() {
                    return Err(Error::Param(format!("non-finite intensity {v} in {cls} region")));
                }
                counts[bin_of(v)] += 1;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyRegion(cls));
    }
    let mass = counts.iter().map(|&k| k as f64 / n as f64).collect();
    Ok(RegionPmf { mass, region: cls, n_pixels: n })
}

/// Jensen-Shannon divergence in bits, in [0, 1].
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dims(format!("pmf lengths differ: {} vs {}", p.len(), q.len())));
    }
    let mut js = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            js += 0.5 * a * (a / m).log2();
        }
        if b > 0.0 {
            js += 0.5 * b * (b / m).log2();
        }
    }
    Ok(js.clamp(0.0, 1.0))
}

pub fn js_pmf(p: &RegionPmf, q: &RegionPmf) -> Result<f64> {
    js_divergence(&p.mass, &q.mass)
}
