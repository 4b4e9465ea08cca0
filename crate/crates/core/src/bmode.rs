//! Pseudo B-mode speckle simulation on the polar grid.
//!
//! One Gaussian scatterer per pixel is weighted by the echogenicity map,
//! convolved with a separable space-invariant PSF (axial = rows), envelope
//! detected along each column with an FFT Hilbert transform and finally
//! log-compressed into [0, 1].

use std::f64::consts::TAU;

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dataset::EchogenicityMap;
use crate::error::{Error, Result};
use crate::imaging::{check_finite, PolarImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsfParams {
    /// Axial carrier frequency, cycles per pixel.
    pub f0: f64,
    pub sigma_axial: f64,
    pub sigma_lateral: f64,
}

impl Default for PsfParams {
    fn default() -> Self {
        Self { f0: 0.25, sigma_axial: 2.0, sigma_lateral: 3.0 }
    }
}

impl PsfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0 && self.f0 < 0.5) {
            return Err(Error::Param(format!("psf f0 must be in (0, 0.5) cycles/px, got {}", self.f0)));
        }
        for (name, s) in [("sigma_axial", self.sigma_axial), ("sigma_lateral", self.sigma_lateral)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Param(format!("psf {name} must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// Signed scatterer amplitudes on the polar grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScattererField(pub Array2<f64>);

/// Pre-envelope radio-frequency-like image.
#[derive(Debug, Clone, PartialEq)]
pub struct RfImage(pub Array2<f64>);

/// Separable PSF. `data` is the outer product of `axial` and `lateral`,
/// each of unit L2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfKernel {
    pub axial: Array1<f64>,
    pub lateral: Array1<f64>,
    pub data: Array2<f64>,
}

impl PsfKernel {
    pub fn half_size(&self) -> (usize, usize) {
        (self.axial.len() / 2, self.lateral.len() / 2)
    }
}

fn unit_l2(v: Array1<f64>) -> Array1<f64> {
    let n = v.dot(&v).sqrt();
    v / n
}

pub fn psf_kernel(params: &PsfParams) -> Result<PsfKernel> {
    params.validate()?;
    let ha = (3.0 * params.sigma_axial).ceil() as isize;
    let hl = (3.0 * params.sigma_lateral).ceil() as isize;
    let axial = Array1::from_iter((-ha..=ha).map(|r| {
        let r = r as f64;
        (-r * r / (2.0 * params.sigma_axial.powi(2))).exp() * (TAU * params.f0 * r).cos()
    }));
    let lateral = Array1::from_iter((-hl..=hl).map(|c| {
        let c = c as f64;
        (-c * c / (2.0 * params.sigma_lateral.powi(2))).exp()
    }));
    let axial = unit_l2(axial);
    let lateral = unit_l2(lateral);
    let data = Array2::from_shape_fn((axial.len(), lateral.len()), |(i, j)| axial[i] * lateral[j]);
    Ok(PsfKernel { axial, lateral, data })
}

/// `amplitude(p) = echogenicity(p) * g(p)` with `g` i.i.d. standard normal.
pub fn generate_scatterers(map: &EchogenicityMap, seed: u64) -> ScattererField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScattererField(map.data().mapv(|e| {
        let g: f64 = StandardNormal.sample(&mut rng);
        e * g
    }))
}

/// 1-D zero-padded convolution along `axis`, output the same length.
fn convolve_axis(input: &Array2<f64>, taps: &Array1<f64>, axis: Axis) -> Array2<f64> {
    let half = (taps.len() / 2) as isize;
    let mut out = Array2::zeros(input.dim());
    for (src, mut dst) in input.lanes(axis).into_iter().zip(out.lanes_mut(axis)) {
        let n = src.len() as isize;
        for i in 0..n {
            let mut acc = 0.0;
            for (t, &w) in taps.iter().enumerate() {
                let k = i - (t as isize - half);
                if (0..n).contains(&k) {
                    acc += w * src[k as usize];
                }
            }
            dst[i as usize] = acc;
        }
    }
    out
}

/// Convolution with zero padding and same-size output, implemented as an
/// axial pass followed by a lateral pass.
pub fn convolve_rf(field: &ScattererField, kernel: &PsfKernel) -> Result<RfImage> {
    let (h, w) = field.0.dim();
    if kernel.axial.len() > h || kernel.lateral.len() > w {
        return Err(Error::Dims(format!("kernel {}x{} larger than field {h}x{w}", kernel.axial.len(), kernel.lateral.len())));
    }
    let axial = convolve_axis(&field.0, &kernel.axial, Axis(0));
    Ok(RfImage(convolve_axis(&axial, &kernel.lateral, Axis(1))))
}

/// Analytic-signal magnitude along each column (the axial direction).
pub fn envelope(rf: &RfImage) -> Result<Array2<f64>> {
    check_finite(&rf.0)?;
    let (n, w) = rf.0.dim();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let gain: Vec<f64> = (0..n)
        .map(|k| {
            if k == 0 || (n % 2 == 0 && k == n / 2) {
                1.0
            } else if k < n.div_ceil(2) {
                2.0
            } else {
                0.0
            }
        })
        .collect();
    let mut out = Array2::zeros((n, w));
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for (col, mut dst) in rf.0.columns().into_iter().zip(out.columns_mut()) {
        for (b, &x) in buf.iter_mut().zip(col.iter()) {
            *b = Complex::new(x, 0.0);
        }
        fwd.process(&mut buf);
        for (b, g) in buf.iter_mut().zip(&gain) {
            *b *= g;
        }
        inv.process(&mut buf);
        for (d, b) in dst.iter_mut().zip(&buf) {
            *d = b.norm() / n as f64;
        }
    }
    Ok(out)
}

/// `20 log10(env / max)` clipped to `[-dr, 0]` and mapped onto [0, 1].
pub fn log_compress(env: &Array2<f64>, dynamic_range_db: f64) -> Result<PolarImage> {
    if !(dynamic_range_db.is_finite() && dynamic_range_db > 0.0) {
        return Err(Error::Param(format!("dynamic range must be positive, got {dynamic_range_db}")));
    }
    check_finite(env)?;
    let max = env.iter().fold(0.0f64, |m, &v| m.max(v));
    if max == 0.0 {
        return PolarImage::new(Array2::zeros(env.dim()));
    }
    PolarImage::new(env.mapv(|v| {
        let db = (20.0 * (v / max).log10()).clamp(-dynamic_range_db, 0.0);
        (db + dynamic_range_db) / dynamic_range_db
    }))
}

/// Scatterers, RF and envelope before compression.
pub fn simulate_envelope(map: &EchogenicityMap, kernel: &PsfKernel, seed: u64) -> Result<Array2<f64>> {
    let field = generate_scatterers(map, seed);
    envelope(&convolve_rf(&field, kernel)?)
}

pub fn simulate(map: &EchogenicityMap, params: &PsfParams, dynamic_range_db: f64, seed: u64) -> Result<PolarImage> {
    let kernel = psf_kernel(params)?;
    log_compress(&simulate_envelope(map, &kernel, seed)?, dynamic_range_db)
}
