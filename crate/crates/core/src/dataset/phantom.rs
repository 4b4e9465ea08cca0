//! Synthetic vessel phantoms: two smooth closed boundaries drawn from a
//! low-order random Fourier series, rasterized on the polar grid.

use std::f64::consts::TAU;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::echo::{mask_to_echogenicity, EchoParams, EchogenicityMap};
use super::mask::{Domain, TissueLabelMask};
use crate::error::{Error, Result};
use crate::imaging::TissueClass;

/// Radii are fractions of the valid (maximum imaged) radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomParams {
    pub n_radial: usize,
    pub n_angular: usize,
    pub lumen_radius: (f64, f64),
    pub eel_radius: (f64, f64),
    pub harmonics: usize,
    /// Boundary wobble as a fraction of each radius range, in [0, 0.5].
    pub amplitude: f64,
    pub echo: EchoParams,
}

impl Default for PhantomParams {
    fn default() -> Self {
        Self {
            n_radial: 256,
            n_angular: 256,
            lumen_radius: (0.15, 0.35),
            eel_radius: (0.45, 0.75),
            harmonics: 3,
            amplitude: 0.3,
            echo: EchoParams::default(),
        }
    }
}

impl PhantomParams {
    pub fn validate(&self) -> Result<()> {
        let (l0, l1) = self.lumen_radius;
        let (e0, e1) = self.eel_radius;
        if self.n_radial < 2 || self.n_angular < 2 {
            return Err(Error::Dims(format!("phantom grid {}x{} too small", self.n_radial, self.n_angular)));
        }
        if !(0.0 < l0 && l0 <= l1 && l1 < e0 && e0 <= e1 && e1 <= 1.0) {
            return Err(Error::Param(format!(
                "infeasible phantom radii: need 0 < lumen_min <= lumen_max < eel_min <= eel_max <= 1, got lumen {:?} eel {:?}",
                self.lumen_radius, self.eel_radius
            )));
        }
        if !(0.0..=0.5).contains(&self.amplitude) {
            return Err(Error::Param(format!("phantom amplitude must be in [0, 0.5], got {}", self.amplitude)));
        }
        self.echo.validate()
    }
}

/// `r(alpha) = lo + (hi - lo) * (base + amplitude * h(alpha))` with `h`
/// a Fourier series normalized into [-1, 1] and `base` in
/// `[amplitude, 1 - amplitude]`, so `r` never leaves `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    lo: f64,
    hi: f64,
    base: f64,
    amplitude: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
    norm: f64,
}

impl Boundary {
    fn random(rng: &mut ChaCha8Rng, range: (f64, f64), harmonics: usize, amplitude: f64) -> Self {
        let base = if amplitude >= 0.5 { 0.5 } else { rng.random_range(amplitude..=1.0 - amplitude) };
        let mut cos = Vec::with_capacity(harmonics);
        let mut sin = Vec::with_capacity(harmonics);
        for k in 1..=harmonics {
            let decay = 1.0 / k as f64;
            cos.push(rng.random_range(-1.0..=1.0) * decay);
            sin.push(rng.random_range(-1.0..=1.0) * decay);
        }
        let norm = cos.iter().chain(&sin).map(|c: &f64| c.abs()).sum::<f64>();
        Self { lo: range.0, hi: range.1, base, amplitude, cos, sin, norm }
    }

    pub fn radius_at(&self, alpha: f64) -> f64 {
        let mut h = 0.0;
        if self.norm > 0.0 && self.amplitude > 0.0 {
            for (k, (c, s)) in self.cos.iter().zip(&self.sin).enumerate() {
                let w = (k + 1) as f64 * alpha;
                h += c * w.cos() + s * w.sin();
            }
            h /= self.norm;
        }
        self.lo + (self.hi - self.lo) * (self.base + self.amplitude * h)
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub mask: TissueLabelMask,
    pub echo: EchogenicityMap,
    pub lumen: Boundary,
    pub eel: Boundary,
}

pub fn synth_phantom(seed: u64, params: &PhantomParams) -> Result<Phantom> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lumen = Boundary::random(&mut rng, params.lumen_radius, params.harmonics, params.amplitude);
    let eel = Boundary::random(&mut rng, params.eel_radius, params.harmonics, params.amplitude);
    let echo_seed: u64 = rng.random();

    let (nr, na) = (params.n_radial, params.n_angular);
    let radii: Vec<(f64, f64)> = (0..na)
        .map(|j| {
            let alpha = TAU * j as f64 / na as f64;
            (lumen.radius_at(alpha), eel.radius_at(alpha))
        })
        .collect();
    let data = Array2::from_shape_fn((nr, na), |(k, j)| {
        let rho = k as f64 / nr as f64;
        let (rl, re) = radii[j];
        if rho < rl {
            TissueClass::Lumen
        } else if rho < re {
            TissueClass::Media
        } else {
            TissueClass::Externa
        }
    });
    let mask = TissueLabelMask::new(data, Domain::Polar)?;
    let echo = mask_to_echogenicity(&mask, &params.echo, echo_seed)?;
    Ok(Phantom { mask, echo, lumen, eel })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PhantomParams {
        PhantomParams { n_radial: 64, n_angular: 64, ..Default::default() }
    }

    #[test]
    fn zero_amplitude_gives_concentric_circles() {
        let p = synth_phantom(5, &PhantomParams { amplitude: 0.0, ..small() }).unwrap();
        let first = p.mask.data().column(0).to_owned();
        for col in p.mask.data().columns() {
            assert_eq!(col, first);
        }
        let r = p.lumen.radius_at(0.0);
        for a in [0.3, 1.7, 4.0] {
            assert_eq!(p.lumen.radius_at(a), r);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_phantom(11, &small()).unwrap();
        let b = synth_phantom(11, &small()).unwrap();
        assert_eq!(a.mask, b.mask);
        assert_eq!(a.echo, b.echo);
        assert_ne!(synth_phantom(12, &small()).unwrap().mask, a.mask);
    }

    #[test]
    fn infeasible_ranges_rejected() {
        let bad = PhantomParams { lumen_radius: (0.2, 0.5), eel_radius: (0.4, 0.8), ..small() };
        assert!(synth_phantom(0, &bad).is_err());
        let bad = PhantomParams { amplitude: 0.7, ..small() };
        assert!(synth_phantom(0, &bad).is_err());
    }

    #[test]
    fn masks_are_radially_ordered_with_all_classes() {
        for seed in 0..20 {
            let p = synth_phantom(seed, &small()).unwrap();
            assert!(p.mask.is_radially_ordered());
            assert!(p.mask.class_counts().iter().all(|&n| n > 0));
        }
    }
}
