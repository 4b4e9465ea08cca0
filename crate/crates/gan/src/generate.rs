//! Tissue map to simulated image: Stage 0, refiner, super-resolution, scan
//! conversion.

use std::time::{Duration, Instant};

use ivus_core::bmode::{self, PsfParams};
use ivus_core::dataset::EchogenicityMap;
use ivus_core::imaging::{polar_to_cartesian, resize};
use ivus_core::{CartesianImage, PolarImage};

use crate::checkpoint::Checkpoint;
use crate::error::{GanError, Result};
use crate::models::{GeneratorG2, RefinerG1};
use crate::tensor::Tensor;
use crate::train::load_stage2;

pub const DEFAULT_CARTESIAN_SIDE: usize = 384;

#[derive(Debug, Clone)]
pub struct Pipeline {
    pub g1: RefinerG1,
    pub g2: GeneratorG2,
    pub psf: PsfParams,
    pub dynamic_range_db: f64,
    pub cartesian_side: usize,
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub stage0: PolarImage,
    pub refined: PolarImage,
    pub polar: PolarImage,
    pub cartesian: CartesianImage,
    /// Wall-clock time for this image, excluding model loading.
    pub elapsed: Duration,
}

impl Pipeline {
    pub fn new(g1: RefinerG1, g2: GeneratorG2, psf: PsfParams, dynamic_range_db: f64) -> Result<Self> {
        if g2.model().input_side() != g1.model().input_side() {
            return Err(GanError::shape(
                "pipeline",
                format!("G2 input side {}", g1.model().input_side()),
                g2.model().input_side(),
            ));
        }
        psf.validate()?;
        Ok(Self { g1, g2, psf, dynamic_range_db, cartesian_side: DEFAULT_CARTESIAN_SIDE })
    }

    /// Uses the refiner and generator stored in a Stage II checkpoint.
    pub fn from_checkpoint(c: &Checkpoint, psf: PsfParams, dynamic_range_db: f64) -> Result<Self> {
        let (g1, g2, _) = load_stage2(c)?;
        Self::new(g1, g2, psf, dynamic_range_db)
    }

    pub fn generate(&self, map: &EchogenicityMap, seed: u64) -> Result<Generated> {
        let start = Instant::now();
        let stage0 = bmode::simulate(map, &self.psf, self.dynamic_range_db, seed)?;
        let side = self.g1.model().input_side();
        let low = resize(&stage0, side, side)?;
        let refined = self.g1.forward(&Tensor::from_images(&[&low]))?;
        let hires = self.g2.forward(&refined)?;
        let polar = hires.to_image(0);
        let cartesian = polar_to_cartesian(&polar, self.cartesian_side)?;
        Ok(Generated { stage0, refined: refined.to_image(0), polar, cartesian, elapsed: start.elapsed() })
    }

    /// Generates every `(map, seed)` job with the loaded models.
    pub fn generate_batch(&self, jobs: &[(&EchogenicityMap, u64)]) -> Result<Vec<Generated>> {
        jobs.iter().map(|(m, s)| self.generate(m, *s)).collect()
    }
}

/// Summary of per-image timings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyReport {
    pub images: usize,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

impl LatencyReport {
    pub fn from_generated(items: &[Generated]) -> Option<Self> {
        if items.is_empty() {
            return None;
        }
        let ms: Vec<f64> = items.iter().map(|g| g.elapsed.as_secs_f64() * 1e3).collect();
        Some(Self {
            images: ms.len(),
            mean_ms: ms.iter().sum::<f64>() / ms.len() as f64,
            min_ms: ms.iter().copied().fold(f64::INFINITY, f64::min),
            max_ms: ms.iter().copied().fold(0.0, f64::max),
        })
    }
}
