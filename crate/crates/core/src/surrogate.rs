//! Stand-in for clinical acquisitions when no dataset is available.
//!
//! Renders a tissue mask with an acquisition model that differs from the
//! Stage 0 simulator in the ways real IVUS frames do: different tissue
//! contrast and PSF, depth attenuation, a bright catheter ring near the
//! transducer and a non-linear display curve. Training the refiners
//! against these images exercises the same domain-gap closing they perform
//! on clinical data.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::bmode::{log_compress, psf_kernel, simulate_envelope, PsfParams};
use crate::dataset::{mask_to_echogenicity, ClassEcho, EchoParams, EchogenicityMap, TissueLabelMask};
use crate::error::{Error, Result};
use crate::imaging::PolarImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateParams {
    pub echo: EchoParams,
    pub psf: PsfParams,
    pub dynamic_range_db: f64,
    /// Amplitude decays as `exp(-attenuation * depth)`, depth in [0, 1).
    pub attenuation: f64,
    /// Catheter ring extent as a fraction of depth.
    pub ring_depth: f64,
    pub ring_echo: f64,
    /// Display curve exponent applied after log compression.
    pub gamma: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            echo: EchoParams {
                lumen: ClassEcho { mean: 0.10, spread: 0.3 },
                media: ClassEcho { mean: 0.25, spread: 0.2 },
                externa: ClassEcho { mean: 0.90, spread: 0.3 },
            },
            psf: PsfParams { f0: 0.2, sigma_axial: 1.5, sigma_lateral: 4.0 },
            dynamic_range_db: 50.0,
            attenuation: 1.2,
            ring_depth: 0.05,
            ring_echo: 1.5,
            gamma: 1.6,
        }
    }
}

impl SurrogateParams {
    pub fn validate(&self) -> Result<()> {
        self.echo.validate()?;
        self.psf.validate()?;
        let ok = self.attenuation >= 0.0
            && (0.0..1.0).contains(&self.ring_depth)
            && self.ring_echo >= 0.0
            && self.gamma > 0.0
            && self.dynamic_range_db > 0.0;
        if !ok {
            return Err(Error::Param(format!("invalid surrogate acquisition parameters {self:?}")));
        }
        Ok(())
    }
}

pub fn render_surrogate(mask: &TissueLabelMask, params: &SurrogateParams, seed: u64) -> Result<PolarImage> {
    params.validate()?;
    let base = mask_to_echogenicity(mask, &params.echo, seed ^ 0x5e_ed0f_ec70)?;
    let (nr, na) = base.dim();
    let data = Array2::from_shape_fn((nr, na), |(k, j)| {
        let depth = k as f64 / nr as f64;
        let e = if depth < params.ring_depth { params.ring_echo } else { base.data()[[k, j]] };
        e * (-params.attenuation * depth).exp()
    });
    let map = EchogenicityMap::new(data)?;
    let kernel = psf_kernel(&params.psf)?;
    let env = simulate_envelope(&map, &kernel, seed)?;
    let img = log_compress(&env, params.dynamic_range_db)?;
    PolarImage::new(img.data().mapv(|v| v.powf(params.gamma)))
}
