//! Run configuration. Values resolve as built-in defaults, then the TOML
//! file (`--config`, or the path in `IVUSSIM_CONFIG`), then command-line
//! flags. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ivus_core::bmode::PsfParams;
use ivus_core::dataset::{DatasetLayout, EchoParams, PhantomParams};
use ivus_core::surrogate::SurrogateParams;
use ivus_gan::generate::DEFAULT_CARTESIAN_SIDE;
use ivus_gan::{Disc1Config, Disc2Config, Gen2Config, RefinerConfig, Stage1Config, Stage2Config};
use serde::{Deserialize, Serialize};

pub const CONFIG_ENV: &str = "IVUSSIM_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub phantom: PhantomParams,
    pub surrogate: SurrogateParams,
    pub stage0: Stage0Config,
    pub models: ModelsConfig,
    pub stage1: Stage1Config,
    pub stage2: Stage2Config,
    pub generate: GenerateConfig,
    pub evaluate: EvaluateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub layout: DatasetLayout,
    /// Polar grid that ingested images and masks are resampled to.
    pub n_radial: usize,
    pub n_angular: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { layout: DatasetLayout::default(), n_radial: 256, n_angular: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stage0Config {
    pub psf: PsfParams,
    pub dynamic_range_db: f64,
    pub echo: EchoParams,
}

impl Default for Stage0Config {
    fn default() -> Self {
        Self { psf: PsfParams::default(), dynamic_range_db: 50.0, echo: EchoParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsConfig {
    pub g1: RefinerConfig,
    pub d1: Disc1Config,
    pub g2: Gen2Config,
    pub d2: Disc2Config,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    pub cartesian_side: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self { cartesian_side: DEFAULT_CARTESIAN_SIDE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    /// Images sampled per corpus for the divergence tables.
    pub n: usize,
    pub vtt_pairs: usize,
    pub cartesian_side: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self { n: 30, vtt_pairs: 260, cartesian_side: DEFAULT_CARTESIAN_SIDE }
    }
}

impl RunConfig {
    /// Loads `explicit`, else the file named by `IVUSSIM_CONFIG`, else the
    /// defaults. Returns the config and the file it came from.
    pub fn load(explicit: Option<&Path>) -> Result<(Self, Option<PathBuf>)> {
        let path = match explicit {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
        };
        let Some(path) = path else {
            return Ok((Self::default(), None));
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg = Self::parse(&text).with_context(|| format!("in config {}", path.display()))?;
        Ok((cfg, Some(path)))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.phantom.validate()?;
        self.surrogate.validate()?;
        self.stage0.psf.validate()?;
        self.stage0.echo.validate()?;
        anyhow::ensure!(
            self.stage0.dynamic_range_db.is_finite() && self.stage0.dynamic_range_db > 0.0,
            "stage0.dynamic_range_db must be positive, got {}",
            self.stage0.dynamic_range_db
        );
        anyhow::ensure!(self.dataset.n_radial >= 2 && self.dataset.n_angular >= 2, "dataset polar grid is too small");
        self.stage1.validate()?;
        self.stage2.validate()?;
        anyhow::ensure!(self.generate.cartesian_side > 0, "generate.cartesian_side must be positive");
        anyhow::ensure!(self.evaluate.n > 0, "evaluate.n must be positive");
        anyhow::ensure!(self.evaluate.cartesian_side > 0, "evaluate.cartesian_side must be positive");
        Ok(())
    }
}
