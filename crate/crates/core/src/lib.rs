//! Imaging, data preparation, Stage 0 speckle simulation and evaluation for
//! stacked-GAN intravascular ultrasound simulation.

pub mod bmode;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod imaging;
pub mod raster;
pub mod surrogate;

pub use error::{Error, Result};
pub use imaging::{CartesianImage, PolarImage, TissueClass};
