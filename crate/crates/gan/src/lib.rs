//! Refiner and super-resolution GANs for IVUS simulation.

pub mod buffer;
pub mod checkpoint;
pub mod error;
pub mod generate;
pub mod layers;
pub mod loss;
pub mod models;
pub mod ops;
pub mod optim;
pub mod params;
pub mod tensor;
pub mod train;

pub use buffer::HistoryBuffer;
pub use checkpoint::{Checkpoint, Stage};
pub use error::{GanError, Result};
pub use generate::{Generated, LatencyReport, Pipeline};
pub use models::{
    count_params, Disc1Config, Disc2Config, DiscriminatorD1, DiscriminatorD2, Gen2Config, GeneratorG2, Model, RefinerConfig,
    RefinerG1,
};
pub use params::{Grads, ParamStore};
pub use tensor::{ImageSet, Tensor};
pub use train::{LossRecord, Phase, Stage1Config, Stage1Data, Stage2Config, Stage2Data, TrainOptions};
