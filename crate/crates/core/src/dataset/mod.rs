//! Tissue annotations, label masks, echogenicity maps, augmentation and
//! dataset loading.

pub mod augment;
pub mod contour;
pub mod echo;
pub mod loader;
pub mod mask;
pub mod phantom;

pub use augment::{augment, augment_with, AugmentedMask, ManifestEntry, RotationRounding};
pub use contour::{ContourAnnotation, Point};
pub use echo::{calibrate_region_means, mask_to_echogenicity, ClassEcho, EchoParams, EchogenicityMap, RegionCalibration};
pub use loader::{load_dataset, split_by_patient, DatasetItem, DatasetLayout, DatasetSplit, LoadCounts, LoadedDataset};
pub use mask::{mask_to_cartesian, rasterize_mask, rasterize_mask_polar, Domain, TissueLabelMask};
pub use phantom::{synth_phantom, Boundary, Phantom, PhantomParams};
