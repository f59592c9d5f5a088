//! Voxel-wise brain tumor segmentation for multimodal MRI (FLAIR, T1c, T2).
//!
//! The pipeline combines three ingredients:
//!
//! * per-slice FCN-8s inference producing a 5-channel class score map,
//! * Gabor filter-bank responses clustered into per-modality texton maps,
//! * a random forest classifying every voxel of an FCN-guided region of
//!   interest into BRATS labels (0 normal, 1 necrosis, 2 oedema,
//!   3 non-enhancing, 4 enhancing).
//!
//! Everything runs on the CPU, is deterministic for a fixed seed and thread
//! count independent, and works at desk scale on synthetic phantoms
//! ([`phantom`]) so the whole chain can be exercised without clinical data.

pub mod error;
pub mod evaluate;
pub mod fcn;
pub mod features;
pub mod forest;
pub mod phantom;
pub mod pipeline;
pub mod preprocess;
pub mod texton;
pub mod volume;

mod parallel;

pub use error::{Error, Result};

/// Number of BRATS classes (background plus four tumor tissues).
pub const NUM_CLASSES: usize = 5;
