//! Face hallucination from aligned training faces using context patches and
//! thresholded locality-constrained representation, with reproducing learning.
//!
//! The modules follow the processing chain: [`image`] resampling and color,
//! [`patches`] geometry and candidate gathering, [`tlcr`] the per-patch
//! solver, [`pipeline`] the end-to-end reconstruction, [`metrics`] for
//! evaluation and [`experiment`] for dataset-level runs.

pub mod error;
pub mod experiment;
pub mod image;
pub mod io;
pub mod metrics;
pub mod patches;
pub mod pipeline;
pub mod synth;
pub mod tlcr;

pub use error::{Error, Result};
pub use image::{ColorImage, ImageBuffer, ResidualBuffer};
pub use patches::{PatchGeometry, PatchIndex};
pub use pipeline::{HallucinationConfig, TrainingCorpus};
