//! Image enhancement for cytology datasets: Perona-Malik diffusion, CLAHE and
//! their per-channel hybrid, contrast-quality features, dataset splitting and
//! batch processing, and classification-metric comparison.

pub mod batch;
pub mod clahe;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod pmd;
pub mod quality;
pub mod raster;

pub use clahe::{clahe_apply, ClaheParams, EqLut};
pub use error::{Error, Result};
pub use pipeline::{enhance, PipelineConfig, PipelineMode};
pub use pmd::{pmd_filter, PmdParams};
pub use raster::{ImageBuffer, ImagePlane};
