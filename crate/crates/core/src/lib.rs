//! Walnut stem-water-potential estimation from multispectral UAV rasters.
//!
//! The crate covers the whole chain: raster I/O, canopy segmentation,
//! vegetation indices, per-tree feature extraction, a random forest with
//! its evaluation protocol, a synthetic orchard generator and a staged
//! pipeline driver.

pub mod error;
pub mod features;
pub mod forest;
pub mod indices;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod segmentation;
pub mod synthetic;
pub mod tables;

pub use error::{Error, Result};
