pub mod annotations;
pub mod changedet;
pub mod cli;
pub mod detections;
pub mod error;
pub mod geojson;
pub mod geometry;
pub mod metrics;
pub mod raster;
pub mod synthgen;
pub mod training;

pub use error::{Error, Result};
