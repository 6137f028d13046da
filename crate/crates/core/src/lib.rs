//! Fingerprint minutiae toolkit.
//!
//! The flow is: load a netpbm image ([`raster`]), clean it up into a thin
//! ridge map ([`preprocess`]), find ridge endings and bifurcations
//! ([`minutiae`]), store them with their pairwise scanline distances in a
//! compact template ([`template`]) and compare templates by distance
//! signatures ([`matcher`]). [`enrollstore`] keeps templates on disk per
//! subject and [`evalkit`] scores detection against ground truth, measures
//! size and time, and generates synthetic fingerprints.

pub mod enrollstore;
pub mod evalkit;
pub mod matcher;
pub mod minutiae;
pub mod pipeline;
pub mod preprocess;
pub mod raster;
pub mod template;

pub use matcher::{match_templates, Decision, MatchConfig, MatchResult};
pub use minutiae::{Minutia, MinutiaKind, Region};
pub use pipeline::{image_to_template, PipelineConfig};
pub use preprocess::PreprocessConfig;
pub use raster::{BinaryImage, Pixel, RasterImage};
pub use template::{DistanceMode, Template};
