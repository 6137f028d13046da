//! Image-to-template glue shared by enrollment, evaluation and the CLI.

use thiserror::Error;

use crate::minutiae::{clip_region, default_region, extract, Minutia, Region};
use crate::preprocess::{run_pipeline, PreprocessConfig, PreprocessError, Stages};
use crate::raster::RasterImage;
use crate::template::{build_template, DistanceMode, Template, TemplateError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("region fraction {0} not in (0, 1]")]
    BadRegionFraction(f64),
}

/// Everything needed to turn an image into a template.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub region_fraction: f64,
    pub mode: DistanceMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            preprocess: PreprocessConfig::default(),
            region_fraction: 0.75,
            mode: DistanceMode::PaperFaithful,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.preprocess.validate()?;
        if !(self.region_fraction > 0.0 && self.region_fraction <= 1.0) {
            return Err(PipelineError::BadRegionFraction(self.region_fraction));
        }
        Ok(())
    }

    pub fn region_for(&self, img: &RasterImage) -> Region {
        default_region(img.width(), img.height(), self.region_fraction)
    }
}

/// Intermediate products of [`image_to_template`].
#[derive(Debug, Clone)]
pub struct Extraction {
    pub stages: Stages,
    /// Every minutia found on the thinned stage.
    pub all: Vec<Minutia>,
    pub region: Region,
    /// The minutiae inside `region`.
    pub selected: Vec<Minutia>,
    pub template: Template,
}

/// Preprocess, extract on the thinned stage, clip to the centered region and
/// build the template.
pub fn image_to_template(
    img: &RasterImage,
    cfg: &PipelineConfig,
) -> Result<Extraction, PipelineError> {
    cfg.validate()?;
    let stages = run_pipeline(img, &cfg.preprocess)?;
    let all = extract(&stages.lined);
    let region = cfg.region_for(img);
    let selected = clip_region(&all, &region);
    let template = build_template(&selected, img.width(), img.height(), region, cfg.mode)?;
    Ok(Extraction {
        stages,
        all,
        region,
        selected,
        template,
    })
}
