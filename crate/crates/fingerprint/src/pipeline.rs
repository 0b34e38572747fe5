//! Image to aligned template in one call.

use biokey_core::template::{Minutia, MinutiaTemplate};

use crate::align::{align_minutiae, align_to_centroid};
use crate::enhance::{enhance_and_thin, EnhancementConfig};
use crate::error::Result;
use crate::image::{BinaryImage, GrayImage};
use crate::minutiae::{detect_minutiae_with, MinutiaeConfig};
use crate::orientation::{estimate_orientation_field, OrientationField};
use crate::singular::{detect_core_points, select_core, CorePoint};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExtractionConfig {
    pub enhancement: EnhancementConfig,
    pub minutiae: MinutiaeConfig,
}

/// Intermediate products, kept for inspection.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub field: OrientationField,
    pub skeleton: BinaryImage,
    pub raw_minutiae: Vec<Minutia>,
    pub cores: Vec<CorePoint>,
    pub anchor: Option<CorePoint>,
    pub template: MinutiaTemplate,
}

pub fn extract(img: &GrayImage, cfg: &ExtractionConfig) -> Result<Extraction> {
    let field = estimate_orientation_field(img, cfg.enhancement.block_size)?;
    let skeleton = enhance_and_thin(img, &field, &cfg.enhancement)?;
    let raw_minutiae = detect_minutiae_with(&skeleton, &cfg.minutiae);
    let cores = detect_core_points(&field.smoothed());
    let center = (img.width() as f64 / 2.0, img.height() as f64 / 2.0);
    let anchor = select_core(&cores, center);
    let template = match &anchor {
        Some(core) => align_minutiae(&raw_minutiae, core)?,
        None => align_to_centroid(&raw_minutiae)?,
    };
    Ok(Extraction {
        field,
        skeleton,
        raw_minutiae,
        cores,
        anchor,
        template,
    })
}

pub fn extract_template(img: &GrayImage, cfg: &ExtractionConfig) -> Result<MinutiaTemplate> {
    Ok(extract(img, cfg)?.template)
}
