//! Iris preprocessing: delineation from the mask, optional noise zeroing,
//! rubber-sheet normalization or crops, and the final square resize.
//!
//! The six input schemes combine a normalization mode (8:1 sheet, 4:2 sheet
//! or none) with segmentation on or off. Non-normalized inputs are either
//! circle-delineated crops or plain bounding-box crops.

mod geometry;
mod normalize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use geometry::{delineate, fit_circle, BoundingBox, Circle, IrisGeometry};
pub use normalize::{apply_segmentation, crop_bbox, crop_delineated, rubber_sheet};

use crate::raster::{Mask, Raster, RasterError};

#[derive(Debug, thiserror::Error)]
pub enum PreprocessError {
    #[error("empty mask")]
    EmptyMask,
    #[error("mask has no usable boundary")]
    DegenerateMask,
    #[error("circle fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("circle fit is degenerate (collinear or coincident points)")]
    DegeneratePoints,
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("invalid preprocessing config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Rubber sheet at 512x64.
    Norm8x1,
    /// Rubber sheet at 256x128.
    Norm4x2,
    NonNormalized,
}

impl Normalization {
    /// Intermediate rubber-sheet size, if any.
    pub fn sheet_size(self) -> Option<(usize, usize)> {
        match self {
            Normalization::Norm8x1 => Some((512, 64)),
            Normalization::Norm4x2 => Some((256, 128)),
            Normalization::NonNormalized => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CropMode {
    #[default]
    Delineated,
    BoundingBox,
}

pub const DEFAULT_FINAL_SIZE: usize = 224;

fn default_final_size() -> usize {
    DEFAULT_FINAL_SIZE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub normalization: Normalization,
    pub segmented: bool,
    /// Only meaningful for [`Normalization::NonNormalized`].
    #[serde(default)]
    pub crop: CropMode,
    #[serde(default = "default_final_size")]
    pub final_size: usize,
}

impl PreprocessConfig {
    pub fn new(normalization: Normalization, segmented: bool) -> Self {
        Self {
            normalization,
            segmented,
            crop: CropMode::Delineated,
            final_size: DEFAULT_FINAL_SIZE,
        }
    }

    pub fn with_crop(mut self, crop: CropMode) -> Self {
        self.crop = crop;
        self
    }

    pub fn with_size(mut self, final_size: usize) -> Self {
        self.final_size = final_size;
        self
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        if self.final_size == 0 {
            return Err(PreprocessError::InvalidConfig("final_size must be positive".into()));
        }
        if self.crop == CropMode::BoundingBox && self.normalization != Normalization::NonNormalized {
            return Err(PreprocessError::InvalidConfig(
                "bounding-box crop requires non-normalized input".into(),
            ));
        }
        Ok(())
    }

    /// The six schemes: {8:1, 4:2, none} x {segmented, not segmented}.
    pub fn standard_schemes() -> [PreprocessConfig; 6] {
        use Normalization::*;
        [
            Self::new(Norm8x1, true),
            Self::new(Norm8x1, false),
            Self::new(Norm4x2, true),
            Self::new(Norm4x2, false),
            Self::new(NonNormalized, true),
            Self::new(NonNormalized, false),
        ]
    }

    /// Scheme label, e.g. `norm8x1-seg`, `nonorm-noseg`, `nonorm-bbox-seg`.
    /// A non-default final size is appended as `@<size>`.
    pub fn scheme_name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PreprocessConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let norm = match self.normalization {
            Normalization::Norm8x1 => "norm8x1",
            Normalization::Norm4x2 => "norm4x2",
            Normalization::NonNormalized => "nonorm",
        };
        f.write_str(norm)?;
        if self.normalization == Normalization::NonNormalized && self.crop == CropMode::BoundingBox {
            f.write_str("-bbox")?;
        }
        f.write_str(if self.segmented { "-seg" } else { "-noseg" })?;
        if self.final_size != DEFAULT_FINAL_SIZE {
            write!(f, "@{}", self.final_size)?;
        }
        Ok(())
    }
}

impl FromStr for PreprocessConfig {
    type Err = PreprocessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PreprocessError::InvalidConfig(format!("unknown scheme {s:?}"));
        let (body, size) = match s.split_once('@') {
            Some((b, n)) => (b, n.parse::<usize>().map_err(|_| bad())?),
            None => (s, DEFAULT_FINAL_SIZE),
        };
        let parts: Vec<&str> = body.split('-').collect();
        let (norm, crop, seg) = match parts.as_slice() {
            [n, seg] => (*n, CropMode::Delineated, *seg),
            [n, "bbox", seg] => (*n, CropMode::BoundingBox, *seg),
            _ => return Err(bad()),
        };
        let normalization = match norm {
            "norm8x1" => Normalization::Norm8x1,
            "norm4x2" => Normalization::Norm4x2,
            "nonorm" => Normalization::NonNormalized,
            _ => return Err(bad()),
        };
        let segmented = match seg {
            "seg" => true,
            "noseg" => false,
            _ => return Err(bad()),
        };
        let cfg = PreprocessConfig {
            normalization,
            segmented,
            crop,
            final_size: size,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Crop or normalize without the final resize. This is the stage at which
/// alternative orderings (e.g. zeroing noise after unwrapping) can be
/// swapped in.
pub fn preprocess_intermediate(
    image: &Raster,
    mask: &Mask,
    config: &PreprocessConfig,
) -> Result<Raster, PreprocessError> {
    config.validate()?;
    if image.width() != mask.width() || image.height() != mask.height() {
        return Err(RasterError::DimensionMismatch(
            image.width(),
            image.height(),
            mask.width(),
            mask.height(),
        )
        .into());
    }
    let geom = delineate(mask)?;
    let source = if config.segmented {
        apply_segmentation(image, mask)?
    } else {
        image.clone()
    };
    match (config.normalization.sheet_size(), config.crop) {
        (Some((w, h)), _) => rubber_sheet(&source, &geom, w, h),
        (None, CropMode::Delineated) => Ok(crop_delineated(&source, &geom)),
        (None, CropMode::BoundingBox) => Ok(crop_bbox(&source, &geom)),
    }
}

/// Full preprocessing; the result is always `final_size x final_size`.
pub fn preprocess(
    image: &Raster,
    mask: &Mask,
    config: &PreprocessConfig,
) -> Result<Raster, PreprocessError> {
    let inter = preprocess_intermediate(image, mask, config)?;
    Ok(inter.resize_bicubic(config.final_size, config.final_size))
}
