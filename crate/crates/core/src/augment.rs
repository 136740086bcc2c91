//! Rotation-based data augmentation.

use serde::{Deserialize, Serialize};

use crate::raster::Raster;

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),
    #[error("nothing to augment")]
    Empty,
}

/// Symmetric angle range `[-range_deg, +range_deg]` split into `apertures`
/// rotated copies per original.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub range_deg: f64,
    pub apertures: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            range_deg: 60.0,
            apertures: 6,
        }
    }
}

impl AugmentConfig {
    pub fn new(range_deg: f64, apertures: usize) -> Result<Self, AugmentError> {
        let cfg = Self {
            range_deg,
            apertures,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        if !(self.range_deg > 0.0 && self.range_deg.is_finite()) {
            return Err(AugmentError::InvalidConfig(format!(
                "range must be positive, got {}",
                self.range_deg
            )));
        }
        if self.apertures < 2 || !self.apertures.is_multiple_of(2) {
            return Err(AugmentError::InvalidConfig(format!(
                "apertures must be even and at least 2, got {}",
                self.apertures
            )));
        }
        Ok(())
    }

    /// Copies produced per original, originals included.
    pub fn expansion_factor(&self) -> usize {
        1 + self.apertures
    }
}

/// Rotation angles in ascending order: `±k * range / (apertures / 2)` for
/// `k = 1..=apertures/2`. Zero is never included.
pub fn augmentation_angles(config: &AugmentConfig) -> Result<Vec<f64>, AugmentError> {
    config.validate()?;
    let half = config.apertures / 2;
    let step = config.range_deg / half as f64;
    let mut angles: Vec<f64> = (1..=half).rev().map(|k| -(k as f64) * step).collect();
    angles.extend((1..=half).map(|k| k as f64 * step));
    Ok(angles)
}

/// Rotates counter-clockwise (as displayed) by `angle_deg` about the image
/// center. Output keeps the input size; pixels whose source lies outside
/// the image are zero.
pub fn rotate(image: &Raster, angle_deg: f64) -> Raster {
    let (w, h) = (image.width(), image.height());
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let mut out = Raster::filled(w, h, image.channels(), 0);
    let (max_x, max_y) = (w as f64 - 0.5, h as f64 - 0.5);
    for y in 0..h {
        // math orientation: v points up
        let v = cy - y as f64;
        for x in 0..w {
            let u = x as f64 - cx;
            let su = u * cos + v * sin;
            let sv = -u * sin + v * cos;
            let (sx, sy) = (cx + su, cy - sv);
            if sx < -0.5 || sy < -0.5 || sx > max_x || sy > max_y {
                continue;
            }
            out.put_sample(x, y, &image.sample_bicubic(sx, sy));
        }
    }
    out
}

/// One entry of an expanded training set.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedItem<T> {
    pub item: T,
    pub class_label: String,
    /// Zero for originals.
    pub angle_deg: f64,
}

/// Expands each original into itself followed by one copy per augmentation
/// angle. Only the plan is produced; rotation is applied by the caller.
pub fn augment_set<T: Clone>(
    items: &[(T, String)],
    config: &AugmentConfig,
) -> Result<Vec<AugmentedItem<T>>, AugmentError> {
    let angles = augmentation_angles(config)?;
    if items.is_empty() {
        return Err(AugmentError::Empty);
    }
    let mut out = Vec::with_capacity(items.len() * config.expansion_factor());
    for (item, label) in items {
        out.push(AugmentedItem {
            item: item.clone(),
            class_label: label.clone(),
            angle_deg: 0.0,
        });
        out.extend(angles.iter().map(|&a| AugmentedItem {
            item: item.clone(),
            class_label: label.clone(),
            angle_deg: a,
        }));
    }
    Ok(out)
}
