//! Synthetic eye images with matching iris masks, for fixtures and tests.
//!
//! Each class owns a texture (angular and radial frequencies plus phase);
//! individual samples jitter the eye position, radii, brightness and pixel
//! noise, and carry a specular reflection that the mask marks as noise.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::raster::{Mask, Raster};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrisTexture {
    pub angular_freq: f64,
    pub radial_freq: f64,
    pub phase: f64,
}

impl IrisTexture {
    /// Deterministic texture for class index `k`.
    pub fn for_class(k: usize) -> Self {
        Self {
            angular_freq: (3 + 4 * k) as f64,
            radial_freq: 1.0 + 1.5 * k as f64,
            phase: 0.7 * k as f64,
        }
    }

    /// Intensity offset in `[-1, 1]` at normalized radius `rho` and angle `theta`.
    pub fn value(&self, rho: f64, theta: f64) -> f64 {
        (self.angular_freq * theta + self.phase).sin() * (self.radial_freq * std::f64::consts::PI * rho).cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyeSpec {
    pub width: usize,
    pub height: usize,
    pub cx: f64,
    pub cy: f64,
    pub pupil_r: f64,
    pub iris_r: f64,
    pub texture: IrisTexture,
    pub brightness: f64,
    pub noise_sigma: f64,
    /// Reflection spot center as (normalized radius, angle).
    pub reflection: (f64, f64),
    pub seed: u64,
}

impl EyeSpec {
    /// A jittered sample of class `class` drawn with `seed`.
    pub fn sample(class: usize, seed: u64, width: usize, height: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1815_b3c4_0000_0000);
        let (w, h) = (width as f64, height as f64);
        let iris_r = 0.36 * w.min(h) + rng.random_range(-2.0..2.0);
        Self {
            width,
            height,
            cx: w / 2.0 + rng.random_range(-4.0..4.0),
            cy: h / 2.0 + rng.random_range(-3.0..3.0),
            pupil_r: 0.35 * iris_r + rng.random_range(-1.5..1.5),
            iris_r,
            texture: IrisTexture::for_class(class),
            brightness: rng.random_range(-6.0..6.0),
            noise_sigma: 3.0,
            reflection: (rng.random_range(0.3..0.7), rng.random_range(0.0..TAU)),
            seed,
        }
    }

    pub fn render(&self) -> (Raster, Mask) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.noise_sigma.max(1e-12)).expect("valid sigma");
        let (rr, rt) = self.reflection;
        let spot_r = self.pupil_r + rr * (self.iris_r - self.pupil_r);
        let spot = (self.cx + spot_r * rt.cos(), self.cy - spot_r * rt.sin());
        let spot_radius = 0.08 * self.iris_r;

        let mut image = Vec::with_capacity(self.width * self.height);
        let mut bits = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let (dx, dy) = (x as f64 - self.cx, self.cy - y as f64);
                let d = (dx * dx + dy * dy).sqrt();
                let in_spot = (x as f64 - spot.0).hypot(y as f64 - spot.1) <= spot_radius;
                let (value, valid) = if d <= self.pupil_r {
                    (25.0, false)
                } else if d <= self.iris_r {
                    let rho = (d - self.pupil_r) / (self.iris_r - self.pupil_r);
                    let theta = dy.atan2(dx);
                    (120.0 + 55.0 * self.texture.value(rho, theta), true)
                } else {
                    (205.0, false)
                };
                let (value, valid) = if in_spot && valid { (250.0, false) } else { (value, valid) };
                let v = value + self.brightness + noise.sample(&mut rng);
                image.push(v.round().clamp(0.0, 255.0) as u8);
                bits.push(valid);
            }
        }
        (
            Raster::new(self.width, self.height, 1, image).expect("valid raster"),
            Mask::new(self.width, self.height, bits).expect("valid mask"),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::delineate;

    #[test]
    fn render_is_deterministic() {
        let spec = EyeSpec::sample(1, 42, 160, 120);
        assert_eq!(spec.render(), spec.render());
    }

    #[test]
    fn mask_delineates_to_spec() {
        let spec = EyeSpec::sample(2, 7, 160, 120);
        let (_, mask) = spec.render();
        let g = delineate(&mask).unwrap();
        assert!((g.outer.cx - spec.cx).abs() < 1.0 && (g.outer.cy - spec.cy).abs() < 1.0);
        assert!((g.outer.r - spec.iris_r).abs() < 1.0);
        assert!((g.inner.r - spec.pupil_r).abs() < 1.0);
    }
}
