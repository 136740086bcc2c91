//! Noise zeroing, rubber-sheet unwrapping and the two crop modes.

use std::f64::consts::TAU;

use super::geometry::IrisGeometry;
use super::PreprocessError;
use crate::raster::{Mask, Raster, RasterError};

/// Zeroes every channel of pixels the mask marks as noise.
pub fn apply_segmentation(image: &Raster, mask: &Mask) -> Result<Raster, PreprocessError> {
    if image.width() != mask.width() || image.height() != mask.height() {
        return Err(RasterError::DimensionMismatch(
            image.width(),
            image.height(),
            mask.width(),
            mask.height(),
        )
        .into());
    }
    let ch = image.channels();
    let mut pixels = image.pixels().to_vec();
    for (px, &keep) in pixels.chunks_exact_mut(ch).zip(mask.bits()) {
        if !keep {
            px.fill(0);
        }
    }
    Ok(Raster::new(image.width(), image.height(), ch, pixels)?)
}

/// Daugman rubber-sheet map of the annulus between the two circles.
///
/// Column `j` samples angle `2*pi*j/out_w` (counter-clockwise from +x as
/// displayed); row `i` samples `rho = i/(out_h - 1)` along the segment from
/// the pupil boundary point (row 0) to the limbic boundary point (last row).
pub fn rubber_sheet(
    image: &Raster,
    geom: &IrisGeometry,
    out_w: usize,
    out_h: usize,
) -> Result<Raster, PreprocessError> {
    if out_w < 2 || out_h < 2 {
        return Err(PreprocessError::InvalidConfig(format!(
            "rubber sheet needs at least 2x2 output, got {out_w}x{out_h}"
        )));
    }
    geom.validate()?;
    let mut out = Raster::filled(out_w, out_h, image.channels(), 0);
    for j in 0..out_w {
        let theta = TAU * j as f64 / out_w as f64;
        let (ix, iy) = geom.inner.point_at(theta);
        let (ox, oy) = geom.outer.point_at(theta);
        for i in 0..out_h {
            let rho = i as f64 / (out_h - 1) as f64;
            let x = (1.0 - rho) * ix + rho * ox;
            let y = (1.0 - rho) * iy + rho * oy;
            out.put_sample(j, i, &image.sample_bicubic(x, y));
        }
    }
    Ok(out)
}

/// Copies a `side x side` window with top-left corner `(x0, y0)`; pixels
/// outside the source are zero. `keep` decides per source pixel center.
fn window(
    image: &Raster,
    x0: i64,
    y0: i64,
    side: usize,
    keep: impl Fn(f64, f64) -> bool,
) -> Raster {
    let ch = image.channels();
    let mut out = Raster::filled(side, side, ch, 0);
    for v in 0..side {
        let sy = y0 + v as i64;
        if sy < 0 || sy >= image.height() as i64 {
            continue;
        }
        for u in 0..side {
            let sx = x0 + u as i64;
            if sx < 0 || sx >= image.width() as i64 || !keep(sx as f64, sy as f64) {
                continue;
            }
            let src = image.pixel(sx as usize, sy as usize);
            for (c, &val) in src.iter().enumerate() {
                out.set(u, v, c, val);
            }
        }
    }
    out
}

/// Square crop of side `2 * outer.r` around the limbic circle. Pixels outside
/// the limbic circle or inside the pupil circle are zero, as is any part of
/// the square that leaves the image.
pub fn crop_delineated(image: &Raster, geom: &IrisGeometry) -> Raster {
    let side = ((2.0 * geom.outer.r).round() as usize).max(1);
    let x0 = (geom.outer.cx - side as f64 / 2.0).round() as i64;
    let y0 = (geom.outer.cy - side as f64 / 2.0).round() as i64;
    let (outer, inner) = (geom.outer, geom.inner);
    window(image, x0, y0, side, |x, y| {
        outer.contains(x, y) && !strictly_inside(&inner, x, y)
    })
}

#[inline]
fn strictly_inside(c: &super::Circle, x: f64, y: f64) -> bool {
    let (dx, dy) = (x - c.cx, y - c.cy);
    dx * dx + dy * dy < c.r * c.r
}

/// Square crop enclosing the foreground bounding box, expanded about the box
/// center to its longer side. Pixel values are copied unchanged.
pub fn crop_bbox(image: &Raster, geom: &IrisGeometry) -> Raster {
    let b = geom.bbox;
    let side = b.w.max(b.h);
    let x0 = b.x as i64 - ((side - b.w) / 2) as i64;
    let y0 = b.y as i64 - ((side - b.h) / 2) as i64;
    window(image, x0, y0, side, |_, _| true)
}
