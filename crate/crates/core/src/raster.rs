//! Image and mask containers, lossless file I/O and bicubic resampling.
//!
//! Pixel `(x, y)` has its center at the real coordinate `(x, y)`; sampling
//! positions passed to [`Raster::sample_bicubic`] use the same convention.

use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageError, ImageFormat, ImageReader};

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error("{path}: cannot read image: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: unsupported image format ({reason})")]
    Unsupported { path: PathBuf, reason: String },
    #[error("{path}: corrupt image: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("{path}: cannot write image: {reason}")]
    Write { path: PathBuf, reason: String },
    #[error("invalid raster: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

pub type Result<T> = std::result::Result<T, RasterError>;

/// 8-bit image with 1 (gray) or 3 (RGB) interleaved channels, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for Raster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Raster")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(RasterError::Invalid(format!(
                "zero-sized raster {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(RasterError::Invalid(format!(
                "unsupported channel count {channels}"
            )));
        }
        if pixels.len() != width * height * channels {
            return Err(RasterError::Invalid(format!(
                "buffer holds {} samples, expected {}",
                pixels.len(),
                width * height * channels
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    /// Raster with every sample set to `value`.
    ///
    /// Panics on zero dimensions or a channel count other than 1 or 3.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Self::new(width, height, channels, vec![value; width * height * channels])
            .expect("valid raster dimensions")
    }

    /// Single-channel raster built from a per-pixel function.
    pub fn from_fn_gray(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, 1, pixels).expect("valid raster dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: u8) {
        self.pixels[(y * self.width + x) * self.channels + c] = value;
    }

    /// All channels of pixel `(x, y)`.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.pixels[i..i + self.channels]
    }

    /// Luma conversion with ITU-R 601 weights, rounded to nearest.
    pub fn to_gray(&self) -> Raster {
        if self.channels == 1 {
            return self.clone();
        }
        let pixels = self
            .pixels
            .chunks_exact(3)
            .map(|p| {
                let l = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
                l.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            pixels,
        }
    }

    /// Catmull-Rom bicubic sample at a real pixel coordinate with
    /// clamp-to-edge extension. The returned values are not clamped.
    pub fn sample_bicubic(&self, x: f64, y: f64) -> Sample {
        let x0 = x.floor();
        let y0 = y.floor();
        let wx = catmull_rom_weights(x - x0);
        let wy = catmull_rom_weights(y - y0);
        let (x0, y0) = (x0 as i64, y0 as i64);
        let max_x = self.width as i64 - 1;
        let max_y = self.height as i64 - 1;

        let mut values = [0.0f64; 3];
        for (j, wyj) in wy.iter().enumerate() {
            let sy = (y0 - 1 + j as i64).clamp(0, max_y) as usize;
            let row = sy * self.width;
            let mut acc = [0.0f64; 3];
            for (i, wxi) in wx.iter().enumerate() {
                let sx = (x0 - 1 + i as i64).clamp(0, max_x) as usize;
                let base = (row + sx) * self.channels;
                for (c, a) in acc.iter_mut().enumerate().take(self.channels) {
                    *a += wxi * self.pixels[base + c] as f64;
                }
            }
            for c in 0..self.channels {
                values[c] += wyj * acc[c];
            }
        }
        Sample {
            values,
            channels: self.channels,
        }
    }

    /// Resize with bicubic sampling and pixel-center alignment:
    /// `src = (dst + 0.5) * (in / out) - 0.5`.
    pub fn resize_bicubic(&self, out_w: usize, out_h: usize) -> Raster {
        assert!(out_w >= 1 && out_h >= 1, "resize target must be at least 1x1");
        let sx = self.width as f64 / out_w as f64;
        let sy = self.height as f64 / out_h as f64;
        let mut out = Raster::filled(out_w, out_h, self.channels, 0);
        for v in 0..out_h {
            let src_y = (v as f64 + 0.5) * sy - 0.5;
            for u in 0..out_w {
                let src_x = (u as f64 + 0.5) * sx - 0.5;
                let s = self.sample_bicubic(src_x, src_y);
                out.put_sample(u, v, &s);
            }
        }
        out
    }

    /// Writes a sample into pixel `(x, y)`, rounding and clamping to `[0, 255]`.
    #[inline]
    pub fn put_sample(&mut self, x: usize, y: usize, s: &Sample) {
        debug_assert_eq!(s.channels, self.channels);
        let base = (y * self.width + x) * self.channels;
        for c in 0..self.channels {
            self.pixels[base + c] = to_u8(s.values[c]);
        }
    }
}

/// Per-channel real intensity produced by interpolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    values: [f64; 3],
    channels: usize,
}

impl Sample {
    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.channels]
    }
}

#[inline]
fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Weights for taps at offsets -1, 0, 1, 2 with fractional position `t`
/// (cubic convolution kernel, a = -0.5).
#[inline]
fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Binary mask: `true` marks a valid iris pixel.
#[derive(Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl std::fmt::Debug for Mask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("foreground", &self.count())
            .finish()
    }
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(RasterError::Invalid(format!(
                "mask buffer of {} bits does not match {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits).expect("valid mask dimensions")
    }

    /// Thresholds a raster at 128 (gray, or luma for RGB input).
    pub fn from_raster(raster: &Raster) -> Self {
        let gray = raster.to_gray();
        Mask {
            width: gray.width,
            height: gray.height,
            bits: gray.pixels.iter().map(|&v| v >= 128).collect(),
        }
    }

    pub fn to_raster(&self) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            pixels: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Number of foreground pixels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|source| RasterError::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| RasterError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        Some(other) => {
            return Err(RasterError::Unsupported {
                path: path.to_path_buf(),
                reason: format!("{other:?}"),
            })
        }
        None => {
            return Err(RasterError::Unsupported {
                path: path.to_path_buf(),
                reason: "unrecognized signature".into(),
            })
        }
    }
    let img = reader.decode().map_err(|e| decode_error(path, e))?;
    from_dynamic(img).map_err(|e| match e {
        RasterError::Invalid(reason) => RasterError::Corrupt {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}

fn decode_error(path: &Path, err: ImageError) -> RasterError {
    let path = path.to_path_buf();
    match err {
        ImageError::Unsupported(e) => RasterError::Unsupported {
            path,
            reason: e.to_string(),
        },
        ImageError::IoError(e) if e.kind() != ErrorKind::UnexpectedEof => {
            RasterError::Io { path, source: e }
        }
        other => RasterError::Corrupt {
            path,
            reason: other.to_string(),
        },
    }
}

fn from_dynamic(img: DynamicImage) -> Result<Raster> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = matches!(
        img,
        DynamicImage::ImageLuma8(_)
            | DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA8(_)
            | DynamicImage::ImageLumaA16(_)
    );
    // 16-bit sources are rescaled to 8 bits by the conversions below
    if gray {
        Raster::new(w, h, 1, img.into_luma8().into_raw())
    } else {
        Raster::new(w, h, 3, img.into_rgb8().into_raw())
    }
}

/// Writes PNG (`.png`) or binary PGM/PPM (`.pgm`, `.ppm`, `.pnm`), chosen by extension.
pub fn save_image(raster: &Raster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let color = if raster.channels == 1 {
        ExtendedColorType::L8
    } else {
        ExtendedColorType::Rgb8
    };
    let write_err = |reason: String| RasterError::Write {
        path: path.to_path_buf(),
        reason,
    };
    let file = std::fs::File::create(path).map_err(|e| write_err(e.to_string()))?;
    let writer = std::io::BufWriter::new(file);
    let (w, h) = (raster.width as u32, raster.height as u32);
    let res = match ext.as_str() {
        "png" => image::codecs::png::PngEncoder::new(writer).write_image(&raster.pixels, w, h, color),
        "pgm" | "ppm" | "pnm" => {
            let subtype = if raster.channels == 1 {
                PnmSubtype::Graymap(SampleEncoding::Binary)
            } else {
                PnmSubtype::Pixmap(SampleEncoding::Binary)
            };
            PnmEncoder::new(writer)
                .with_subtype(subtype)
                .write_image(&raster.pixels, w, h, color)
        }
        other => {
            drop(writer);
            let _ = std::fs::remove_file(path);
            return Err(RasterError::Unsupported {
                path: path.to_path_buf(),
                reason: format!("no lossless encoder for extension {other:?}"),
            });
        }
    };
    res.map_err(|e| write_err(e.to_string()))
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    load_image(path).map(|r| Mask::from_raster(&r))
}
