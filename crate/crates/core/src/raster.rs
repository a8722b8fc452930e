//! Raster types shared by every filter, plus image file I/O.
//!
//! Storage is 8-bit ([`ImageBuffer`]); filters work on real-valued
//! single-channel [`ImagePlane`]s. Values cross between the two only through
//! [`quantize_u8`].

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use image::{DynamicImage, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static NAN_QUANTIZED: AtomicU64 = AtomicU64::new(0);

/// Number of NaN values seen by [`quantize_u8`] since process start.
pub fn nan_quantized_count() -> u64 {
    NAN_QUANTIZED.load(Ordering::Relaxed)
}

/// Round half away from zero, then clamp to `[0, 255]`. NaN maps to 0.
pub fn quantize_u8(v: f64) -> u8 {
    if v.is_nan() {
        NAN_QUANTIZED.fetch_add(1, Ordering::Relaxed);
        return 0;
    }
    // f64::round already rounds half away from zero
    v.round().clamp(0.0, 255.0) as u8
}

/// Single-channel real-valued raster, row-major, nominal range `[0, 255]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch(format!(
                "plane must be at least 1x1, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} plane needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn same_dims(&self, other: &ImagePlane) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Copy with every value rounded and clamped to an 8-bit level.
    pub fn quantized(&self) -> ImagePlane {
        ImagePlane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| quantize_u8(v) as f64).collect(),
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Sample standard deviation (n - 1 denominator).
    pub fn std_dev(&self) -> f64 {
        let n = self.data.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.sum() / n as f64;
        let ss: f64 = self.data.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    }
}

/// 8-bit raster with 1 (grey) or 3 (RGB) interleaved channels, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::WrongChannelCount {
                expected: 3,
                actual: channels,
            });
        }
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch(format!(
                "image must be at least 1x1, got {width}x{height}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height}x{channels} image needs {} bytes, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Single-channel buffer as a plane (exact copy, no scaling).
    pub fn to_plane(&self) -> Result<ImagePlane> {
        if self.channels != 1 {
            return Err(Error::WrongChannelCount {
                expected: 1,
                actual: self.channels,
            });
        }
        ImagePlane::new(
            self.width,
            self.height,
            self.data.iter().map(|&v| v as f64).collect(),
        )
    }

    /// Quantizes a plane into a single-channel buffer.
    pub fn from_plane(plane: &ImagePlane) -> ImageBuffer {
        ImageBuffer {
            width: plane.width,
            height: plane.height,
            channels: 1,
            data: plane.data.iter().map(|&v| quantize_u8(v)).collect(),
        }
    }
}

/// Decodes a BMP, PNG or JPEG file. Alpha is dropped; grey sources stay single-channel.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::FileNotFound {
            path: path.to_path_buf(),
        });
    }
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;

    match reader.format() {
        Some(ImageFormat::Bmp | ImageFormat::Png | ImageFormat::Jpeg) => {}
        Some(other) => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                cause: format!("{other:?} is not one of BMP, PNG, JPEG"),
            })
        }
        None => {
            return Err(Error::CorruptData {
                path: path.to_path_buf(),
                cause: "content is not a recognizable image".into(),
            })
        }
    }

    let decoded = reader.decode().map_err(|e| match e {
        // A short or garbled stream is bad content, not a failing device.
        image::ImageError::IoError(io)
            if matches!(io.kind(), std::io::ErrorKind::UnexpectedEof | std::io::ErrorKind::InvalidData) =>
        {
            Error::CorruptData {
                path: path.to_path_buf(),
                cause: io.to_string(),
            }
        }
        image::ImageError::IoError(io) => Error::io(path, io),
        image::ImageError::Unsupported(u) => Error::UnsupportedFormat {
            path: path.to_path_buf(),
            cause: u.to_string(),
        },
        other => Error::CorruptData {
            path: path.to_path_buf(),
            cause: other.to_string(),
        },
    })?;

    let color = decoded.color();
    if color.has_alpha() {
        log::warn!("{}: dropping alpha channel", path.display());
    }
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    if color.has_color() {
        ImageBuffer::new(width, height, 3, decoded.into_rgb8().into_raw())
    } else {
        ImageBuffer::new(width, height, 1, decoded.into_luma8().into_raw())
    }
}

/// Writes `buffer` as an 8-bit PNG, creating parent directories as needed.
pub fn save_image(buffer: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let (w, h) = (buffer.width as u32, buffer.height as u32);
    let img = match buffer.channels {
        1 => DynamicImage::ImageLuma8(
            image::GrayImage::from_raw(w, h, buffer.data.clone()).expect("buffer length checked"),
        ),
        _ => DynamicImage::ImageRgb8(
            image::RgbImage::from_raw(w, h, buffer.data.clone()).expect("buffer length checked"),
        ),
    };
    img.save_with_format(path, ImageFormat::Png).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(other.to_string())),
    })
}

/// Splits an RGB buffer into R, G, B planes.
pub fn split_channels(rgb: &ImageBuffer) -> Result<(ImagePlane, ImagePlane, ImagePlane)> {
    if rgb.channels != 3 {
        return Err(Error::WrongChannelCount {
            expected: 3,
            actual: rgb.channels,
        });
    }
    let n = rgb.width * rgb.height;
    let mut planes = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for px in rgb.data.chunks_exact(3) {
        for (plane, &v) in planes.iter_mut().zip(px) {
            plane.push(v as f64);
        }
    }
    let [r, g, b] = planes;
    Ok((
        ImagePlane::new(rgb.width, rgb.height, r)?,
        ImagePlane::new(rgb.width, rgb.height, g)?,
        ImagePlane::new(rgb.width, rgb.height, b)?,
    ))
}

/// Interleaves three planes into an RGB buffer, quantizing each value.
pub fn merge_channels(r: &ImagePlane, g: &ImagePlane, b: &ImagePlane) -> Result<ImageBuffer> {
    if !r.same_dims(g) || !r.same_dims(b) {
        return Err(Error::DimensionMismatch(format!(
            "planes are {}x{}, {}x{}, {}x{}",
            r.width, r.height, g.width, g.height, b.width, b.height
        )));
    }
    let mut data = Vec::with_capacity(r.data.len() * 3);
    for ((&rv, &gv), &bv) in r.data.iter().zip(&g.data).zip(&b.data) {
        data.extend_from_slice(&[quantize_u8(rv), quantize_u8(gv), quantize_u8(bv)]);
    }
    ImageBuffer::new(r.width, r.height, 3, data)
}

/// Rec.601 luma. Single-channel input is returned as a plane unchanged.
pub fn luminance(image: &ImageBuffer) -> ImagePlane {
    let data = match image.channels {
        1 => image.data.iter().map(|&v| v as f64).collect(),
        _ => image
            .data
            .chunks_exact(3)
            .map(|px| 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64)
            .collect(),
    };
    ImagePlane {
        width: image.width,
        height: image.height,
        data,
    }
}
