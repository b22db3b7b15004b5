//! Image and mask files.
//!
//! 8-bit samples map to `[0, 1]` by `v / 255` and 16-bit samples by
//! `v / 65535`. Saving quantizes with `round(v * 255)`, so a save/load round
//! trip moves any value by at most `1 / 510`.

use std::fs;
use std::path::Path;

use attnshift_core::imaging::resample::resize_mask;
use attnshift_core::imaging::{luma, MaskLayer, RasterImage};
use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::{Result, ToolError};

/// Output encodings for [`save_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Png,
    Ppm,
}

impl OutputFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("png") => Ok(OutputFormat::Png),
            Some("ppm") => Ok(OutputFormat::Ppm),
            _ => Err(ToolError::format(
                path.display().to_string(),
                "output must be .png or .ppm",
            )),
        }
    }
}

/// What to do when a mask's size differs from its image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskFit {
    /// Reject with a shape error.
    Exact,
    /// Resize bilinearly and log a warning.
    Resize,
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| ToolError::io(path, e))?;
    decode_image(&bytes, &path.display().to_string())
}

/// Decodes PNG, binary PPM/PGM or JPEG bytes. Grayscale inputs are replicated
/// to three channels and alpha is dropped.
pub fn decode_image(bytes: &[u8], origin: &str) -> Result<RasterImage> {
    let img = decode_dynamic(bytes, origin)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let interleaved = if is_sixteen_bit(&img) {
        scaled(img.into_rgb16().into_raw(), 65535.0)
    } else {
        scaled(img.into_rgb8().into_raw(), 255.0)
    };
    Ok(RasterImage::from_interleaved(w, h, &interleaved)?)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<MaskLayer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| ToolError::io(path, e))?;
    decode_mask(&bytes, &path.display().to_string())
}

/// Decodes a mask image. Gray samples are used directly; colour samples are
/// reduced to luminance. Soft values are kept.
pub fn decode_mask(bytes: &[u8], origin: &str) -> Result<MaskLayer> {
    let img = decode_dynamic(bytes, origin)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = !img.color().has_color();
    let samples: Vec<f64> = match (gray, is_sixteen_bit(&img)) {
        (true, true) => scaled(img.into_luma16().into_raw(), 65535.0),
        (true, false) => scaled(img.into_luma8().into_raw(), 255.0),
        (false, true) => scaled(img.into_rgb16().into_raw(), 65535.0),
        (false, false) => scaled(img.into_rgb8().into_raw(), 255.0),
    };
    let weights = if gray {
        samples
    } else {
        samples
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]).clamp(0.0, 1.0))
            .collect()
    };
    Ok(MaskLayer::new(w, h, weights)?)
}

fn scaled<T: Into<f64>>(raw: Vec<T>, max: f64) -> Vec<f64> {
    raw.into_iter().map(|v| v.into() / max).collect()
}

/// Returns `mask` at `(width, height)`, resizing or failing according to `fit`.
pub fn fit_mask(mask: MaskLayer, width: usize, height: usize, fit: MaskFit) -> Result<MaskLayer> {
    if mask.dims() == (width, height) {
        return Ok(mask);
    }
    match fit {
        MaskFit::Exact => Err(attnshift_core::Error::Shape {
            expected: (width, height),
            found: mask.dims(),
        }
        .into()),
        MaskFit::Resize => {
            log::warn!(
                "mask is {}x{}, image is {width}x{height}; resizing mask",
                mask.width(),
                mask.height()
            );
            Ok(resize_mask(&mask, width, height))
        }
    }
}

/// Interleaved 8-bit RGB, `round(v * 255)`.
pub fn quantize(image: &RasterImage) -> Vec<u8> {
    image
        .to_interleaved()
        .into_iter()
        .map(|v| (v * 255.0).round() as u8)
        .collect()
}

pub fn encode_image(image: &RasterImage, format: OutputFormat) -> Result<Vec<u8>> {
    let rgb = quantize(image);
    let (w, h) = (image.width() as u32, image.height() as u32);
    let mut out = Vec::new();
    let res = match format {
        // Fast compression keeps interactive previews cheap; output stays deterministic.
        OutputFormat::Png => {
            PngEncoder::new_with_quality(&mut out, CompressionType::Fast, FilterType::Adaptive)
                .write_image(&rgb, w, h, ExtendedColorType::Rgb8)
        }
        OutputFormat::Ppm => PnmEncoder::new(&mut out)
            .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
            .write_image(&rgb, w, h, ExtendedColorType::Rgb8),
    };
    res.map_err(|e| ToolError::format("encoder", e.to_string()))?;
    Ok(out)
}

pub fn encode_png(image: &RasterImage) -> Result<Vec<u8>> {
    encode_image(image, OutputFormat::Png)
}

/// Writes PNG or PPM, chosen by the file extension.
pub fn save_image(image: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_image(image, OutputFormat::from_path(path)?)?;
    fs::write(path, bytes).map_err(|e| ToolError::io(path, e))
}

fn decode_dynamic(bytes: &[u8], origin: &str) -> Result<DynamicImage> {
    let format = image::guess_format(bytes)
        .map_err(|_| ToolError::format(origin, "unrecognised image format"))?;
    match format {
        ImageFormat::Png | ImageFormat::Pnm => {}
        ImageFormat::Jpeg => {
            if jpeg_components(bytes) == Some(4) {
                return Err(ToolError::format(
                    origin,
                    "CMYK JPEG is not supported; convert to RGB first",
                ));
            }
        }
        other => {
            return Err(ToolError::format(
                origin,
                format!("unsupported image format {other:?}; use PNG, PPM or JPEG"),
            ))
        }
    }
    image::load_from_memory_with_format(bytes, format)
        .map_err(|e| ToolError::format(origin, e.to_string()))
}

fn is_sixteen_bit(img: &DynamicImage) -> bool {
    matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    )
}

/// Component count from the first start-of-frame segment, if any.
fn jpeg_components(bytes: &[u8]) -> Option<u8> {
    let mut i = 2;
    while i + 4 <= bytes.len() {
        if bytes[i] != 0xFF {
            return None;
        }
        let marker = bytes[i + 1];
        match marker {
            0xFF => {
                i += 1;
                continue;
            }
            0x01 | 0xD0..=0xD7 => {
                i += 2;
                continue;
            }
            0xDA | 0xD9 => return None,
            _ => {}
        }
        let len = usize::from(u16::from_be_bytes([bytes[i + 2], bytes[i + 3]]));
        let is_sof = (0xC0..=0xCF).contains(&marker) && !matches!(marker, 0xC4 | 0xC8 | 0xCC);
        if is_sof {
            return bytes.get(i + 9).copied();
        }
        i += 2 + len;
    }
    None
}
