//! Grayscale PNG and binary PGM (P5) input/output.
//!
//! Pixels are normalized to `[0, 1]` on load by dividing by the format's
//! maximum value. Color PNGs are collapsed with the luma weights
//! `0.299 R + 0.587 G + 0.114 B`; alpha is ignored. On write, values are
//! clamped to `[0, 1]` and quantized with round-half-up.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};

use crate::error::{Error, Result};
use crate::image::Image;

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }

    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(Error::invalid(format!(
                "bit depth must be 8 or 16, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterFormat {
    Png,
    Pgm,
}

impl RasterFormat {
    /// Format implied by the file extension (case-insensitive).
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("png") => Ok(RasterFormat::Png),
            Some("pgm") => Ok(RasterFormat::Pgm),
            _ => Err(Error::UnsupportedFormat(format!(
                "cannot infer format from {}; use .png or .pgm",
                path.display()
            ))),
        }
    }
}

/// Quantizes a normalized value: clamp to `[0, 1]`, scale, round half up.
pub fn quantize(value: f64, depth: BitDepth) -> u16 {
    let max = depth.max_value() as f64;
    (value.clamp(0.0, 1.0) * max + 0.5).floor() as u16
}

/// Reads a PNG or P5 PGM, detected from the file contents.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingFile(path.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(&bytes)
    } else if bytes.starts_with(b"P5") {
        decode_pgm(&bytes)
    } else {
        Err(Error::UnsupportedFormat(format!(
            "{} is neither PNG nor binary PGM",
            path.display()
        )))
    }
}

/// Writes `img` as PNG or PGM depending on the extension of `path`.
pub fn write_image(img: &Image, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let format = RasterFormat::from_path(path)?;
    let bytes = match format {
        RasterFormat::Png => encode_png(img, depth)?,
        RasterFormat::Pgm => encode_pgm(img, depth),
    };
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

fn decode_png(bytes: &[u8]) -> Result<Image> {
    let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::Decode(e.to_string()))?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimension { width, height });
    }
    let luma = |r: f64, g: f64, b: f64| 0.299 * r + 0.587 * g + 0.114 * b;
    let data: Vec<f64> = match &decoded {
        DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| p[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(buf) => buf.pixels().map(|p| p[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA16(buf) => buf.pixels().map(|p| p[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageRgb8(buf) => buf
            .pixels()
            .map(|p| luma(p[0] as f64, p[1] as f64, p[2] as f64) / 255.0)
            .collect(),
        DynamicImage::ImageRgba8(buf) => buf
            .pixels()
            .map(|p| luma(p[0] as f64, p[1] as f64, p[2] as f64) / 255.0)
            .collect(),
        DynamicImage::ImageRgb16(buf) => buf
            .pixels()
            .map(|p| luma(p[0] as f64, p[1] as f64, p[2] as f64) / 65535.0)
            .collect(),
        DynamicImage::ImageRgba16(buf) => buf
            .pixels()
            .map(|p| luma(p[0] as f64, p[1] as f64, p[2] as f64) / 65535.0)
            .collect(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "PNG color type {:?}",
                other.color()
            )))
        }
    };
    Image::new(width, height, data)
}

fn encode_png(img: &Image, depth: BitDepth) -> Result<Vec<u8>> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = match depth {
        BitDepth::Eight => {
            let px = img
                .data()
                .iter()
                .map(|&v| quantize(v, depth) as u8)
                .collect();
            DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w, h, px).unwrap())
        }
        BitDepth::Sixteen => {
            let px = img.data().iter().map(|&v| quantize(v, depth)).collect();
            DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w, h, px).unwrap())
        }
    };
    let mut out = std::io::Cursor::new(Vec::new());
    dynamic
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(out.into_inner())
}

fn encode_pgm(img: &Image, depth: BitDepth) -> Vec<u8> {
    let mut out = format!(
        "P5\n{} {}\n{}\n",
        img.width(),
        img.height(),
        depth.max_value()
    )
    .into_bytes();
    for &v in img.data() {
        let q = quantize(v, depth);
        match depth {
            BitDepth::Eight => out.push(q as u8),
            BitDepth::Sixteen => out.extend_from_slice(&q.to_be_bytes()),
        }
    }
    out
}

fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    // header: magic, width, height, maxval, separated by whitespace or
    // comments, then exactly one whitespace byte before the raster
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Decode("truncated or malformed PGM header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Decode("PGM header value out of range".into()))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Decode("missing whitespace after PGM header".into()));
    }
    pos += 1;

    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimension { width, height });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Decode(format!(
            "PGM maxval {maxval} outside 1..=65535"
        )));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Decode("PGM dimensions overflow".into()))?;
    let sample = if maxval < 256 { 1 } else { 2 };
    let raster = &bytes[pos..];
    if raster.len() < n * sample {
        return Err(Error::Decode(format!(
            "PGM raster has {} bytes, expected {}",
            raster.len(),
            n * sample
        )));
    }
    let scale = maxval as f64;
    let data = if sample == 1 {
        raster[..n].iter().map(|&b| b as f64 / scale).collect()
    } else {
        raster[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale)
            .collect()
    };
    Image::new(width, height, data)
}
