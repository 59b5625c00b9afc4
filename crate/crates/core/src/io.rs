//! 8-bit PNG and binary PGM/PPM reading and writing.
//!
//! Codes map to intensities as `v / 255`; writing clamps and rounds
//! `v × 255`. PNG goes through the `image` crate, PNM is parsed here.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::image::{clamp_unit, ColorImage, ImageBuffer};

/// A decoded file: grayscale or RGB.
#[derive(Clone, Debug, PartialEq)]
pub enum LoadedImage {
    Gray(ImageBuffer),
    Color(ColorImage),
}

impl LoadedImage {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            LoadedImage::Gray(g) => g.dims(),
            LoadedImage::Color(c) => c.dims(),
        }
    }

    /// Grayscale image, or the BT.601 luma of a color one.
    pub fn into_luminance(self) -> ImageBuffer {
        match self {
            LoadedImage::Gray(g) => g,
            LoadedImage::Color(c) => c.luminance(),
        }
    }

    /// RGB image; grayscale is replicated into all three channels.
    pub fn into_color(self) -> ColorImage {
        match self {
            LoadedImage::Color(c) => c,
            LoadedImage::Gray(g) => {
                let (w, h) = g.dims();
                let d = g.into_data();
                ColorImage::new(w, h, [d.clone(), d.clone(), d]).expect("equal channel lengths")
            }
        }
    }

    /// Applies `f` to the image, or to each channel of a color image.
    pub fn map_planes(
        &self,
        f: impl Fn(&ImageBuffer) -> Result<ImageBuffer>,
    ) -> Result<LoadedImage> {
        Ok(match self {
            LoadedImage::Gray(g) => LoadedImage::Gray(f(g)?),
            LoadedImage::Color(c) => LoadedImage::Color(ColorImage::from_planes([
                f(&c.plane(0))?,
                f(&c.plane(1))?,
                f(&c.plane(2))?,
            ])?),
        })
    }
}

#[inline]
fn code_to_unit(v: u8) -> f64 {
    v as f64 / 255.0
}

#[inline]
pub fn unit_to_code(v: f64) -> u8 {
    (clamp_unit(v) * 255.0).round() as u8
}

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Decodes PNG, P5 or P6 bytes, sniffing the format from the leading bytes.
pub fn decode_image(bytes: &[u8]) -> Result<LoadedImage> {
    if bytes.starts_with(PNG_MAGIC) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes)
    } else {
        Err(Error::Parse {
            offset: 0,
            message: "unrecognized image signature".into(),
        })
    }
}

pub fn decode_png(bytes: &[u8]) -> Result<LoadedImage> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => {
            Ok(LoadedImage::Gray(gray_from_codes(w, h, buf.as_raw())?))
        }
        DynamicImage::ImageRgb8(buf) => {
            Ok(LoadedImage::Color(color_from_codes(w, h, buf.as_raw())?))
        }
        // alpha is dropped; the samples themselves are still 8-bit
        DynamicImage::ImageLumaA8(_) => Ok(LoadedImage::Gray(gray_from_codes(
            w,
            h,
            img.to_luma8().as_raw(),
        )?)),
        DynamicImage::ImageRgba8(_) => Ok(LoadedImage::Color(color_from_codes(
            w,
            h,
            img.to_rgb8().as_raw(),
        )?)),
        other => Err(Error::Unsupported(format!(
            "PNG sample layout {:?}; only 8-bit gray and RGB are supported",
            other.color()
        ))),
    }
}

fn gray_from_codes(w: usize, h: usize, codes: &[u8]) -> Result<ImageBuffer> {
    ImageBuffer::new(w, h, codes.iter().map(|&v| code_to_unit(v)).collect())
}

fn color_from_codes(w: usize, h: usize, codes: &[u8]) -> Result<ColorImage> {
    let mut ch = [
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
    ];
    for px in codes.chunks_exact(3) {
        for c in 0..3 {
            ch[c].push(code_to_unit(px[c]));
        }
    }
    ColorImage::new(w, h, ch)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            self.pos = start;
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::Parse {
                offset: start,
                message: format!("invalid {what}"),
            })
    }
}

/// Decodes binary PGM (P5) or PPM (P6) with maxval 255.
pub fn decode_pnm(bytes: &[u8]) -> Result<LoadedImage> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => {
            return Err(Error::Parse {
                offset: 0,
                message: "expected P5 or P6 magic".into(),
            })
        }
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    if !cur
        .bytes
        .get(2)
        .is_some_and(|b| b.is_ascii_whitespace() || *b == b'#')
    {
        return Err(cur.err("expected whitespace after magic"));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Unsupported(format!(
            "maxval {maxval} at byte {maxval_at}; only 8-bit (255) samples are supported"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    if !cur.bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(cur.err("expected a single whitespace byte before raster data"));
    }
    cur.pos += 1;
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| cur.err("image dimensions overflow"))?;
    let raster = &bytes[cur.pos..];
    if raster.len() < need {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!(
                "raster truncated: need {need} bytes, found {}",
                raster.len()
            ),
        });
    }
    let raster = &raster[..need];
    if channels == 1 {
        Ok(LoadedImage::Gray(gray_from_codes(width, height, raster)?))
    } else {
        Ok(LoadedImage::Color(color_from_codes(width, height, raster)?))
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<LoadedImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

fn gray_codes(img: &ImageBuffer) -> Vec<u8> {
    img.data().iter().map(|&v| unit_to_code(v)).collect()
}

fn color_codes(img: &ColorImage) -> Vec<u8> {
    let n = img.width() * img.height();
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        for c in 0..3 {
            out.push(unit_to_code(img.channel(c)[i]));
        }
    }
    out
}

pub fn encode_pgm(img: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(gray_codes(img));
    out
}

pub fn encode_ppm(img: &ColorImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(color_codes(img));
    out
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Saves a grayscale image as PNG or PGM, chosen by extension.
pub fn save_gray(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<()> {
    let path = path.as_ref();
    let bytes = match extension(path).as_str() {
        "pgm" => encode_pgm(img),
        "png" => {
            let buf = image::GrayImage::from_raw(
                img.width() as u32,
                img.height() as u32,
                gray_codes(img),
            )
            .ok_or_else(|| Error::invalid("buffer size mismatch"))?;
            let mut out = std::io::Cursor::new(Vec::new());
            buf.write_to(&mut out, ImageFormat::Png)?;
            out.into_inner()
        }
        other => {
            return Err(Error::Unsupported(format!(
                "grayscale output format '{other}'"
            )))
        }
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Saves an RGB image as PNG or PPM, chosen by extension.
pub fn save_color(path: impl AsRef<Path>, img: &ColorImage) -> Result<()> {
    let path = path.as_ref();
    let bytes = match extension(path).as_str() {
        "ppm" => encode_ppm(img),
        "png" => {
            let buf = image::RgbImage::from_raw(
                img.width() as u32,
                img.height() as u32,
                color_codes(img),
            )
            .ok_or_else(|| Error::invalid("buffer size mismatch"))?;
            let mut out = std::io::Cursor::new(Vec::new());
            buf.write_to(&mut out, ImageFormat::Png)?;
            out.into_inner()
        }
        other => return Err(Error::Unsupported(format!("color output format '{other}'"))),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn save_image(path: impl AsRef<Path>, img: &LoadedImage) -> Result<()> {
    match img {
        LoadedImage::Gray(g) => save_gray(path, g),
        LoadedImage::Color(c) => save_color(path, c),
    }
}
