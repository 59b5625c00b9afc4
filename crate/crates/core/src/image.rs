//! Raster containers and the resampling operators shared by the whole
//! pipeline: block-mean degradation, Keys bicubic upscaling and the
//! full-range BT.601 luma/chroma transform.
//!
//! All intensities live in `[0, 1]`. Signed intermediates (high-frequency
//! residuals) use [`ResidualBuffer`] so the clamped/unclamped distinction is
//! carried by the type.

use crate::error::{Error, Result};

/// Single-channel raster with every sample in `[0, 1]`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    /// Wraps `data`, rejecting wrong lengths and samples outside `[0, 1]`.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len(width, height, data.len())?;
        if let Some((i, v)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::invalid(format!(
                "sample {i} = {v} lies outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Wraps `data` after clamping every sample into `[0, 1]` (NaN maps to 0).
    pub fn from_clamped(width: usize, height: usize, mut data: Vec<f64>) -> Result<Self> {
        check_len(width, height, data.len())?;
        for v in &mut data {
            *v = clamp_unit(*v);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![clamp_unit(value); width * height],
        }
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel; results are clamped.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(clamp_unit(f(x, y)));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Copies the `size`×`size` block whose top-left corner is `(left, top)`.
    pub fn patch(&self, left: usize, top: usize, size: usize) -> Vec<f64> {
        copy_patch(&self.data, self.width, left, top, size)
    }

    /// Adds a residual and clamps the sum back into `[0, 1]`.
    pub fn add_residual(&self, residual: &ResidualBuffer) -> Result<ImageBuffer> {
        ensure_same_dims(self.dims(), residual.dims())?;
        let data = self
            .data
            .iter()
            .zip(residual.data())
            .map(|(a, r)| a + r)
            .collect();
        ImageBuffer::from_clamped(self.width, self.height, data)
    }

    /// Signed difference `self - other`.
    pub fn residual_from(&self, other: &ImageBuffer) -> Result<ResidualBuffer> {
        ensure_same_dims(self.dims(), other.dims())?;
        let data = self
            .data
            .iter()
            .zip(other.data())
            .map(|(a, b)| a - b)
            .collect();
        ResidualBuffer::new(self.width, self.height, data)
    }
}

/// Single-channel signed raster; values are unbounded.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualBuffer {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ResidualBuffer {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn patch(&self, left: usize, top: usize, size: usize) -> Vec<f64> {
        copy_patch(&self.data, self.width, left, top, size)
    }
}

/// Three-channel raster. The channels are RGB or YUV depending on how it was
/// produced; both encodings keep every channel in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    channels: [Vec<f64>; 3],
}

impl ColorImage {
    pub fn new(width: usize, height: usize, channels: [Vec<f64>; 3]) -> Result<Self> {
        for c in &channels {
            check_len(width, height, c.len())?;
        }
        Ok(Self {
            width,
            height,
            channels,
        })
    }

    /// Assembles a color image from three single-channel planes of equal size.
    pub fn from_planes(planes: [ImageBuffer; 3]) -> Result<Self> {
        let (w, h) = planes[0].dims();
        for p in &planes[1..] {
            ensure_same_dims((w, h), p.dims())?;
        }
        let [a, b, c] = planes;
        Ok(Self {
            width: w,
            height: h,
            channels: [a.into_data(), b.into_data(), c.into_data()],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.channels[index]
    }

    /// Extracts one channel as a clamped single-channel image.
    pub fn plane(&self, index: usize) -> ImageBuffer {
        ImageBuffer::from_clamped(self.width, self.height, self.channels[index].clone())
            .expect("channel length checked at construction")
    }

    /// BT.601 luma of an RGB image.
    pub fn luminance(&self) -> ImageBuffer {
        rgb_to_yuv(self).plane(0)
    }
}

// Full-range BT.601 (the JFIF YCbCr convention with chroma offset by 1/2).
const KR: f64 = 0.299;
const KB: f64 = 0.114;
const KG: f64 = 1.0 - KR - KB;

/// Converts RGB to full-range BT.601 YUV with neutral chroma at 0.5.
pub fn rgb_to_yuv(img: &ColorImage) -> ColorImage {
    let n = img.width * img.height;
    let [r, g, b] = &img.channels;
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        let y = KR * r[i] + KG * g[i] + KB * b[i];
        out[0][i] = y;
        out[1][i] = 0.5 + (b[i] - y) / (2.0 * (1.0 - KB));
        out[2][i] = 0.5 + (r[i] - y) / (2.0 * (1.0 - KR));
    }
    ColorImage {
        width: img.width,
        height: img.height,
        channels: out,
    }
}

/// Exact algebraic inverse of [`rgb_to_yuv`]; the result is clamped to `[0, 1]`.
pub fn yuv_to_rgb(img: &ColorImage) -> ColorImage {
    let n = img.width * img.height;
    let [y, u, v] = &img.channels;
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        let r = y[i] + 2.0 * (1.0 - KR) * (v[i] - 0.5);
        let b = y[i] + 2.0 * (1.0 - KB) * (u[i] - 0.5);
        let g = (y[i] - KR * r - KB * b) / KG;
        out[0][i] = clamp_unit(r);
        out[1][i] = clamp_unit(g);
        out[2][i] = clamp_unit(b);
    }
    ColorImage {
        width: img.width,
        height: img.height,
        channels: out,
    }
}

/// Averages non-overlapping `scale`×`scale` blocks.
///
/// Equivalent to `scale`×`scale` box smoothing followed by `scale`-stride
/// sampling on a block-aligned grid.
pub fn degrade(hr: &ImageBuffer, scale: usize) -> Result<ImageBuffer> {
    if scale < 2 {
        return Err(Error::invalid(format!("scale must be >= 2, got {scale}")));
    }
    if hr.is_empty() || !hr.width.is_multiple_of(scale) || !hr.height.is_multiple_of(scale) {
        return Err(Error::invalid(format!(
            "{}x{} image is not divisible by scale {scale}",
            hr.width, hr.height
        )));
    }
    let (w, h) = (hr.width / scale, hr.height / scale);
    let norm = (scale * scale) as f64;
    let mut data = vec![0.0; w * h];
    for (by, row) in data.chunks_exact_mut(w).enumerate() {
        for y in by * scale..(by + 1) * scale {
            let src = &hr.data[y * hr.width..(y + 1) * hr.width];
            for (acc, block) in row.iter_mut().zip(src.chunks_exact(scale)) {
                for v in block {
                    *acc += v;
                }
            }
        }
        for v in row.iter_mut() {
            *v /= norm;
        }
    }
    ImageBuffer::from_clamped(w, h, data)
}

/// Keys cubic convolution parameter.
pub const KEYS_A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = -0.5`.
#[inline]
pub fn keys_kernel(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((KEYS_A + 2.0) * x - (KEYS_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((KEYS_A * x - 5.0 * KEYS_A) * x + 8.0 * KEYS_A) * x - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// Source taps for one output coordinate: four clamped indices and weights.
#[derive(Clone, Copy, Debug)]
struct Taps {
    index: [usize; 4],
    weight: [f64; 4],
}

fn axis_taps(src_len: usize, scale: usize) -> Vec<Taps> {
    let last = src_len as isize - 1;
    (0..src_len * scale)
        .map(|o| {
            // pixel-centre alignment
            let u = (o as f64 + 0.5) / scale as f64 - 0.5;
            let base = u.floor();
            let t = u - base;
            let base = base as isize;
            let mut index = [0; 4];
            let mut weight = [0.0; 4];
            for k in 0..4 {
                let off = k as isize - 1;
                index[k] = (base + off).clamp(0, last) as usize;
                weight[k] = keys_kernel(t - off as f64);
            }
            Taps { index, weight }
        })
        .collect()
}

/// Separable Keys (`a = -0.5`) bicubic upscaling with pixel-centre alignment
/// and clamp-to-edge borders. The output is clamped to `[0, 1]`.
pub fn bicubic_upscale(lr: &ImageBuffer, scale: usize) -> Result<ImageBuffer> {
    if scale < 2 {
        return Err(Error::invalid(format!("scale must be >= 2, got {scale}")));
    }
    if lr.is_empty() {
        return Err(Error::invalid("cannot upscale an empty image"));
    }
    let (sw, sh) = lr.dims();
    let (ow, oh) = (sw * scale, sh * scale);
    let xt = axis_taps(sw, scale);
    let yt = axis_taps(sh, scale);

    // horizontal pass: sh rows of ow samples
    let mut tmp = vec![0.0; sh * ow];
    for y in 0..sh {
        let src = &lr.data[y * sw..(y + 1) * sw];
        let dst = &mut tmp[y * ow..(y + 1) * ow];
        for (d, t) in dst.iter_mut().zip(&xt) {
            *d = (0..4).map(|k| t.weight[k] * src[t.index[k]]).sum();
        }
    }

    let mut out = vec![0.0; ow * oh];
    for (y, t) in yt.iter().enumerate() {
        let dst = &mut out[y * ow..(y + 1) * ow];
        for k in 0..4 {
            let w = t.weight[k];
            let row = &tmp[t.index[k] * ow..(t.index[k] + 1) * ow];
            for (d, s) in dst.iter_mut().zip(row) {
                *d += w * s;
            }
        }
    }
    ImageBuffer::from_clamped(ow, oh, out)
}

/// Translates an image by `(dx, dy)` pixels, replicating edge pixels into the
/// uncovered area.
pub fn translate(img: &ImageBuffer, dx: isize, dy: isize) -> ImageBuffer {
    let (w, h) = img.dims();
    ImageBuffer::from_fn(w, h, |x, y| {
        let sx = (x as isize - dx).clamp(0, w as isize - 1) as usize;
        let sy = (y as isize - dy).clamp(0, h as isize - 1) as usize;
        img.get(sx, sy)
    })
}

#[inline]
pub(crate) fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    if width.checked_mul(height) != Some(len) {
        return Err(Error::invalid(format!(
            "buffer of {len} samples does not match {width}x{height}"
        )));
    }
    Ok(())
}

pub(crate) fn ensure_same_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            expected_width: expected.0,
            expected_height: expected.1,
            width: actual.0,
            height: actual.1,
        });
    }
    Ok(())
}

fn copy_patch(data: &[f64], width: usize, left: usize, top: usize, size: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(size * size);
    for y in top..top + size {
        out.extend_from_slice(&data[y * width + left..y * width + left + size]);
    }
    out
}
