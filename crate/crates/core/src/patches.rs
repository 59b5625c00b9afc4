//! Patch-grid geometry, context-window enumeration, feature construction and
//! overlap-average assembly.
//!
//! All coordinates are HR pixels; LR images are always handled in their
//! bicubic-upscaled form so that patches from both resolutions line up.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ResidualBuffer;
use crate::pipeline::CorpusEntry;

/// Patch size, overlap and context-window configuration for one image size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGeometry {
    pub patch_size: usize,
    pub overlap: usize,
    pub window_size: usize,
    pub context_step: usize,
    pub image_width: usize,
    pub image_height: usize,
}

impl PatchGeometry {
    pub fn new(
        patch_size: usize,
        overlap: usize,
        window_size: usize,
        context_step: usize,
        image_width: usize,
        image_height: usize,
    ) -> Result<Self> {
        let geom = Self {
            patch_size,
            overlap,
            window_size,
            context_step,
            image_width,
            image_height,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.patch_size;
        if p == 0 || self.overlap >= p {
            return Err(Error::invalid(format!(
                "need 0 <= overlap < patch size, got overlap {} with patch {p}",
                self.overlap
            )));
        }
        if self.window_size < p {
            return Err(Error::invalid(format!(
                "window {} is smaller than patch {p}",
                self.window_size
            )));
        }
        if self.context_step == 0 || !(self.window_size - p).is_multiple_of(self.context_step) {
            return Err(Error::invalid(format!(
                "window margin {} is not a multiple of step {}",
                self.window_size - p,
                self.context_step
            )));
        }
        if self.image_width < p || self.image_height < p {
            return Err(Error::invalid(format!(
                "{}x{} image is smaller than a {p}x{p} patch",
                self.image_width, self.image_height
            )));
        }
        Ok(())
    }

    /// Distance between neighbouring grid patches.
    #[inline]
    pub fn stride(&self) -> usize {
        self.patch_size - self.overlap
    }

    #[inline]
    pub fn max_left(&self) -> usize {
        self.image_width - self.patch_size
    }

    #[inline]
    pub fn max_top(&self) -> usize {
        self.image_height - self.patch_size
    }

    /// Window offsets per axis, `1 + (w - p) / s`.
    #[inline]
    pub fn offsets_per_axis(&self) -> usize {
        1 + (self.window_size - self.patch_size) / self.context_step
    }

    /// Length of a feature vector: mean-removed pixels plus two position terms.
    #[inline]
    pub fn feature_dim(&self) -> usize {
        self.patch_size * self.patch_size + 2
    }

    /// Position-patch configuration: the window collapses onto the patch.
    pub fn is_position_only(&self) -> bool {
        self.window_size == self.patch_size
    }
}

/// A patch on the reconstruction grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PatchIndex {
    pub grid_row: usize,
    pub grid_col: usize,
    pub top: usize,
    pub left: usize,
}

fn axis_positions(extent: usize, patch: usize, stride: usize) -> Vec<usize> {
    let last = extent - patch;
    let mut out: Vec<usize> = (0..)
        .map(|i| i * stride)
        .take_while(|&v| v < last)
        .collect();
    out.push(last);
    out
}

/// Lists the reconstruction grid in row-major order. The final row and column
/// are pulled back against the border so every pixel is covered.
pub fn enumerate_grid(geom: &PatchGeometry) -> Result<Vec<PatchIndex>> {
    geom.validate()?;
    let rows = axis_positions(geom.image_height, geom.patch_size, geom.stride());
    let cols = axis_positions(geom.image_width, geom.patch_size, geom.stride());
    let mut grid = Vec::with_capacity(rows.len() * cols.len());
    for (grid_row, &top) in rows.iter().enumerate() {
        for (grid_col, &left) in cols.iter().enumerate() {
            grid.push(PatchIndex {
                grid_row,
                grid_col,
                top,
                left,
            });
        }
    }
    Ok(grid)
}

/// Number of context candidates for an interior position with `images` training images.
pub fn candidate_count(images: usize, geom: &PatchGeometry) -> usize {
    let n = geom.offsets_per_axis();
    images * n * n
}

/// Candidate top (or left) coordinates for a patch at `pos` along one axis.
///
/// Offsets are taken at multiples of the context step relative to `pos`, so
/// the position patch itself is always included. Near a border the run of
/// offsets slides inward and keeps its length while the image allows.
pub fn window_positions(pos: usize, max_pos: usize, geom: &PatchGeometry) -> Vec<usize> {
    let s = geom.context_step as isize;
    let n = geom.offsets_per_axis() as isize;
    let pos_i = pos as isize;
    let k_min = -(pos_i / s);
    let k_max = (max_pos as isize - pos_i) / s;
    let (lo, hi) = if k_max - k_min < n {
        (k_min, k_max)
    } else {
        let lo = (-((n - 1) / 2)).clamp(k_min, k_max - n + 1);
        (lo, lo + n - 1)
    };
    (lo..=hi).map(|k| (pos_i + k * s) as usize).collect()
}

/// Augmented patch descriptor: mean-removed pixels followed by the weighted
/// normalized `(x, y)` coordinates of the patch's top-left corner.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub source_mean: f64,
}

fn normalized(coord: usize, max: usize) -> f64 {
    if max == 0 {
        0.0
    } else {
        coord as f64 / max as f64
    }
}

/// Writes the feature for `pixels` at `(left, top)` into `out`, returning the
/// removed mean.
fn write_feature(
    pixels: &[f64],
    left: usize,
    top: usize,
    f: f64,
    geom: &PatchGeometry,
    out: &mut [f64],
) -> f64 {
    let n = pixels.len();
    let mean = pixels.iter().sum::<f64>() / n as f64;
    for (o, v) in out[..n].iter_mut().zip(pixels) {
        *o = v - mean;
    }
    out[n] = f * normalized(left, geom.max_left());
    out[n + 1] = f * normalized(top, geom.max_top());
    mean
}

/// Builds the LR feature for a patch cut from an upscaled LR image.
pub fn make_lr_feature(
    patch_pixels: &[f64],
    index: &PatchIndex,
    f: f64,
    geom: &PatchGeometry,
) -> FeatureVector {
    debug_assert_eq!(patch_pixels.len(), geom.patch_size * geom.patch_size);
    let mut values = vec![0.0; patch_pixels.len() + 2];
    let source_mean = write_feature(patch_pixels, index.left, index.top, f, geom, &mut values);
    FeatureVector {
        values,
        source_mean,
    }
}

/// High-frequency target: HR patch minus the co-located upscaled-LR patch.
pub fn make_hr_residual(hr_patch: &[f64], upscaled_lr_patch: &[f64]) -> Result<ResidualBuffer> {
    if hr_patch.len() != upscaled_lr_patch.len() {
        return Err(Error::invalid("patch lengths differ"));
    }
    let side = (hr_patch.len() as f64).sqrt() as usize;
    if side * side != hr_patch.len() {
        return Err(Error::invalid("patch is not square"));
    }
    let data = hr_patch
        .iter()
        .zip(upscaled_lr_patch)
        .map(|(h, l)| h - l)
        .collect();
    ResidualBuffer::new(side, side, data)
}

/// Where a candidate was cut from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CandidateSource {
    pub image: usize,
    pub top: usize,
    pub left: usize,
}

/// All context patches gathered for one test position, stored as flat
/// row-per-candidate matrices.
#[derive(Clone, Debug)]
pub struct ContextCandidateSet {
    feature_dim: usize,
    patch_len: usize,
    features: Vec<f64>,
    hr: Vec<f64>,
    pub distances: Vec<f64>,
    pub sources: Vec<CandidateSource>,
    /// Test patch position the set was gathered for.
    pub position: PatchIndex,
}

impl ContextCandidateSet {
    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    /// High-frequency HR patch of candidate `i`.
    pub fn hr_patch(&self, i: usize) -> &[f64] {
        &self.hr[i * self.patch_len..(i + 1) * self.patch_len]
    }

    /// Whether candidate `i` sits at exactly the test position.
    pub fn is_position_patch(&self, i: usize) -> bool {
        let s = &self.sources[i];
        s.top == self.position.top && s.left == self.position.left
    }

    pub fn position_patch_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.is_position_patch(i))
            .collect()
    }
}

/// Collects every context patch around `position` from each training image,
/// with features and Euclidean distances to `test_feature`.
pub fn gather_candidates(
    test_feature: &FeatureVector,
    position: &PatchIndex,
    corpus: &[impl AsRef<CorpusEntry>],
    geom: &PatchGeometry,
    f: f64,
) -> Result<ContextCandidateSet> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let p = geom.patch_size;
    let dim = geom.feature_dim();
    if test_feature.values.len() != dim {
        return Err(Error::invalid(format!(
            "test feature has {} entries, geometry expects {dim}",
            test_feature.values.len()
        )));
    }
    let tops = window_positions(position.top, geom.max_top(), geom);
    let lefts = window_positions(position.left, geom.max_left(), geom);
    let n = corpus.len() * tops.len() * lefts.len();

    let mut features = vec![0.0; n * dim];
    let mut hr = vec![0.0; n * p * p];
    let mut distances = Vec::with_capacity(n);
    let mut sources = Vec::with_capacity(n);
    let mut pixels = vec![0.0; p * p];

    for (image, entry) in corpus.iter().enumerate() {
        let entry = entry.as_ref();
        let (w, h) = entry.upscaled_lr.dims();
        if w != geom.image_width || h != geom.image_height {
            return Err(Error::DimensionMismatch {
                expected_width: geom.image_width,
                expected_height: geom.image_height,
                width: w,
                height: h,
            });
        }
        let lr = entry.upscaled_lr.data();
        let res = entry.residual.data();
        for &top in &tops {
            for &left in &lefts {
                let i = sources.len();
                for (r, row) in pixels.chunks_exact_mut(p).enumerate() {
                    let start = (top + r) * w + left;
                    row.copy_from_slice(&lr[start..start + p]);
                    hr[(i * p + r) * p..(i * p + r + 1) * p]
                        .copy_from_slice(&res[start..start + p]);
                }
                let feat = &mut features[i * dim..(i + 1) * dim];
                write_feature(&pixels, left, top, f, geom, feat);
                let d2: f64 = test_feature
                    .values
                    .iter()
                    .zip(feat.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                distances.push(d2.sqrt());
                sources.push(CandidateSource { image, top, left });
            }
        }
    }

    Ok(ContextCandidateSet {
        feature_dim: dim,
        patch_len: p * p,
        features,
        hr,
        distances,
        sources,
        position: *position,
    })
}

/// Averages overlapping patches into a full-size residual image.
pub fn assemble(
    patches: &[(PatchIndex, Vec<f64>)],
    geom: &PatchGeometry,
) -> Result<ResidualBuffer> {
    let (w, h, p) = (geom.image_width, geom.image_height, geom.patch_size);
    let mut sum = vec![0.0; w * h];
    let mut count = vec![0u32; w * h];
    for (idx, values) in patches {
        if values.len() != p * p || idx.top + p > h || idx.left + p > w {
            return Err(Error::invalid(format!(
                "patch at ({}, {}) does not fit the geometry",
                idx.left, idx.top
            )));
        }
        for r in 0..p {
            let row = (idx.top + r) * w + idx.left;
            for c in 0..p {
                sum[row + c] += values[r * p + c];
                count[row + c] += 1;
            }
        }
    }
    if let Some(i) = count.iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!(
            "pixel ({}, {}) is not covered by any patch",
            i % w,
            i / w
        )));
    }
    let data = sum
        .into_iter()
        .zip(count)
        .map(|(s, c)| s / c as f64)
        .collect();
    ResidualBuffer::new(w, h, data)
}
