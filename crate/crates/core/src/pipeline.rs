//! End-to-end hallucination: corpus preparation, the per-patch
//! representation loop, overlap averaging and reproducing learning.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{
    bicubic_upscale, degrade, ensure_same_dims, rgb_to_yuv, yuv_to_rgb, ColorImage, ImageBuffer,
    ResidualBuffer,
};
use crate::patches::{assemble, enumerate_grid, gather_candidates, make_lr_feature, PatchGeometry};
use crate::tlcr::{predict_from_set, represent_or_uniform, SolverConfig, DEFAULT_RIDGE_EPS};

/// How reproduced estimates enter the training set between iterations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReproduceMode {
    /// A single reproduced slot, overwritten every iteration.
    #[default]
    Replace,
    /// Every estimate is appended.
    Accumulate,
}

/// All tunable parameters of a hallucination run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HallucinationConfig {
    pub scale: usize,
    pub patch_size: usize,
    pub overlap: usize,
    pub window_size: usize,
    pub context_step: usize,
    pub tau: f64,
    pub k: usize,
    pub f: f64,
    pub rl_iterations: usize,
    pub ridge_eps: f64,
    pub reproduce_mode: ReproduceMode,
}

impl Default for HallucinationConfig {
    fn default() -> Self {
        Self {
            scale: 4,
            patch_size: 12,
            overlap: 4,
            window_size: 20,
            context_step: 2,
            tau: 0.04,
            k: 360,
            f: 10.0,
            rl_iterations: 5,
            ridge_eps: DEFAULT_RIDGE_EPS,
            reproduce_mode: ReproduceMode::Replace,
        }
    }
}

impl HallucinationConfig {
    pub fn geometry(&self, image_width: usize, image_height: usize) -> Result<PatchGeometry> {
        PatchGeometry::new(
            self.patch_size,
            self.overlap,
            self.window_size,
            self.context_step,
            image_width,
            image_height,
        )
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            tau: self.tau,
            k: self.k,
            ridge_eps: self.ridge_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale < 2 {
            return Err(Error::invalid("scale must be at least 2"));
        }
        if self.k == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if !(self.tau >= 0.0 && self.f >= 0.0 && self.ridge_eps >= 0.0) {
            return Err(Error::invalid("tau, f and ridge_eps must be non-negative"));
        }
        // patch layout checks that do not depend on the image size
        self.geometry(self.window_size, self.window_size)
            .map(|_| ())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Reproduced,
}

/// One HR training face with its synthesized LR counterpart.
#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub hr: ImageBuffer,
    /// `bicubic_upscale(degrade(hr))`
    pub upscaled_lr: ImageBuffer,
    /// `hr - upscaled_lr`
    pub residual: ResidualBuffer,
    pub provenance: Provenance,
}

impl AsRef<CorpusEntry> for CorpusEntry {
    fn as_ref(&self) -> &CorpusEntry {
        self
    }
}

impl CorpusEntry {
    pub fn from_hr(hr: ImageBuffer, scale: usize, provenance: Provenance) -> Result<Self> {
        let upscaled_lr = bicubic_upscale(&degrade(&hr, scale)?, scale)?;
        let residual = hr.residual_from(&upscaled_lr)?;
        Ok(Self {
            hr,
            upscaled_lr,
            residual,
            provenance,
        })
    }
}

/// Aligned training faces sharing one geometry. Entries are reference
/// counted so reproducing learning can extend a corpus without copying it.
#[derive(Clone, Debug)]
pub struct TrainingCorpus {
    entries: Vec<Arc<CorpusEntry>>,
    pub geometry: PatchGeometry,
    pub scale: usize,
    pub f: f64,
}

impl TrainingCorpus {
    pub fn entries(&self) -> &[Arc<CorpusEntry>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn reproduced_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.provenance == Provenance::Reproduced)
            .count()
    }

    /// Same corpus with a different window/patch geometry.
    pub fn with_geometry(&self, geometry: PatchGeometry) -> Result<Self> {
        geometry.validate()?;
        ensure_same_dims(
            (self.geometry.image_width, self.geometry.image_height),
            (geometry.image_width, geometry.image_height),
        )?;
        Ok(Self {
            geometry,
            ..self.clone()
        })
    }

    /// Adds a reproduced estimate according to `mode`.
    pub fn reproduce(&mut self, estimate: ImageBuffer, mode: ReproduceMode) -> Result<()> {
        ensure_same_dims(
            (self.geometry.image_width, self.geometry.image_height),
            estimate.dims(),
        )?;
        let entry = Arc::new(CorpusEntry::from_hr(
            estimate,
            self.scale,
            Provenance::Reproduced,
        )?);
        match mode {
            ReproduceMode::Replace => {
                match self
                    .entries
                    .iter()
                    .position(|e| e.provenance == Provenance::Reproduced)
                {
                    Some(i) => self.entries[i] = entry,
                    None => self.entries.push(entry),
                }
            }
            ReproduceMode::Accumulate => self.entries.push(entry),
        }
        Ok(())
    }
}

/// Synthesizes LR counterparts and residuals for a set of HR faces.
pub fn prepare_corpus(
    hr_images: Vec<ImageBuffer>,
    cfg: &HallucinationConfig,
) -> Result<TrainingCorpus> {
    cfg.validate()?;
    let first = hr_images.first().ok_or(Error::EmptyCorpus)?;
    let (w, h) = first.dims();
    for img in &hr_images {
        ensure_same_dims((w, h), img.dims())?;
    }
    let geometry = cfg.geometry(w, h)?;
    let entries = hr_images
        .into_par_iter()
        .map(|hr| CorpusEntry::from_hr(hr, cfg.scale, Provenance::Original).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainingCorpus {
        entries,
        geometry,
        scale: cfg.scale,
        f: cfg.f,
    })
}

fn check_input(lr: &ImageBuffer, corpus: &TrainingCorpus) -> Result<()> {
    let g = &corpus.geometry;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    ensure_same_dims(
        (g.image_width / corpus.scale, g.image_height / corpus.scale),
        lr.dims(),
    )
}

/// One pass of thresholded context-patch hallucination.
///
/// Patches are solved in parallel; the assembly visits them in grid order so
/// the result does not depend on the thread count.
pub fn hallucinate_once(
    lr_input: &ImageBuffer,
    corpus: &TrainingCorpus,
    cfg: &HallucinationConfig,
) -> Result<ImageBuffer> {
    check_input(lr_input, corpus)?;
    let geom = &corpus.geometry;
    let p = geom.patch_size;
    let solver = cfg.solver();
    let upscaled = bicubic_upscale(lr_input, corpus.scale)?;
    let grid = enumerate_grid(geom)?;

    let patches = grid
        .par_iter()
        .map(|idx| {
            let pixels = upscaled.patch(idx.left, idx.top, p);
            let feature = make_lr_feature(&pixels, idx, corpus.f, geom);
            let set = gather_candidates(&feature, idx, corpus.entries(), geom, corpus.f)?;
            let weights = represent_or_uniform(&feature.values, &set, &solver)?;
            Ok((*idx, predict_from_set(&weights, &set)))
        })
        .collect::<Result<Vec<_>>>()?;

    let residual = assemble(&patches, geom)?;
    upscaled.add_residual(&residual)
}

/// Final estimate plus every intermediate estimate (iteration 0 first).
#[derive(Clone, Debug)]
pub struct Hallucination {
    pub image: ImageBuffer,
    pub trace: Vec<ImageBuffer>,
}

/// Hallucination with reproducing learning: after each pass the estimate is
/// fed back into the training set and the original input is reconstructed
/// again.
pub fn hallucinate(
    lr_input: &ImageBuffer,
    corpus: &TrainingCorpus,
    cfg: &HallucinationConfig,
) -> Result<Hallucination> {
    let mut estimate = hallucinate_once(lr_input, corpus, cfg)?;
    let mut trace = vec![estimate.clone()];
    let mut working = corpus.clone();
    for _ in 0..cfg.rl_iterations {
        working.reproduce(estimate, cfg.reproduce_mode)?;
        estimate = hallucinate_once(lr_input, &working, cfg)?;
        trace.push(estimate.clone());
    }
    Ok(Hallucination {
        image: estimate,
        trace,
    })
}

/// Luminance-only color hallucination, returned in YUV: `Y` is hallucinated,
/// `U` and `V` are bicubic-upscaled.
pub fn hallucinate_yuv(
    lr_input: &ColorImage,
    corpus: &TrainingCorpus,
    cfg: &HallucinationConfig,
) -> Result<ColorImage> {
    let yuv = rgb_to_yuv(lr_input);
    let y = hallucinate(&yuv.plane(0), corpus, cfg)?.image;
    let u = bicubic_upscale(&yuv.plane(1), corpus.scale)?;
    let v = bicubic_upscale(&yuv.plane(2), corpus.scale)?;
    ColorImage::from_planes([y, u, v])
}

/// RGB in, RGB out; see [`hallucinate_yuv`].
pub fn hallucinate_color(
    lr_input: &ColorImage,
    corpus: &TrainingCorpus,
    cfg: &HallucinationConfig,
) -> Result<ColorImage> {
    Ok(yuv_to_rgb(&hallucinate_yuv(lr_input, corpus, cfg)?))
}
