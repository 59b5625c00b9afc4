//! Dataset-level runs: ingestion, seeded train/test splits, evaluation of a
//! configuration, parameter sweeps and on-disk reports.
//!
//! A run directory holds
//!
//! ```text
//! summary.json            spec, split, mean metrics, timings
//! metrics.csv             final estimates
//! metrics_bicubic.csv     bicubic baseline
//! metrics_iter<i>.csv     reproducing-learning iteration i (0 = plain pass)
//! rl_trend.csv            mean metrics per iteration
//! images/<id>_{lr,bicubic,iter<i>,final}.png
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{
    bicubic_upscale, degrade, rgb_to_yuv, translate, yuv_to_rgb, ColorImage, ImageBuffer,
};
use crate::io::{load_image, save_image, LoadedImage};
use crate::metrics::{evaluate, QualityReport};
use crate::pipeline::{hallucinate, prepare_corpus, HallucinationConfig, TrainingCorpus};

/// Everything needed to reproduce one run. Serialized into `summary.json`;
/// feeding that file back through [`ExperimentSpec::from_json`] repeats the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Aligned HR faces. Used for training, and for testing when `test_dir` is unset.
    pub corpus_dir: PathBuf,
    /// Separate HR test faces; disables the random split.
    pub test_dir: Option<PathBuf>,
    /// Size of the held-out test set when splitting `corpus_dir`.
    pub test_count: usize,
    /// Keep only this many (randomly chosen) training faces.
    pub train_size: Option<usize>,
    pub seed: u64,
    /// Luminance-only reconstruction of RGB inputs.
    pub color: bool,
    /// Integer translation `(dx, dy)` applied to test faces before degradation.
    pub shift: (isize, isize),
    pub config: HallucinationConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            corpus_dir: PathBuf::new(),
            test_dir: None,
            test_count: 40,
            train_size: None,
            seed: 0,
            color: false,
            shift: (0, 0),
            config: HallucinationConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentSpec {
    /// Parses a spec, or the `spec` member of a run summary.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let value = match value {
            serde_json::Value::Object(mut map) if map.contains_key("spec") => {
                map.remove("spec").expect("checked")
            }
            other => other,
        };
        let spec: ExperimentSpec = serde_json::from_value(value)?;
        spec.config.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Loads every PNG/PGM/PPM in `dir`, sorted by file name. All images must
/// share one size.
pub fn ingest(dir: impl AsRef<Path>) -> Result<Vec<(String, LoadedImage)>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension()
                        .and_then(|e| e.to_str())
                        .map(str::to_ascii_lowercase)
                        .as_deref(),
                    Some("png" | "pgm" | "ppm")
                )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid(format!("no images in {}", dir.display())));
    }

    let mut images = Vec::with_capacity(paths.len());
    for path in &paths {
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        images.push((id, load_image(path)?));
    }

    let mut by_dims: BTreeMap<(usize, usize), Vec<&str>> = BTreeMap::new();
    for (id, img) in &images {
        by_dims.entry(img.dims()).or_default().push(id);
    }
    if by_dims.len() > 1 {
        let listing: Vec<String> = by_dims
            .iter()
            .map(|((w, h), ids)| format!("{w}x{h}: {}", ids.join(", ")))
            .collect();
        return Err(Error::invalid(format!(
            "images in {} have mixed dimensions ({})",
            dir.display(),
            listing.join("; ")
        )));
    }
    Ok(images)
}

/// Seeded shuffle of `0..n` into `(train, test)`, both in shuffled order.
pub fn split_indices(n: usize, test_count: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if test_count >= n {
        return Err(Error::invalid(format!(
            "cannot hold out {test_count} of {n} images and still train"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = order.split_off(test_count);
    Ok((train, order))
}

/// Result for one test face.
#[derive(Clone, Debug)]
pub struct TestOutcome {
    pub id: String,
    pub truth: LoadedImage,
    pub lr: LoadedImage,
    pub bicubic: LoadedImage,
    /// Estimates per reproducing-learning iteration; the last is final.
    pub trace: Vec<LoadedImage>,
}

/// Metrics over a test set.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub bicubic: QualityReport,
    /// One report per iteration, iteration 0 first.
    pub iterations: Vec<QualityReport>,
    pub outcomes: Vec<TestOutcome>,
}

impl Evaluation {
    pub fn final_report(&self) -> &QualityReport {
        self.iterations.last().expect("at least one iteration")
    }

    /// Mean PSNR gain of the final estimate over iteration 0.
    pub fn rl_gain_db(&self) -> f64 {
        self.final_report().mean_psnr_db - self.iterations[0].mean_psnr_db
    }
}

fn luminance(img: &LoadedImage) -> ImageBuffer {
    img.clone().into_luminance()
}

fn process_one(
    id: &str,
    truth: &LoadedImage,
    corpus: &TrainingCorpus,
    cfg: &HallucinationConfig,
    shift: (isize, isize),
) -> Result<TestOutcome> {
    let scale = cfg.scale;
    let (dx, dy) = shift;
    match truth {
        LoadedImage::Gray(hr) => {
            let truth = translate(hr, dx, dy);
            let lr = degrade(&truth, scale).map_err(|e| e.at("degrade", id))?;
            let bicubic = bicubic_upscale(&lr, scale).map_err(|e| e.at("upscale", id))?;
            let result = hallucinate(&lr, corpus, cfg).map_err(|e| e.at("hallucinate", id))?;
            Ok(TestOutcome {
                id: id.to_string(),
                truth: LoadedImage::Gray(truth),
                lr: LoadedImage::Gray(lr),
                bicubic: LoadedImage::Gray(bicubic),
                trace: result.trace.into_iter().map(LoadedImage::Gray).collect(),
            })
        }
        LoadedImage::Color(hr) => {
            let truth = LoadedImage::Color(hr.clone()).map_planes(|p| Ok(translate(p, dx, dy)))?;
            let lr = truth
                .map_planes(|p| degrade(p, scale))
                .map_err(|e| e.at("degrade", id))?;
            let bicubic = lr
                .map_planes(|p| bicubic_upscale(p, scale))
                .map_err(|e| e.at("upscale", id))?;
            // luminance is hallucinated, chroma stays bicubic
            let yuv = rgb_to_yuv(&lr.clone().into_color());
            let result =
                hallucinate(&yuv.plane(0), corpus, cfg).map_err(|e| e.at("hallucinate", id))?;
            let u = bicubic_upscale(&yuv.plane(1), scale)?;
            let v = bicubic_upscale(&yuv.plane(2), scale)?;
            let trace = result
                .trace
                .into_iter()
                .map(|y| {
                    ColorImage::from_planes([y, u.clone(), v.clone()])
                        .map(|c| LoadedImage::Color(yuv_to_rgb(&c)))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TestOutcome {
                id: id.to_string(),
                truth,
                lr,
                bicubic,
                trace,
            })
        }
    }
}

/// Hallucinates every test face with a corpus built from `train` and scores
/// bicubic and each iteration against the (shifted) ground truth. Color
/// outputs are scored on luminance.
pub fn evaluate_split(
    train: &[ImageBuffer],
    test: &[(String, LoadedImage)],
    cfg: &HallucinationConfig,
    shift: (isize, isize),
) -> Result<Evaluation> {
    let corpus = prepare_corpus(train.to_vec(), cfg)?;
    let outcomes = test
        .iter()
        .map(|(id, truth)| process_one(id, truth, &corpus, cfg, shift))
        .collect::<Result<Vec<_>>>()?;
    score(outcomes)
}

fn score(outcomes: Vec<TestOutcome>) -> Result<Evaluation> {
    let truths: Vec<ImageBuffer> = outcomes.iter().map(|o| luminance(&o.truth)).collect();
    let report = |pick: &dyn Fn(&TestOutcome) -> &LoadedImage| -> Result<QualityReport> {
        let outs: Vec<(String, ImageBuffer)> = outcomes
            .iter()
            .map(|o| (o.id.clone(), luminance(pick(o))))
            .collect();
        evaluate(&outs, &truths)
    };
    let bicubic = report(&|o| &o.bicubic)?;
    let n_iter = outcomes.first().map_or(1, |o| o.trace.len());
    let iterations = (0..n_iter)
        .map(|i| report(&|o: &TestOutcome| &o.trace[i]))
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation {
        bicubic,
        iterations,
        outcomes,
    })
}

/// Gray convenience wrapper around [`evaluate_split`].
pub fn evaluate_gray(
    train: &[ImageBuffer],
    test: &[ImageBuffer],
    cfg: &HallucinationConfig,
    shift: (isize, isize),
) -> Result<Evaluation> {
    let test: Vec<(String, LoadedImage)> = test
        .iter()
        .enumerate()
        .map(|(i, img)| (format!("test_{i:04}"), LoadedImage::Gray(img.clone())))
        .collect();
    evaluate_split(train, &test, cfg, shift)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeanScores {
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
}

impl From<&QualityReport> for MeanScores {
    fn from(r: &QualityReport) -> Self {
        Self {
            mean_psnr_db: r.mean_psnr_db,
            mean_ssim: r.mean_ssim,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub spec: ExperimentSpec,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub bicubic: MeanScores,
    pub per_iteration: Vec<MeanScores>,
    #[serde(rename = "final")]
    pub final_scores: MeanScores,
    /// Mean PSNR never decreased across reproducing-learning iterations.
    pub rl_monotone: bool,
    pub timings_ms: BTreeMap<String, u128>,
}

type Named = (String, LoadedImage);

struct Dataset {
    train_ids: Vec<String>,
    train: Vec<ImageBuffer>,
    test: Vec<(String, LoadedImage)>,
}

fn load_dataset(spec: &ExperimentSpec) -> Result<Dataset> {
    let corpus = ingest(&spec.corpus_dir)?;
    let (mut train, test): (Vec<Named>, Vec<Named>) = match &spec.test_dir {
        Some(dir) => (corpus, ingest(dir)?),
        None => {
            let (tr, te) = split_indices(corpus.len(), spec.test_count, spec.seed)?;
            let pick = |idx: &[usize]| idx.iter().map(|&i| corpus[i].clone()).collect::<Vec<_>>();
            let mut test = pick(&te);
            test.sort_by(|a, b| a.0.cmp(&b.0));
            (pick(&tr), test)
        }
    };
    if let Some(m) = spec.train_size {
        if m == 0 || m > train.len() {
            return Err(Error::invalid(format!(
                "train size {m} outside 1..={}",
                train.len()
            )));
        }
        if spec.test_dir.is_some() {
            // separate test set: choose the subset with the seed
            train.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
        }
        train.truncate(m);
    }
    train.sort_by(|a, b| a.0.cmp(&b.0));
    let test = if spec.color {
        test.into_iter()
            .map(|(id, img)| (id, LoadedImage::Color(img.into_color())))
            .collect()
    } else {
        test.into_iter()
            .map(|(id, img)| (id, LoadedImage::Gray(img.into_luminance())))
            .collect()
    };
    Ok(Dataset {
        train_ids: train.iter().map(|(id, _)| id.clone()).collect(),
        train: train
            .into_iter()
            .map(|(_, img)| img.into_luminance())
            .collect(),
        test,
    })
}

fn write_csv(path: &Path, report: &QualityReport) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    report.write_csv(std::io::BufWriter::new(file))
}

fn write_outcome(images: &Path, o: &TestOutcome) -> Result<()> {
    let save = |name: String, img: &LoadedImage| save_image(images.join(name), img);
    save(format!("{}_lr.png", o.id), &o.lr)?;
    save(format!("{}_bicubic.png", o.id), &o.bicubic)?;
    for (i, est) in o.trace.iter().enumerate() {
        save(format!("{}_iter{i}.png", o.id), est)?;
    }
    save(
        format!("{}_final.png", o.id),
        o.trace.last().expect("non-empty trace"),
    )
}

/// Runs one experiment and writes its artifacts under `spec.output_dir`.
/// Images are written as each test face completes, so a failure leaves the
/// finished ones in place.
pub fn run(spec: &ExperimentSpec) -> Result<RunSummary> {
    let total = Instant::now();
    spec.config.validate()?;
    let out = &spec.output_dir;
    let images_dir = out.join("images");
    fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;

    let t = Instant::now();
    let data = load_dataset(spec)?;
    let corpus =
        prepare_corpus(data.train.clone(), &spec.config).map_err(|e| e.at("prepare", "corpus"))?;
    let mut timings = BTreeMap::new();
    timings.insert("prepare".to_string(), t.elapsed().as_millis());
    info!(
        "{} training faces, {} test faces -> {}",
        corpus.len(),
        data.test.len(),
        out.display()
    );

    let t = Instant::now();
    let mut outcomes = Vec::with_capacity(data.test.len());
    for (id, truth) in &data.test {
        let o = process_one(id, truth, &corpus, &spec.config, spec.shift)?;
        write_outcome(&images_dir, &o).map_err(|e| e.at("write", id))?;
        outcomes.push(o);
    }
    timings.insert("hallucinate".to_string(), t.elapsed().as_millis());

    let test_ids = outcomes.iter().map(|o| o.id.clone()).collect();
    let eval = score(outcomes)?;
    write_csv(&out.join("metrics.csv"), eval.final_report())?;
    write_csv(&out.join("metrics_bicubic.csv"), &eval.bicubic)?;
    for (i, r) in eval.iterations.iter().enumerate() {
        write_csv(&out.join(format!("metrics_iter{i}.csv")), r)?;
    }

    let per_iteration: Vec<MeanScores> = eval.iterations.iter().map(MeanScores::from).collect();
    let rl_monotone = per_iteration
        .windows(2)
        .all(|w| w[1].mean_psnr_db >= w[0].mean_psnr_db);
    let mut trend = String::from("iteration,mean_psnr_db,mean_ssim,gain_db\n");
    for (i, s) in per_iteration.iter().enumerate() {
        trend.push_str(&format!(
            "{i},{:.6},{:.6},{:.6}\n",
            s.mean_psnr_db,
            s.mean_ssim,
            s.mean_psnr_db - per_iteration[0].mean_psnr_db
        ));
    }
    let trend_path = out.join("rl_trend.csv");
    fs::write(&trend_path, trend).map_err(|e| Error::io(&trend_path, e))?;

    timings.insert("total".to_string(), total.elapsed().as_millis());
    let summary = RunSummary {
        spec: spec.clone(),
        train_ids: data.train_ids,
        test_ids,
        bicubic: (&eval.bicubic).into(),
        final_scores: eval.final_report().into(),
        per_iteration,
        rl_monotone,
        timings_ms: timings,
    };
    let path = out.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

/// Parameter swept by [`sweep`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Tau,
    K,
    Window,
    F,
    TrainSize,
    RlIterations,
    /// Diagonal test misalignment in pixels; runs both position-patch and
    /// context-patch windows.
    Shift,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Tau => "tau",
            SweepAxis::K => "k",
            SweepAxis::Window => "window",
            SweepAxis::F => "f",
            SweepAxis::TrainSize => "train_size",
            SweepAxis::RlIterations => "rl_iterations",
            SweepAxis::Shift => "shift",
        }
    }

    fn integral(self) -> bool {
        !matches!(self, SweepAxis::Tau | SweepAxis::F)
    }

    /// Specs for one sweep value, with the sub-directory label of each.
    fn apply(self, base: &ExperimentSpec, value: f64) -> Result<Vec<(String, ExperimentSpec)>> {
        if !value.is_finite() || (self.integral() && value.fract() != 0.0) {
            return Err(Error::invalid(format!(
                "{value} is not a valid {} value",
                self.name()
            )));
        }
        let nonneg = |v: f64| {
            if v < 0.0 {
                Err(Error::invalid(format!(
                    "{} must be non-negative, got {v}",
                    self.name()
                )))
            } else {
                Ok(v)
            }
        };
        let mut spec = base.clone();
        let label = format!("{}_{value}", self.name());
        match self {
            SweepAxis::Tau => spec.config.tau = nonneg(value)?,
            SweepAxis::F => spec.config.f = nonneg(value)?,
            SweepAxis::K => spec.config.k = nonneg(value)? as usize,
            SweepAxis::Window => spec.config.window_size = nonneg(value)? as usize,
            SweepAxis::TrainSize => spec.train_size = Some(nonneg(value)? as usize),
            SweepAxis::RlIterations => spec.config.rl_iterations = nonneg(value)? as usize,
            SweepAxis::Shift => {
                let v = value as isize;
                spec.shift = (v, v);
                let mut position = spec.clone();
                position.config.window_size = position.config.patch_size;
                return Ok(vec![
                    (format!("{label}/position"), position),
                    (format!("{label}/context"), spec),
                ]);
            }
        }
        spec.config.validate()?;
        Ok(vec![(label, spec)])
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "tau" => SweepAxis::Tau,
            "k" | "K" => SweepAxis::K,
            "window" => SweepAxis::Window,
            "f" => SweepAxis::F,
            "train_size" | "train-size" => SweepAxis::TrainSize,
            "rl_iterations" | "rl-iterations" | "rl-iters" => SweepAxis::RlIterations,
            "shift" => SweepAxis::Shift,
            other => return Err(Error::invalid(format!("unknown sweep axis '{other}'"))),
        })
    }
}

/// One row of a sweep table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub value: f64,
    pub bicubic: MeanScores,
    #[serde(rename = "final")]
    pub final_scores: MeanScores,
    pub per_iteration: Vec<MeanScores>,
}

/// Runs `base` once per value into `<output_dir>/<axis>_<value>[/...]`.
/// Sub-runs that already have a `summary.json` are reused, so deleting one
/// sub-directory and re-running regenerates only that sub-run.
pub fn sweep(base: &ExperimentSpec, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::invalid("sweep needs at least one value"));
    }
    let mut rows = Vec::new();
    for &value in values {
        for (label, mut spec) in axis.apply(base, value)? {
            spec.output_dir = base.output_dir.join(&label);
            let summary_path = spec.output_dir.join("summary.json");
            let summary: RunSummary = if summary_path.is_file() {
                info!("reusing {}", summary_path.display());
                let text =
                    fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
                serde_json::from_str(&text)?
            } else {
                run(&spec)?
            };
            rows.push(SweepRow {
                label,
                value,
                bicubic: summary.bicubic,
                final_scores: summary.final_scores,
                per_iteration: summary.per_iteration,
            });
        }
    }

    let mut table = String::from("label,value,bicubic_psnr_db,psnr_db,ssim\n");
    for r in &rows {
        table.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6}\n",
            r.label,
            r.value,
            r.bicubic.mean_psnr_db,
            r.final_scores.mean_psnr_db,
            r.final_scores.mean_ssim
        ));
    }
    let path = base.output_dir.join(format!("sweep_{}.csv", axis.name()));
    fs::create_dir_all(&base.output_dir).map_err(|e| Error::io(&base.output_dir, e))?;
    fs::write(&path, table).map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}
