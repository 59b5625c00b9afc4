use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use tlcr::experiment::{self, ingest, ExperimentSpec, SweepAxis};
use tlcr::image::{bicubic_upscale, degrade};
use tlcr::io::{load_image, save_gray, save_image, LoadedImage};
use tlcr::metrics::evaluate;
use tlcr::synth::synth_faces;

#[derive(Parser)]
#[command(name = "tlcr", version, about = "Context-patch face hallucination")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an image directory and write grayscale HR, LR and bicubic copies.
    Prepare {
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        /// Keep RGB instead of converting to luminance.
        #[arg(long)]
        color: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic aligned face corpus.
    Synth {
        #[arg(long, default_value_t = 400)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        width: usize,
        #[arg(long, default_value_t = 120)]
        height: usize,
        /// png or pgm
        #[arg(long, default_value = "png")]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hallucinate a test split and write images, metrics and a summary.
    Run(RunArgs),
    /// Repeat a run over values of one parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// tau, k, window, f, train_size, rl_iterations or shift
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Block-average downsample one image.
    Degrade {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 4)]
        scale: usize,
    },
    /// Bicubic upscale one image.
    Upscale {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 4)]
        scale: usize,
    },
    /// Score outputs against ground truth, matched by file name (`<id>` or `<id>_final`).
    Metrics {
        outputs: PathBuf,
        truth: PathBuf,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Training corpus directory.
    corpus: Option<PathBuf>,
    /// Spec JSON, or a summary.json from an earlier run. Flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Separate test directory instead of a random split.
    #[arg(long)]
    test_dir: Option<PathBuf>,
    /// Held-out test faces [default: 40]
    #[arg(long)]
    test_count: Option<usize>,
    /// Use only this many training faces
    #[arg(long)]
    train_size: Option<usize>,
    /// Split and subset seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Reconstruct RGB inputs (luminance hallucinated, chroma bicubic)
    #[arg(long)]
    color: bool,
    /// Test misalignment as dx,dy.
    #[arg(long, value_parser = parse_shift, allow_hyphen_values = true)]
    shift: Option<(isize, isize)>,
    /// Magnification [default: 4]
    #[arg(long)]
    scale: Option<usize>,
    /// Patch size [default: 12]
    #[arg(long)]
    patch: Option<usize>,
    /// Patch overlap [default: 4]
    #[arg(long)]
    overlap: Option<usize>,
    /// Context window size; equal to the patch size means position patches only [default: 20]
    #[arg(long)]
    window: Option<usize>,
    /// Step between context patches [default: 2]
    #[arg(long)]
    step: Option<usize>,
    /// Locality regularization [default: 0.04]
    #[arg(long)]
    tau: Option<f64>,
    /// Nearest candidates kept by thresholding [default: 360]
    #[arg(long)]
    k: Option<usize>,
    /// Weight of the patch position in the feature [default: 10]
    #[arg(long)]
    f: Option<f64>,
    /// Reproducing-learning iterations [default: 5]
    #[arg(long)]
    rl_iters: Option<usize>,
}

fn parse_shift(s: &str) -> Result<(isize, isize), String> {
    let (dx, dy) = s.split_once(',').ok_or("expected dx,dy")?;
    let parse = |v: &str| v.trim().parse::<isize>().map_err(|e| format!("'{v}': {e}"));
    Ok((parse(dx)?, parse(dy)?))
}

impl RunArgs {
    fn spec(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::load(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => ExperimentSpec::default(),
        };
        if let Some(dir) = &self.corpus {
            spec.corpus_dir = dir.clone();
        }
        if spec.corpus_dir.as_os_str().is_empty() {
            bail!("no corpus directory given (positional argument or corpus_dir in --config)");
        }
        if let Some(v) = &self.out {
            spec.output_dir = v.clone();
        }
        if let Some(v) = &self.test_dir {
            spec.test_dir = Some(v.clone());
        }
        if let Some(v) = self.test_count {
            spec.test_count = v;
        }
        if let Some(v) = self.train_size {
            spec.train_size = Some(v);
        }
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        if self.color {
            spec.color = true;
        }
        if let Some(v) = self.shift {
            spec.shift = v;
        }
        let c = &mut spec.config;
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { c.$field = v; })*
            };
        }
        set!(scale => scale, patch => patch_size, overlap => overlap, window => window_size,
             step => context_step, tau => tau, k => k, f => f, rl_iters => rl_iterations);
        c.validate()?;
        Ok(spec)
    }
}

fn rescale(
    input: &Path,
    output: &Path,
    op: impl Fn(&tlcr::ImageBuffer) -> tlcr::Result<tlcr::ImageBuffer>,
) -> Result<()> {
    let img = load_image(input)?;
    let out = img
        .map_planes(op)
        .with_context(|| format!("processing {}", input.display()))?;
    save_image(output, &out)?;
    Ok(())
}

fn prepare(input: &Path, scale: usize, color: bool, out: &Path) -> Result<()> {
    let images = ingest(input)?;
    let (w, h) = images[0].1.dims();
    if w % scale != 0 || h % scale != 0 {
        bail!("{w}x{h} images are not divisible by scale {scale}");
    }
    for sub in ["hr", "lr", "bicubic"] {
        fs::create_dir_all(out.join(sub)).with_context(|| format!("creating {}", out.display()))?;
    }
    for (id, img) in images {
        let hr = if color {
            LoadedImage::Color(img.into_color())
        } else {
            LoadedImage::Gray(img.into_luminance())
        };
        let lr = hr.map_planes(|p| degrade(p, scale))?;
        let up = lr.map_planes(|p| bicubic_upscale(p, scale))?;
        let name = format!("{id}.png");
        save_image(out.join("hr").join(&name), &hr)?;
        save_image(out.join("lr").join(&name), &lr)?;
        save_image(out.join("bicubic").join(&name), &up)?;
    }
    Ok(())
}

fn synth(
    count: usize,
    seed: u64,
    width: usize,
    height: usize,
    format: &str,
    out: &Path,
) -> Result<()> {
    if !matches!(format, "png" | "pgm") {
        bail!("unknown format '{format}', expected png or pgm");
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (i, face) in synth_faces(count, seed, width, height).iter().enumerate() {
        save_gray(out.join(format!("face_{i:04}.{format}")), face)?;
    }
    info!("wrote {count} faces to {}", out.display());
    Ok(())
}

fn metrics(outputs: &Path, truth: &Path, out: Option<&Path>) -> Result<()> {
    let truths = ingest(truth)?;
    let mut pairs = Vec::new();
    let mut gt = Vec::new();
    for (id, t) in truths {
        // accepts both plain names and the `<id>_final` files written by `run`
        let candidates = ["", "_final"]
            .iter()
            .flat_map(|suffix| {
                ["png", "pgm", "ppm"].map(|ext| outputs.join(format!("{id}{suffix}.{ext}")))
            })
            .collect::<Vec<_>>();
        // truth images without an output (e.g. training faces) are skipped
        if let Some(path) = candidates.iter().find(|p| p.is_file()) {
            pairs.push((id, load_image(path)?.into_luminance()));
            gt.push(t.into_luminance());
        }
    }
    if pairs.is_empty() {
        bail!(
            "no file in {} matches a name in {}",
            outputs.display(),
            truth.display()
        );
    }
    let report = evaluate(&pairs, &gt)?;
    match out {
        Some(path) => {
            let file =
                fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            report.write_csv(file)?;
        }
        None => print!("{}", report.to_csv_string()?),
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting thread pool")?;

    pool.install(|| match cli.command {
        Command::Prepare {
            input,
            scale,
            color,
            out,
        } => prepare(&input, scale, color, &out),
        Command::Synth {
            count,
            seed,
            width,
            height,
            format,
            out,
        } => synth(count, seed, width, height, &format, &out),
        Command::Run(args) => {
            let summary = experiment::run(&args.spec()?)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::Sweep { run, axis, values } => {
            let rows = experiment::sweep(&run.spec()?, axis, &values)?;
            println!("{}", serde_json::to_string_pretty(&rows)?);
            Ok(())
        }
        Command::Degrade {
            input,
            output,
            scale,
        } => rescale(&input, &output, |p| degrade(p, scale)),
        Command::Upscale {
            input,
            output,
            scale,
        } => rescale(&input, &output, |p| bicubic_upscale(p, scale)),
        Command::Metrics {
            outputs,
            truth,
            out,
        } => metrics(&outputs, &truth, out.as_deref()),
    })
}
