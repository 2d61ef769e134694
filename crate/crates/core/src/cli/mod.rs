//! Command-line front end. Every command prints JSON on stdout; logs go to
//! stderr. Exit codes: 0 success, 1 error, 2 partial result.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::{json, Value};

use crate::config::{RunConfig, THREADS_ENV};
use crate::error::{Error, Result};
use crate::gradcheck::{gradcheck_cdf_loss, seeded_pair, GradcheckOptions, Stencil};
use crate::image::{
    clamp_long_side, equalize_hist, load_image, probe_bit_depth, save_image, BitDepth, ImageF,
};
use crate::metrics::{evaluate_dir, evaluate_pair, DirReport, MetricOptions, PairReport};
use crate::softhist::{cdf_loss, hist_match_gd, soft_histogram, HistConfig, Kernel};
use crate::tiler::{
    compute_grid, parse_operator, seam_energy, tile_translate_with, MaskKind, PatchOperator,
    TileOptions, ALT_STRIDE, DEFAULT_SEAM_BAND, DEFAULT_STRIDE,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_PARTIAL: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "tilegraft",
    version,
    about = "Tiled gray-to-colour translation, soft-histogram losses and image metrics",
    after_help = "Environment:\n  TILEGRAFT_THREADS  Cap on worker threads (0 = one per core) [default: 0]\n  RUST_LOG           Log filter for stderr output"
)]
pub struct Cli {
    /// JSON run configuration; explicit flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker thread cap, 0 = one per core [default: 0]
    #[arg(long, global = true, env = THREADS_ENV, value_name = "N")]
    pub threads: Option<usize>,

    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Colourise a gray image patch by patch with feathered blending.
    Translate(TranslateArgs),
    /// PSNR, SSIM and angular error for a file pair or two directories.
    Metrics(MetricsArgs),
    /// Soft histogram and CDF of an image, optionally the CDF loss to a target.
    Hist(HistArgs),
    /// Check the analytic CDF-loss gradient against finite differences.
    Gradcheck(GradcheckArgs),
    /// Histogram-equalise a single-channel image.
    Equalize(EqualizeArgs),
    /// Downscale so that the long side is at most --max-side.
    Resize(ResizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MaskArg {
    Hann,
    Box,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    /// Single-channel input image (PNG or PFM).
    pub input: Option<PathBuf>,
    /// RGB output image (.png or .pfm).
    pub output: Option<PathBuf>,
    /// Patch operator: identity | lut:<file> | toyconv:<file> | subprocess:<command> [default: identity]
    #[arg(long, value_name = "SPEC")]
    pub op: Option<String>,
    /// Patch size P in pixels [default: 256]
    #[arg(long, value_name = "P")]
    pub patch: Option<usize>,
    /// Stride S in pixels; 240 and 222 give 16 and 34 px overlap at P=256 [default: 240]
    #[arg(long, value_name = "S")]
    pub stride: Option<usize>,
    /// Floor of the blending mask [default: 1e-4]
    #[arg(long, value_name = "EPS")]
    pub epsilon: Option<f64>,
    /// Blending mask [default: hann]
    #[arg(long, value_enum)]
    pub mask: Option<MaskArg>,
    /// Output sample depth: 8, 16 or float [default: same as input; float needs .pfm]
    #[arg(long)]
    pub depth: Option<BitDepth>,
    /// Write the seam-energy diagnostic as JSON to FILE.
    #[arg(long, value_name = "FILE")]
    pub seam_report: Option<PathBuf>,
    /// Seam-energy band half-width in pixels [default: 2]
    #[arg(long, value_name = "PX", default_value_t = DEFAULT_SEAM_BAND, hide_default_value = true)]
    pub seam_band: usize,
    /// Also run strides 222 and 240 and report seam energy for both.
    #[arg(long)]
    pub stride_sweep: bool,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Predicted image, or directory of predictions.
    pub pred: PathBuf,
    /// Ground-truth image, or directory paired by file stem.
    pub gt: PathBuf,
    /// Decode sRGB to linear light before measuring [default: off, metrics use encoded values]
    #[arg(long)]
    pub linear: bool,
}

#[derive(Debug, Args, Default)]
pub struct HistFlags {
    /// Number of bins B [default: 64]
    #[arg(long, value_name = "B")]
    pub bins: Option<usize>,
    /// Kernel temperature tau [default: 0.02]
    #[arg(long, value_name = "TAU")]
    pub tau: Option<f64>,
    /// Binning kernel: logistic or triangular [default: logistic]
    #[arg(long)]
    pub kernel: Option<Kernel>,
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true)]
pub struct HistArgs {
    #[command(subcommand)]
    pub action: Option<HistAction>,
    /// Image to histogram.
    pub image: Option<PathBuf>,
    /// Optional target; adds the CDF loss between the two.
    pub target: Option<PathBuf>,
    #[command(flatten)]
    pub hist: HistFlags,
}

#[derive(Debug, Subcommand)]
pub enum HistAction {
    /// Push the source's pixels towards the target's CDF by gradient descent.
    Match(MatchArgs),
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    pub src: PathBuf,
    pub target: PathBuf,
    /// Matched image [default: <src stem>.matched.<ext> next to src]
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Loss trace JSON [default: <output stem>.trace.json next to output]
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    /// Gradient steps [default: 500]
    #[arg(long, default_value_t = 500, hide_default_value = true)]
    pub steps: usize,
    /// Per-pixel learning rate, halved whenever a step would raise the loss [default: 0.5]
    #[arg(long, default_value_t = 0.5, hide_default_value = true)]
    pub lr: f64,
    /// Output sample depth: 8, 16 or float [default: same as src]
    #[arg(long)]
    pub depth: Option<BitDepth>,
    #[command(flatten)]
    pub hist: HistFlags,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Seed of the random prediction/target pair [default: 0]
    #[arg(long, default_value_t = 0, hide_default_value = true)]
    pub seed: u64,
    /// Side of the square RGB test images [default: 64]
    #[arg(long, default_value_t = 64, hide_default_value = true)]
    pub size: usize,
    /// Number of probed samples [default: 100]
    #[arg(long, default_value_t = 100, hide_default_value = true)]
    pub samples: usize,
    /// Finite-difference step [default: 1e-3]
    #[arg(long, default_value_t = 1e-3, hide_default_value = true)]
    pub step: f64,
    /// Central-difference stencil: 2 or 4 points [default: 4]
    #[arg(long, default_value = "4", hide_default_value = true)]
    pub stencil: Stencil,
    /// Pass threshold on the max relative error [default: 1e-4]
    #[arg(long, default_value_t = 1e-4, hide_default_value = true)]
    pub tolerance: f64,
    /// Include every probe in the JSON report.
    #[arg(long)]
    pub probes: bool,
    /// Also probe samples whose stencil crosses a kink of the L1 loss
    /// (where a CDF difference changes sign); skipped by default.
    #[arg(long)]
    pub keep_kinks: bool,
    #[command(flatten)]
    pub hist: HistFlags,
}

#[derive(Debug, Args)]
pub struct EqualizeArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Output sample depth: 8, 16 or float [default: same as input]
    #[arg(long)]
    pub depth: Option<BitDepth>,
}

#[derive(Debug, Args)]
pub struct ResizeArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Maximum long side in pixels [default: 512]
    #[arg(long, default_value_t = 512, hide_default_value = true)]
    pub max_side: usize,
    /// Output sample depth: 8, 16 or float [default: same as input]
    #[arg(long)]
    pub depth: Option<BitDepth>,
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("json: {e}")))?;
    println!("{text}");
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("json: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Explicit depth, else float for a `.pfm` output, else the input's PNG depth
/// (16 when the input was float).
fn output_depth(flag: Option<BitDepth>, input: &Path, output: &Path) -> Result<BitDepth> {
    if let Some(d) = flag {
        return Ok(d);
    }
    if has_ext(output, "pfm") {
        return Ok(BitDepth::Float);
    }
    Ok(match probe_bit_depth(input)? {
        BitDepth::Float => BitDepth::Sixteen,
        d => d,
    })
}

fn hist_config(flags: &HistFlags, cfg: &RunConfig) -> Result<HistConfig> {
    let hc = HistConfig {
        bins: flags.bins.unwrap_or(cfg.bins),
        tau: flags.tau.unwrap_or(cfg.tau),
        kernel: flags.kernel.unwrap_or(cfg.kernel),
    };
    hc.validate()?;
    Ok(hc)
}

fn translate_once(
    img: &ImageF,
    op: &dyn PatchOperator,
    opts: &TileOptions,
    band: usize,
) -> Result<(ImageF, Value)> {
    let out = tile_translate_with(img, op, opts)?;
    let grid = compute_grid(img.height(), img.width(), opts.patch, opts.stride)?;
    let seam = seam_energy(&out, &grid, band)?;
    let mut entry = serde_json::to_value(seam).expect("serialisable report");
    entry["patch"] = json!(opts.patch);
    entry["stride"] = json!(opts.stride);
    entry["patches"] = json!(grid.len());
    Ok((out, entry))
}

fn cmd_translate(a: &TranslateArgs, cfg: &RunConfig) -> Result<u8> {
    let input = a
        .input
        .clone()
        .or_else(|| cfg.input.clone())
        .ok_or_else(|| Error::InvalidArgument("translate needs an input path".into()))?;
    let output = a
        .output
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::InvalidArgument("translate needs an output path".into()))?;
    let img = load_image(&input)?;
    if img.channels() != 1 {
        return Err(Error::InvalidImage(format!(
            "translate expects a single-channel image, {} is {}",
            input.display(),
            img.shape_string()
        )));
    }
    let depth = output_depth(a.depth, &input, &output)?;
    let spec = a.op.clone().unwrap_or_else(|| cfg.operator.clone());
    let op = parse_operator(&spec)?;
    let opts = TileOptions {
        patch: a.patch.unwrap_or(cfg.patch_size),
        stride: a.stride.unwrap_or(cfg.stride),
        epsilon: a.epsilon.unwrap_or(cfg.mask_floor),
        mask: match a.mask {
            Some(MaskArg::Box) => MaskKind::Box,
            Some(MaskArg::Hann) | None => MaskKind::Hann,
        },
        threads: 0,
    };
    info!(
        "translate {} -> {} with {}",
        input.display(),
        output.display(),
        op.name()
    );
    let (out, seam) = translate_once(&img, op.as_ref(), &opts, a.seam_band)?;
    save_image(&out, &output, depth)?;

    let mut summary = json!({
        "input": input.display().to_string(),
        "output": output.display().to_string(),
        "operator": spec,
        "width": img.width(),
        "height": img.height(),
        "patch": opts.patch,
        "stride": opts.stride,
        "epsilon": opts.epsilon,
        "mask": match opts.mask { MaskKind::Hann => "hann", MaskKind::Box => "box" },
        "seam_energy": seam.clone(),
    });
    let mut report = seam;
    if a.stride_sweep {
        let mut sweep = BTreeMap::new();
        for s in [ALT_STRIDE, DEFAULT_STRIDE] {
            let entry = if s == opts.stride {
                summary["seam_energy"].clone()
            } else {
                let o = TileOptions { stride: s, ..opts };
                translate_once(&img, op.as_ref(), &o, a.seam_band)?.1
            };
            sweep.insert(s.to_string(), entry);
        }
        report = json!(sweep);
        summary["stride_sweep"] = report.clone();
    }
    if let Some(path) = &a.seam_report {
        write_json(path, &report)?;
    }
    print_json(&summary)?;
    Ok(EXIT_OK)
}

fn cmd_metrics(a: &MetricsArgs) -> Result<u8> {
    let opts = MetricOptions { linear: a.linear };
    let report = match (a.pred.is_dir(), a.gt.is_dir()) {
        (true, true) => evaluate_dir(&a.pred, &a.gt, opts)?,
        (false, false) => {
            let r = evaluate_pair(&a.pred, &a.gt, opts)?;
            let name = a
                .pred
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            DirReport::from_pairs(
                vec![PairReport {
                    name,
                    psnr_db: r.psnr_db,
                    ssim: r.ssim,
                    ae_deg: r.ae_deg,
                    lpips: None,
                }],
                Vec::new(),
            )
        }
        _ => {
            return Err(Error::InvalidArgument(
                "metrics takes two files or two directories".into(),
            ))
        }
    };
    let mut value = serde_json::to_value(&report).expect("serialisable report");
    value["linear"] = json!(a.linear);
    print_json(&value)?;
    if report.skipped.is_empty() {
        Ok(EXIT_OK)
    } else {
        log::warn!("{} file(s) had no counterpart", report.skipped.len());
        Ok(EXIT_PARTIAL)
    }
}

fn cmd_hist(a: &HistArgs, cfg: &RunConfig) -> Result<u8> {
    if let Some(HistAction::Match(m)) = &a.action {
        return cmd_hist_match(m, cfg);
    }
    let path = a
        .image
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("hist needs an image".into()))?;
    let hc = hist_config(&a.hist, cfg)?;
    let img = load_image(path)?;
    let pooled = soft_histogram(img.data(), &hc)?;
    let mut value = json!({
        "bins": hc.bins,
        "tau": hc.tau,
        "kernel": hc.kernel,
        "channels": img.channels(),
        "h": pooled.mass,
        "H": pooled.cdf,
    });
    if img.channels() > 1 {
        let per: Vec<Value> = (0..img.channels())
            .map(|c| soft_histogram(img.plane(c), &hc).map(|h| json!({"h": h.mass, "H": h.cdf})))
            .collect::<Result<_>>()?;
        value["per_channel"] = json!(per);
    }
    if let Some(t) = &a.target {
        let target = load_image(t)?;
        value["loss"] = json!(cdf_loss(&img, &target, &hc)?);
    }
    print_json(&value)?;
    Ok(EXIT_OK)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_hist_match(a: &MatchArgs, cfg: &RunConfig) -> Result<u8> {
    let hc = hist_config(&a.hist, cfg)?;
    let src = load_image(&a.src)?;
    let target = load_image(&a.target)?;
    let output = a.output.clone().unwrap_or_else(|| {
        let ext = a
            .src
            .extension()
            .map(|e| e.to_string_lossy().into_owned())
            .unwrap_or_else(|| "png".into());
        sibling(&a.src, &format!(".matched.{ext}"))
    });
    let trace_path = a
        .trace
        .clone()
        .unwrap_or_else(|| sibling(&output, ".trace.json"));
    let depth = output_depth(a.depth, &a.src, &output)?;
    let outcome = hist_match_gd(&src, &target, a.steps, a.lr, &hc)?;
    save_image(&outcome.image, &output, depth)?;
    let initial = outcome.trace[0];
    let last = *outcome.trace.last().expect("trace holds the initial loss");
    let value = json!({
        "src": a.src.display().to_string(),
        "target": a.target.display().to_string(),
        "output": output.display().to_string(),
        "bins": hc.bins,
        "tau": hc.tau,
        "kernel": hc.kernel,
        "steps": a.steps,
        "lr": a.lr,
        "final_lr": outcome.final_lr,
        "initial_loss": initial,
        "final_loss": last,
        "trace": outcome.trace,
    });
    write_json(&trace_path, &value)?;
    let mut summary = value;
    summary["trace_file"] = json!(trace_path.display().to_string());
    print_json(&summary)?;
    Ok(EXIT_OK)
}

fn cmd_gradcheck(a: &GradcheckArgs, cfg: &RunConfig) -> Result<u8> {
    let hc = hist_config(&a.hist, cfg)?;
    if a.size == 0 {
        return Err(Error::InvalidArgument("--size must be >= 1".into()));
    }
    let (pred, target) = seeded_pair(a.seed, a.size)?;
    let opts = GradcheckOptions {
        samples: a.samples,
        step: a.step,
        stencil: a.stencil,
        tolerance: a.tolerance,
        seed: a.seed,
        keep_probes: a.probes,
        exclude_kinks: !a.keep_kinks,
    };
    let report = gradcheck_cdf_loss(&pred, &target, &hc, &opts)?;
    let mut value = serde_json::to_value(&report).expect("serialisable report");
    value["seed"] = json!(a.seed);
    value["size"] = json!(a.size);
    print_json(&value)?;
    Ok(if report.passed { EXIT_OK } else { EXIT_ERROR })
}

fn cmd_equalize(a: &EqualizeArgs) -> Result<u8> {
    let img = load_image(&a.input)?;
    let depth = output_depth(a.depth, &a.input, &a.output)?;
    let out = equalize_hist(&img)?;
    save_image(&out, &a.output, depth)?;
    print_json(&json!({
        "input": a.input.display().to_string(),
        "output": a.output.display().to_string(),
        "width": out.width(),
        "height": out.height(),
    }))?;
    Ok(EXIT_OK)
}

fn cmd_resize(a: &ResizeArgs) -> Result<u8> {
    let img = load_image(&a.input)?;
    let depth = output_depth(a.depth, &a.input, &a.output)?;
    let out = clamp_long_side(&img, a.max_side)?;
    save_image(&out, &a.output, depth)?;
    print_json(&json!({
        "input": a.input.display().to_string(),
        "output": a.output.display().to_string(),
        "from": [img.width(), img.height()],
        "to": [out.width(), out.height()],
    }))?;
    Ok(EXIT_OK)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli) -> Result<u8> {
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        // Only fails if a global pool already exists, in which case it stays.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Translate(a) => cmd_translate(a, &cfg),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Hist(a) => cmd_hist(a, &cfg),
        Command::Gradcheck(a) => cmd_gradcheck(a, &cfg),
        Command::Equalize(a) => cmd_equalize(a),
        Command::Resize(a) => cmd_resize(a),
    }
}

/// Parses `args` (including the program name) and runs. Usage errors exit
/// with 1 so that 2 keeps meaning "partial result".
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
