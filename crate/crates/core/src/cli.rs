//! Command-line front end.
//!
//! Results go to stdout as `key=value` lines; diagnostics go to stderr.
//! Exit codes: 0 success, 1 I/O failure, 2 invalid arguments, 3 the
//! deblurred result diverged (the image is still written).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::deconv::{modified_blind_deconv, DeconvConfig};
use crate::error::Error;
use crate::experiment::{run_experiment, ExperimentSpec, HARNESS_ALPHA, HARNESS_LAMBDA};
use crate::image::Image;
use crate::imageio::{load_image, write_image, BitDepth};
use crate::simulate::{add_noise, blur, gaussian_kernel, psnr, uniform_kernel, Kernel};
use crate::spectral::phase_only_image;
use crate::tv::tv;

pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "pocs-deblur",
    version,
    about = "Blind deconvolution with phase and TV-epigraph projections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Blur an image with a synthetic kernel and optional Gaussian noise.
    Blur(BlurArgs),
    /// Restore a blurred image without knowing the kernel.
    Deblur(DeblurArgs),
    /// Write phase-only versions of an image and of a noisy copy.
    PhaseDemo(PhaseDemoArgs),
    /// Run a benchmark grid described by a spec file.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KernelArg {
    Gaussian,
    Uniform,
    Delta,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Ayers,
    Modified,
}

#[derive(Debug, Args)]
struct OutputDepth {
    /// Bit depth of written images.
    #[arg(long, default_value_t = 16, value_parser = parse_depth)]
    depth: u32,
}

fn parse_depth(s: &str) -> Result<u32, String> {
    match s {
        "8" => Ok(8),
        "16" => Ok(16),
        _ => Err(format!("expected 8 or 16, got {s:?}")),
    }
}

#[derive(Debug, Args)]
struct BlurArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = KernelArg::Gaussian)]
    kernel: KernelArg,
    /// Kernel radius; the support is (2d+1)×(2d+1).
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    d: u32,
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    /// Noise standard deviation on the [0, 1] scale.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    #[command(flatten)]
    depth: OutputDepth,
}

#[derive(Debug, Args)]
struct DeblurArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Where to write the kernel estimate, scaled to peak 1
    /// [default: <output stem>-kernel.<ext>].
    #[arg(long)]
    kernel_output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodArg::Modified)]
    method: MethodArg,
    #[arg(long, default_value_t = HARNESS_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = HARNESS_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = 300, value_parser = clap::value_parser!(u32).range(1..))]
    iters: u32,
    #[arg(long, default_value_t = 0.0)]
    phase_floor: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Kernel support, `N` or `RxC`, odd sides.
    #[arg(long, default_value = "11")]
    kernel_support: String,
    /// Ground truth; when given, the PSNR of input and output is reported.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[command(flatten)]
    depth: OutputDepth,
}

#[derive(Debug, Args)]
struct PhaseDemoArgs {
    #[arg(long)]
    input: PathBuf,
    /// Files are written as `<prefix>-phase.png`, `<prefix>-noisy.png` and
    /// `<prefix>-noisy-phase.png`.
    #[arg(long)]
    output_prefix: PathBuf,
    /// Magnitude given to every frequency bin.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Noise standard deviation on the 0–255 scale.
    #[arg(long, default_value_t = 30.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    spec: PathBuf,
    /// Output directory; overrides `output` in the spec.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads [default: one per core].
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let outcome = match cli.command {
        Command::Blur(a) => cmd_blur(&a),
        Command::Deblur(a) => cmd_deblur(&a),
        Command::PhaseDemo(a) => cmd_phase_demo(&a),
        Command::Experiment(a) => cmd_experiment(&a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Spec { .. } | Error::SymmetryViolation { .. } => {
            EXIT_USAGE
        }
        Error::MissingFile(_)
        | Error::UnsupportedFormat(_)
        | Error::ZeroDimension { .. }
        | Error::Decode(_)
        | Error::Io(_) => EXIT_IO,
    }
}

fn emit(lines: &[(&str, String)]) {
    let mut out = std::io::stdout().lock();
    for (k, v) in lines {
        let _ = writeln!(out, "{k}={v}");
    }
}

fn fmt_db(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

fn cmd_blur(a: &BlurArgs) -> crate::Result<u8> {
    let kernel = match a.kernel {
        KernelArg::Gaussian => gaussian_kernel(a.d as usize, a.sigma)?,
        KernelArg::Uniform => uniform_kernel(a.d as usize)?,
        KernelArg::Delta => Kernel::delta(),
    };
    if !(a.noise >= 0.0) {
        return Err(Error::invalid("--noise must be >= 0"));
    }
    let input = load_image(&a.input)?;
    let mut out = blur(&input, &kernel)?;
    if a.noise > 0.0 {
        out = add_noise(&out, a.noise, a.noise_seed)?;
    }
    write_image(&out, &a.output, BitDepth::from_bits(a.depth.depth)?)?;
    emit(&[
        ("tv_input", format!("{:.6}", tv(&input))),
        ("tv_output", format!("{:.6}", tv(&out))),
        ("psnr_db", fmt_db(psnr(&out, &input)?)),
    ]);
    Ok(0)
}

fn parse_kernel_support(s: &str) -> crate::Result<(usize, usize)> {
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| Error::invalid(format!("bad kernel support {s:?}")))
    };
    match s.split_once('x') {
        Some((r, c)) => Ok((parse(r)?, parse(c)?)),
        None => {
            let n = parse(s)?;
            Ok((n, n))
        }
    }
}

fn default_kernel_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = output
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or("png".into());
    output.with_file_name(format!("{stem}-kernel.{ext}"))
}

fn cmd_deblur(a: &DeblurArgs) -> crate::Result<u8> {
    let depth = BitDepth::from_bits(a.depth.depth)?;
    let cfg = DeconvConfig {
        alpha: a.alpha,
        max_iters: a.iters as usize,
        lambda: a.lambda,
        phase_floor: a.phase_floor,
        kernel_support: parse_kernel_support(&a.kernel_support)?,
        seed: a.seed,
        use_phase: matches!(a.method, MethodArg::Modified),
        use_estv: matches!(a.method, MethodArg::Modified),
        ..DeconvConfig::default()
    };
    let input = load_image(&a.input)?;
    cfg.validate(input.width(), input.height())?;
    let reference = a.reference.as_ref().map(load_image).transpose()?;
    if let Some(r) = &reference {
        r.require_same_dims(&input, "reference")?;
    }

    let result = modified_blind_deconv(&input, &cfg)?;
    write_image(&result.image_estimate, &a.output, depth)?;
    let kernel_img = result.kernel_estimate.to_image();
    let peak = kernel_img.max();
    let kernel_path = a
        .kernel_output
        .clone()
        .unwrap_or_else(|| default_kernel_path(&a.output));
    write_image(&kernel_img.map(|v| v / peak), &kernel_path, depth)?;

    let mut lines = vec![
        ("iterations", result.iterations_used.to_string()),
        (
            "final_relative_change",
            result
                .final_relative_change()
                .map_or("inf".into(), |v| format!("{v:.6e}")),
        ),
        ("diverged", result.diverged().to_string()),
    ];
    if let Some(r) = &reference {
        lines.push(("psnr_input_db", fmt_db(psnr(&input, r)?)));
        lines.push(("psnr_db", fmt_db(psnr(&result.image_estimate, r)?)));
    }
    emit(&lines);
    if result.diverged() {
        eprintln!("warning: iterations diverged; wrote the last finite estimate");
        return Ok(EXIT_DIVERGED);
    }
    Ok(0)
}

/// Affine stretch to `[0, 1]` for display; a flat image maps to zeros.
fn stretch(img: &Image) -> Image {
    let (lo, hi) = (img.min(), img.max());
    if hi > lo {
        img.map(|v| (v - lo) / (hi - lo))
    } else {
        Image::zeros(img.width(), img.height())
    }
}

fn cmd_phase_demo(a: &PhaseDemoArgs) -> crate::Result<u8> {
    if !(a.noise_sigma >= 0.0) {
        return Err(Error::invalid("--noise-sigma must be >= 0"));
    }
    let input = load_image(&a.input)?;
    let noisy = add_noise(&input, a.noise_sigma / 255.0, a.seed)?;
    let phase = phase_only_image(&input, a.c)?;
    let noisy_phase = phase_only_image(&noisy, a.c)?;

    let prefix = a.output_prefix.to_string_lossy().into_owned();
    let paths = [
        (
            PathBuf::from(format!("{prefix}-phase.png")),
            stretch(&phase),
        ),
        (PathBuf::from(format!("{prefix}-noisy.png")), noisy.clone()),
        (
            PathBuf::from(format!("{prefix}-noisy-phase.png")),
            stretch(&noisy_phase),
        ),
    ];
    for (path, img) in &paths {
        write_image(img, path, BitDepth::Sixteen)?;
    }
    emit(&[
        ("phase_only", paths[0].0.display().to_string()),
        ("noisy", paths[1].0.display().to_string()),
        ("noisy_phase_only", paths[2].0.display().to_string()),
        (
            "phase_correlation",
            format!("{:.6}", phase.correlation(&noisy_phase)),
        ),
    ]);
    Ok(0)
}

fn cmd_experiment(a: &ExperimentArgs) -> crate::Result<u8> {
    let spec = ExperimentSpec::from_file(&a.spec)?;
    let dir = a
        .output
        .clone()
        .or_else(|| spec.output.clone())
        .ok_or_else(|| Error::invalid("no output directory: pass --output or set `output`"))?;
    let report = run_experiment(&spec, a.threads.map(|n| n as usize))?;
    let (csv, md) = report.write(&dir)?;
    let diverged = report.rows.iter().filter(|r| r.diverged).count();
    emit(&[
        ("rows", report.rows.len().to_string()),
        ("diverged_runs", diverged.to_string()),
        ("csv", csv.display().to_string()),
        ("summary", md.display().to_string()),
    ]);
    Ok(0)
}
