//! Benchmark grid: phantoms or images × blur kernels × methods, scored by PSNR.
//!
//! # Spec file grammar
//!
//! One `key = value` pair per line; `#` starts a comment; list values are
//! comma-separated. Unknown keys are rejected.
//!
//! ```text
//! phantoms       = cells:64x64:0..10, step:32x32:3   # kind:WxH:seed or seed range (end exclusive)
//! images         = data/a.png, data/b.pgm            # alternative or additional inputs
//! kernels        = gaussian, uniform
//! d              = 5, 10, 15
//! sigma          = 1, 2, 3                           # ignored for uniform kernels (reported as 0)
//! methods        = ayers, modified, modified-phase-only, modified-estv-only
//! alpha          = 0.1
//! lambda         = 0.005
//! iters          = 300
//! phase_floor    = 0
//! kernel_support = auto                              # auto (2d+1), N, or RxC
//! seed           = 0                                 # start-image seed, offset by input index
//! noise_sigma    = 0                                 # on the [0, 1] scale
//! noise_seed     = 0
//! estv_tol       = 0.01
//! wall_time      = false                             # record wall time (makes CSV nondeterministic)
//! output         = results/grid
//! ```
//!
//! At least one of `phantoms` or `images` is required; every other key has
//! the default shown by [`ExperimentSpec::default`].

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::deconv::{modified_blind_deconv, DeconvConfig, DEFAULT_ESTV_TOL};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::imageio::load_image;
use crate::simulate::{add_noise, blur, make_kernel, make_phantom, psnr, KernelKind, PhantomKind};

pub const CSV_HEADER: &str = "image_id,kernel,d,sigma,method,psnr_db,iterations,wall_time_s";

/// Default Wiener regularizer of the harness.
pub const HARNESS_ALPHA: f64 = 0.1;
/// Default TV-epigraph weight of the harness, sized for 64×64 phantoms with
/// intensities in `[0, 1]`.
pub const HARNESS_LAMBDA: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Ayers,
    Modified,
    ModifiedPhaseOnly,
    ModifiedEstvOnly,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Ayers,
        Method::Modified,
        Method::ModifiedPhaseOnly,
        Method::ModifiedEstvOnly,
    ];

    /// `(use_phase, use_estv)`
    pub fn projections(self) -> (bool, bool) {
        match self {
            Method::Ayers => (false, false),
            Method::Modified => (true, true),
            Method::ModifiedPhaseOnly => (true, false),
            Method::ModifiedEstvOnly => (false, true),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Ayers => "ayers",
            Method::Modified => "modified",
            Method::ModifiedPhaseOnly => "modified-phase-only",
            Method::ModifiedEstvOnly => "modified-estv-only",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomInput {
    pub kind: PhantomKind,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    Phantom(PhantomInput),
    File(PathBuf),
}

impl InputSource {
    pub fn id(&self) -> String {
        match self {
            InputSource::Phantom(p) => format!("{}-{}x{}-s{}", p.kind, p.width, p.height, p.seed),
            InputSource::File(path) => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        }
    }

    pub fn load(&self) -> Result<Image> {
        match self {
            InputSource::Phantom(p) => make_phantom(p.kind, p.width, p.height, p.seed),
            InputSource::File(path) => load_image(path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelSupport {
    /// `2d + 1` on both axes, matching the synthetic kernel.
    Auto,
    Fixed(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub inputs: Vec<InputSource>,
    pub kernels: Vec<KernelKind>,
    pub d: Vec<usize>,
    pub sigma: Vec<f64>,
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub lambda: f64,
    pub iters: usize,
    pub phase_floor: f64,
    pub kernel_support: KernelSupport,
    pub seed: u64,
    pub noise_sigma: f64,
    pub noise_seed: u64,
    pub estv_tol: f64,
    pub wall_time: bool,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            kernels: vec![KernelKind::Gaussian],
            d: vec![5, 10, 15],
            sigma: vec![1.0, 2.0, 3.0],
            methods: vec![Method::Ayers, Method::Modified],
            alpha: HARNESS_ALPHA,
            lambda: HARNESS_LAMBDA,
            iters: 300,
            phase_floor: 0.0,
            kernel_support: KernelSupport::Auto,
            seed: 0,
            noise_sigma: 0.0,
            noise_seed: 0,
            estv_tol: DEFAULT_ESTV_TOL,
            wall_time: false,
            output: None,
        }
    }
}

impl ExperimentSpec {
    /// Ten 64×64 "cells" phantoms (seeds 0–9), Gaussian kernels over
    /// `d ∈ {5, 10, 15}`, `σ ∈ {1, 2, 3}`, baseline against modified.
    pub fn default_grid() -> Self {
        let inputs = (0..10)
            .map(|seed| {
                InputSource::Phantom(PhantomInput {
                    kind: PhantomKind::Cells,
                    width: 64,
                    height: 64,
                    seed,
                })
            })
            .collect();
        Self {
            inputs,
            ..Self::default()
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile(path.to_path_buf())
            } else {
                e.into()
            }
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Spec {
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key:?}")));
            }
            spec.set(key, value).map_err(|e| match e {
                Error::InvalidArgument(m) => err(m),
                other => other,
            })?;
        }
        spec.validate()?;
        Ok(spec)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "phantoms" => {
                for item in list(value)? {
                    self.inputs.extend(parse_phantoms(item)?);
                }
            }
            "images" => {
                for item in list(value)? {
                    self.inputs.push(InputSource::File(PathBuf::from(item)));
                }
            }
            "kernels" => self.kernels = parse_list(value)?,
            "d" => self.d = parse_list(value)?,
            "sigma" => self.sigma = parse_list(value)?,
            "methods" => self.methods = parse_list(value)?,
            "alpha" => self.alpha = parse_one(value)?,
            "lambda" => self.lambda = parse_one(value)?,
            "iters" => self.iters = parse_one(value)?,
            "phase_floor" => self.phase_floor = parse_one(value)?,
            "kernel_support" => self.kernel_support = parse_support(value)?,
            "seed" => self.seed = parse_one(value)?,
            "noise_sigma" => self.noise_sigma = parse_one(value)?,
            "noise_seed" => self.noise_seed = parse_one(value)?,
            "estv_tol" => self.estv_tol = parse_one(value)?,
            "wall_time" => self.wall_time = parse_one(value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            other => return Err(Error::invalid(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| {
            Err(Error::Spec {
                line: 0,
                message: m.to_string(),
            })
        };
        if self.inputs.is_empty() {
            return bad("no inputs: set `phantoms` or `images`");
        }
        if self.kernels.is_empty() || self.d.is_empty() || self.methods.is_empty() {
            return bad("kernels, d and methods must be non-empty");
        }
        if self.kernels.contains(&KernelKind::Gaussian) && self.sigma.is_empty() {
            return bad("sigma must be non-empty for gaussian kernels");
        }
        if self.d.contains(&0) {
            return bad("d must be >= 1");
        }
        if self.sigma.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return bad("sigma values must be > 0");
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad("noise_sigma must be >= 0");
        }
        if self.iters == 0 {
            return bad("iters must be >= 1");
        }
        Ok(())
    }

    /// `(kernel, d, sigma)` cells in grid order; uniform kernels get one
    /// cell per `d` with `sigma = 0`.
    pub fn kernel_cells(&self) -> Vec<(KernelKind, usize, f64)> {
        let mut cells = Vec::new();
        for &kind in &self.kernels {
            for &d in &self.d {
                match kind {
                    KernelKind::Gaussian => cells.extend(self.sigma.iter().map(|&s| (kind, d, s))),
                    KernelKind::Uniform => cells.push((kind, d, 0.0)),
                }
            }
        }
        cells
    }

    pub fn deconv_config(&self, d: usize, method: Method, seed: u64) -> DeconvConfig {
        let (use_phase, use_estv) = method.projections();
        let kernel_support = match self.kernel_support {
            KernelSupport::Auto => (2 * d + 1, 2 * d + 1),
            KernelSupport::Fixed(r, c) => (r, c),
        };
        DeconvConfig {
            alpha: self.alpha,
            max_iters: self.iters,
            lambda: self.lambda,
            phase_floor: self.phase_floor,
            kernel_support,
            seed,
            use_phase,
            use_estv,
            estv_tol: self.estv_tol,
            ..DeconvConfig::default()
        }
    }
}

fn list(value: &str) -> Result<Vec<&str>> {
    let items: Vec<&str> = value.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(Error::invalid(format!("empty item in list {value:?}")));
    }
    Ok(items)
}

fn parse_one<T: FromStr>(value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("cannot parse {value:?}")))
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>> {
    list(value)?.into_iter().map(parse_one).collect()
}

fn parse_dims(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once('x')
        .ok_or_else(|| Error::invalid(format!("expected WxH, got {s:?}")))?;
    Ok((parse_one(a)?, parse_one(b)?))
}

fn parse_support(value: &str) -> Result<KernelSupport> {
    if value == "auto" {
        return Ok(KernelSupport::Auto);
    }
    if value.contains('x') {
        let (r, c) = parse_dims(value)?;
        return Ok(KernelSupport::Fixed(r, c));
    }
    let n = parse_one(value)?;
    Ok(KernelSupport::Fixed(n, n))
}

fn parse_phantoms(item: &str) -> Result<Vec<InputSource>> {
    let parts: Vec<&str> = item.split(':').collect();
    let [kind, dims, seeds] = parts[..] else {
        return Err(Error::invalid(format!(
            "expected kind:WxH:seeds, got {item:?}"
        )));
    };
    let kind: PhantomKind = kind.parse()?;
    let (width, height) = parse_dims(dims)?;
    let seeds: Vec<u64> = match seeds.split_once("..") {
        Some((a, b)) => {
            let (a, b): (u64, u64) = (parse_one(a)?, parse_one(b)?);
            if a >= b {
                return Err(Error::invalid(format!("empty seed range {seeds:?}")));
            }
            (a..b).collect()
        }
        None => vec![parse_one(seeds)?],
    };
    Ok(seeds
        .into_iter()
        .map(|seed| {
            InputSource::Phantom(PhantomInput {
                kind,
                width,
                height,
                seed,
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub image_id: String,
    /// Position of the input in the spec; used for ordering.
    pub input_index: usize,
    pub kernel: KernelKind,
    pub d: usize,
    pub sigma: f64,
    pub method: Method,
    /// PSNR of the restored image (the last finite iterate if diverged).
    pub psnr_db: f64,
    /// PSNR of the observation the method started from.
    pub observed_psnr_db: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub diverged: bool,
}

impl ExperimentRow {
    fn cell_key(&self) -> (usize, KernelKind, usize, u64) {
        (self.input_index, self.kernel, self.d, self.sigma.to_bits())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
}

fn fmt_psnr(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{:.3}",
                r.image_id,
                r.kernel,
                r.d,
                r.sigma,
                r.method,
                fmt_psnr(r.psnr_db),
                r.iterations,
                r.wall_time_s
            );
        }
        out
    }

    /// Rows grouped by `(input, kernel, d, sigma)`, in report order.
    pub fn cells(&self) -> Vec<&[ExperimentRow]> {
        self.rows
            .chunk_by(|a, b| a.cell_key() == b.cell_key())
            .collect()
    }

    /// `(wins, cells)` where `challenger` strictly beats `baseline`.
    pub fn win_count(&self, challenger: Method, baseline: Method) -> (usize, usize) {
        let mut wins = 0;
        let mut total = 0;
        for cell in self.cells() {
            let find = |m| cell.iter().find(|r| r.method == m);
            if let (Some(c), Some(b)) = (find(challenger), find(baseline)) {
                total += 1;
                if c.psnr_db > b.psnr_db {
                    wins += 1;
                }
            }
        }
        (wins, total)
    }

    /// Markdown table: one line per cell, one column per method, the best
    /// PSNR of each line in bold. Diverged runs are marked `(div)`.
    pub fn to_markdown(&self) -> String {
        let mut methods: Vec<Method> = self.rows.iter().map(|r| r.method).collect();
        methods.sort();
        methods.dedup();

        let mut out = String::from("| image | kernel | d | sigma | observed |");
        for m in &methods {
            let _ = write!(out, " {m} |");
        }
        out.push_str(" winner |\n|---|---|---|---|---|");
        for _ in &methods {
            out.push_str("---|");
        }
        out.push_str("---|\n");

        for cell in self.cells() {
            let first = &cell[0];
            let best = cell
                .iter()
                .map(|r| r.psnr_db)
                .fold(f64::NEG_INFINITY, f64::max);
            let winner = cell.iter().find(|r| r.psnr_db == best).map(|r| r.method);
            let _ = write!(
                out,
                "| {} | {} | {} | {} | {} |",
                first.image_id,
                first.kernel,
                first.d,
                first.sigma,
                fmt_psnr(first.observed_psnr_db)
            );
            for m in &methods {
                match cell.iter().find(|r| r.method == *m) {
                    Some(r) => {
                        let mut v = format!("{:.2}", r.psnr_db);
                        if r.psnr_db == best {
                            v = format!("**{v}**");
                        }
                        if r.diverged {
                            v.push_str(" (div)");
                        }
                        let _ = write!(out, " {v} |");
                    }
                    None => out.push_str(" - |"),
                }
            }
            let _ = writeln!(out, " {} |", winner.map_or("-", |m| m.name()));
        }

        if methods.contains(&Method::Ayers) {
            for m in methods.iter().filter(|&&m| m != Method::Ayers) {
                let (wins, total) = self.win_count(*m, Method::Ayers);
                let _ = writeln!(out, "\n{m} beats ayers in {wins}/{total} cells.");
            }
        }
        out
    }

    /// Writes `report.csv` and `summary.md` into `dir`, creating it.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let csv = dir.join("report.csv");
        let md = dir.join("summary.md");
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&md, self.to_markdown())?;
        Ok((csv, md))
    }
}

/// Runs every `(input, kernel cell, method)` combination.
///
/// Runs are independent and single-threaded, so results do not depend on
/// `threads`; rows are sorted before returning. A diverged run is reported
/// in its row and does not stop the grid.
pub fn run_experiment(spec: &ExperimentSpec, threads: Option<usize>) -> Result<ExperimentReport> {
    spec.validate()?;
    let originals: Vec<Image> = spec
        .inputs
        .iter()
        .map(InputSource::load)
        .collect::<Result<_>>()?;
    let ids: Vec<String> = spec.inputs.iter().map(InputSource::id).collect();

    let mut jobs = Vec::new();
    for input_index in 0..spec.inputs.len() {
        for (kernel, d, sigma) in spec.kernel_cells() {
            for &method in &spec.methods {
                jobs.push((input_index, kernel, d, sigma, method));
            }
        }
    }

    let run = |&(input_index, kernel, d, sigma, method): &(
        usize,
        KernelKind,
        usize,
        f64,
        Method,
    )|
     -> Result<ExperimentRow> {
        let original = &originals[input_index];
        let h = make_kernel(kernel, d, sigma)?;
        let mut observed = blur(original, &h)?;
        if spec.noise_sigma > 0.0 {
            observed = add_noise(
                &observed,
                spec.noise_sigma,
                spec.noise_seed + input_index as u64,
            )?;
        }
        let cfg = spec.deconv_config(d, method, spec.seed + input_index as u64);
        let start = Instant::now();
        let result = modified_blind_deconv(&observed, &cfg)?;
        let wall = start.elapsed().as_secs_f64();
        Ok(ExperimentRow {
            image_id: ids[input_index].clone(),
            input_index,
            kernel,
            d,
            sigma,
            method,
            psnr_db: psnr(&result.image_estimate, original)?,
            observed_psnr_db: psnr(&observed, original)?,
            iterations: result.iterations_used,
            wall_time_s: if spec.wall_time { wall } else { 0.0 },
            diverged: result.diverged(),
        })
    };

    let rows: Result<Vec<ExperimentRow>> = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(e.to_string()))?;
            pool.install(|| jobs.par_iter().map(run).collect())
        }
        None => jobs.par_iter().map(run).collect(),
    };
    let mut rows = rows?;
    rows.sort_by(|a, b| {
        a.input_index
            .cmp(&b.input_index)
            .then(a.kernel.cmp(&b.kernel))
            .then(a.d.cmp(&b.d))
            .then(a.sigma.total_cmp(&b.sigma))
            .then(a.method.cmp(&b.method))
    });
    Ok(ExperimentReport { rows })
}
