//! Synthetic observations: blur kernels, circular blurring, noise, phantoms
//! and PSNR scoring.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::spectral::{dft2, idft2, Spectrum};

/// Nonnegative, unit-sum, origin-symmetric point-spread function stored on a
/// centered `(2·half_height + 1) × (2·half_width + 1)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    half_width: usize,
    half_height: usize,
    taps: Vec<f64>,
}

impl Kernel {
    /// Wraps centered taps after checking nonnegativity, unit sum (1e−12)
    /// and 4-fold symmetry.
    pub fn new(half_width: usize, half_height: usize, taps: Vec<f64>) -> Result<Self> {
        let (w, h) = (2 * half_width + 1, 2 * half_height + 1);
        if taps.len() != w * h {
            return Err(Error::invalid(format!(
                "kernel needs {} taps, got {}",
                w * h,
                taps.len()
            )));
        }
        if taps.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
            return Err(Error::invalid("kernel taps must be finite and nonnegative"));
        }
        let sum: f64 = taps.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "kernel taps sum to {sum}, expected 1"
            )));
        }
        let k = Self {
            half_width,
            half_height,
            taps,
        };
        if !k.is_symmetric(1e-15) {
            return Err(Error::invalid("kernel is not symmetric about its center"));
        }
        Ok(k)
    }

    pub(crate) fn from_raw(half_width: usize, half_height: usize, taps: Vec<f64>) -> Self {
        Self {
            half_width,
            half_height,
            taps,
        }
    }

    /// Single unit tap.
    pub fn delta() -> Self {
        Self {
            half_width: 0,
            half_height: 0,
            taps: vec![1.0],
        }
    }

    #[inline]
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    #[inline]
    pub fn half_height(&self) -> usize {
        self.half_height
    }

    /// Full support `(width, height)`.
    pub fn size(&self) -> (usize, usize) {
        (2 * self.half_width + 1, 2 * self.half_height + 1)
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Tap at offset `(n1, n2)` from the center, rows first.
    pub fn at(&self, n1: isize, n2: isize) -> f64 {
        let (hw, hh) = (self.half_width as isize, self.half_height as isize);
        if n1.abs() > hh || n2.abs() > hw {
            return 0.0;
        }
        let w = 2 * hw + 1;
        self.taps[((n1 + hh) * w + (n2 + hw)) as usize]
    }

    /// Largest deviation among `h[n1,n2]`, `h[−n1,n2]`, `h[n1,−n2]`, `h[−n1,−n2]`.
    pub fn symmetry_error(&self) -> f64 {
        let (hw, hh) = (self.half_width as isize, self.half_height as isize);
        let mut err = 0.0f64;
        for n1 in -hh..=hh {
            for n2 in -hw..=hw {
                let a = self.at(n1, n2);
                for b in [self.at(-n1, n2), self.at(n1, -n2), self.at(-n1, -n2)] {
                    err = err.max((a - b).abs());
                }
            }
        }
        err
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.symmetry_error() <= tol
    }

    /// Centered taps as an image of the kernel's own size.
    pub fn to_image(&self) -> Image {
        let (w, h) = self.size();
        Image::from_raw(w, h, self.taps.clone())
    }

    /// Embeds the kernel into a `width × height` grid with its center at the
    /// origin, wrapping negative offsets. The result has a real spectrum.
    pub fn embed(&self, width: usize, height: usize) -> Result<Image> {
        let (kw, kh) = self.size();
        if kw > width || kh > height {
            return Err(Error::invalid(format!(
                "kernel {kw}x{kh} does not fit in {width}x{height} image"
            )));
        }
        let mut out = Image::zeros(width, height);
        let (hw, hh) = (self.half_width as isize, self.half_height as isize);
        for n1 in -hh..=hh {
            for n2 in -hw..=hw {
                let r = n1.rem_euclid(height as isize) as usize;
                let c = n2.rem_euclid(width as isize) as usize;
                out.set(r, c, self.at(n1, n2));
            }
        }
        Ok(out)
    }

    /// Transfer function on a `width × height` DFT grid.
    pub fn spectrum(&self, width: usize, height: usize) -> Result<Spectrum> {
        Ok(dft2(&self.embed(width, height)?))
    }
}

/// Kind of blur kernel used by the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelKind {
    Gaussian,
    Uniform,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Uniform => "uniform",
        })
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(KernelKind::Gaussian),
            "uniform" => Ok(KernelKind::Uniform),
            other => Err(Error::invalid(format!("unknown kernel kind '{other}'"))),
        }
    }
}

/// Truncated Gaussian on a `(2d+1) × (2d+1)` grid, normalized to unit sum.
pub fn gaussian_kernel(d: usize, sigma: f64) -> Result<Kernel> {
    if d < 1 {
        return Err(Error::invalid("gaussian kernel radius d must be >= 1"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!(
            "gaussian sigma must be > 0, got {sigma}"
        )));
    }
    let di = d as isize;
    let mut taps = Vec::with_capacity((2 * d + 1).pow(2));
    for n1 in -di..=di {
        for n2 in -di..=di {
            let r2 = (n1 * n1 + n2 * n2) as f64;
            taps.push((-r2 / (2.0 * sigma * sigma)).exp());
        }
    }
    normalize(&mut taps);
    Ok(Kernel::from_raw(d, d, taps))
}

/// Flat disc of radius `d`: equal taps where `n1² + n2² ≤ d²`.
pub fn uniform_kernel(d: usize) -> Result<Kernel> {
    if d < 1 {
        return Err(Error::invalid("uniform kernel radius d must be >= 1"));
    }
    let di = d as isize;
    let mut taps = Vec::with_capacity((2 * d + 1).pow(2));
    for n1 in -di..=di {
        for n2 in -di..=di {
            taps.push(if n1 * n1 + n2 * n2 <= di * di {
                1.0
            } else {
                0.0
            });
        }
    }
    normalize(&mut taps);
    Ok(Kernel::from_raw(d, d, taps))
}

pub fn make_kernel(kind: KernelKind, d: usize, sigma: f64) -> Result<Kernel> {
    match kind {
        KernelKind::Gaussian => gaussian_kernel(d, sigma),
        KernelKind::Uniform => uniform_kernel(d),
    }
}

fn normalize(taps: &mut [f64]) {
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
}

/// Circular convolution `h ∗ x`, computed as a product of transforms.
pub fn blur(x: &Image, h: &Kernel) -> Result<Image> {
    let (w, ht) = x.dims();
    let spec = dft2(x).multiply(&h.spectrum(w, ht)?)?;
    idft2(&spec)
}

/// Adds i.i.d. zero-mean Gaussian noise with standard deviation `sigma_noise`
/// (normalized intensity scale; 8-bit `σ` corresponds to `σ/255`).
pub fn add_noise(x: &Image, sigma_noise: f64, seed: u64) -> Result<Image> {
    if !(sigma_noise >= 0.0) || !sigma_noise.is_finite() {
        return Err(Error::invalid(format!(
            "noise sigma must be >= 0, got {sigma_noise}"
        )));
    }
    if sigma_noise == 0.0 {
        return Ok(x.clone());
    }
    let normal = Normal::new(0.0, sigma_noise).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(x.map(|v| v + normal.sample(&mut rng)))
}

/// `10·log10(1 / MSE)` for unit peak; `+∞` for identical images.
pub fn psnr(x: &Image, reference: &Image) -> Result<f64> {
    x.require_same_dims(reference, "psnr")?;
    let mse = x
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Synthetic test scenes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PhantomKind {
    /// Sparse bright blobs on a dark background, like fluorescence images.
    Cells,
    /// Vertical edge between two flat halves.
    Step,
    /// Isolated bright pixels.
    Impulses,
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhantomKind::Cells => "cells",
            PhantomKind::Step => "step",
            PhantomKind::Impulses => "impulses",
        })
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cells" => Ok(PhantomKind::Cells),
            "step" => Ok(PhantomKind::Step),
            "impulses" => Ok(PhantomKind::Impulses),
            other => Err(Error::invalid(format!("unknown phantom kind '{other}'"))),
        }
    }
}

/// Levels of the step phantom.
pub const STEP_LOW: f64 = 0.25;
pub const STEP_HIGH: f64 = 0.75;

/// Deterministic synthetic image with values in `[0, 1]`.
pub fn make_phantom(kind: PhantomKind, width: usize, height: usize, seed: u64) -> Result<Image> {
    if width < 16 || height < 16 {
        return Err(Error::invalid(format!(
            "phantoms need at least 16x16, got {width}x{height}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let img = match kind {
        PhantomKind::Step => {
            let edge = width / 2;
            Image::from_fn(
                width,
                height,
                |_, c| if c < edge { STEP_LOW } else { STEP_HIGH },
            )
        }
        PhantomKind::Impulses => {
            let mut img = Image::zeros(width, height);
            let count = (width * height / 256).max(1);
            for _ in 0..count {
                let r = rng.random_range(0..height);
                let c = rng.random_range(0..width);
                img.set(r, c, rng.random_range(0.5..=1.0));
            }
            img
        }
        PhantomKind::Cells => cells(width, height, &mut rng),
    };
    Ok(img)
}

fn cells(width: usize, height: usize, rng: &mut ChaCha8Rng) -> Image {
    // blob count scales with area; 4..=8 blobs on 64x64
    let area_scale = (width * height) as f64 / 4096.0;
    let count = ((rng.random_range(4..=8) as f64) * area_scale)
        .round()
        .max(1.0) as usize;
    let mut img = Image::zeros(width, height);
    let margin = 4.0f64.min(width.min(height) as f64 / 4.0);
    for _ in 0..count {
        let cr = rng.random_range(margin..(height as f64 - margin));
        let cc = rng.random_range(margin..(width as f64 - margin));
        let radius = rng.random_range(1.5..3.5);
        let amp = rng.random_range(0.5..1.0);
        let cutoff = 2.5 * radius;
        let r0 = (cr - cutoff).floor().max(0.0) as usize;
        let r1 = ((cr + cutoff).ceil() as usize).min(height - 1);
        let c0 = (cc - cutoff).floor().max(0.0) as usize;
        let c1 = ((cc + cutoff).ceil() as usize).min(width - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
                if d2 <= cutoff * cutoff {
                    let v = amp * (-d2 / (2.0 * radius * radius)).exp();
                    if v > img.get(r, c) {
                        img.set(r, c, v);
                    }
                }
            }
        }
    }
    img
}
