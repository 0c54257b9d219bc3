//! 2D discrete Fourier transforms and the prescribed-phase constraint set.
//!
//! Transforms use the unnormalized-forward / `1/(N1·N2)`-inverse convention.
//! A [`PhaseConstraint`] pairs a prescribed phase with a frequency mask; only
//! masked bins are constrained, which lets callers restrict the constraint to
//! the main lobe of a blur's transform where the observed phase is reliable.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::image::{Image, Mask};

/// Relative bound on the imaginary residue accepted by [`idft2`].
pub const IMAG_RESIDUE_TOL: f64 = 1e-6;

/// Absolute floor for the residue check, so that round-off on an all-zero
/// spectrum is not reported as a symmetry violation.
const IMAG_RESIDUE_FLOOR: f64 = 1e-12;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Complex frequency-domain grid in DFT order (bin `(0, 0)` is DC).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    width: usize,
    height: usize,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(width: usize, height: usize, data: Vec<Complex64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("zero dimension {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "spectrum length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0);
        Self {
            width,
            height,
            data: vec![Complex64::new(0.0, 0.0); width * height],
        }
    }

    pub fn ones(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0);
        Self {
            width,
            height,
            data: vec![Complex64::new(1.0, 0.0); width * height],
        }
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
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
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Bin at frequency `(k1, k2)`, with `k1` indexing rows.
    #[inline]
    pub fn get(&self, k1: usize, k2: usize) -> Complex64 {
        self.data[k1 * self.width + k2]
    }

    /// Linear index of the bin at `(−k1 mod N1, −k2 mod N2)`.
    #[inline]
    pub fn mirror_index(&self, index: usize) -> usize {
        mirror_index(self.width, self.height, index)
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm()).collect()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest `|S[k] − conj(S[−k])|`, relative to the largest magnitude.
    pub fn conjugate_symmetry_error(&self) -> f64 {
        let scale = self.max_magnitude();
        if scale == 0.0 {
            return 0.0;
        }
        (0..self.data.len())
            .map(|i| (self.data[i] - self.data[self.mirror_index(i)].conj()).norm())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Bin-wise product, i.e. circular convolution of the underlying signals.
    pub fn multiply(&self, other: &Spectrum) -> Result<Spectrum> {
        if self.dims() != other.dims() {
            return Err(Error::invalid("spectrum product: dimension mismatch"));
        }
        Ok(Spectrum::from_raw(
            self.width,
            self.height,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a * b)
                .collect(),
        ))
    }
}

#[inline]
pub(crate) fn mirror_index(width: usize, height: usize, index: usize) -> usize {
    let (k1, k2) = (index / width, index % width);
    let m1 = (height - k1) % height;
    let m2 = (width - k2) % width;
    m1 * width + m2
}

/// Runs a 2D transform in place: rows, then columns through a transpose.
fn fft2_in_place(data: &mut [Complex64], width: usize, height: usize, direction: FftDirection) {
    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        let row_fft = planner.plan_fft(width, direction);
        let col_fft = planner.plan_fft(height, direction);
        drop(planner);

        row_fft.process(data);

        let mut transposed = vec![Complex64::new(0.0, 0.0); data.len()];
        for r in 0..height {
            for c in 0..width {
                transposed[c * height + r] = data[r * width + c];
            }
        }
        col_fft.process(&mut transposed);
        for c in 0..width {
            for r in 0..height {
                data[r * width + c] = transposed[c * height + r];
            }
        }
    });
}

/// Forward, unnormalized 2D DFT of a real image.
pub fn dft2(img: &Image) -> Spectrum {
    let (width, height) = img.dims();
    let mut data: Vec<Complex64> = img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_in_place(&mut data, width, height, FftDirection::Forward);
    Spectrum::from_raw(width, height, data)
}

/// Inverse 2D DFT with `1/(N1·N2)` scaling, keeping the complex result.
pub fn idft2_complex(spec: &Spectrum) -> Vec<Complex64> {
    let (width, height) = spec.dims();
    let mut data = spec.data.clone();
    fft2_in_place(&mut data, width, height, FftDirection::Inverse);
    let scale = 1.0 / (width * height) as f64;
    for v in &mut data {
        *v *= scale;
    }
    data
}

/// Inverse 2D DFT returning a real image.
///
/// The imaginary part is dropped only when `max|imag| ≤ 1e−6 · max|real|`;
/// otherwise the spectrum was not conjugate-symmetric and
/// [`Error::SymmetryViolation`] is returned.
pub fn idft2(spec: &Spectrum) -> Result<Image> {
    let (width, height) = spec.dims();
    let data = idft2_complex(spec);
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    for c in &data {
        if !(c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::invalid(
                "inverse transform produced non-finite values",
            ));
        }
        max_re = max_re.max(c.re.abs());
        max_im = max_im.max(c.im.abs());
    }
    let limit = (IMAG_RESIDUE_TOL * max_re).max(IMAG_RESIDUE_FLOOR);
    if max_im > limit {
        return Err(Error::SymmetryViolation {
            residue: max_im,
            limit,
        });
    }
    Ok(Image::from_raw(
        width,
        height,
        data.into_iter().map(|c| c.re).collect(),
    ))
}

/// Prescribed Fourier phase plus the set of bins it applies to.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConstraint {
    width: usize,
    height: usize,
    phase: Vec<f64>,
    mask: Vec<bool>,
}

impl PhaseConstraint {
    /// Validates the invariants: DC masked, mask symmetric, and phase
    /// antisymmetric (mod 2π, within 1e−6) on masked bins.
    pub fn new(width: usize, height: usize, phase: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("zero dimension phase constraint"));
        }
        let n = width * height;
        if phase.len() != n || mask.len() != n {
            return Err(Error::invalid(
                "phase/mask length does not match dimensions",
            ));
        }
        if !mask[0] {
            return Err(Error::invalid("phase mask must include the DC bin"));
        }
        for i in 0..n {
            let m = mirror_index(width, height, i);
            if mask[i] != mask[m] {
                return Err(Error::invalid(format!(
                    "phase mask is not symmetric at bin {i}"
                )));
            }
            if !phase[i].is_finite() || phase[i] <= -PI - 1e-12 || phase[i] > PI + 1e-12 {
                return Err(Error::invalid(format!(
                    "phase at bin {i} outside (-pi, pi]"
                )));
            }
            if mask[i] && wrapped_gap(phase[i], -phase[m]) > 1e-6 {
                return Err(Error::invalid(format!(
                    "phase is not antisymmetric at bin {i}"
                )));
            }
        }
        Ok(Self {
            width,
            height,
            phase,
            mask,
        })
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    #[inline]
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Same phase with every bin participating.
    pub fn with_full_mask(&self) -> Self {
        Self {
            mask: vec![true; self.mask.len()],
            ..self.clone()
        }
    }

    fn require_dims(&self, width: usize, height: usize) -> Result<()> {
        if self.dims() == (width, height) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "phase constraint is {}x{}, image is {width}x{height}",
                self.width, self.height
            )))
        }
    }
}

/// Distance between two angles on the circle.
fn wrapped_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Maps an angle into `(−π, π]`.
fn principal(angle: f64) -> f64 {
    let a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

/// Reads the phase of `spec` and masks out bins whose magnitude is below
/// `magnitude_floor` times the peak magnitude.
///
/// Each bin is paired with its mirror and both are derived from the averaged
/// value `(S[k] + conj(S[−k]))/2`, so the result is exactly antisymmetric even
/// when round-off breaks the symmetry of near-zero bins. Self-mirrored bins
/// get a phase of exactly `0` or `π`.
pub fn extract_phase(spec: &Spectrum, magnitude_floor: f64) -> Result<PhaseConstraint> {
    if !(magnitude_floor >= 0.0) || !magnitude_floor.is_finite() {
        return Err(Error::invalid(format!(
            "magnitude floor must be >= 0, got {magnitude_floor}"
        )));
    }
    let (width, height) = spec.dims();
    let n = width * height;
    let threshold = magnitude_floor * spec.max_magnitude();
    let mut phase = vec![0.0; n];
    let mut mask = vec![false; n];
    for i in 0..n {
        let m = spec.mirror_index(i);
        if m < i {
            continue;
        }
        let z = (spec.data[i] + spec.data[m].conj()) * 0.5;
        let keep = z.norm() >= threshold;
        if m == i {
            phase[i] = if z.re >= 0.0 { 0.0 } else { PI };
        } else {
            let p = principal(z.arg());
            phase[i] = p;
            phase[m] = principal(-p);
        }
        mask[i] = keep;
        mask[m] = keep;
    }
    mask[0] = true;
    Ok(PhaseConstraint {
        width,
        height,
        phase,
        mask,
    })
}

/// Replaces the phase of `img`'s transform with `pc.phase` on masked bins,
/// keeping magnitudes. Zero-magnitude bins stay zero.
pub fn project_phase(img: &Image, pc: &PhaseConstraint) -> Result<Image> {
    pc.require_dims(img.width(), img.height())?;
    let mut spec = dft2(img);
    impose_phase(&mut spec, pc);
    idft2(&spec)
}

/// In-place spectral half of [`project_phase`].
pub fn impose_phase(spec: &mut Spectrum, pc: &PhaseConstraint) {
    debug_assert_eq!(spec.dims(), pc.dims());
    for ((x, &p), &m) in spec.data.iter_mut().zip(&pc.phase).zip(&pc.mask) {
        if m {
            *x = Complex64::from_polar(x.norm(), p);
        }
    }
}

/// Euclidean distance from `img` to the set of images whose transform has
/// phase `pc.phase` on every masked bin.
///
/// Each masked bin contributes its distance to the ray `{r·e^{jφ} : r ≥ 0}`;
/// Parseval converts the spectral sum back to the spatial norm.
pub fn distance_to_phase_set(img: &Image, pc: &PhaseConstraint) -> Result<f64> {
    pc.require_dims(img.width(), img.height())?;
    let spec = dft2(img);
    let mut sum = 0.0;
    for ((x, &p), &m) in spec.data.iter().zip(&pc.phase).zip(&pc.mask) {
        if !m {
            continue;
        }
        let u = x * Complex64::from_polar(1.0, -p);
        let d = if u.re >= 0.0 { u.im.abs() } else { u.norm() };
        sum += d * d;
    }
    Ok((sum / img.len() as f64).sqrt())
}

/// Inverse transform of `c · e^{jφ}` where `φ` is the phase of `img`.
pub fn phase_only_image(img: &Image, c: f64) -> Result<Image> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!(
            "phase-only scale must be > 0, got {c}"
        )));
    }
    let pc = extract_phase(&dft2(img), 0.0)?;
    let (width, height) = img.dims();
    let data = pc
        .phase
        .iter()
        .map(|&p| Complex64::from_polar(c, p))
        .collect();
    idft2(&Spectrum::from_raw(width, height, data))
}

/// Outcome of [`reconstruct_from_phase_with_start`].
#[derive(Debug, Clone)]
pub struct PhaseReconstruction {
    pub image: Image,
    /// Distance of each iterate to the phase set, one entry per cycle.
    pub distance_trace: Vec<f64>,
}

/// Recovers an image (up to a positive scale) from its Fourier phase and
/// spatial support by alternating the phase projection with support and
/// positivity constraints, starting from a seeded uniform image in `(0, 1]`.
pub fn reconstruct_from_phase(
    pc: &PhaseConstraint,
    support: &Mask,
    iters: usize,
    seed: u64,
) -> Result<Image> {
    let (width, height) = pc.dims();
    let start = random_positive_image(width, height, seed);
    Ok(reconstruct_from_phase_with_start(pc, support, iters, start)?.image)
}

/// [`reconstruct_from_phase`] from a caller-provided starting image.
pub fn reconstruct_from_phase_with_start(
    pc: &PhaseConstraint,
    support: &Mask,
    iters: usize,
    start: Image,
) -> Result<PhaseReconstruction> {
    if iters == 0 {
        return Err(Error::invalid(
            "reconstruction needs at least one iteration",
        ));
    }
    if support.is_all_false() {
        return Err(Error::invalid("support mask is empty"));
    }
    if support.dims() != pc.dims() || start.dims() != pc.dims() {
        return Err(Error::invalid(
            "support, start and phase constraint dimensions differ",
        ));
    }
    let mut x = start;
    let mut distance_trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        x = project_phase(&x, pc)?;
        for (v, &inside) in x.data_mut().iter_mut().zip(support.data()) {
            *v = if inside { v.max(0.0) } else { 0.0 };
        }
        distance_trace.push(distance_to_phase_set(&x, pc)?);
    }
    Ok(PhaseReconstruction {
        image: x,
        distance_trace,
    })
}

/// Seeded image with entries uniform in `(0, 1]`.
pub fn random_positive_image(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(width, height, |_, _| 1.0 - rng.random::<f64>())
}
