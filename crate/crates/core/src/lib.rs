//! Blind image deconvolution with convex-set projections.
//!
//! The baseline is an iterative space–Fourier blind deconvolution loop.
//! The modified loop adds two projections per iteration: onto the set of
//! images whose Fourier phase matches the observation, and onto the epigraph
//! of the total-variation functional.

pub mod cli;
pub mod deconv;
pub mod error;
pub mod experiment;
pub mod image;
pub mod imageio;
pub mod simulate;
pub mod spectral;
pub mod tv;

pub use deconv::{
    ayers_dainty, modified_blind_deconv, BlindDeconvolver, DeconvConfig, DeconvResult, Step,
};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentReport, ExperimentSpec, Method};
pub use image::{Image, Mask};
pub use imageio::{load_image, write_image, BitDepth};
pub use simulate::{blur, make_kernel, make_phantom, psnr, Kernel, KernelKind, PhantomKind};
pub use spectral::{
    dft2, extract_phase, idft2, phase_only_image, project_phase, reconstruct_from_phase,
    PhaseConstraint, Spectrum,
};
pub use tv::{project_epigraph, tv, EpigraphProjector};
