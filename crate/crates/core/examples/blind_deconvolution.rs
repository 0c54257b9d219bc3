//! Blind deconvolution of a synthetic observation with and without the
//! phase and TV-epigraph projections.
//!
//! ```bash
//! cargo run --release --example blind_deconvolution
//! ```

use pocs_deblur::experiment::{HARNESS_ALPHA, HARNESS_LAMBDA};
use pocs_deblur::simulate::gaussian_kernel;
use pocs_deblur::*;

fn main() -> pocs_deblur::Result<()> {
    let x = make_phantom(PhantomKind::Cells, 64, 64, 1)?;
    let h = gaussian_kernel(5, 2.0)?;
    let y = blur(&x, &h)?;
    println!("blurred: {:.2} dB", psnr(&y, &x)?);

    let cfg = DeconvConfig {
        alpha: HARNESS_ALPHA,
        lambda: HARNESS_LAMBDA,
        kernel_support: (11, 11),
        ..Default::default()
    };

    let base = ayers_dainty(&y, &cfg)?;
    println!(
        "ayers-dainty: {:.2} dB after {} iterations",
        psnr(&base.image_estimate, &x)?,
        base.iterations_used
    );

    // the observer sees every iteration; print the PSNR every 25 steps
    let mut trace = Vec::new();
    let result = BlindDeconvolver::new(&y, cfg.clone())?.run_observed(&mut |snap| {
        if snap.iteration % 25 == 0 {
            trace.push((snap.iteration, psnr(snap.next, &x).unwrap_or(f64::NAN)));
        }
    });
    for (i, p) in trace {
        println!("  iteration {i:>3}: {p:.2} dB");
    }
    println!(
        "modified: {:.2} dB after {} iterations, diverged {}",
        psnr(&result.image_estimate, &x)?,
        result.iterations_used,
        result.diverged()
    );

    let k = &result.kernel_estimate;
    let err: f64 = k
        .taps()
        .iter()
        .zip(h.taps())
        .map(|(a, b)| (a - b).abs())
        .sum();
    println!("kernel estimate: {:?} taps, l1 error {err:.3}", k.size());

    // each projection on its own
    for (name, phase, estv) in [
        ("phase only", true, false),
        ("tv epigraph only", false, true),
    ] {
        let c = DeconvConfig {
            use_phase: phase,
            use_estv: estv,
            ..cfg.clone()
        };
        let r = modified_blind_deconv(&y, &c)?;
        println!("{name}: {:.2} dB", psnr(&r.image_estimate, &x)?);
    }
    Ok(())
}
