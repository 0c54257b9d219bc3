//! Impose the Fourier phase of one image on another.
//!
//! ```bash
//! cargo run --example phase_projection
//! ```

use pocs_deblur::spectral::distance_to_phase_set;
use pocs_deblur::*;

fn main() -> pocs_deblur::Result<()> {
    let target = make_phantom(PhantomKind::Cells, 64, 64, 1)?;
    let other = make_phantom(PhantomKind::Cells, 64, 64, 2)?;

    for floor in [0.0, 0.01, 0.1] {
        let pc = extract_phase(&dft2(&target), floor)?;
        let projected = project_phase(&other, &pc)?;
        let again = project_phase(&projected, &pc)?;
        println!(
            "floor {floor:<5} constrained bins {:>4}/4096  distance before {:.4}  after {:.2e}  \
             idempotence {:.1e}  corr with target {:.3}",
            pc.masked_count(),
            distance_to_phase_set(&other, &pc)?,
            distance_to_phase_set(&projected, &pc)?,
            again.max_abs_diff(&projected),
            projected.correlation(&target),
        );
    }

    // magnitudes are untouched, so the energy is too
    let pc = extract_phase(&dft2(&target), 0.0)?;
    let projected = project_phase(&other, &pc)?;
    println!(
        "norm before {:.6}, after {:.6}",
        other.norm(),
        projected.norm()
    );
    Ok(())
}
