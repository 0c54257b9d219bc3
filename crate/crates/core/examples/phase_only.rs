//! Phase-only images: the phase keeps edges and positions, even under noise.
//!
//! ```bash
//! cargo run --example phase_only -- /tmp/phase-only
//! ```

use pocs_deblur::simulate::add_noise;
use pocs_deblur::*;
use std::path::PathBuf;

fn stretch(img: &Image) -> Image {
    let (lo, hi) = (img.min(), img.max());
    img.map(|v| (v - lo) / (hi - lo))
}

fn main() -> pocs_deblur::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("pocs-deblur-phase-only"));
    std::fs::create_dir_all(&out)?;

    let x = make_phantom(PhantomKind::Cells, 128, 128, 4)?;
    let clean = phase_only_image(&x, 1.0)?;
    write_image(&x, out.join("original.png"), BitDepth::Eight)?;
    write_image(
        &stretch(&clean),
        out.join("phase-only.png"),
        BitDepth::Eight,
    )?;

    for sigma in [5.0, 30.0, 80.0] {
        let noisy = add_noise(&x, sigma / 255.0, 1)?;
        let p = phase_only_image(&noisy, 1.0)?;
        println!(
            "noise sigma {sigma:>4}/255: psnr of noisy image {:.2} dB, phase-only correlation {:.3}",
            psnr(&noisy, &x)?,
            p.correlation(&clean)
        );
        write_image(
            &stretch(&p),
            out.join(format!("phase-only-noise{sigma}.png")),
            BitDepth::Eight,
        )?;
    }
    println!("images in {}", out.display());
    Ok(())
}
