//! PNG and PGM round trips at 8 and 16 bits.
//!
//! ```bash
//! cargo run --example image_io -- /tmp/io-demo
//! ```

use pocs_deblur::*;
use std::path::PathBuf;

fn main() -> pocs_deblur::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("pocs-deblur-io"));
    std::fs::create_dir_all(&dir)?;

    let img = make_phantom(PhantomKind::Cells, 64, 64, 0)?;
    for (name, depth) in [
        ("cells8.png", BitDepth::Eight),
        ("cells16.png", BitDepth::Sixteen),
        ("cells8.pgm", BitDepth::Eight),
        ("cells16.pgm", BitDepth::Sixteen),
    ] {
        let path = dir.join(name);
        write_image(&img, &path, depth)?;
        let back = load_image(&path)?;
        println!(
            "{name:<12} {:>6} bytes  max error {:.2e} (half step {:.2e})",
            std::fs::metadata(&path)?.len(),
            back.max_abs_diff(&img),
            0.5 / depth.max_value() as f64
        );
    }

    match load_image(dir.join("missing.png")) {
        Err(e) => println!("missing file: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
