//! A small benchmark grid, printed as CSV and markdown.
//!
//! ```bash
//! cargo run --release --example experiment_grid
//! ```
//!
//! The full grid behind the acceptance suite is `ExperimentSpec::default_grid()`;
//! the same grammar is accepted by `pocs-deblur experiment <spec-file>`.

use pocs_deblur::*;

const SPEC: &str = "
phantoms = cells:64x64:0..3
kernels  = gaussian
d        = 5
sigma    = 2, 3
methods  = ayers, modified, modified-phase-only, modified-estv-only
iters    = 100
";

fn main() -> pocs_deblur::Result<()> {
    let spec = ExperimentSpec::parse(SPEC)?;
    let report = run_experiment(&spec, None)?;
    print!("{}", report.to_csv());
    println!();
    print!("{}", report.to_markdown());
    let (wins, cells) = report.win_count(Method::Modified, Method::Ayers);
    println!("\nmodified wins {wins} of {cells} cells");
    Ok(())
}
