//! Epigraph projection of TV: denoising without choosing a TV bound.
//!
//! ```bash
//! cargo run --example tv_epigraph
//! ```

use pocs_deblur::simulate::add_noise;
use pocs_deblur::tv::project_tv_ball;
use pocs_deblur::*;

fn main() -> pocs_deblur::Result<()> {
    let x = make_phantom(PhantomKind::Step, 64, 64, 0)?;
    let noisy = add_noise(&x, 0.05, 3)?;
    println!(
        "clean tv {:.1}, noisy tv {:.1}, noisy psnr {:.2} dB",
        tv(&x),
        tv(&noisy),
        psnr(&noisy, &x)?
    );

    // λ scales the lifted coordinate; the TV of the result follows from it
    for lambda in [0.002, 0.005, 0.01, 0.02] {
        let p = project_epigraph(&noisy, lambda, 100, 1e-4)?;
        println!(
            "lambda {lambda:<6} tv {:>7.1}  psnr {:.2} dB  outer steps {}",
            p.z,
            psnr(&p.projected, &x)?,
            p.iterations_used
        );
    }

    // the same result as a TV-ball projection with the bound it picked
    let p = project_epigraph(&noisy, 0.01, 100, 1e-6)?;
    let ball = project_tv_ball(&noisy, p.z, 100, 1e-6)?;
    println!(
        "tv-ball with that bound differs by {:.2e}",
        ball.max_abs_diff(&p.projected)
    );

    // consecutive, similar inputs reuse the solver state
    let mut projector = EpigraphProjector::new();
    for seed in 0..3 {
        let v = add_noise(&x, 0.05, seed)?;
        let p = projector.project(&v, 0.01, 100, 1e-4)?;
        println!("warm start, seed {seed}: outer steps {}", p.iterations_used);
    }
    Ok(())
}
