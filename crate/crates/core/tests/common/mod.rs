//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use pocs_deblur::{Image, Kernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut impl Rng, width: usize, height: usize) -> Image {
    Image::from_fn(width, height, |_, _| rng.random::<f64>())
}

/// Direct double-sum DFT, `X[k1,k2] = Σ x[n1,n2]·e^{−2πi(k1n1/N1 + k2n2/N2)}`.
pub fn naive_dft(img: &Image) -> Vec<Complex64> {
    let (w, h) = img.dims();
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for k1 in 0..h {
        for k2 in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for n1 in 0..h {
                for n2 in 0..w {
                    let angle =
                        -2.0 * PI * ((k1 * n1) as f64 / h as f64 + (k2 * n2) as f64 / w as f64);
                    acc += img.get(n1, n2) * Complex64::from_polar(1.0, angle);
                }
            }
            out[k1 * w + k2] = acc;
        }
    }
    out
}

/// Circular convolution `y[n] = Σ_m h[m]·x[n − m]` evaluated in space.
pub fn naive_circular_convolution(x: &Image, h: &Kernel) -> Image {
    let (w, hgt) = x.dims();
    let (hw, hh) = (h.half_width() as isize, h.half_height() as isize);
    Image::from_fn(w, hgt, |r, c| {
        let mut acc = 0.0;
        for m1 in -hh..=hh {
            for m2 in -hw..=hw {
                let rr = (r as isize - m1).rem_euclid(hgt as isize) as usize;
                let cc = (c as isize - m2).rem_euclid(w as isize) as usize;
                acc += h.at(m1, m2) * x.get(rr, cc);
            }
        }
        acc
    })
}

/// Anisotropic TV written out edge by edge.
pub fn naive_tv(img: &Image) -> f64 {
    let (w, h) = img.dims();
    let mut t = 0.0;
    for r in 0..h {
        for c in 0..w {
            if r + 1 < h {
                t += (img.get(r + 1, c) - img.get(r, c)).abs();
            }
            if c + 1 < w {
                t += (img.get(r, c + 1) - img.get(r, c)).abs();
            }
        }
    }
    t
}

/// `‖v − w‖² + λ²·TV(w)²`
pub fn epigraph_objective(v: &Image, w: &Image, lambda: f64) -> f64 {
    let t = naive_tv(w);
    v.distance(w).powi(2) + lambda * lambda * t * t
}

/// Edges `(i, j)` of the pixel grid with `(Dw)_e = w_j − w_i`.
fn grid_edges(w: usize, h: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..w * h {
        let (r, c) = (i / w, i % w);
        if c + 1 < w {
            edges.push((i, i + 1));
        }
        if r + 1 < h {
            edges.push((i, i + w));
        }
    }
    edges
}

/// Result of [`dual_coordinate_descent_epigraph`].
pub struct EpigraphOracle {
    /// Primal point recovered from the dual variables.
    pub image: Image,
    /// Certified lower bound on the optimal objective.
    pub lower_bound: f64,
}

/// Solves `min_w ‖v − w‖² + λ²TV(w)²` through its dual by exact
/// coordinate ascent.
///
/// Writing `TV(w)² = max_a 2a·TV(w) − a²` and `TV(w) = max_{|p|≤1} ⟨p, Dw⟩`,
/// the optimal value is `max_{a ≥ 0, |q_e| ≤ a} ‖v‖² − ‖v − λ²Dᵀq‖² − λ²a²`.
/// For fixed `a` this is a box-constrained concave quadratic in `q`, solved
/// by cycling over edges with the exact clipped one-dimensional maximizer;
/// the outer concave function of `a` is maximized by golden-section search
/// on `[0, TV(v)]`. The primal point is `w = v − λ²Dᵀq`.
pub fn dual_coordinate_descent_epigraph(v: &Image, lambda: f64, sweeps: usize) -> EpigraphOracle {
    let (w, h) = v.dims();
    let edges = grid_edges(w, h);
    let l2 = lambda * lambda;
    let vv = v.data();
    let norm_v: f64 = vv.iter().map(|x| x * x).sum();

    // best q for a fixed a, warm-started from the previous q
    let solve = |a: f64, q: &mut Vec<f64>| -> (f64, Vec<f64>) {
        for qe in q.iter_mut() {
            *qe = qe.clamp(-a, a);
        }
        let mut r = vv.to_vec();
        for (k, &(i, j)) in edges.iter().enumerate() {
            r[j] -= l2 * q[k];
            r[i] += l2 * q[k];
        }
        for _ in 0..sweeps {
            for (k, &(i, j)) in edges.iter().enumerate() {
                let next = (q[k] + (r[j] - r[i]) / (2.0 * l2)).clamp(-a, a);
                let delta = next - q[k];
                r[j] -= l2 * delta;
                r[i] += l2 * delta;
                q[k] = next;
            }
        }
        let norm_r: f64 = r.iter().map(|x| x * x).sum();
        (norm_v - norm_r - l2 * a * a, r)
    };

    let mut q = vec![0.0; edges.len()];
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, naive_tv(v));
    let mut best = solve(0.0, &mut q);
    for _ in 0..80 {
        let m1 = hi - golden * (hi - lo);
        let m2 = lo + golden * (hi - lo);
        let f1 = solve(m1, &mut q);
        let f2 = solve(m2, &mut q);
        if f1.0 >= f2.0 {
            hi = m2;
        } else {
            lo = m1;
        }
        for f in [f1, f2] {
            if f.0 > best.0 {
                best = f;
            }
        }
    }
    EpigraphOracle {
        image: Image::new(w, h, best.1).unwrap(),
        lower_bound: best.0,
    }
}
