//! Anisotropic total variation and projections onto TV-defined convex sets.
//!
//! The central operation is [`project_epigraph`]: the orthogonal projection
//! of the lifted point `[v, 0]` onto `{(w, z) : λ·TV(w) ≤ z}`. Its image part
//! solves `min_w ‖v − w‖² + λ²·TV(w)²`, so the TV bound adapts to the input
//! instead of being fixed in advance as with [`project_tv_ball`].
//!
//! # Method
//!
//! Every boundary point `[w, λTV(w)]` with a subgradient `g ∈ ∂(λTV)(w)`
//! defines a supporting hyperplane `λTV(w) + ⟨g, u − w⟩ = z`. Projecting the
//! lifted point onto that hyperplane gives the new level
//!
//! ```text
//! t' = (λTV(w) + ⟨g, v − w⟩) / (‖g‖² + 1)
//! ```
//!
//! and the boundary point for a level `t` is `w = prox_{tλTV}(v)`, whose
//! subgradient is `g = (v − w)/t`. The two steps are iterated until the
//! lifted point stops moving; at the fixed point `t = λTV(w)` and
//! `v − w = t·g`, which are exactly the optimality conditions of the
//! projection. The level update is a Newton step on `λTV(w_t) − t`, which
//! is convex and decreasing in `t`, and is safeguarded by a bracket.

use crate::error::{Error, Result};
use crate::image::Image;

/// Anisotropic TV: sum of absolute vertical and horizontal neighbour
/// differences. Differences that would cross the border are skipped.
pub fn tv(img: &Image) -> f64 {
    let (w, h) = img.dims();
    let d = img.data();
    let mut sum = 0.0;
    for r in 0..h {
        let row = &d[r * w..(r + 1) * w];
        for c in 0..w.saturating_sub(1) {
            sum += (row[c + 1] - row[c]).abs();
        }
        if r + 1 < h {
            let next = &d[(r + 1) * w..(r + 2) * w];
            for c in 0..w {
                sum += (next[c] - row[c]).abs();
            }
        }
    }
    sum
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A subgradient of [`tv`], using `sign(0) = 0` on flat differences.
pub fn tv_subgradient(img: &Image) -> Image {
    let (w, h) = img.dims();
    let d = img.data();
    let mut g = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if c + 1 < w {
                let s = sign(d[i + 1] - d[i]);
                g[i + 1] += s;
                g[i] -= s;
            }
            if r + 1 < h {
                let s = sign(d[i + w] - d[i]);
                g[i + w] += s;
                g[i] -= s;
            }
        }
    }
    Image::from_raw(w, h, g)
}

/// A point `[image, z]` of the lifted space.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedImage {
    pub image: Image,
    pub z: f64,
}

impl LiftedImage {
    pub fn new(image: Image, z: f64) -> Self {
        Self { image, z }
    }

    /// Membership in the epigraph of TV: `TV(image) ≤ z + tol`.
    pub fn in_epigraph(&self, tol: f64) -> bool {
        tv(&self.image) <= self.z + tol
    }

    /// Euclidean distance in the lifted space.
    pub fn distance(&self, other: &LiftedImage) -> f64 {
        let dz = self.z - other.z;
        (self.image.distance(&other.image).powi(2) + dz * dz).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct EpigraphProjectionResult {
    /// Image part of the projection.
    pub projected: Image,
    /// TV of `projected`; the lifted coordinate in TV units.
    pub z: f64,
    pub iterations_used: usize,
    /// Distance from the final boundary point to its last supporting
    /// hyperplane projection, in the lifted space.
    pub residual: f64,
}

impl EpigraphProjectionResult {
    pub fn lifted(&self) -> LiftedImage {
        LiftedImage::new(self.projected.clone(), self.z)
    }
}

/// Defaults used when the caller has no preference.
pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_TOL: f64 = 1e-5;
pub const DEFAULT_MAX_ITERS: usize = 100;

/// Upper bound on inner proximal iterations per outer step.
const PROX_MAX_ITERS: usize = 20_000;

/// Projects `[v, 0]` onto the epigraph of `λ·TV`.
///
/// Returns the image part together with its TV. Stops when the lifted point
/// moves less than `tol` between supporting-hyperplane steps, or after
/// `max_iters` steps; in the latter case the last iterate is returned and
/// its residual recorded.
pub fn project_epigraph(
    v: &Image,
    lambda: f64,
    max_iters: usize,
    tol: f64,
) -> Result<EpigraphProjectionResult> {
    EpigraphProjector::new().project(v, lambda, max_iters, tol)
}

/// Epigraph projection that keeps its solver state between calls.
///
/// Consecutive inputs of an iterative method are usually close, so the
/// previous level and dual variables are good starting points for the next
/// projection. Results agree with [`project_epigraph`] up to the tolerance.
#[derive(Debug, Clone, Default)]
pub struct EpigraphProjector {
    prox: ProxTv,
    /// Level `t` of the last solution, in units of `λ·TV`.
    level: Option<f64>,
}

impl EpigraphProjector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn project(
        &mut self,
        v: &Image,
        lambda: f64,
        max_iters: usize,
        tol: f64,
    ) -> Result<EpigraphProjectionResult> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be > 0, got {lambda}")));
        }
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(Error::invalid(format!("tolerance must be > 0, got {tol}")));
        }
        if max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }

        let tv_v = tv(v);
        if v.len() <= 1 || tv_v == 0.0 {
            return Ok(EpigraphProjectionResult {
                projected: v.clone(),
                z: 0.0,
                iterations_used: 0,
                residual: 0.0,
            });
        }

        let f_v = lambda * tv_v;
        let mut level = match self.level {
            Some(t) if t > 0.0 && t < f_v => t,
            _ => {
                // first hyperplane: supporting at [v, λTV(v)]
                let g0 = tv_subgradient(v);
                f_v / (lambda * lambda * g0.dot(&g0) + 1.0)
            }
        };
        let (mut lo, mut hi): (f64, f64) = (0.0, f_v);

        // accuracy of each boundary point, well below the outer tolerance
        let inner_eps = 0.1 * tol;
        let mut w_prev = v.clone();
        let mut iterations_used = 0;
        let mut residual = f64::INFINITY;

        for k in 1..=max_iters {
            iterations_used = k;
            let w = self
                .prox
                .solve(v, level * lambda, inner_eps, PROX_MAX_ITERS);
            let f_w = lambda * tv(&w);
            let gap = f_w - level;
            if gap > 0.0 {
                lo = lo.max(level);
            } else {
                hi = hi.min(level);
            }
            let g_sq = v.distance(&w).powi(2) / (level * level);
            residual = gap.abs() / (g_sq + 1.0).sqrt();

            let mut next = level + gap / (g_sq + 1.0);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let moved = (w.distance(&w_prev).powi(2) + (next - level).powi(2)).sqrt();
            w_prev = w;
            self.level = Some(level);
            level = next;
            if moved < tol || hi - lo < 1e-15 * f_v {
                break;
            }
        }

        let z = tv(&w_prev);
        Ok(EpigraphProjectionResult {
            projected: w_prev,
            z,
            iterations_used,
            residual,
        })
    }
}

/// Nearest image with `TV ≤ epsilon`.
///
/// The projection onto the TV ball is `prox_{μTV}(v)` for the multiplier `μ`
/// at which the TV constraint is active; `μ` is found with the same
/// safeguarded Newton iteration as the epigraph projection, using
/// `d TV(w_μ)/dμ = −‖(v − w_μ)/μ‖²`.
pub fn project_tv_ball(v: &Image, epsilon: f64, max_iters: usize, tol: f64) -> Result<Image> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::invalid(format!("tolerance must be > 0, got {tol}")));
    }
    if max_iters == 0 {
        return Err(Error::invalid("max_iters must be >= 1"));
    }
    let tv_v = tv(v);
    if tv_v <= epsilon {
        return Ok(v.clone());
    }
    if epsilon == 0.0 {
        return Ok(Image::constant(v.width(), v.height(), v.mean()));
    }

    let g0 = tv_subgradient(v);
    let mut mu = (tv_v - epsilon) / g0.dot(&g0).max(1.0);
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let mut prox = ProxTv::default();
    let inner_eps = 0.1 * tol;
    let mut best = v.clone();
    for _ in 0..max_iters {
        let w = prox.solve(v, mu, inner_eps, PROX_MAX_ITERS);
        let excess = tv(&w) - epsilon;
        if excess > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let done = excess.abs() <= tol;
        best = w;
        if done {
            break;
        }
        let g_sq = v.distance(&best).powi(2) / (mu * mu);
        let mut next = mu + excess / g_sq.max(1e-300);
        if !(next > lo && next < hi) {
            next = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * lo.max(mu)
            };
        }
        mu = next;
    }
    Ok(best)
}

/// Proximal operator of anisotropic TV: `argmin_w ½‖w − v‖² + weight·TV(w)`.
///
/// `eps` bounds the Euclidean error of the returned image (through the
/// duality gap); `max_iters` caps the dual iterations.
pub fn prox_tv(v: &Image, weight: f64, eps: f64, max_iters: usize) -> Image {
    ProxTv::default().solve(v, weight, eps, max_iters)
}

/// Dual projected-gradient solver with FISTA momentum and gradient restart.
///
/// Dual variables live on edges, `|p_e| ≤ weight`; the primal image is
/// `w = v − Dᵀp`. The duality gap `Σ_e weight·|Dw|_e − p_e·(Dw)_e` bounds
/// `½‖w − w*‖²`. The dual is kept between calls and rescaled when the
/// weight changes, which warm-starts the sequence of solves.
#[derive(Debug, Clone, Default)]
pub(crate) struct ProxTv {
    dims: (usize, usize),
    /// Vertical edges `(r, c) → (r+1, c)`, `(h−1)·w` of them.
    pv: Vec<f64>,
    /// Horizontal edges `(r, c) → (r, c+1)`, `h·(w−1)` of them.
    ph: Vec<f64>,
    weight: f64,
}

impl ProxTv {
    fn reset(&mut self, dims: (usize, usize)) {
        let (w, h) = dims;
        self.dims = dims;
        self.pv = vec![0.0; h.saturating_sub(1) * w];
        self.ph = vec![0.0; h * w.saturating_sub(1)];
        self.weight = 0.0;
    }

    /// `out = v − Dᵀp`
    fn primal(&self, v: &Image, pv: &[f64], ph: &[f64], out: &mut [f64]) {
        let (w, h) = self.dims;
        let n = w * h;
        out.copy_from_slice(v.data());
        // vertical edge i joins pixels i and i + w
        for (o, &p) in out[..n - w].iter_mut().zip(pv) {
            *o += p;
        }
        for (o, &p) in out[w..].iter_mut().zip(pv) {
            *o -= p;
        }
        if w > 1 {
            for (row, prow) in out.chunks_exact_mut(w).zip(ph.chunks_exact(w - 1)) {
                for (o, &p) in row[..w - 1].iter_mut().zip(prow) {
                    *o += p;
                }
                for (o, &p) in row[1..].iter_mut().zip(prow) {
                    *o -= p;
                }
            }
        }
    }

    fn gap(&self, x: &[f64]) -> f64 {
        let (w, _) = self.dims;
        let t = self.weight;
        let mut gap = 0.0;
        for ((&a, &b), &p) in x.iter().zip(&x[w..]).zip(&self.pv) {
            let d = b - a;
            gap += t * d.abs() - p * d;
        }
        if w > 1 {
            for (row, prow) in x.chunks_exact(w).zip(self.ph.chunks_exact(w - 1)) {
                for ((&a, &b), &p) in row.iter().zip(&row[1..]).zip(prow) {
                    let d = b - a;
                    gap += t * d.abs() - p * d;
                }
            }
        }
        gap
    }

    pub(crate) fn solve(&mut self, v: &Image, weight: f64, eps: f64, max_iters: usize) -> Image {
        if self.dims != v.dims() {
            self.reset(v.dims());
        }
        let (w, h) = self.dims;
        let n = w * h;
        if weight <= 0.0 || n <= 1 {
            return v.clone();
        }
        // warm start: rescale the previous dual into the new box
        if self.weight > 0.0 {
            let s = weight / self.weight;
            self.pv
                .iter_mut()
                .chain(self.ph.iter_mut())
                .for_each(|p| *p *= s);
        }
        self.weight = weight;

        let gap_tol = 0.5 * eps * eps;
        let step = 1.0 / 8.0;
        let mut x = vec![0.0; n];
        let (mut qv, mut qh) = (self.pv.clone(), self.ph.clone());
        let (mut prev_v, mut prev_h) = (self.pv.clone(), self.ph.clone());
        let mut momentum = 1.0f64;

        for it in 0..max_iters {
            if it % 10 == 0 {
                self.primal(v, &self.pv, &self.ph, &mut x);
                if self.gap(&x) <= gap_tol {
                    return Image::from_raw(w, h, x);
                }
            }
            // projected gradient step from the extrapolated point q
            self.primal(v, &qv, &qh, &mut x);
            prev_v.copy_from_slice(&self.pv);
            prev_h.copy_from_slice(&self.ph);
            for (((p, &q), &a), &b) in self.pv.iter_mut().zip(&qv).zip(&x).zip(&x[w..]) {
                *p = (q + step * (b - a)).clamp(-weight, weight);
            }
            if w > 1 {
                let rows = self.ph.chunks_exact_mut(w - 1).zip(qh.chunks_exact(w - 1));
                for ((prow, qrow), xrow) in rows.zip(x.chunks_exact(w)) {
                    for (((p, &q), &a), &b) in prow.iter_mut().zip(qrow).zip(xrow).zip(&xrow[1..]) {
                        *p = (q + step * (b - a)).clamp(-weight, weight);
                    }
                }
            }
            // restart when the extrapolation points against the step
            let dir = restart_direction(&qv, &self.pv, &prev_v)
                + restart_direction(&qh, &self.ph, &prev_h);
            let beta = if dir > 0.0 {
                momentum = 1.0;
                0.0
            } else {
                let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
                let b = (momentum - 1.0) / next;
                momentum = next;
                b
            };
            extrapolate(&mut qv, &self.pv, &prev_v, beta);
            extrapolate(&mut qh, &self.ph, &prev_h, beta);
        }
        self.primal(v, &self.pv, &self.ph, &mut x);
        Image::from_raw(w, h, x)
    }
}

/// `⟨q − p, p − p_prev⟩`
fn restart_direction(q: &[f64], p: &[f64], prev: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .zip(prev)
        .map(|((&q, &p), &o)| (q - p) * (p - o))
        .sum()
}

/// `q = p + β·(p − p_prev)`
fn extrapolate(q: &mut [f64], p: &[f64], prev: &[f64], beta: f64) {
    for ((q, &p), &o) in q.iter_mut().zip(p).zip(prev) {
        *q = p + beta * (p - o);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, data: &[f64]) -> Image {
        Image::new(w, h, data.to_vec()).unwrap()
    }

    #[test]
    fn tv_of_2x2_example() {
        assert_eq!(tv(&img(2, 2, &[0.0, 1.0, 2.0, 3.0])), 6.0);
    }

    #[test]
    fn tv_of_flat_and_single_pixel() {
        assert_eq!(tv(&Image::constant(7, 3, 0.3)), 0.0);
        assert_eq!(tv(&img(1, 1, &[5.0])), 0.0);
    }

    #[test]
    fn subgradient_of_constant_is_zero() {
        let g = tv_subgradient(&Image::constant(4, 4, 2.0));
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn subgradient_of_ramp() {
        let ramp = Image::from_fn(4, 3, |_, c| c as f64);
        let g = tv_subgradient(&ramp);
        for r in 0..3 {
            assert_eq!(g.get(r, 0), -1.0);
            assert_eq!(g.get(r, 1), 0.0);
            assert_eq!(g.get(r, 2), 0.0);
            assert_eq!(g.get(r, 3), 1.0);
        }
    }

    #[test]
    fn epigraph_rejects_bad_parameters() {
        let v = Image::constant(3, 3, 1.0);
        assert!(project_epigraph(&v, 0.0, 10, 1e-5).is_err());
        assert!(project_epigraph(&v, 1.0, 10, -1.0).is_err());
        assert!(project_epigraph(&v, 1.0, 0, 1e-5).is_err());
    }

    #[test]
    fn epigraph_leaves_constant_image() {
        let v = Image::constant(5, 4, 0.7);
        let r = project_epigraph(&v, 1.0, 100, 1e-5).unwrap();
        assert_eq!(r.projected, v);
        assert_eq!(r.z, 0.0);
    }

    #[test]
    fn epigraph_of_single_pixel_is_identity() {
        let v = img(1, 1, &[0.4]);
        let r = project_epigraph(&v, 1.0, 100, 1e-5).unwrap();
        assert_eq!(r.projected, v);
        assert_eq!(r.z, 0.0);
    }

    #[test]
    fn epigraph_of_impulse_matches_closed_form() {
        // center a, other pixels b: minimize (1 − a)² + 8b² + 16(a − b)²,
        // giving a = 3/19, b = 2/19 and TV = 4/19
        let v = Image::impulse(3, 3, 1, 1);
        let r = project_epigraph(&v, 1.0, 100, 1e-7).unwrap();
        let expected = Image::from_fn(3, 3, |r, c| {
            if (r, c) == (1, 1) {
                3.0 / 19.0
            } else {
                2.0 / 19.0
            }
        });
        assert!(
            r.projected.max_abs_diff(&expected) < 1e-5,
            "{:?}",
            r.projected
        );
        assert!((r.z - 4.0 / 19.0).abs() < 1e-5);
    }

    #[test]
    fn prox_of_two_pixels_closed_form() {
        // ½(a−1)² + ½b² + t|a − b| with t small: a = 1 − t, b = t
        let v = img(2, 1, &[1.0, 0.0]);
        let w = prox_tv(&v, 0.2, 1e-10, 10_000);
        assert!((w.get(0, 0) - 0.8).abs() < 1e-9);
        assert!((w.get(0, 1) - 0.2).abs() < 1e-9);
        // beyond t = ½ both pixels meet at the mean
        let w = prox_tv(&v, 0.9, 1e-10, 10_000);
        assert!((w.get(0, 0) - 0.5).abs() < 1e-9);
        assert!((w.get(0, 1) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn tv_ball_member_is_unchanged() {
        let v = img(2, 2, &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(project_tv_ball(&v, 6.0, 50, 1e-6).unwrap(), v);
        assert!(project_tv_ball(&v, -1.0, 50, 1e-6).is_err());
    }

    #[test]
    fn tv_ball_of_radius_zero_is_mean() {
        let v = img(2, 2, &[0.0, 1.0, 2.0, 3.0]);
        let out = project_tv_ball(&v, 0.0, 50, 1e-6).unwrap();
        assert!(out.max_abs_diff(&Image::constant(2, 2, 1.5)) < 1e-12);
    }

    #[test]
    fn lifted_membership() {
        let v = img(2, 2, &[0.0, 1.0, 2.0, 3.0]);
        assert!(LiftedImage::new(v.clone(), 6.0).in_epigraph(0.0));
        assert!(!LiftedImage::new(v, 5.0).in_epigraph(1e-6));
    }
}
