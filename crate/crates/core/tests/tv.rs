mod common;

use common::{dual_coordinate_descent_epigraph, epigraph_objective, naive_tv, random_image, rng};
use pocs_deblur::tv::{project_tv_ball, prox_tv, tv_subgradient, LiftedImage};
use pocs_deblur::*;
use proptest::prelude::*;
use rand::Rng;

fn image_strategy(min: usize, max: usize) -> impl Strategy<Value = Image> {
    (min..=max, min..=max).prop_flat_map(|(w, h)| {
        proptest::collection::vec(-1.0f64..1.0, w * h)
            .prop_map(move |data| Image::new(w, h, data).unwrap())
    })
}

fn pair_strategy(min: usize, max: usize) -> impl Strategy<Value = (Image, Image)> {
    (min..=max, min..=max).prop_flat_map(|(w, h)| {
        let v = proptest::collection::vec(-1.0f64..1.0, w * h);
        (v.clone(), v)
            .prop_map(move |(a, b)| (Image::new(w, h, a).unwrap(), Image::new(w, h, b).unwrap()))
    })
}

fn lifted(w: &Image, lambda: f64) -> LiftedImage {
    LiftedImage::new(w.clone(), lambda * tv(w))
}

#[test]
fn ramp_has_unit_steps() {
    let ramp = Image::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    assert_eq!(tv(&ramp), 3.0);
    assert_eq!(
        tv(&Image::new(1, 4, vec![0.0, 1.0, 2.0, 3.0]).unwrap()),
        3.0
    );
    // checkerboard: every one of the 2·3·4 − 3 − 4 = 17 edges jumps by 1
    let board = Image::from_fn(4, 3, |r, c| ((r + c) % 2) as f64);
    assert_eq!(tv(&board), 17.0);
}

#[test]
fn impulse_projection_matches_hand_solution() {
    // (1 − a)² + 8b² + 16(a − b)² is minimized at a = 3/19, b = 2/19
    let v = Image::impulse(3, 3, 1, 1);
    let r = project_epigraph(&v, 1.0, 200, 1e-8).unwrap();
    let oracle = dual_coordinate_descent_epigraph(&v, 1.0, 2000);
    for out in [&r.projected, &oracle.image] {
        assert!((out.get(1, 1) - 3.0 / 19.0).abs() < 1e-5, "{out:?}");
        assert!((out.get(0, 0) - 2.0 / 19.0).abs() < 1e-5, "{out:?}");
    }
    assert!((r.z - 4.0 / 19.0).abs() < 1e-5);
}

#[test]
fn projection_matches_dual_oracle_on_grid_values() {
    // images with values in {0, 0.5, 1} create many ties, which is where a
    // projection that mishandles flat regions goes wrong
    let mut r = rng(2024);
    for case in 0..500 {
        let (w, h) = (r.random_range(1..=4usize), r.random_range(1..=4usize));
        let v = Image::from_fn(w, h, |_, _| 0.5 * r.random_range(0..=2) as f64);
        let lambda = [0.1, 0.3, 1.0, 2.0][case % 4];
        check_against_oracle(&v, lambda, case);
    }
}

#[test]
fn projection_matches_dual_oracle_on_random_images() {
    let mut r = rng(7);
    for case in 0..40 {
        let v = random_image(&mut r, 5, 4);
        let lambda = 0.05 + 0.5 * r.random::<f64>();
        check_against_oracle(&v, lambda, case);
    }
}

fn check_against_oracle(v: &Image, lambda: f64, case: usize) {
    let fast = project_epigraph(v, lambda, 200, 1e-9).unwrap();
    let oracle = dual_coordinate_descent_epigraph(v, lambda, 500);
    let f_fast = epigraph_objective(v, &fast.projected, lambda);
    let f_oracle = epigraph_objective(v, &oracle.image, lambda);
    // the dual value bounds every feasible objective from below
    assert!(f_fast >= oracle.lower_bound - 1e-9, "case {case}");
    assert!(f_oracle >= oracle.lower_bound - 1e-9, "case {case}");
    // the objective is 2-strongly convex, so a gap δ to the lower bound puts
    // the result within √δ of the unique minimizer
    let gap = f_fast - oracle.lower_bound;
    assert!(gap < 1e-6, "case {case}: gap {gap} for {v:?}");
    assert!(
        fast.projected.max_abs_diff(&oracle.image) < 2e-3,
        "case {case}"
    );
}

#[test]
fn warm_started_projector_agrees_with_fresh_projection() {
    let mut r = rng(9);
    let mut projector = EpigraphProjector::new();
    let base = random_image(&mut r, 12, 10);
    for step in 0..6 {
        let v = base.map(|x| x * (1.0 + 0.1 * step as f64));
        let warm = projector.project(&v, 0.3, 200, 1e-8).unwrap();
        let cold = project_epigraph(&v, 0.3, 200, 1e-8).unwrap();
        assert!(
            warm.projected.max_abs_diff(&cold.projected) < 1e-5,
            "step {step}"
        );
    }
}

#[test]
fn projection_rejects_bad_parameters() {
    let v = Image::impulse(4, 4, 1, 1);
    assert!(project_epigraph(&v, 0.0, 10, 1e-6).is_err());
    assert!(project_epigraph(&v, f64::NAN, 10, 1e-6).is_err());
    assert!(project_epigraph(&v, 1.0, 0, 1e-6).is_err());
    assert!(project_epigraph(&v, 1.0, 10, 0.0).is_err());
}

#[test]
fn tv_ball_projection_is_nearest_point() {
    let mut r = rng(4);
    let v = random_image(&mut r, 6, 5);
    let eps = 0.3 * tv(&v);
    let p = project_tv_ball(&v, eps, 200, 1e-9).unwrap();
    assert!(tv(&p) <= eps + 1e-6);
    // variational inequality against members of the ball
    let mean = Image::constant(6, 5, v.mean());
    let shrunk = v.map(|x| v.mean() + 0.3 * (x - v.mean()));
    let other = random_image(&mut r, 6, 5);
    let other = other.map(|x| 0.1 * eps / tv(&other) * x);
    for u in [mean, shrunk, other] {
        assert!(tv(&u) <= eps + 1e-12);
        let lhs: f64 = v
            .data()
            .iter()
            .zip(p.data())
            .zip(u.data())
            .map(|((vi, pi), ui)| (vi - pi) * (ui - pi))
            .sum();
        assert!(lhs <= 1e-6, "{lhs}");
    }
}

#[test]
fn tv_ball_edge_cases() {
    let v = Image::from_fn(4, 4, |r, c| (r * c) as f64);
    assert_eq!(project_tv_ball(&v, tv(&v) + 1.0, 10, 1e-6).unwrap(), v);
    let flat = project_tv_ball(&v, 0.0, 10, 1e-6).unwrap();
    assert!(flat.max_abs_diff(&Image::constant(4, 4, v.mean())) < 1e-12);
    assert!(project_tv_ball(&v, -1.0, 10, 1e-6).is_err());
}

#[test]
fn prox_of_large_weight_is_mean() {
    let v = Image::from_fn(5, 3, |r, c| (r + 2 * c) as f64);
    let w = prox_tv(&v, 1e3, 1e-10, 100_000);
    assert!(w.max_abs_diff(&Image::constant(5, 3, v.mean())) < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tv_matches_naive_sum(img in image_strategy(1, 20)) {
        prop_assert!((tv(&img) - naive_tv(&img)).abs() < 1e-9);
    }

    #[test]
    fn tv_is_homogeneous_and_shift_invariant(img in image_strategy(1, 16), a in -5.0f64..5.0, c in -5.0f64..5.0) {
        let t = tv(&img);
        prop_assert!((tv(&img.map(|v| a * v)) - a.abs() * t).abs() < 1e-9 * (1.0 + t));
        prop_assert!((tv(&img.map(|v| v + c)) - t).abs() < 1e-9 * (1.0 + t));
    }

    #[test]
    fn tv_is_convex((x, y) in pair_strategy(1, 12), s in 0.0f64..1.0) {
        let mix = Image::new(
            x.width(), x.height(),
            x.data().iter().zip(y.data()).map(|(a, b)| s * a + (1.0 - s) * b).collect(),
        ).unwrap();
        prop_assert!(tv(&mix) <= s * tv(&x) + (1.0 - s) * tv(&y) + 1e-9);
    }

    #[test]
    fn subgradient_inequality_holds((x, y) in pair_strategy(1, 12)) {
        let g = tv_subgradient(&x);
        let diff = Image::new(
            x.width(), x.height(),
            y.data().iter().zip(x.data()).map(|(a, b)| a - b).collect(),
        ).unwrap();
        prop_assert!(tv(&y) >= tv(&x) + g.dot(&diff) - 1e-9);
    }

    #[test]
    fn subgradient_matches_finite_differences(img in image_strategy(2, 8), i in any::<prop::sample::Index>()) {
        // random real data has no ties, so TV is differentiable there
        let k = i.index(img.len());
        let h = 1e-7;
        let mut plus = img.clone();
        plus.data_mut()[k] += h;
        let mut minus = img.clone();
        minus.data_mut()[k] -= h;
        let fd = (tv(&plus) - tv(&minus)) / (2.0 * h);
        prop_assert!((fd - tv_subgradient(&img).data()[k]).abs() < 1e-4);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_lands_on_epigraph_and_reduces_tv(img in image_strategy(2, 8), lambda in 0.05f64..2.0) {
        let r = project_epigraph(&img, lambda, 200, 1e-7).unwrap();
        prop_assert!(LiftedImage::new(r.projected.clone(), r.z).in_epigraph(1e-12));
        prop_assert!((r.z - tv(&r.projected)).abs() < 1e-12);
        prop_assert!(tv(&r.projected) <= tv(&img) + 1e-9);
        prop_assert!((r.projected.mean() - img.mean()).abs() < 1e-6);
        // a projection never moves farther than to any member of the set,
        // for instance the constant image at the mean
        let flat = Image::constant(img.width(), img.height(), img.mean());
        prop_assert!(epigraph_objective(&img, &r.projected, lambda) <= img.distance(&flat).powi(2) + 1e-8);
    }

    #[test]
    fn projection_is_non_expansive((a, b) in pair_strategy(2, 8), lambda in 0.05f64..2.0) {
        let pa = project_epigraph(&a, lambda, 300, 1e-7).unwrap();
        let pb = project_epigraph(&b, lambda, 300, 1e-7).unwrap();
        let d_out = lifted(&pa.projected, lambda).distance(&lifted(&pb.projected, lambda));
        prop_assert!(d_out <= a.distance(&b) + 1e-5);
    }
}
