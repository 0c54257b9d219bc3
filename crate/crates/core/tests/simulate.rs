mod common;

use common::{naive_circular_convolution, random_image, rng};
use pocs_deblur::simulate::{add_noise, gaussian_kernel, uniform_kernel, STEP_HIGH, STEP_LOW};
use pocs_deblur::*;
use proptest::prelude::*;
use rand::Rng;

fn random_kernel(r: &mut impl Rng) -> Kernel {
    let d = r.random_range(1..=3);
    if r.random_bool(0.5) {
        gaussian_kernel(d, r.random_range(0.3..3.0)).unwrap()
    } else {
        uniform_kernel(d).unwrap()
    }
}

#[test]
fn blur_matches_naive_circular_convolution() {
    let mut r = rng(1);
    for _ in 0..20 {
        let (w, h) = (r.random_range(7..=20), r.random_range(7..=20));
        let x = random_image(&mut r, w, h);
        let k = random_kernel(&mut r);
        let fast = blur(&x, &k).unwrap();
        let slow = naive_circular_convolution(&x, &k);
        assert!(fast.max_abs_diff(&slow) < 1e-10);
    }
}

#[test]
fn blur_of_impulse_reproduces_kernel() {
    let k = gaussian_kernel(2, 1.2).unwrap();
    let out = blur(&Image::impulse(9, 9, 4, 4), &k).unwrap();
    for n1 in -2..=2isize {
        for n2 in -2..=2isize {
            let v = out.get((4 + n1) as usize, (4 + n2) as usize);
            assert!((v - k.at(n1, n2)).abs() < 1e-12);
        }
    }
    assert!((out.sum() - 1.0).abs() < 1e-12);
}

#[test]
fn delta_kernel_is_identity_and_size_is_checked() {
    let mut r = rng(2);
    let x = random_image(&mut r, 6, 5);
    assert!(blur(&x, &Kernel::delta()).unwrap().max_abs_diff(&x) < 1e-12);
    let big = gaussian_kernel(3, 1.0).unwrap();
    assert!(blur(&x, &big).is_err());
}

#[test]
fn kernel_constructor_validates_taps() {
    assert!(Kernel::new(1, 0, vec![0.25, 0.5, 0.25]).is_ok());
    assert!(Kernel::new(1, 0, vec![0.5, 0.5]).is_err());
    assert!(Kernel::new(1, 0, vec![0.2, 0.5, 0.2]).is_err());
    assert!(Kernel::new(1, 0, vec![0.1, 0.5, 0.4]).is_err());
    assert!(Kernel::new(1, 0, vec![-0.25, 1.5, -0.25]).is_err());
}

#[test]
fn embedded_kernel_has_real_spectrum() {
    for k in [gaussian_kernel(3, 1.5).unwrap(), uniform_kernel(4).unwrap()] {
        let spec = k.spectrum(16, 12).unwrap();
        assert!(spec.data().iter().all(|c| c.im.abs() < 1e-12));
        assert!((spec.get(0, 0).re - 1.0).abs() < 1e-12);
    }
}

#[test]
fn noise_has_requested_statistics() {
    let x = Image::constant(256, 256, 0.5);
    let noisy = add_noise(&x, 0.1, 42).unwrap();
    let n = noisy.len() as f64;
    let mean = noisy.mean() - 0.5;
    let var = noisy
        .data()
        .iter()
        .map(|v| (v - 0.5 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    // standard errors: 0.1/256 for the mean, about 0.1·√(2/n) for the std
    assert!(mean.abs() < 4.0 * 0.1 / 256.0, "{mean}");
    assert!(
        (var.sqrt() - 0.1).abs() < 4.0 * 0.1 * (2.0 / n).sqrt(),
        "{}",
        var.sqrt()
    );
    assert_eq!(add_noise(&x, 0.1, 42).unwrap(), noisy);
    assert_ne!(add_noise(&x, 0.1, 43).unwrap(), noisy);
    assert_eq!(add_noise(&x, 0.0, 42).unwrap(), x);
    assert!(add_noise(&x, -1.0, 0).is_err());
}

#[test]
fn psnr_of_known_error() {
    let a = Image::constant(8, 8, 0.5);
    let b = Image::constant(8, 8, 0.6);
    assert!((psnr(&b, &a).unwrap() - 20.0).abs() < 1e-9);
    assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    assert!(psnr(&a, &Image::zeros(8, 7)).is_err());
}

#[test]
fn phantoms_are_deterministic_and_bounded() {
    for kind in [PhantomKind::Cells, PhantomKind::Step, PhantomKind::Impulses] {
        let a = make_phantom(kind, 64, 48, 5).unwrap();
        assert_eq!(a, make_phantom(kind, 64, 48, 5).unwrap());
        assert!(a.min() >= 0.0 && a.max() <= 1.0, "{kind}");
        assert!(a.max() > 0.0, "{kind}");
    }
    let c0 = make_phantom(PhantomKind::Cells, 64, 64, 0).unwrap();
    assert_ne!(c0, make_phantom(PhantomKind::Cells, 64, 64, 1).unwrap());
    assert!(make_phantom(PhantomKind::Cells, 8, 64, 0).is_err());
}

#[test]
fn step_phantom_has_two_levels() {
    let s = make_phantom(PhantomKind::Step, 32, 16, 0).unwrap();
    for r in 0..16 {
        for c in 0..32 {
            let expected = if c < 16 { STEP_LOW } else { STEP_HIGH };
            assert_eq!(s.get(r, c), expected);
        }
    }
}

#[test]
fn cells_phantom_is_sparse() {
    for seed in 0..10 {
        let x = make_phantom(PhantomKind::Cells, 64, 64, seed).unwrap();
        let bright = x.data().iter().filter(|&&v| v > 0.05).count();
        assert!(bright > 20 && bright < 64 * 64 / 2, "seed {seed}: {bright}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn blur_is_linear_and_keeps_sum(seed in any::<u64>(), a in -3.0f64..3.0) {
        let mut r = rng(seed);
        let (w, h) = (r.random_range(7..=16), r.random_range(7..=16));
        let x = random_image(&mut r, w, h);
        let y = random_image(&mut r, w, h);
        let k = random_kernel(&mut r);
        let combo = Image::new(w, h, x.data().iter().zip(y.data()).map(|(p, q)| a * p + q).collect()).unwrap();
        let (bx, by, bc) = (blur(&x, &k).unwrap(), blur(&y, &k).unwrap(), blur(&combo, &k).unwrap());
        let expect = Image::new(w, h, bx.data().iter().zip(by.data()).map(|(p, q)| a * p + q).collect()).unwrap();
        prop_assert!(bc.max_abs_diff(&expect) < 1e-10);
        prop_assert!((bx.sum() - x.sum()).abs() < 1e-9);
    }

    #[test]
    fn blur_commutes_with_circular_shift(seed in any::<u64>(), dr in 0usize..7, dc in 0usize..7) {
        let mut r = rng(seed);
        let x = random_image(&mut r, 12, 9);
        let k = random_kernel(&mut r);
        let shift = |img: &Image| Image::from_fn(12, 9, |row, col| img.get((row + dr) % 9, (col + dc) % 12));
        let a = blur(&shift(&x), &k).unwrap();
        let b = shift(&blur(&x, &k).unwrap());
        prop_assert!(a.max_abs_diff(&b) < 1e-10);
    }

    #[test]
    fn blur_keeps_values_within_input_range(seed in any::<u64>()) {
        // unit-sum nonnegative taps make every output a convex combination
        let mut r = rng(seed);
        let x = random_image(&mut r, 10, 10);
        let y = blur(&x, &random_kernel(&mut r)).unwrap();
        prop_assert!(y.min() >= x.min() - 1e-12 && y.max() <= x.max() + 1e-12);
    }
}
