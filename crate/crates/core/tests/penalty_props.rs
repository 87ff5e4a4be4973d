mod common;

use common::rng;
use proptest::prelude::*;
use rand::Rng;
use smlm_core::cel0::{cel0_penalty, cel0_term, irl1_weights, l0_norm};

/// Direct transcription of one penalty term: `lambda - n^2/2 (|x| - t)^2`
/// below the threshold `t = sqrt(2 lambda)/n`, `lambda` above it.
fn term_reference(x: f64, n: f64, lambda: f64) -> f64 {
    let t = (2.0 * lambda).sqrt() / n;
    if x.abs() < t {
        lambda - 0.5 * n * n * (x.abs() - t).powi(2)
    } else {
        lambda
    }
}

#[test]
fn zero_vector_has_zero_penalty_exactly() {
    let mut r = rng(31);
    for _ in 0..100 {
        let n = r.random_range(1..200);
        let norms: Vec<f64> = (0..n).map(|_| r.random_range(0.0..2.0)).collect();
        let lambda = 10f64.powf(r.random_range(-6.0..2.0));
        assert_eq!(cel0_penalty(&vec![0.0; n], &norms, lambda).unwrap(), 0.0);
    }
}

#[test]
fn sandwich_on_random_instances() {
    let mut r = rng(32);
    for _ in 0..1000 {
        let n = r.random_range(1..64);
        let lambda = 10f64.powf(r.random_range(-4.0..1.0));
        let norms: Vec<f64> = (0..n).map(|_| r.random_range(0.0..3.0)).collect();
        let x: Vec<f64> = (0..n)
            .map(|_| {
                if r.random_bool(0.3) {
                    0.0
                } else {
                    r.random_range(-5.0..5.0) * 10f64.powf(r.random_range(-4.0..0.0))
                }
            })
            .collect();
        let p = cel0_penalty(&x, &norms, lambda).unwrap();
        let bound = lambda * l0_norm(&x) as f64;
        assert!(p >= 0.0);
        assert!(p <= bound * (1.0 + 1e-12), "{p} > {bound}");
    }
}

#[test]
fn equals_scaled_l0_when_every_entry_clears_its_threshold() {
    let mut r = rng(33);
    for _ in 0..200 {
        let n = r.random_range(1..50);
        let lambda = 10f64.powf(r.random_range(-4.0..1.0));
        let norms: Vec<f64> = (0..n).map(|_| r.random_range(0.1..3.0)).collect();
        let x: Vec<f64> = norms
            .iter()
            .map(|nn| {
                if r.random_bool(0.4) {
                    0.0
                } else {
                    let t = (2.0 * lambda).sqrt() / nn;
                    let mag = t * r.random_range(1.0..4.0);
                    if r.random_bool(0.5) {
                        mag
                    } else {
                        -mag
                    }
                }
            })
            .collect();
        let p = cel0_penalty(&x, &norms, lambda).unwrap();
        let l0 = lambda * l0_norm(&x) as f64;
        assert!((p - l0).abs() <= 1e-12 * l0.max(1.0));
    }
}

#[test]
fn rejects_mismatched_inputs() {
    assert!(cel0_penalty(&[1.0], &[1.0, 2.0], 0.1).is_err());
    assert!(cel0_penalty(&[1.0], &[1.0], 0.0).is_err());
    assert!(irl1_weights(&[1.0], &[1.0], -1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn term_matches_reference(x in -10.0f64..10.0, n in 1e-3f64..5.0, lambda in 1e-5f64..10.0) {
        let a = cel0_term(x, n, lambda);
        let b = term_reference(x, n, lambda);
        prop_assert!((a - b).abs() <= 1e-12 * lambda.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn term_is_even_and_bounded(x in -10.0f64..10.0, n in 0.0f64..5.0, lambda in 1e-5f64..10.0) {
        let a = cel0_term(x, n, lambda);
        prop_assert_eq!(a, cel0_term(-x, n, lambda));
        prop_assert!(a >= 0.0 && a <= lambda);
    }

    #[test]
    fn term_is_nondecreasing_in_magnitude(a in 0.0f64..5.0, b in 0.0f64..5.0, n in 1e-2f64..5.0, lambda in 1e-4f64..5.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(cel0_term(lo, n, lambda) <= cel0_term(hi, n, lambda) + 1e-15);
    }

    #[test]
    fn weights_are_the_term_slopes(x in 1e-3f64..3.0, n in 0.1f64..3.0, lambda in 1e-3f64..1.0) {
        let w = irl1_weights(&[x], &[n], lambda).unwrap()[0];
        prop_assert!(w >= 0.0);
        let h = 1e-6 * x.max(1e-3);
        let t = (2.0 * lambda).sqrt() / n;
        // skip the kink at the threshold
        prop_assume!((x - t).abs() > 2.0 * h);
        let slope = (cel0_term(x + h, n, lambda) - cel0_term(x - h, n, lambda)) / (2.0 * h);
        prop_assert!((slope - w).abs() <= 1e-5 * w.max(1.0), "slope {slope} weight {w}");
    }
}
