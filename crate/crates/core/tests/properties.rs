//! Mathematical invariants the model must satisfy for any input.

use cran_mm_core::combining::{build_combiner, fronthaul_sinr, Scheme};
use cran_mm_core::config::SystemConfig;
use cran_mm_core::linalg::{identity, log2_det_pd, CMat};
use cran_mm_core::rates::linearize_logdet;
use cran_mm_core::scenario::{steering_vector, trial_rng, ChannelRealization};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn random_pd(n: usize, rng: &mut impl Rng, ridge: f64) -> CMat {
    let mut r = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            r[(i, j)] = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        }
    }
    &r * r.adjoint() + identity(n).scale(ridge)
}

proptest! {
    /// The first-order expansion of log2 det at any anchor upper-bounds the
    /// function, with equality at the anchor.
    #[test]
    fn tangent_plane_upper_bounds_logdet(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = trial_rng(seed, 0);
        let x = random_pd(n, &mut rng, 0.1);
        let x0 = random_pd(n, &mut rng, 0.1);

        let xi = linearize_logdet(&x, &x0).unwrap();
        let truth = log2_det_pd(&x, 0.0).unwrap();
        prop_assert!(truth <= xi + 1e-9 * truth.abs().max(1.0), "{truth} > {xi}");

        let at_anchor = linearize_logdet(&x0, &x0).unwrap();
        let truth0 = log2_det_pd(&x0, 0.0).unwrap();
        prop_assert!((at_anchor - truth0).abs() <= 1e-9 * truth0.abs().max(1.0));
    }

    /// Jointly rescaling transmit powers and the noise floor leaves every
    /// post-combining SINR unchanged.
    #[test]
    fn fronthaul_sinr_is_scale_invariant(seed in any::<u64>(), scale in 1e-3..1e3f64) {
        let mut cfg = SystemConfig::desk_default();
        cfg.K = 2;
        cfg.L = 3;
        cfg.N_U = vec![1, 1];
        cfg.N_H = vec![1, 1, 1];
        cfg.N_C = 8;
        cfg.weights = vec![1.0, 1.0];
        let channels = ChannelRealization::sample(&cfg, seed, 0).unwrap();
        let combiner = build_combiner(&channels.b, &channels.g, Scheme::Mr).unwrap();

        let mut rng = trial_rng(seed, 1);
        let p: Vec<f64> = (0..cfg.L).map(|_| rng.gen::<f64>() * cfg.P_H_max).collect();
        let base = fronthaul_sinr(&combiner, &p, cfg.sigma2_CU).unwrap();
        let p_scaled: Vec<f64> = p.iter().map(|v| v * scale).collect();
        let scaled = fronthaul_sinr(&combiner, &p_scaled, cfg.sigma2_CU * scale).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12), "{a} vs {b}");
        }
    }

    /// Unit-modulus phase progression: the steering norm is exactly the
    /// element count regardless of angle or spacing.
    #[test]
    fn steering_norm_is_the_element_count(
        theta in 0.0..std::f64::consts::TAU,
        n_c in 1usize..200,
        ratio in 0.1..2.0f64,
    ) {
        let b = steering_vector(theta, n_c, ratio);
        prop_assert!((b.norm_squared() - n_c as f64).abs() <= 1e-9 * n_c as f64);
    }
}

/// Cross-stream steering leakage |b(t1)^H b(t2)|^2 / N_C^2 shrinks as the
/// array grows, which is what makes MR viable at large N_C.
#[test]
fn larger_arrays_decorrelate_the_streams() {
    let mean_leak = |n_c: usize| {
        let mut acc = 0.0;
        for trial in 0..100u64 {
            let mut rng = trial_rng(1234, trial);
            let t1: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            let t2: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            let b1 = steering_vector(t1, n_c, 0.5);
            let b2 = steering_vector(t2, n_c, 0.5);
            acc += b1.dotc(&b2).norm_sqr() / (n_c as f64 * n_c as f64);
        }
        acc / 100.0
    };
    let small = mean_leak(10);
    let large = mean_leak(1000);
    assert!(
        large < small,
        "leakage did not shrink with the array: {large} (N_C=1000) vs {small} (N_C=10)"
    );
}
