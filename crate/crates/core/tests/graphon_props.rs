mod common;

use common::{breaks, check_lipschitz, random_block};
use graphon_bps::graphon::{gram_and_target, spectral_bracket, spectral_radius, Graphon, QuadratureSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_low_rank(rng: &mut ChaCha8Rng) -> Graphon {
    let k = rng.random_range(1..=6);
    let b = breaks(rng, k);
    let d = rng.random_range(1..=3);
    let z = (0..b.len() - 1)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    Graphon::logistic_low_rank(b, z, rng.random_range(-1.0..1.0)).unwrap()
}

fn random_product(rng: &mut ChaCha8Rng) -> Graphon {
    let k = rng.random_range(1..=6);
    let b = breaks(rng, k);
    let t = (0..b.len() - 1).map(|_| rng.random_range(0.0..1.5)).collect();
    Graphon::product_weight(b, t).unwrap()
}

fn random_any(rng: &mut ChaCha8Rng) -> Graphon {
    match rng.random_range(0..5) {
        0 => Graphon::constant(rng.random()).unwrap(),
        1 => random_block(rng),
        2 => random_low_rank(rng),
        3 => random_product(rng),
        _ => {
            let parts = vec![random_block(rng), random_low_rank(rng), random_product(rng)];
            let beta = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            Graphon::linear_combo(beta, parts, rng.random()).unwrap()
        }
    }
}

#[test]
fn evaluation_is_exactly_symmetric_for_every_kind() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let w = random_any(&mut rng);
        for _ in 0..1000 {
            let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
            assert_eq!(w.evaluate(x, y), w.evaluate(y, x), "{:?}", w.kind());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn lipschitz_inequalities_hold_on_block_pairs(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, v) = common::random_block_pair(&mut rng);
        prop_assert!(check_lipschitz(&w, &v).is_ok(), "{:?}", check_lipschitz(&w, &v));
    }

    #[test]
    fn gram_matrix_is_positive_semidefinite(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let j = rng.random_range(1..=5);
        let feats: Vec<Graphon> = (0..j).map(|_| random_any(&mut rng)).collect();
        let target = random_block(&mut rng);
        let (g, _) = gram_and_target(&feats, &target, &QuadratureSpec::midpoint(64)).unwrap();
        let min = g.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(min >= -1e-10, "min eigenvalue {min}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adding_a_nonnegative_kernel_never_lowers_the_spectral_radius(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_any(&mut rng).clipped();
        let v = random_any(&mut rng).clipped();
        let rw = spectral_radius(&w, 64).unwrap();
        let sum = Graphon::weighted_sum(&[1.0, 1.0], &[w, v]).unwrap();
        prop_assert!(spectral_radius(&sum, 64).unwrap() >= rw - 1e-8);
    }

    #[test]
    fn spectral_radius_is_positively_homogeneous(seed in any::<u64>(), a in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_any(&mut rng).clipped();
        let r = spectral_radius(&w, 64).unwrap();
        let ra = spectral_radius(&w.scaled(a), 64).unwrap();
        prop_assert!((ra - a * r).abs() <= 1e-8 * (1.0 + a * r), "{ra} vs {}", a * r);
    }

    #[test]
    fn nonnegative_combination_lies_in_the_agent_bracket(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parts = vec![random_block(&mut rng), random_product(&mut rng), Graphon::constant(1.0).unwrap()];
        let beta: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
        let b = spectral_bracket(&beta, &parts, 64).unwrap();
        prop_assert!(b.contains(1e-8), "{b:?}");
    }
}
