mod common;

use graphon_bps::graphon::{gram_and_target, inner_product, Graphon, QuadratureSpec};
use graphon_bps::sampling::sample_dyads;
use graphon_bps::synthesis::{
    empirical_risk, fit_ls, fit_ridge, fit_simplex, l2_risk, population_projection, project_simplex, DyadSample,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q() -> QuadratureSpec {
    QuadratureSpec::default()
}

/// Four affinely independent block agents on different partitions.
fn block_agents() -> Vec<Graphon> {
    vec![
        Graphon::equal_blocks(vec![vec![0.8, 0.1], vec![0.1, 0.6]]).unwrap(),
        Graphon::block(vec![0.0, 0.3, 1.0], vec![vec![0.2, 0.7], vec![0.7, 0.3]]).unwrap(),
        Graphon::equal_blocks(vec![vec![0.5, 0.2, 0.1], vec![0.2, 0.9, 0.3], vec![0.1, 0.3, 0.4]]).unwrap(),
        Graphon::block(vec![0.0, 0.8, 1.0], vec![vec![0.3, 0.05], vec![0.05, 0.95]]).unwrap(),
    ]
}

/// Per-seed `‖ŵ_m − w⋆‖²` as (total, estimation part about the projection).
fn ls_risks(truth: &Graphon, agents: &[Graphon], m: usize, seeds: u64) -> Vec<(f64, f64)> {
    let star = population_projection(truth, agents, &q()).unwrap();
    let (g, c) = gram_and_target(agents, truth, &q()).unwrap();
    let norm2 = inner_product(truth, truth, &q()).unwrap().value;
    let approx = norm2 - c.dot(&nalgebra::DVector::from_vec(star.beta.clone()));
    (0..seeds)
        .map(|s| {
            let samples = sample_dyads(truth, agents, m, 1000 + s).unwrap();
            let est = l2_risk(&fit_ls(&samples).unwrap(), &star, &g).unwrap();
            (approx.max(0.0) + est, est)
        })
        .collect()
}

#[test]
fn ls_risk_decays_at_the_parametric_rate_when_truth_is_in_span() {
    let agents = block_agents();
    let truth = Graphon::linear_combo(vec![0.05, 0.3, 0.25, 0.2, 0.15], agents.clone(), false).unwrap();
    assert!(truth.is_valid_probability_kernel());
    let scaled: Vec<f64> = [1000usize, 4000, 16000]
        .iter()
        .map(|&m| {
            let est: Vec<f64> = ls_risks(&truth, &agents, m, 20).iter().map(|r| r.1).collect();
            m as f64 * common::median(&est)
        })
        .collect();
    let (lo, hi) = scaled
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(hi / lo <= 3.0, "m·risk {scaled:?}");
}

#[test]
fn ls_risk_obeys_the_oracle_inequality_shape_when_truth_is_outside_span() {
    let agents = block_agents();
    let truth = Graphon::logistic_low_rank(
        vec![0.0, 0.25, 0.5, 0.75, 1.0],
        vec![vec![1.2], vec![-0.4], vec![0.7], vec![-1.1]],
        -0.2,
    )
    .unwrap();
    let d = (agents.len() + 1) as f64;
    let star = population_projection(&truth, &agents, &q()).unwrap();
    let (_, c) = gram_and_target(&agents, &truth, &q()).unwrap();
    let approx = inner_product(&truth, &truth, &q()).unwrap().value - c.dot(&nalgebra::DVector::from_vec(star.beta));
    assert!(approx > 0.0);
    let median_excess = |m: usize| {
        let r: Vec<f64> = ls_risks(&truth, &agents, m, 20)
            .iter()
            .map(|r| r.0 - 2.0 * approx)
            .collect();
        common::median(&r)
    };
    // C fitted at the smallest m, with headroom for Monte Carlo noise
    let c_fit = 2.0 * (median_excess(1000) * 1000.0 / d).max(0.0);
    for m in [4000usize, 16000] {
        let bound = c_fit * d / m as f64;
        assert!(median_excess(m) <= bound, "m = {m}: {} > {bound}", median_excess(m));
    }
    // the estimation part still decays like d/m under misspecification
    let scaled: Vec<f64> = [1000usize, 16000]
        .iter()
        .map(|&m| {
            let est: Vec<f64> = ls_risks(&truth, &agents, m, 20).iter().map(|r| r.1).collect();
            m as f64 * common::median(&est)
        })
        .collect();
    assert!(
        scaled[1] <= 3.0 * scaled[0] && scaled[0] <= 3.0 * scaled[1],
        "{scaled:?}"
    );
}

fn random_samples(rng: &mut ChaCha8Rng, m: usize, j: usize) -> Vec<DyadSample> {
    (0..m)
        .map(|k| {
            let p: Vec<f64> = (0..j).map(|_| rng.random::<f64>()).collect();
            let y = rng.random::<f64>() < 0.5 * p[0] + 0.3;
            DyadSample::new((k, k + 1), &p, y).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simplex_weights_are_feasible(seed in any::<u64>(), j in 1usize..6, m in 5usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_samples(&mut rng, m, j);
        let w = fit_simplex(&s).unwrap();
        prop_assert!(w.beta.iter().all(|b| b.is_finite()));
        prop_assert!(w.beta[1..].iter().all(|&b| b >= -1e-12));
        prop_assert!((w.beta[1..].iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(w.kkt_residual.is_some());
        if let Ok(ls) = fit_ls(&s) {
            prop_assert!(empirical_risk(&w, &s) >= empirical_risk(&ls, &s) - 1e-12);
        }
    }

    #[test]
    fn tiny_ridge_agrees_with_ls_on_well_conditioned_designs(seed in any::<u64>(), j in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_samples(&mut rng, 400, j);
        let ls = fit_ls(&s).unwrap();
        prop_assume!(ls.condition_number <= 1e3);
        let ridge = fit_ridge(&s, 1e-8).unwrap();
        let diff = ls.beta.iter().zip(&ridge.beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-6, "{diff}");
    }

    #[test]
    fn simplex_projection_is_the_nearest_simplex_point(v in prop::collection::vec(-3.0f64..3.0, 1..8), seed in any::<u64>()) {
        let p = project_simplex(&v);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let dist = |x: &[f64]| x.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let raw: Vec<f64> = v.iter().map(|_| -rng.random::<f64>().ln()).collect();
            let z: f64 = raw.iter().sum();
            let other: Vec<f64> = raw.iter().map(|r| r / z).collect();
            prop_assert!(dist(&p) <= dist(&other) + 1e-12);
        }
    }
}
