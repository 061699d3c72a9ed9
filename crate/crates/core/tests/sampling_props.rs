mod common;

use graphon_bps::graphon::{functionals, spectral_bracket, Graphon, QuadratureSpec};
use graphon_bps::netstats::graph_statistics;
use graphon_bps::sampling::{phase_sweep, sample_graph, sample_sparse_graph};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn samples_are_a_pure_function_of_the_seed(seed in any::<u64>(), n in 2usize..120, lam in 0.5f64..6.0) {
        let w = Graphon::block(vec![0.0, 0.3, 1.0], vec![vec![0.6, 0.2], vec![0.2, 0.4]]).unwrap();
        prop_assert_eq!(sample_graph(&w, n, seed).unwrap(), sample_graph(&w, n, seed).unwrap());
        prop_assert_eq!(
            sample_sparse_graph(&w, n, lam, seed).unwrap(),
            sample_sparse_graph(&w, n, lam, seed).unwrap()
        );
    }
}

#[test]
fn sampled_statistics_match_graphon_functionals() {
    let n = 3000;
    for (name, w) in common::lln_graphons() {
        let f = functionals(&w, &QuadratureSpec::default()).unwrap();
        let passes = (0..10)
            .filter(|&s| {
                let st = graph_statistics(&sample_graph(&w, n, 500 + s).unwrap()).unwrap();
                [
                    rel(st.avg_degree_norm, f.edge_density),
                    rel(st.t_n, f.triangle),
                    rel(st.s_n, f.wedge),
                    rel(st.c_n, f.clustering),
                ]
                .iter()
                .all(|&r| r <= 0.05)
            })
            .count();
        assert!(passes >= 9, "{name}: {passes}/10 seeds within 5%");
    }
}

#[test]
fn giant_onset_lies_in_the_spectral_bracket_band() {
    let parts = vec![
        Graphon::equal_blocks(vec![vec![0.7, 0.25], vec![0.25, 0.7]]).unwrap(),
        Graphon::constant(0.45).unwrap(),
    ];
    let beta = [0.5, 0.5];
    let b = spectral_bracket(&beta, &parts, 256).unwrap();
    let combo = Graphon::weighted_sum(&beta, &parts).unwrap();
    let lambdas: Vec<f64> = (0..=30).map(|k| 1.0 + 0.1 * k as f64).collect();
    let curve = phase_sweep(&combo, &lambdas, 20_000, 3, 7).unwrap();
    let onset = curve.onset(0.05).expect("a giant component appears on the grid");
    let (lo, hi) = (0.8 / b.upper, 1.5 / b.lower);
    assert!(lo <= onset && onset <= hi, "onset {onset} outside [{lo}, {hi}]");
}

/// Degree function with 64 distinct levels, so its law is close to continuous
/// at the resolution of sampled degrees.
fn many_block_graphon() -> Graphon {
    let k = 64;
    let probs = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| 0.1 + 0.6 * (a + b) as f64 / (2 * (k - 1)) as f64)
                .collect()
        })
        .collect();
    Graphon::equal_blocks(probs).unwrap()
}

#[test]
fn normalized_degrees_follow_the_degree_function_law() {
    let w = many_block_graphon();
    let n = 5000;
    let g = sample_graph(&w, n, 3).unwrap();
    let emp: Vec<f64> = g.degrees.iter().map(|&d| d as f64 / (n - 1) as f64).collect();
    let f = functionals(&w, &QuadratureSpec::default()).unwrap();
    let ks = common::ks_distance(&emp, &f.degree_grid);
    assert!(ks <= 0.05, "KS {ks}");
}
