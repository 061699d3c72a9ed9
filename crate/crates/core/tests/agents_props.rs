mod common;

use graphon_bps::agents::{
    calibrate_ergm, enumerate_agent, enumerate_ergm, ergm_stack_tilt, mixture_pmf, tilt_er, tilt_rdpg, tilt_sbm,
    AgentModel, Alpha, EdgeIndex, ErgmSpec, ErgmStat, MixtureComponent, StatTable,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tilted_only(
    pmf: graphon_bps::agents::GraphPmf,
    stats: Vec<ErgmStat>,
    tau: Vec<f64>,
) -> graphon_bps::agents::GraphPmf {
    let c = MixtureComponent {
        pmf,
        alpha: Alpha::Entropic { stats, tau },
    };
    mixture_pmf(&[c], &[1.0]).unwrap().pmf
}

fn sym_matrix(rng: &mut ChaCha8Rng, k: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in a..k {
            let v = rng.random_range(lo..hi);
            m[a][b] = v;
            m[b][a] = v;
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn entropic_tilt_of_an_ergm_is_the_ergm_at_shifted_parameters(
        n in 3usize..=5,
        th in prop::array::uniform3(-1.5f64..1.5),
        tau in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let stats = vec![ErgmStat::Edges, ErgmStat::Triangles, ErgmStat::KStars { k: 2 }];
        let spec = ErgmSpec::new(n, stats.clone(), th.to_vec()).unwrap();
        let base = enumerate_ergm(&spec).unwrap();
        let tilted = tilted_only(base, stats, tau.to_vec());
        let target = enumerate_ergm(&ergm_stack_tilt(&spec, 1.0, &tau).unwrap()).unwrap();
        prop_assert!(tilted.total_variation(&target) <= 1e-10);
    }

    #[test]
    fn edge_tilt_of_er_is_er_at_the_tilted_probability(n in 2usize..=5, p in 0.01f64..0.99, lam in -3.0f64..3.0) {
        let er = AgentModel::er(p).unwrap();
        let tilted = tilted_only(enumerate_agent(&er, n).unwrap(), vec![ErgmStat::Edges], vec![lam]);
        let closed = enumerate_agent(&AgentModel::er(tilt_er(p, lam).unwrap()).unwrap(), n).unwrap();
        prop_assert!(tilted.total_variation(&closed) <= 1e-10);
    }

    #[test]
    fn block_tilt_of_sbm_is_sbm_at_tilted_block_probabilities(seed in any::<u64>(), n in 3usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 2;
        let assignment: Vec<usize> = (0..n).map(|i| i % k).collect();
        let probs = sym_matrix(&mut rng, k, 0.05, 0.95);
        let lam = sym_matrix(&mut rng, k, -2.0, 2.0);
        let sbm = AgentModel::sbm(assignment.clone(), probs.clone()).unwrap();
        // BlockCounts orders (0,0), (0,1), (1,1)
        let tau = vec![lam[0][0], lam[0][1], lam[1][1]];
        let stats = vec![ErgmStat::BlockCounts { assignment: assignment.clone(), blocks: k }];
        let tilted = tilted_only(enumerate_agent(&sbm, n).unwrap(), stats, tau);
        let closed = AgentModel::sbm(assignment, tilt_sbm(&probs, &lam).unwrap()).unwrap();
        prop_assert!(tilted.total_variation(&enumerate_agent(&closed, n).unwrap()) <= 1e-10);
    }

    #[test]
    fn edge_tilt_of_rdpg_shifts_the_intercept(seed in any::<u64>(), n in 2usize..=5, lam in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let rdpg = AgentModel::rdpg(z, rng.random_range(-1.0..1.0)).unwrap();
        let tilted = tilted_only(enumerate_agent(&rdpg, n).unwrap(), vec![ErgmStat::Edges], vec![lam]);
        let closed = enumerate_agent(&tilt_rdpg(&rdpg, lam).unwrap(), n).unwrap();
        prop_assert!(tilted.total_variation(&closed) <= 1e-10);
    }

    #[test]
    fn tilted_er_degrees_are_binomial(n in 2usize..=5, p in 0.01f64..0.99, lam in -3.0f64..3.0) {
        let er = AgentModel::er(p).unwrap();
        let pmf = tilted_only(enumerate_agent(&er, n).unwrap(), vec![ErgmStat::Edges], vec![lam]);
        let idx = EdgeIndex::new(n).unwrap();
        let mut deg = vec![0.0; n];
        for (mask, pr) in pmf.probs().iter().enumerate() {
            deg[idx.degrees(mask as u64)[0]] += pr;
        }
        let bin = common::binomial_pmf(n - 1, tilt_er(p, lam).unwrap());
        let tv = 0.5 * deg.iter().zip(&bin).map(|(a, b)| (a - b).abs()).sum::<f64>();
        prop_assert!(tv <= 1e-10, "tv {tv}");
    }
}

#[test]
fn calibrated_tilt_is_kl_closest_among_moment_matching_pmfs() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 4;
    for &(theta, target) in &[(-0.4, 2.0), (0.3, 4.5), (-1.0, 1.2)] {
        let spec = ErgmSpec::new(n, vec![ErgmStat::Edges], vec![theta]).unwrap();
        let p0 = enumerate_ergm(&spec).unwrap();
        let cal = calibrate_ergm(&spec, &[target]).unwrap();
        assert!(cal.residual <= 1e-8, "{}", cal.residual);
        let table = StatTable::new(n, &[ErgmStat::Edges]).unwrap();
        let edges: Vec<f64> = (0..table.len()).map(|a| table.row(a)[0]).collect();
        let kl_star = cal.pmf.kl_divergence(&p0);
        for _ in 0..100 {
            let g = common::moment_matched_pmf(&mut rng, n, &edges, target);
            let m: f64 = g.probs().iter().zip(&edges).map(|(a, b)| a * b).sum();
            assert!((m - target).abs() <= 1e-6);
            assert!(kl_star < g.kl_divergence(&p0), "{kl_star} vs {}", g.kl_divergence(&p0));
        }
    }
}

#[test]
fn mixture_of_exchangeable_agents_is_exchangeable() {
    let n = 4;
    let idx = EdgeIndex::new(n).unwrap();
    let er = enumerate_agent(&AgentModel::er(0.35).unwrap(), n).unwrap();
    let ergm = enumerate_ergm(&ErgmSpec::new(n, vec![ErgmStat::Edges, ErgmStat::Triangles], vec![-0.5, 0.8]).unwrap())
        .unwrap();
    let stars = enumerate_ergm(&ErgmSpec::new(n, vec![ErgmStat::KStars { k: 2 }], vec![0.2]).unwrap()).unwrap();
    let comps = vec![
        MixtureComponent {
            pmf: er,
            alpha: Alpha::Entropic {
                stats: vec![ErgmStat::Edges, ErgmStat::Wedges],
                tau: vec![0.4, -0.1],
            },
        },
        MixtureComponent {
            pmf: ergm,
            alpha: Alpha::Unit,
        },
        MixtureComponent {
            pmf: stars,
            alpha: Alpha::Entropic {
                stats: vec![ErgmStat::Triangles],
                tau: vec![1.1],
            },
        },
    ];
    let mix = mixture_pmf(&comps, &[0.2, 0.5, 0.3]).unwrap();
    let probs = mix.pmf.probs();
    let perms = common::permutations(n);
    assert_eq!(perms.len(), 24);
    for perm in &perms {
        for mask in 0..probs.len() as u64 {
            let pm = common::permute_mask(&idx, mask, perm);
            assert_eq!(probs[mask as usize], probs[pm as usize], "perm {perm:?} mask {mask}");
        }
    }
}
