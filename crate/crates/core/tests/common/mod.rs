//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use graphon_bps::agents::{EdgeIndex, GraphPmf};
use graphon_bps::graphon::{
    functionals, l2_distance, lipschitz_budget, BlockForm, Graphon, GraphonKind, QuadratureSpec,
};
use graphon_bps::sampling::GraphSample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut c = 1.0;
    for k in 0..=n {
        if k > 0 {
            c = c * (n - k + 1) as f64 / k as f64;
        }
        out.push(c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32));
    }
    out
}

/// Relabels every edge `(i, j)` of `mask` to `(perm[i], perm[j])`.
pub fn permute_mask(idx: &EdgeIndex, mask: u64, perm: &[usize]) -> u64 {
    idx.pairs()
        .iter()
        .filter(|&&(i, j)| mask & idx.bit(i, j) != 0)
        .fold(0, |acc, &(i, j)| {
            acc | idx.bit(perm[i].min(perm[j]), perm[i].max(perm[j]))
        })
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                cur.push(v);
                go(cur, used, out);
                cur.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// A random pmf over `len` graphs whose statistic `stat` has mean `target`:
/// a random pmf mixed with a point mass on the far side of the target.
pub fn moment_matched_pmf<R: Rng>(rng: &mut R, n: usize, stat: &[f64], target: f64) -> GraphPmf {
    let len = stat.len();
    let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>().powi(3)).collect();
    let z: f64 = raw.iter().sum();
    let q: Vec<f64> = raw.iter().map(|x| x / z).collect();
    let mq: f64 = q.iter().zip(stat).map(|(a, s)| a * s).sum();
    // graph with extreme statistic on the opposite side
    let far = if mq > target {
        (0..len).min_by(|&a, &b| stat[a].total_cmp(&stat[b])).unwrap()
    } else {
        (0..len).max_by(|&a, &b| stat[a].total_cmp(&stat[b])).unwrap()
    };
    let t = (mq - target) / (mq - stat[far]);
    let mut g: Vec<f64> = q.iter().map(|x| (1.0 - t) * x).collect();
    g[far] += t;
    GraphPmf::from_probs(n, g).unwrap()
}

pub fn brute_triangles(g: &GraphSample) -> u64 {
    let mut c = 0;
    for a in 0..g.n {
        for b in (a + 1)..g.n {
            for d in (b + 1)..g.n {
                if g.has_edge(a, b) && g.has_edge(b, d) && g.has_edge(a, d) {
                    c += 1;
                }
            }
        }
    }
    c
}

pub fn bfs(adj: &[Vec<usize>], s: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

/// Betweenness by enumerating every shortest path explicitly, over ordered
/// pairs and divided by `(n−1)(n−2)`.
pub fn brute_betweenness(g: &GraphSample) -> Vec<f64> {
    let n = g.n;
    let adj = g.adjacency();
    let mut bt = vec![0.0; n];
    for s in 0..n {
        let ds = bfs(&adj, s);
        for t in 0..n {
            let Some(d) = ds[t] else { continue };
            if t == s {
                continue;
            }
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut stack = vec![vec![s]];
            while let Some(p) = stack.pop() {
                let u = *p.last().unwrap();
                if p.len() == d + 1 {
                    if u == t {
                        paths.push(p);
                    }
                    continue;
                }
                for &v in &adj[u] {
                    if !p.contains(&v) {
                        let mut q = p.clone();
                        q.push(v);
                        stack.push(q);
                    }
                }
            }
            let total = paths.len() as f64;
            for v in 0..n {
                if v != s && v != t {
                    let through = paths.iter().filter(|p| p.contains(&v)).count() as f64;
                    bt[v] += through / total;
                }
            }
        }
    }
    if n > 2 {
        let norm = ((n - 1) * (n - 2)) as f64;
        bt.iter_mut().for_each(|b| *b /= norm);
    }
    bt
}

pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> GraphSample {
    let mut e = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                e.push((i, j));
            }
        }
    }
    GraphSample::from_edges(n, e).unwrap()
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

pub fn breaks(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.random_range(0.05..0.95)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut b = vec![0.0];
    b.extend(cuts);
    b.push(1.0);
    b
}

pub fn random_block(rng: &mut ChaCha8Rng) -> Graphon {
    let k = rng.random_range(1..=5);
    let b = breaks(rng, k);
    let k = b.len() - 1;
    let mut p = vec![vec![0.0; k]; k];
    for a in 0..k {
        for c in a..k {
            let v = rng.random::<f64>();
            p[a][c] = v;
            p[c][a] = v;
        }
    }
    Graphon::block(b, p).unwrap()
}

/// `‖d_w − d_v‖₂` on the common refinement.
pub fn degree_distance(w: &Graphon, v: &Graphon) -> f64 {
    let (forms, exact) = BlockForm::common(&[w, v], 256, &QuadratureSpec::default());
    assert!(exact);
    let (dw, dv) = (forms[0].degrees(), forms[1].degrees());
    forms[0]
        .measures()
        .iter()
        .zip(dw.iter().zip(&dv))
        .map(|(m, (a, b))| m * (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn check_lipschitz(w: &Graphon, v: &Graphon) -> Result<(), String> {
    let q = QuadratureSpec::default();
    let (fw, fv) = (functionals(w, &q).unwrap(), functionals(v, &q).unwrap());
    let d = l2_distance(w, v, &q).unwrap();
    if !(fw.exact && fv.exact && d.exact) {
        return Err("functionals not exact on block graphons".into());
    }
    let slack = 1e-12;
    let s0 = fw.wedge.min(fv.wedge);
    let b = lipschitz_budget(d.value, s0.max(1e-300)).unwrap();
    let checks = [
        ("edge", (fw.edge_density - fv.edge_density).abs(), b.edge_bound),
        ("degree", degree_distance(w, v), b.degree_bound),
        ("triangle", (fw.triangle - fv.triangle).abs(), b.triangle_bound),
        ("wedge", (fw.wedge - fv.wedge).abs(), b.wedge_bound),
    ];
    for (name, lhs, rhs) in checks {
        if lhs > rhs + slack {
            return Err(format!("{name}: {lhs} > {rhs}"));
        }
    }
    if s0 > 0.0 {
        let lhs = (fw.clustering - fv.clustering).abs();
        if lhs > b.clustering_bound + slack {
            return Err(format!("clustering: {lhs} > {}", b.clustering_bound));
        }
    }
    Ok(())
}

/// A random block graphon and either an independent one or a small
/// perturbation of it on the same partition.
pub fn random_block_pair(rng: &mut ChaCha8Rng) -> (Graphon, Graphon) {
    let w = random_block(rng);
    if rng.random_bool(0.5) {
        let v = random_block(rng);
        return (w, v);
    }
    let GraphonKind::Block { boundaries, probs } = w.kind() else {
        unreachable!()
    };
    let eps = rng.random_range(0.0..0.1);
    let k = probs.len();
    let mut p = probs.clone();
    for a in 0..k {
        for c in a..k {
            let x = (p[a][c] + rng.random_range(-eps..=eps)).clamp(0.0, 1.0);
            p[a][c] = x;
            p[c][a] = x;
        }
    }
    let v = Graphon::block(boundaries.breaks().to_vec(), p).unwrap();
    (w, v)
}

/// Graphons whose sampled statistics are checked against their functionals.
pub fn lln_graphons() -> Vec<(&'static str, Graphon)> {
    vec![
        ("constant", Graphon::constant(0.1).unwrap()),
        (
            "two_block",
            Graphon::block(vec![0.0, 0.4, 1.0], vec![vec![0.2, 0.05], vec![0.05, 0.12]]).unwrap(),
        ),
        (
            "chung_lu_cap",
            Graphon::product_weight(vec![0.0, 0.25, 0.5, 0.75, 1.0], vec![0.8, 0.9, 1.0, 1.15]).unwrap(),
        ),
    ]
}
