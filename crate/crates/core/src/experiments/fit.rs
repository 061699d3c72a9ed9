//! Fitting the agent menu to an observed graph.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::AgentModel;
use crate::error::{Error, Result};
use crate::evaluation::LabeledDyad;
use crate::graphon::sigmoid;
use crate::sampling::{rng_for, GraphSample};

pub const MIN_FIT_NODES: usize = 10;
const SUBSPACE_OVERSAMPLE: usize = 5;
const SUBSPACE_MAX_ITERS: usize = 2000;
const SUBSPACE_TOL: f64 = 1e-9;
const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITERS: usize = 100;
/// Above this many vertex pairs the link calibration subsamples non-edges.
const ALL_PAIRS_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentHyper {
    pub sbm_k: usize,
    pub rdpg_d: usize,
    pub deghist_bins: usize,
    /// Also fit an Erdős–Rényi agent. Its prediction is constant, so it is
    /// collinear with the synthesis intercept and off by default.
    #[serde(default)]
    pub include_er: bool,
}

impl Default for AgentHyper {
    fn default() -> Self {
        AgentHyper {
            sbm_k: 5,
            rdpg_d: 3,
            deghist_bins: 10,
            include_er: false,
        }
    }
}

impl AgentHyper {
    pub fn validate(&self) -> Result<()> {
        if self.sbm_k == 0 || self.rdpg_d == 0 || self.deghist_bins == 0 {
            return Err(Error::Config("agent hyperparameters must be at least 1".into()));
        }
        Ok(())
    }
}

fn num_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

pub fn fit_er(g: &GraphSample) -> Result<AgentModel> {
    AgentModel::er(g.num_edges() as f64 / num_pairs(g.n) as f64)
}

/// `θ_i = d_i / √(2m)` so that `θ_iθ_j` sums to roughly the edge count.
pub fn fit_chung_lu(g: &GraphSample) -> Result<AgentModel> {
    let s = (2.0 * g.num_edges() as f64).sqrt();
    AgentModel::chung_lu(g.degrees.iter().map(|&d| d as f64 / s).collect())
}

/// Empirical edge rates between groups; `None` where a group pair has no
/// vertex pairs.
fn group_rates(g: &GraphSample, groups: &[usize], k: usize) -> Vec<Vec<(usize, usize)>> {
    let mut size = vec![0usize; k];
    for &c in groups {
        size[c] += 1;
    }
    let mut e = vec![vec![0usize; k]; k];
    for &(i, j) in &g.edges {
        let (a, b) = (groups[i], groups[j]);
        e[a][b] += 1;
        if a != b {
            e[b][a] += 1;
        }
    }
    (0..k)
        .map(|a| {
            (0..k)
                .map(|b| {
                    let pairs = if a == b { num_pairs(size[a]) } else { size[a] * size[b] };
                    (e[a][b], pairs)
                })
                .collect()
        })
        .collect()
}

/// Vertices binned by degree quantiles; only occupied bins are kept and
/// `bin_edges` holds the smallest degree in each bin.
pub fn fit_deg_hist(g: &GraphSample, bins: usize) -> Result<AgentModel> {
    let n = g.n;
    let mut sorted = g.degrees.clone();
    sorted.sort_unstable();
    let mut cuts: Vec<usize> = (1..bins).map(|l| sorted[(l * n / bins).min(n - 1)]).collect();
    cuts.dedup();
    let raw: Vec<usize> = g
        .degrees
        .iter()
        .map(|&d| cuts.iter().filter(|&&c| c < d).count())
        .collect();
    let mut occupied: Vec<usize> = raw.clone();
    occupied.sort_unstable();
    occupied.dedup();
    let node_bins: Vec<usize> = raw.iter().map(|r| occupied.binary_search(r).unwrap()).collect();
    let k = occupied.len();
    let mut lower = vec![usize::MAX; k];
    for (v, &b) in node_bins.iter().enumerate() {
        lower[b] = lower[b].min(g.degrees[v]);
    }
    let density = g.density();
    let rates = group_rates(g, &node_bins, k)
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|(e, p)| if p == 0 { density } else { e as f64 / p as f64 })
                .collect()
        })
        .collect();
    AgentModel::deg_hist(lower.into_iter().map(|d| d as f64).collect(), node_bins, rates)
}

/// Top-`k` eigenpairs (largest algebraic) of a symmetric operator that is
/// positive semidefinite, by block subspace iteration with Rayleigh–Ritz.
fn top_eigen(n: usize, k: usize, seed: u64, op: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let b = (k + SUBSPACE_OVERSAMPLE).min(n);
    let mut rng = rng_for(seed, 0x5eb);
    let mut x = DMatrix::from_fn(n, b, |_, _| rng.random::<f64>() - 0.5).qr().q();
    let mut prev = vec![f64::INFINITY; k];
    for _ in 0..SUBSPACE_MAX_ITERS {
        let y = op(&x);
        let h = x.transpose() * &y;
        let mut ritz: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
        ritz.sort_by(|a, b| b.total_cmp(a));
        ritz.truncate(k);
        x = y.qr().q();
        let scale = ritz.first().map_or(1.0, |v| v.abs().max(1e-300));
        let done = ritz
            .iter()
            .zip(&prev)
            .all(|(a, b)| (a - b).abs() <= SUBSPACE_TOL * scale);
        prev = ritz;
        if done {
            break;
        }
    }
    let h = x.transpose() * op(&x);
    let eig = nalgebra::SymmetricEigen::new((&h + h.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    order.truncate(k);
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(k, b, |r, c| eig.eigenvectors[(c, order[r])]).transpose();
    (vals, &x * vecs)
}

fn adjacency_apply(adj: &[Vec<usize>], x: &DMatrix<f64>, row_scale: &[f64], diag: f64) -> DMatrix<f64> {
    let (n, b) = x.shape();
    let mut y = DMatrix::zeros(n, b);
    for c in 0..b {
        let col = x.column(c);
        for i in 0..n {
            let s: f64 = adj[i].iter().map(|&j| row_scale[j] * col[j]).sum();
            y[(i, c)] = row_scale[i] * s + diag * col[i];
        }
    }
    y
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// k-means++ seeding plus Lloyd iterations; best of several restarts by
/// within-cluster sum of squares.
pub(crate) fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<usize> {
    let n = points.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng = rng_for(seed, 0x6b00 + restart as u64);
        let mut centers = vec![points[rng.random_range(0..n)].clone()];
        let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
        while centers.len() < k {
            let total: f64 = d2.iter().sum();
            let next = if total <= 0.0 {
                rng.random_range(0..n)
            } else {
                let mut u = rng.random::<f64>() * total;
                let mut pick = n - 1;
                for (i, &d) in d2.iter().enumerate() {
                    if u < d {
                        pick = i;
                        break;
                    }
                    u -= d;
                }
                pick
            };
            centers.push(points[next].clone());
            for (d, p) in d2.iter_mut().zip(points) {
                *d = d.min(sq_dist(p, centers.last().unwrap()));
            }
        }
        let mut assign = vec![0usize; n];
        for it in 0..KMEANS_MAX_ITERS {
            let mut changed = false;
            for (a, p) in assign.iter_mut().zip(points) {
                let c = (0..k)
                    .min_by(|&x, &y| sq_dist(p, &centers[x]).total_cmp(&sq_dist(p, &centers[y])))
                    .unwrap();
                if *a != c || it == 0 {
                    changed |= *a != c;
                    *a = c;
                }
            }
            if !changed && it > 0 {
                break;
            }
            let dim = points[0].len();
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (&a, p) in assign.iter().zip(points) {
                counts[a] += 1;
                sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
            }
            for c in 0..k {
                if counts[c] > 0 {
                    centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
                }
            }
        }
        let sse: f64 = assign.iter().zip(points).map(|(&a, p)| sq_dist(p, &centers[a])).sum();
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, assign));
        }
    }
    best.unwrap().1
}

/// Spectral clustering on `D^{-1/2} A D^{-1/2}` (row-normalized top-`k`
/// eigenvectors, k-means), then add-one smoothed block rates.
pub fn fit_sbm(g: &GraphSample, k: usize, seed: u64) -> Result<AgentModel> {
    let n = g.n;
    if k > n {
        return Err(Error::invalid(format!(
            "SBM with {k} blocks needs at least {k} vertices"
        )));
    }
    let adj = g.adjacency();
    let scale: Vec<f64> = g
        .degrees
        .iter()
        .map(|&d| if d > 0 { (d as f64).powf(-0.5) } else { 0.0 })
        .collect();
    // (I + L)/2 has the same eigenvectors as L and spectrum in [0, 1]
    let (_, u) = top_eigen(n, k, seed, |x| adjacency_apply(&adj, x, &scale, 1.0) * 0.5);
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = u.row(i).iter().copied().collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter().map(|v| v / norm).collect()
            } else {
                row
            }
        })
        .collect();
    let raw = kmeans(&points, k, seed);
    let mut used: Vec<usize> = raw.clone();
    used.sort_unstable();
    used.dedup();
    let assignment: Vec<usize> = raw.iter().map(|c| used.binary_search(c).unwrap()).collect();
    let probs = group_rates(g, &assignment, used.len())
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|(e, p)| (e as f64 + 1.0) / (p as f64 + 2.0))
                .collect()
        })
        .collect();
    AgentModel::sbm(assignment, probs)
}

/// Weighted logistic regression of labels on `(x, 1)`; returns `(a, c)`.
fn logistic_scale_intercept(x: &[f64], y: &[bool], w: &[f64]) -> (f64, f64) {
    let loss = |a: f64, c: f64| -> f64 {
        x.iter()
            .zip(y)
            .zip(w)
            .map(|((&xi, &yi), &wi)| {
                let z = a * xi + c;
                let sp = if z > 0.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                };
                wi * (sp - if yi { z } else { 0.0 })
            })
            .sum()
    };
    let total: f64 = w.iter().sum();
    let pos: f64 = y.iter().zip(w).filter(|(y, _)| **y).map(|(_, w)| w).sum();
    let rate = (pos / total).clamp(1e-12, 1.0 - 1e-12);
    let (mut a, mut c) = (0.0, (rate / (1.0 - rate)).ln());
    let mut f = loss(a, c);
    for _ in 0..100 {
        let (mut ga, mut gc, mut haa, mut hac, mut hcc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
            let p = sigmoid(a * xi + c);
            let r = wi * (p - if yi { 1.0 } else { 0.0 });
            let h = wi * p * (1.0 - p);
            ga += r * xi;
            gc += r;
            haa += h * xi * xi;
            hac += h * xi;
            hcc += h;
        }
        if (ga * ga + gc * gc).sqrt() <= 1e-10 * total {
            break;
        }
        let det = haa * hcc - hac * hac;
        let (da, dc) = if det > 1e-300 * (haa * hcc).max(1e-300) && det > 0.0 {
            ((hcc * ga - hac * gc) / det, (haa * gc - hac * ga) / det)
        } else {
            (0.0, gc / hcc.max(1e-300))
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let (na, nc) = (a - t * da, c - t * dc);
            let nf = loss(na, nc);
            if nf <= f {
                moved = nf < f;
                (a, c, f) = (na, nc, nf);
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (a, c)
}

/// Top-`d` adjacency spectral embedding `z_i = U_i √λ` (positive eigenvalues
/// only) with the logistic link `σ(a·z_iᵀz_j + c)`; `a ≥ 0` and `c` are fitted
/// on the calibration dyads, or on the observed graph if none are given.
pub fn fit_rdpg(g: &GraphSample, d: usize, calibration: Option<&[LabeledDyad]>, seed: u64) -> Result<AgentModel> {
    let n = g.n;
    if d > n {
        return Err(Error::invalid(format!("RDPG dimension {d} exceeds {n} vertices")));
    }
    let adj = g.adjacency();
    let shift = g.degrees.iter().copied().max().unwrap_or(0) as f64;
    let ones = vec![1.0; n];
    let (vals, u) = top_eigen(n, d, seed, |x| adjacency_apply(&adj, x, &ones, shift));
    let keep: Vec<usize> = (0..d).filter(|&c| vals[c] - shift > 1e-9 * shift.max(1.0)).collect();
    let mut z: Vec<Vec<f64>> = (0..n)
        .map(|i| keep.iter().map(|&c| u[(i, c)] * (vals[c] - shift).sqrt()).collect())
        .collect();
    if keep.is_empty() {
        z.iter_mut().for_each(|r| r.push(0.0));
    }
    let dot = |i: usize, j: usize| -> f64 { z[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum() };

    let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    match calibration {
        Some(dyads) if !dyads.is_empty() => {
            for t in dyads {
                xs.push(dot(t.i, t.j));
                ys.push(t.label);
                ws.push(1.0);
            }
        }
        Some(_) => return Err(Error::invalid("calibration dyads are empty")),
        None if num_pairs(n) <= ALL_PAIRS_LIMIT => {
            for i in 0..n {
                for j in i + 1..n {
                    xs.push(dot(i, j));
                    ys.push(g.has_edge(i, j));
                    ws.push(1.0);
                }
            }
        }
        None => {
            for &(i, j) in &g.edges {
                xs.push(dot(i, j));
                ys.push(true);
                ws.push(1.0);
            }
            let non_edges = num_pairs(n) - g.num_edges();
            let draws = (10 * g.num_edges()).min(non_edges).max(1);
            let mut rng = rng_for(seed, 0x7d00);
            let mut got = 0;
            while got < draws {
                let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
                if i == j || g.has_edge(i.min(j), i.max(j)) {
                    continue;
                }
                xs.push(dot(i, j));
                ys.push(false);
                got += 1;
            }
            ws.extend(std::iter::repeat_n(non_edges as f64 / draws as f64, draws));
        }
    }
    let (mut a, mut c) = logistic_scale_intercept(&xs, &ys, &ws);
    if a < 0.0 {
        a = 0.0;
        c = logistic_scale_intercept(&vec![0.0; xs.len()], &ys, &ws).1;
    }
    let s = a.sqrt();
    z.iter_mut().flatten().for_each(|v| *v *= s);
    AgentModel::rdpg(z, c)
}

/// Fits the agent menu on `g` in the order ChungLu, DegHist, SBM, LogRDPG
/// (ER first when enabled). `calibration` dyads, when given, must be
/// labelled consistently with `g`.
pub fn fit_agents_to_graph(
    g: &GraphSample,
    hyper: &AgentHyper,
    calibration: Option<&[LabeledDyad]>,
    seed: u64,
) -> Result<Vec<AgentModel>> {
    hyper.validate()?;
    if g.n < MIN_FIT_NODES {
        return Err(Error::invalid(format!(
            "fitting agents needs at least {MIN_FIT_NODES} vertices, got {}",
            g.n
        )));
    }
    if hyper.sbm_k > g.n || hyper.rdpg_d > g.n {
        return Err(Error::invalid("SBM blocks or RDPG dimension exceed the vertex count"));
    }
    if g.num_edges() == 0 {
        return Err(Error::Degenerate("training graph has no edges".into()));
    }
    let mut out = Vec::with_capacity(5);
    if hyper.include_er {
        out.push(fit_er(g)?);
    }
    out.push(fit_chung_lu(g)?);
    out.push(fit_deg_hist(g, hyper.deghist_bins)?);
    out.push(fit_sbm(g, hyper.sbm_k, seed)?);
    out.push(fit_rdpg(g, hyper.rdpg_d, calibration, seed)?);
    Ok(out)
}

/// Agent prediction columns for a list of dyads.
pub fn agent_features(agents: &[AgentModel], dyads: &[LabeledDyad]) -> Vec<Vec<f64>> {
    dyads
        .iter()
        .map(|t| agents.iter().map(|a| a.edge_prob(t.i, t.j)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentKind;
    use crate::graphon::Graphon;
    use crate::sampling::sample_graph;

    #[test]
    fn er_density_oracle() {
        let n = 10;
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let g = GraphSample::from_edges(n, pairs.iter().copied().step_by(3)).unwrap();
        let er = fit_er(&g).unwrap();
        assert_eq!(er.base_edge_prob(0, 1), 15.0 / 45.0);
    }

    #[test]
    fn regular_graph_single_bin() {
        let n = 12;
        let g = GraphSample::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap();
        let dh = fit_deg_hist(&g, 10).unwrap();
        let AgentKind::DegHist { node_bins, rates, .. } = &dh.kind else {
            unreachable!()
        };
        assert!(node_bins.iter().all(|&b| b == 0));
        assert_eq!(rates.len(), 1);
        assert!((rates[0][0] - 12.0 / 66.0).abs() < 1e-15);
    }

    #[test]
    fn chung_lu_weights() {
        let g = GraphSample::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let cl = fit_chung_lu(&g).unwrap();
        let AgentKind::ChungLu { weights } = &cl.kind else {
            unreachable!()
        };
        assert!((weights[0] - 3.0 / 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn planted_partition_recovered() {
        let w = Graphon::equal_blocks(vec![vec![0.3, 0.05], vec![0.05, 0.3]]).unwrap();
        let g = sample_graph(&w, 500, 11).unwrap();
        let sbm = fit_sbm(&g, 2, 3).unwrap();
        let AgentKind::Sbm { assignment, probs } = &sbm.kind else {
            unreachable!()
        };
        let truth: Vec<usize> = g.latents.iter().map(|&u| usize::from(u >= 0.5)).collect();
        let agree = assignment.iter().zip(&truth).filter(|(a, b)| a == b).count();
        let flipped = agree.min(500 - agree) == 500 - agree;
        assert!(agree.max(500 - agree) >= 490, "{agree}");
        let (a0, a1) = if flipped { (0, 1) } else { (1, 0) };
        assert!((probs[a0][a0] - 0.3).abs() < 0.05 && (probs[a1][a1] - 0.3).abs() < 0.05);
        assert!((probs[0][1] - 0.05).abs() < 0.05);
    }

    #[test]
    fn rdpg_detects_structure() {
        let w = Graphon::equal_blocks(vec![vec![0.4, 0.05], vec![0.05, 0.4]]).unwrap();
        let g = sample_graph(&w, 300, 5).unwrap();
        let r = fit_rdpg(&g, 2, None, 1).unwrap();
        let (mut within, mut between, mut nw, mut nb) = (0.0, 0.0, 0, 0);
        for i in 0..300 {
            for j in i + 1..300 {
                let same = (g.latents[i] >= 0.5) == (g.latents[j] >= 0.5);
                let p = r.edge_prob(i, j);
                if same {
                    within += p;
                    nw += 1;
                } else {
                    between += p;
                    nb += 1;
                }
            }
        }
        let (within, between) = (within / nw as f64, between / nb as f64);
        assert!(
            (within - 0.4).abs() < 0.1 && (between - 0.05).abs() < 0.1,
            "{within} {between}"
        );
    }

    #[test]
    fn guards() {
        let g = GraphSample::from_edges(5, [(0, 1)]).unwrap();
        assert!(fit_agents_to_graph(&g, &AgentHyper::default(), None, 0).is_err());
        let g = GraphSample::from_edges(12, (0..11).map(|i| (i, i + 1))).unwrap();
        let h = AgentHyper {
            sbm_k: 13,
            ..AgentHyper::default()
        };
        assert!(fit_agents_to_graph(&g, &h, None, 0).is_err());
        let agents = fit_agents_to_graph(&g, &AgentHyper::default(), None, 0).unwrap();
        let names: Vec<_> = agents.iter().map(|a| a.name()).collect();
        assert_eq!(names, ["ChungLu", "DegHist", "SBM", "LogRDPG"]);
    }
}
