//! Graph and dyad sampling from graphons, giant components and phase sweeps.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphon::{spectral_radius, BlockForm, Graphon, Partition};
use crate::synthesis::DyadSample;

/// Generator for replicate `stream` of a run seeded with `seed`. Streams are
/// independent, so replicates can run in any order.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A simple undirected graph, optionally with the latent positions and seed
/// it was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSample {
    pub n: usize,
    /// Sorted, deduplicated pairs `(i, j)` with `i < j`.
    pub edges: Vec<(usize, usize)>,
    pub degrees: Vec<usize>,
    /// Latent uniforms; empty for observed graphs.
    #[serde(default)]
    pub latents: Vec<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl GraphSample {
    /// Normalizes an arbitrary pair list: orients `i < j`, drops self-loops
    /// and duplicates.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut e: Vec<(usize, usize)> = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::invalid(format!("edge ({a},{b}) out of range for n = {n}")));
            }
            if a != b {
                e.push((a.min(b), a.max(b)));
            }
        }
        e.sort_unstable();
        e.dedup();
        Ok(GraphSample::from_sorted(n, e, Vec::new(), None))
    }

    fn from_sorted(n: usize, edges: Vec<(usize, usize)>, latents: Vec<f64>, seed: Option<u64>) -> Self {
        let mut degrees = vec![0; n];
        for &(i, j) in &edges {
            degrees[i] += 1;
            degrees[j] += 1;
        }
        GraphSample {
            n,
            edges,
            degrees,
            latents,
            seed,
        }
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).is_ok()
    }

    /// Sorted neighbour lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<Vec<usize>> = self.degrees.iter().map(|&d| Vec::with_capacity(d)).collect();
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.edges.len() as f64 / (self.n * (self.n - 1) / 2) as f64
    }

    /// Whitespace-separated edge list with a `#` header line.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# nodes: {} edges: {}", self.n, self.edges.len())?;
        for &(i, j) in &self.edges {
            writeln!(out, "{i}\t{j}")?;
        }
        out.flush()?;
        Ok(())
    }
}

fn latents(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Dense sampling: iid uniform latents, independent edges with probability
/// `w(U_i, U_j)`. O(n²).
pub fn sample_graph(w: &Graphon, n: usize, seed: u64) -> Result<GraphSample> {
    if n < 2 {
        return Err(Error::invalid("sampling needs at least two vertices"));
    }
    let mut rng = rng_for(seed, 0);
    let u = latents(&mut rng, n);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < w.evaluate(u[i], u[j]) {
                edges.push((i, j));
            }
        }
    }
    Ok(GraphSample::from_sorted(n, edges, u, Some(seed)))
}

/// Largest piece count for which sparse sampling uses the block fast path.
const FAST_PATH_PIECES: usize = 1024;

/// Sparse sampling with edge probability `min(1, λ w(U_i, U_j) / n)`.
///
/// Every supported kernel is piecewise constant, so vertices are grouped by
/// the piece containing their latent and each block pair is filled by
/// geometric skipping over its vertex pairs: O(K² + n + edges) instead of
/// O(n²). Kernels with more than 1024 pieces use the per-pair loop.
pub fn sample_sparse_graph(w: &Graphon, n: usize, lambda: f64, seed: u64) -> Result<GraphSample> {
    check_sparse(n, lambda)?;
    let part = Partition::refinement([w.breakpoints().as_slice()]);
    if part.len() > FAST_PATH_PIECES {
        return sample_sparse_graph_naive(w, n, lambda, seed);
    }
    let form = BlockForm::from_graphon(w, &part);
    let k = form.pieces();
    let mut rng = rng_for(seed, 0);
    let u = latents(&mut rng, n);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &x) in u.iter().enumerate() {
        groups[part.locate(x)].push(i);
    }
    let mut edges = Vec::new();
    for a in 0..k {
        for b in a..k {
            let q = (lambda * form.value(a, b) / n as f64).min(1.0);
            let (ga, gb) = (&groups[a], &groups[b]);
            if a == b {
                let len = ga.len();
                let total = len * len.saturating_sub(1) / 2;
                // walk the upper triangle row by row alongside the skip positions
                let (mut row, mut row_start) = (0usize, 0usize);
                for pos in skip_positions(&mut rng, total, q) {
                    while pos >= row_start + (len - 1 - row) {
                        row_start += len - 1 - row;
                        row += 1;
                    }
                    let col = row + 1 + (pos - row_start);
                    edges.push(ordered(ga[row], ga[col]));
                }
            } else {
                let total = ga.len() * gb.len();
                for pos in skip_positions(&mut rng, total, q) {
                    edges.push(ordered(ga[pos / gb.len()], gb[pos % gb.len()]));
                }
            }
        }
    }
    edges.sort_unstable();
    Ok(GraphSample::from_sorted(n, edges, u, Some(seed)))
}

/// Per-pair reference implementation of [`sample_sparse_graph`].
pub fn sample_sparse_graph_naive(w: &Graphon, n: usize, lambda: f64, seed: u64) -> Result<GraphSample> {
    check_sparse(n, lambda)?;
    let mut rng = rng_for(seed, 0);
    let u = latents(&mut rng, n);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let q = (lambda * w.evaluate(u[i], u[j]) / n as f64).min(1.0);
            if rng.random::<f64>() < q {
                edges.push((i, j));
            }
        }
    }
    Ok(GraphSample::from_sorted(n, edges, u, Some(seed)))
}

fn check_sparse(n: usize, lambda: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid("sampling needs at least two vertices"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("sparsity parameter {lambda} must be positive")));
    }
    Ok(())
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Positions in `0..total` selected independently with probability `q`.
fn skip_positions(rng: &mut ChaCha8Rng, total: usize, q: f64) -> Vec<usize> {
    if q <= 0.0 || total == 0 {
        return Vec::new();
    }
    if q >= 1.0 {
        return (0..total).collect();
    }
    let log_fail = (-q).ln_1p();
    let mut out = Vec::new();
    let mut pos = 0usize;
    loop {
        // P(skip ≥ s) = (1-q)^s
        let r: f64 = 1.0 - rng.random::<f64>();
        let skip = (r.ln() / log_fail).floor();
        if skip >= (total - pos) as f64 {
            break;
        }
        pos += skip as usize;
        out.push(pos);
        pos += 1;
        if pos >= total {
            break;
        }
    }
    out
}

/// `m` iid dyads: uniform latent pairs, labels `Bernoulli(w(X))` and features
/// `(1, w_1(X), …, w_J(X))`. Dyad ids are `(2s, 2s+1)`.
pub fn sample_dyads(w: &Graphon, agents: &[Graphon], m: usize, seed: u64) -> Result<Vec<DyadSample>> {
    if m == 0 {
        return Err(Error::invalid("need at least one dyad"));
    }
    let mut rng = rng_for(seed, 0);
    (0..m)
        .map(|s| {
            let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
            let label = rng.random::<f64>() < w.evaluate(x, y);
            let preds: Vec<f64> = agents.iter().map(|a| a.evaluate(x, y)).collect();
            DyadSample::new((2 * s, 2 * s + 1), &preds, label)
        })
        .collect()
}

/// Connected-component sizes via union–find, largest first.
pub fn component_sizes(g: &GraphSample) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..g.n).collect();
    let mut size = vec![1usize; g.n];
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(i, j) in &g.edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            let (big, small) = if size[a] >= size[b] { (a, b) } else { (b, a) };
            parent[small] = big;
            size[big] += size[small];
        }
    }
    let mut sizes: Vec<usize> = (0..g.n)
        .filter(|&v| find(&mut parent, v) == v)
        .map(|v| size[v])
        .collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// `|C_max| / n`.
pub fn giant_fraction(g: &GraphSample) -> f64 {
    if g.n == 0 {
        return 0.0;
    }
    component_sizes(g)[0] as f64 / g.n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCurve {
    pub lambdas: Vec<f64>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub n: usize,
    pub reps: usize,
    pub rho_bps: f64,
    pub lambda_c: f64,
}

impl PhaseCurve {
    /// First `λ` whose mean giant fraction exceeds `threshold`.
    pub fn onset(&self, threshold: f64) -> Option<f64> {
        self.lambdas
            .iter()
            .zip(&self.mean)
            .find(|(_, &m)| m > threshold)
            .map(|(&l, _)| l)
    }

    /// CSV with header `lambda,mean,sd,n,reps`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "mean", "sd", "n", "reps"])?;
        for ((l, m), s) in self.lambdas.iter().zip(&self.mean).zip(&self.sd) {
            w.write_record([
                l.to_string(),
                m.to_string(),
                s.to_string(),
                self.n.to_string(),
                self.reps.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Grid used for the spectral radius attached to a phase curve.
pub const PHASE_SPECTRAL_GRID: usize = 256;

/// Mean and sample standard deviation of the giant fraction over `reps`
/// sparse samples at every `λ`. Replicate `(l, r)` uses stream `l·reps + r`.
pub fn phase_sweep(w: &Graphon, lambdas: &[f64], n: usize, reps: usize, seed: u64) -> Result<PhaseCurve> {
    if reps == 0 {
        return Err(Error::invalid("need at least one replicate"));
    }
    if lambdas.is_empty() {
        return Err(Error::invalid("empty lambda grid"));
    }
    let runs: Vec<(usize, usize)> = (0..lambdas.len())
        .flat_map(|l| (0..reps).map(move |r| (l, r)))
        .collect();
    let fracs: Vec<f64> = runs
        .par_iter()
        .map(|&(l, r)| {
            let s = derive_seed(seed, (l * reps + r) as u64);
            sample_sparse_graph(w, n, lambdas[l], s).map(|g| giant_fraction(&g))
        })
        .collect::<Result<_>>()?;
    let mut mean = Vec::with_capacity(lambdas.len());
    let mut sd = Vec::with_capacity(lambdas.len());
    for chunk in fracs.chunks(reps) {
        let (m, s) = mean_sd(chunk);
        mean.push(m);
        sd.push(s);
    }
    let rho = spectral_radius(w, PHASE_SPECTRAL_GRID)?;
    if !(rho > 0.0) {
        return Err(Error::Degenerate("kernel has zero spectral radius".into()));
    }
    Ok(PhaseCurve {
        lambdas: lambdas.to_vec(),
        mean,
        sd,
        n,
        reps,
        rho_bps: rho,
        lambda_c: 1.0 / rho,
    })
}

/// Independent child seed for replicate `stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    rng_for(seed, stream.wrapping_add(1)).random()
}

/// Mean and sample (n−1) standard deviation; sd is 0 for one value.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_kernels() {
        let e = sample_graph(&Graphon::constant(0.0).unwrap(), 30, 1).unwrap();
        assert_eq!(e.num_edges(), 0);
        assert!((giant_fraction(&e) - 1.0 / 30.0).abs() < 1e-15);
        let k = sample_graph(&Graphon::constant(1.0).unwrap(), 30, 1).unwrap();
        assert_eq!(k.num_edges(), 435);
        assert_eq!(giant_fraction(&k), 1.0);
    }

    #[test]
    fn path_is_connected() {
        let p = GraphSample::from_edges(5, [(0, 1), (2, 1), (2, 3), (3, 4), (4, 3), (2, 2)]).unwrap();
        assert_eq!(p.edges, vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert_eq!(p.degrees, vec![1, 2, 2, 2, 1]);
        assert_eq!(giant_fraction(&p), 1.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let w = Graphon::equal_blocks(vec![vec![0.5, 0.1], vec![0.1, 0.3]]).unwrap();
        assert_eq!(sample_graph(&w, 200, 9).unwrap(), sample_graph(&w, 200, 9).unwrap());
        assert_ne!(
            sample_graph(&w, 200, 9).unwrap().edges,
            sample_graph(&w, 200, 10).unwrap().edges
        );
        assert_eq!(
            sample_sparse_graph(&w, 500, 3.0, 4).unwrap(),
            sample_sparse_graph(&w, 500, 3.0, 4).unwrap()
        );
    }

    #[test]
    fn dense_density_concentrates() {
        let g = sample_graph(&Graphon::constant(0.3).unwrap(), 2000, 5).unwrap();
        let m = 2000.0 * 1999.0 / 2.0;
        let sd = (0.3f64 * 0.7 / m).sqrt();
        assert!((g.density() - 0.3).abs() < 3.0 * sd);
    }

    #[test]
    fn skip_positions_hit_rate() {
        let mut rng = rng_for(3, 0);
        let pos = skip_positions(&mut rng, 1_000_000, 0.01);
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(*pos.last().unwrap() < 1_000_000);
        let sd = (1e6 * 0.01 * 0.99f64).sqrt();
        assert!((pos.len() as f64 - 1e4).abs() < 4.0 * sd);
        assert_eq!(skip_positions(&mut rng, 7, 1.0), (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn fast_and_naive_sparse_samplers_agree_in_mean() {
        let w = Graphon::block(vec![0.0, 0.3, 1.0], vec![vec![0.9, 0.2], vec![0.2, 0.5]]).unwrap();
        let (n, lam) = (400, 6.0);
        let avg = |f: &dyn Fn(u64) -> GraphSample| (0..40).map(|s| f(s).num_edges() as f64).sum::<f64>() / 40.0;
        let fast = avg(&|s| sample_sparse_graph(&w, n, lam, s).unwrap());
        let naive = avg(&|s| sample_sparse_graph_naive(&w, n, lam, s).unwrap());
        // E|E| ≈ λ e(w) (n-1) / 2
        let e = 0.09 * 0.9 + 0.42 * 0.2 + 0.49 * 0.5;
        let want = lam * e * (n - 1) as f64 / 2.0;
        assert!((fast - want).abs() < 0.05 * want, "{fast} vs {want}");
        assert!((naive - want).abs() < 0.05 * want, "{naive} vs {want}");
    }

    #[test]
    fn dyad_features_and_labels() {
        let a = Graphon::constant(0.2).unwrap();
        let d = sample_dyads(&Graphon::constant(0.0).unwrap(), &[a.clone()], 100, 1).unwrap();
        assert!(d.iter().all(|s| !s.label && s.features == vec![1.0, 0.2]));
        let d = sample_dyads(&Graphon::constant(0.4).unwrap(), &[a], 20_000, 2).unwrap();
        let rate = d.iter().filter(|s| s.label).count() as f64 / 20_000.0;
        assert!((rate - 0.4).abs() < 3.0 * (0.24f64 / 20_000.0).sqrt());
    }

    #[test]
    fn phase_curve_csv() {
        let c = phase_sweep(&Graphon::constant(1.0).unwrap(), &[0.5, 3.0], 300, 2, 1).unwrap();
        assert!((c.lambda_c - 1.0).abs() < 1e-12);
        assert!(c.mean[1] > c.mean[0]);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("lambda,mean,sd,n,reps\n0.5,"));
        assert_eq!(s.lines().count(), 3);
    }

    #[test]
    fn edge_list_export() {
        let g = GraphSample::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# nodes: 3 edges: 2\n0\t1\n1\t2\n");
    }
}
