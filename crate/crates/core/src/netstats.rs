//! Finite-graph statistics, centralities and degree-tail analysis.

use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::GraphSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStatistics {
    pub degrees: Vec<usize>,
    /// `D̄_n / (n − 1)`.
    pub avg_degree_norm: f64,
    pub triangles: u64,
    /// Triangles over `C(n, 3)`.
    pub t_n: f64,
    /// `Σ D_i (D_i − 1) / (n (n−1) (n−2))`.
    pub s_n: f64,
    /// `T_n / S_n`, or 0 when `S_n = 0`.
    pub c_n: f64,
}

/// Triangle count by forward adjacency: orient each edge from lower to higher
/// `(degree, id)` rank and intersect forward lists (sorted merges, or bitsets
/// on dense graphs).
pub fn triangle_count(g: &GraphSample) -> u64 {
    let rank = |v: usize| (g.degrees[v], v);
    let mut fwd: Vec<Vec<usize>> = vec![Vec::new(); g.n];
    for &(i, j) in &g.edges {
        if rank(i) < rank(j) {
            fwd[i].push(j);
        } else {
            fwd[j].push(i);
        }
    }
    fwd.iter_mut().for_each(|l| l.sort_unstable());
    let words = g.n.div_ceil(64);
    if 2 * g.edges.len() > g.n * words {
        // dense: a word-parallel AND beats merging long lists
        let mut bits = vec![0u64; g.n * words];
        for (u, out) in fwd.iter().enumerate() {
            for &v in out {
                bits[u * words + v / 64] |= 1 << (v % 64);
            }
        }
        let row = |u: usize| &bits[u * words..(u + 1) * words];
        return fwd
            .par_iter()
            .enumerate()
            .map(|(u, out)| {
                out.iter()
                    .map(|&v| {
                        row(u)
                            .iter()
                            .zip(row(v))
                            .map(|(a, b)| (a & b).count_ones() as u64)
                            .sum::<u64>()
                    })
                    .sum::<u64>()
            })
            .sum();
    }
    fwd.par_iter()
        .map(|out| {
            let mut t = 0u64;
            for &v in out {
                let (a, b) = (out.as_slice(), fwd[v].as_slice());
                let (mut x, mut y) = (0, 0);
                while x < a.len() && y < b.len() {
                    match a[x].cmp(&b[y]) {
                        std::cmp::Ordering::Less => x += 1,
                        std::cmp::Ordering::Greater => y += 1,
                        std::cmp::Ordering::Equal => {
                            t += 1;
                            x += 1;
                            y += 1;
                        }
                    }
                }
            }
            t
        })
        .sum()
}

pub fn graph_statistics(g: &GraphSample) -> Result<GraphStatistics> {
    let n = g.n;
    if n < 3 {
        return Err(Error::invalid("graph statistics need at least three vertices"));
    }
    let nf = n as f64;
    let triangles = triangle_count(g);
    let t_n = triangles as f64 / (nf * (nf - 1.0) * (nf - 2.0) / 6.0);
    let wedge: f64 = g.degrees.iter().map(|&d| (d * d.saturating_sub(1)) as f64).sum();
    let s_n = wedge / (nf * (nf - 1.0) * (nf - 2.0));
    let avg = g.degrees.iter().sum::<usize>() as f64 / nf;
    Ok(GraphStatistics {
        degrees: g.degrees.clone(),
        avg_degree_norm: avg / (nf - 1.0),
        triangles,
        t_n,
        s_n,
        c_n: if s_n > 0.0 { t_n / s_n } else { 0.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centralities {
    /// `r_i / Σ_{j reachable} dist(i, j)` with `r_i` the number of vertices
    /// reachable from `i`; equals `(n−1)/Σ_j dist(i,j)` on connected graphs.
    pub closeness: Vec<f64>,
    /// Shortest-path betweenness over ordered pairs, divided by `(n−1)(n−2)`.
    pub betweenness: Vec<f64>,
    pub reachable: Vec<usize>,
    /// True when some vertex pair is disconnected.
    pub has_unreachable: bool,
}

const SOURCE_CHUNK: usize = 32;

/// Closeness and Brandes betweenness. Sources are processed concurrently in
/// fixed chunks and summed in order, so results are reproducible.
pub fn centralities(g: &GraphSample) -> Centralities {
    let n = g.n;
    let adj = g.adjacency();
    let sources: Vec<usize> = (0..n).collect();
    let parts: Vec<(Vec<f64>, Vec<(f64, usize)>)> = sources
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            let mut bt = vec![0.0; n];
            let mut close = Vec::with_capacity(chunk.len());
            let mut dist = vec![usize::MAX; n];
            let mut sigma = vec![0.0f64; n];
            let mut delta = vec![0.0f64; n];
            let mut order = Vec::with_capacity(n);
            let mut queue = VecDeque::new();
            for &s in chunk {
                dist.iter_mut().for_each(|d| *d = usize::MAX);
                sigma.iter_mut().for_each(|x| *x = 0.0);
                delta.iter_mut().for_each(|x| *x = 0.0);
                order.clear();
                dist[s] = 0;
                sigma[s] = 1.0;
                queue.push_back(s);
                let mut total = 0usize;
                while let Some(v) = queue.pop_front() {
                    order.push(v);
                    total += dist[v];
                    for &u in &adj[v] {
                        if dist[u] == usize::MAX {
                            dist[u] = dist[v] + 1;
                            queue.push_back(u);
                        }
                        if dist[u] == dist[v] + 1 {
                            sigma[u] += sigma[v];
                        }
                    }
                }
                for &v in order.iter().rev() {
                    for &u in &adj[v] {
                        if dist[u] != usize::MAX && dist[u] + 1 == dist[v] {
                            delta[u] += sigma[u] / sigma[v] * (1.0 + delta[v]);
                        }
                    }
                    if v != s {
                        bt[v] += delta[v];
                    }
                }
                close.push((total as f64, order.len() - 1));
            }
            (bt, close)
        })
        .collect();
    let mut betweenness = vec![0.0; n];
    let mut closeness = Vec::with_capacity(n);
    let mut reachable = Vec::with_capacity(n);
    for (bt, close) in parts {
        betweenness.iter_mut().zip(&bt).for_each(|(a, b)| *a += b);
        for (total, r) in close {
            closeness.push(if total > 0.0 { r as f64 / total } else { 0.0 });
            reachable.push(r);
        }
    }
    if n > 2 {
        let norm = ((n - 1) * (n - 2)) as f64;
        betweenness.iter_mut().for_each(|b| *b /= norm);
    } else {
        betweenness.iter_mut().for_each(|b| *b = 0.0);
    }
    let has_unreachable = reachable.iter().any(|&r| r + 1 < n);
    Centralities {
        closeness,
        betweenness,
        reachable,
        has_unreachable,
    }
}

/// Minimum number of positive observations for the Hill estimator.
pub const HILL_MIN_POSITIVE: usize = 50;

/// Hill estimate of the ccdf exponent `γ` in `P(D ≥ k) ~ C k^{-γ}` from the
/// top `⌈k_frac · n⌉` order statistics of the positive values. A light tail
/// shows up as a large (possibly infinite) estimate; it is not clamped.
pub fn hill_tail_exponent(values: &[f64], k_frac: f64) -> Result<f64> {
    if !(k_frac > 0.0 && k_frac < 1.0) {
        return Err(Error::invalid(format!("k_frac {k_frac} must lie in (0,1)")));
    }
    let mut pos: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    if pos.len() < HILL_MIN_POSITIVE {
        return Err(Error::invalid(format!(
            "Hill estimator needs at least {HILL_MIN_POSITIVE} positive values, got {}",
            pos.len()
        )));
    }
    pos.sort_unstable_by(|a, b| b.total_cmp(a));
    let k = ((k_frac * pos.len() as f64).ceil() as usize).clamp(1, pos.len() - 1);
    let threshold = pos[k].ln();
    let h = pos[..k].iter().map(|x| x.ln() - threshold).sum::<f64>() / k as f64;
    Ok(1.0 / h)
}

/// Support truncation point for constructed degree laws.
pub const DEFAULT_K_MAX: usize = 1_000_000;

/// Probability mass function on degrees `0..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreePmf {
    pub probs: Vec<f64>,
    /// Nominal ccdf tail exponent, when known by construction.
    pub gamma: Option<f64>,
    /// Mass removed by truncating the support (before renormalization).
    pub truncation_mass: f64,
}

impl DegreePmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::invalid("degree pmf must be nonempty, finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("degree pmf sums to {total}")));
        }
        Ok(DegreePmf {
            probs,
            gamma: None,
            truncation_mass: 0.0,
        })
    }

    /// Discrete power law `p_k ∝ k^{-(γ+1)}` on `k_min..=k_max`, so that
    /// `P(D ≥ k) ~ C k^{-γ}`.
    pub fn power_law(gamma: f64, k_min: usize, k_max: usize) -> Result<Self> {
        if !(gamma > 0.0) || k_min == 0 || k_max < k_min {
            return Err(Error::invalid("power law needs γ > 0 and 1 ≤ k_min ≤ k_max"));
        }
        let mut probs = vec![0.0; k_max + 1];
        for (k, p) in probs.iter_mut().enumerate().skip(k_min) {
            *p = (k as f64).powf(-(gamma + 1.0));
        }
        let kept: f64 = probs.iter().sum();
        // integral approximation of the discarded tail Σ_{k > k_max}
        let dropped = (k_max as f64 + 0.5).powf(-gamma) / gamma;
        probs.iter_mut().for_each(|p| *p /= kept);
        Ok(DegreePmf {
            probs,
            gamma: Some(gamma),
            truncation_mass: dropped / (kept + dropped),
        })
    }

    /// `Σ_j w_j p_j` on the common support; the nominal exponent is the
    /// smallest among components with positive weight.
    pub fn mixture(components: &[DegreePmf], weights: &[f64]) -> Result<Self> {
        crate::error::check_len(components.len(), weights.len())?;
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("mixture weights must be nonnegative and sum to 1"));
        }
        let len = components.iter().map(|c| c.probs.len()).max().unwrap_or(0);
        let mut probs = vec![0.0; len];
        let mut gamma: Option<f64> = None;
        let mut trunc = 0.0;
        for (c, &w) in components.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            for (p, q) in probs.iter_mut().zip(&c.probs) {
                *p += w * q;
            }
            gamma = match (gamma, c.gamma) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (None, b) => b,
                (a, None) => a,
            };
            trunc += w * c.truncation_mass;
        }
        let mut m = DegreePmf::new(probs)?;
        m.gamma = gamma;
        m.truncation_mass = trunc;
        Ok(m)
    }

    pub fn k_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// `P(D ≥ k)` for every `k`, summed from the top for accuracy.
    pub fn ccdf(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.probs.len()];
        let mut acc = 0.0;
        for k in (0..self.probs.len()).rev() {
            acc += self.probs[k];
            c[k] = acc;
        }
        c
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    /// `n` iid draws by inverse-cdf lookup.
    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<usize> {
        let mut cdf = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for p in &self.probs {
            acc += p;
            cdf.push(acc);
        }
        let last = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        (0..n)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * acc;
                cdf.partition_point(|&c| c <= u).min(last)
            })
            .collect()
    }

    /// CSV with header `k,pmf,ccdf`; zero-mass rows are skipped.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "pmf", "ccdf"])?;
        for (k, (p, c)) in self.probs.iter().zip(self.ccdf()).enumerate() {
            if *p > 0.0 {
                w.write_record([k.to_string(), format!("{p:e}"), format!("{c:e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub gamma_hat: f64,
    pub window: (usize, usize),
    pub r2: f64,
    pub points: usize,
}

impl TailFit {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// OLS fit of `log P(D ≥ k)` on `log k` over `k ∈ [lo, hi]`; returns the
/// negated slope as `γ̂`.
pub fn fit_tail_exponent(pmf: &DegreePmf, window: (usize, usize)) -> Result<TailFit> {
    let (lo, hi) = window;
    if lo == 0 || hi <= lo {
        return Err(Error::invalid("tail window must satisfy 1 ≤ lo < hi"));
    }
    let ccdf = pmf.ccdf();
    let pts: Vec<(f64, f64)> = (lo..=hi.min(pmf.k_max()))
        .filter(|&k| ccdf[k] > 0.0)
        .map(|k| ((k as f64).ln(), ccdf[k].ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Degenerate(
            "fewer than three positive ccdf points in the window".into(),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(TailFit {
        gamma_hat: -slope,
        window,
        r2,
        points: pts.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltedPmf {
    pub pmf: DegreePmf,
    /// `ρ ≥ γ`: the unbounded law would not normalize.
    pub hypothesis_violated: bool,
}

/// Degree-based tilt `p'_k ∝ k^ρ p_k` (with `ℓ(0) = 1`).
pub fn tilt_degree_pmf(pmf: &DegreePmf, rho: f64) -> Result<TiltedPmf> {
    if !rho.is_finite() {
        return Err(Error::invalid("tilt exponent must be finite"));
    }
    let mut probs: Vec<f64> = pmf
        .probs
        .iter()
        .enumerate()
        .map(|(k, p)| if k == 0 { *p } else { p * (k as f64).powf(rho) })
        .collect();
    let total: f64 = probs.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Degenerate("tilted pmf does not normalize".into()));
    }
    probs.iter_mut().for_each(|p| *p /= total);
    let hypothesis_violated = pmf.gamma.is_some_and(|g| rho >= g);
    Ok(TiltedPmf {
        pmf: DegreePmf {
            probs,
            gamma: pmf.gamma.map(|g| g - rho),
            truncation_mass: pmf.truncation_mass,
        },
        hypothesis_violated,
    })
}

/// Constant sandwich factors for a tilt `exp(λᵀs)` with `‖s‖ ≤ B`:
/// `e^{-2‖λ‖B} P₀(D ≥ k) ≤ P_λ(D ≥ k) ≤ e^{2‖λ‖B} P₀(D ≥ k)`.
pub fn bounded_tilt_bracket(lambda_norm: f64, bound: f64) -> Result<(f64, f64)> {
    if !(bound >= 0.0) || !(lambda_norm >= 0.0) {
        return Err(Error::invalid("‖λ‖ and B must be nonnegative"));
    }
    let t = 2.0 * lambda_norm * bound;
    Ok(((-t).exp(), t.exp()))
}

/// Tilt factor controlled polynomially on `{D ≥ k}`:
/// `c₋(1+k)^{-β₋} ≤ e^{λ s} ≤ c₊(1+k)^{β₊}`, with normalizer `M ∈ [m_lo, m_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolynomialControl {
    pub c_minus: f64,
    pub c_plus: f64,
    pub beta_minus: f64,
    pub beta_plus: f64,
    pub m_lo: f64,
    pub m_hi: f64,
}

impl PolynomialControl {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.c_minus, self.c_plus, self.m_lo, self.m_hi];
        if pos.iter().any(|&v| !(v > 0.0 && v.is_finite()))
            || !(self.beta_minus >= 0.0)
            || !(self.beta_plus >= 0.0)
            || self.m_lo > self.m_hi
        {
            return Err(Error::invalid("invalid polynomial tilt control"));
        }
        Ok(())
    }

    /// The bounded case `|λ s| ≤ t` expressed in polynomial form.
    pub fn bounded(t: f64) -> Self {
        PolynomialControl {
            c_minus: (-t).exp(),
            c_plus: t.exp(),
            beta_minus: 0.0,
            beta_plus: 0.0,
            m_lo: (-t).exp(),
            m_hi: t.exp(),
        }
    }

    /// Multiplicative factors `(lower(k), upper(k))` on `P₀(D ≥ k)`.
    pub fn factors(&self, k: usize) -> (f64, f64) {
        let base = 1.0 + k as f64;
        (
            self.c_minus * base.powf(-self.beta_minus) / self.m_hi,
            self.c_plus * base.powf(self.beta_plus) / self.m_lo,
        )
    }
}

/// Checks `lower(k)·base[k] ≤ tilted[k] ≤ upper(k)·base[k]` for every `k`
/// (with relative slack `tol`); returns the offending indices.
pub fn bracket_violations(
    control: &PolynomialControl,
    base_tail: &[f64],
    tilted_tail: &[f64],
    tol: f64,
) -> Result<Vec<usize>> {
    control.validate()?;
    crate::error::check_len(base_tail.len(), tilted_tail.len())?;
    Ok((0..base_tail.len())
        .filter(|&k| {
            let (lo, hi) = control.factors(k);
            let (b, t) = (base_tail[k], tilted_tail[k]);
            t < lo * b * (1.0 - tol) || t > hi * b * (1.0 + tol)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn graph(n: usize, e: &[(usize, usize)]) -> GraphSample {
        GraphSample::from_edges(n, e.iter().copied()).unwrap()
    }

    #[test]
    fn triangle_k3() {
        let s = graph_statistics(&graph(3, &[(0, 1), (1, 2), (0, 2)])).unwrap();
        assert_eq!((s.t_n, s.s_n, s.c_n), (1.0, 1.0, 1.0));
        assert_eq!(s.avg_degree_norm, 1.0);
    }

    #[test]
    fn empty_and_star() {
        let s = graph_statistics(&graph(5, &[])).unwrap();
        assert_eq!((s.t_n, s.s_n, s.c_n), (0.0, 0.0, 0.0));
        let s = graph_statistics(&graph(4, &[(0, 1), (0, 2), (0, 3)])).unwrap();
        assert_eq!(s.t_n, 0.0);
        assert!((s.s_n - 6.0 / 24.0).abs() < 1e-15);
        assert_eq!(s.c_n, 0.0);
        assert!(graph_statistics(&graph(2, &[(0, 1)])).is_err());
    }

    #[test]
    fn centralities_small_cases() {
        let k4 = graph(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let c = centralities(&k4);
        assert!(c.closeness.iter().all(|&x| x == 1.0));
        assert!(c.betweenness.iter().all(|&x| x == 0.0));
        assert!(!c.has_unreachable);
        let p = centralities(&graph(3, &[(0, 1), (1, 2)]));
        assert_eq!(p.closeness[1], 1.0);
        assert_eq!(p.betweenness, vec![0.0, 1.0, 0.0]);
        assert!((p.closeness[0] - 2.0 / 3.0).abs() < 1e-15);
        let d = centralities(&graph(4, &[(0, 1)]));
        assert!(d.has_unreachable);
        assert_eq!(d.reachable, vec![1, 1, 0, 0]);
        assert_eq!(d.closeness, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn hill_on_pareto() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / 2.5))
            .collect();
        let g = hill_tail_exponent(&xs, 0.05).unwrap();
        assert!((2.3..=2.7).contains(&g), "{g}");
        assert!(hill_tail_exponent(&xs[..10], 0.05).is_err());
    }

    #[test]
    fn power_law_pmf_and_csv() {
        let p = DegreePmf::power_law(2.0, 1, 1000).unwrap();
        assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(p.probs[0], 0.0);
        assert!(p.truncation_mass > 0.0 && p.truncation_mass < 1e-5);
        let c = p.ccdf();
        assert!((c[1] - 1.0).abs() < 1e-12);
        let mut buf = Vec::new();
        DegreePmf::new(vec![0.5, 0.5]).unwrap().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "k,pmf,ccdf\n0,5e-1,1e0\n1,5e-1,5e-1\n");
    }

    #[test]
    fn tilt_examples() {
        let p = DegreePmf::power_law(2.5, 1, 1_000_000).unwrap();
        let same = tilt_degree_pmf(&p, 0.0).unwrap();
        assert_eq!(same.pmf.probs, p.probs);
        let t = tilt_degree_pmf(&p, 1.0).unwrap();
        let fit = fit_tail_exponent(&t.pmf, (100, 10_000)).unwrap();
        assert!((fit.gamma_hat - 1.5).abs() <= 0.15, "{}", fit.gamma_hat);
        assert!(!t.hypothesis_violated);
        assert!(tilt_degree_pmf(&p, 3.0).unwrap().hypothesis_violated);
    }

    #[test]
    fn bracket_factors() {
        assert_eq!(bounded_tilt_bracket(0.0, 3.0).unwrap(), (1.0, 1.0));
        let (lo, hi) = bounded_tilt_bracket(2f64.ln(), 1.0).unwrap();
        assert!((lo - 0.25).abs() < 1e-15 && (hi - 4.0).abs() < 1e-14);
        let t = 0.7;
        let poly = PolynomialControl::bounded(t);
        let (blo, bhi) = bounded_tilt_bracket(t, 1.0).unwrap();
        for k in [0, 10, 1000] {
            let (a, b) = poly.factors(k);
            assert!((a - blo).abs() < 1e-15 && (b - bhi).abs() < 1e-14);
        }
        assert!(bounded_tilt_bracket(1.0, -1.0).is_err());
    }
}
