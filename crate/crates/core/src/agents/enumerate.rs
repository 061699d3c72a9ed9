use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ergm::{statistics, EdgeIndex, ErgmSpec, ErgmStat};
use super::AgentModel;
use crate::error::{check_len, Error, Result};

/// Largest vertex count for which all `2^{C(n,2)}` graphs are enumerated.
pub const MAX_ENUM_N: usize = 6;

fn check_enum_n(n: usize) -> Result<EdgeIndex> {
    if !(2..=MAX_ENUM_N).contains(&n) {
        return Err(Error::invalid(format!(
            "exact enumeration needs 2 ≤ n ≤ {MAX_ENUM_N}, got {n}"
        )));
    }
    EdgeIndex::new(n)
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `T(A)` for every graph on `n` vertices, row-major by bitmask.
#[derive(Debug, Clone)]
pub struct StatTable {
    index: EdgeIndex,
    dim: usize,
    values: Vec<f64>,
}

impl StatTable {
    pub fn new(n: usize, stats: &[ErgmStat]) -> Result<Self> {
        let index = check_enum_n(n)?;
        // validate against an ERGM with zero parameters
        let dim: usize = stats.iter().map(ErgmStat::dim).sum();
        ErgmSpec::new(n, stats.to_vec(), vec![0.0; dim])?;
        let count = 1u64 << index.num_pairs();
        let values: Vec<f64> = (0..count)
            .into_par_iter()
            .flat_map_iter(|mask| statistics(stats, &index, mask))
            .collect();
        Ok(StatTable { index, dim, values })
    }

    pub fn index(&self) -> &EdgeIndex {
        &self.index
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, mask: usize) -> &[f64] {
        &self.values[mask * self.dim..(mask + 1) * self.dim]
    }

    /// `θᵀT(A)` for every graph.
    pub fn linear(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|a| self.row(a).iter().zip(theta).map(|(t, v)| t * v).sum())
            .collect()
    }
}

/// A probability mass function over all labelled graphs on `n` vertices,
/// indexed by edge bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPmf {
    n: usize,
    probs: Vec<f64>,
}

impl GraphPmf {
    pub fn from_probs(n: usize, probs: Vec<f64>) -> Result<Self> {
        let idx = check_enum_n(n)?;
        check_len(1usize << idx.num_pairs(), probs.len())?;
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::invalid("probabilities must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(GraphPmf { n, probs })
    }

    /// Normalizes `exp(log_weights)`.
    pub fn from_log_weights(n: usize, log_weights: &[f64]) -> Result<Self> {
        let z = log_sum_exp(log_weights);
        if !z.is_finite() {
            return Err(Error::Degenerate("all graphs have zero weight".into()));
        }
        GraphPmf::from_probs(n, log_weights.iter().map(|l| (l - z).exp()).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, mask: u64) -> f64 {
        self.probs[mask as usize]
    }

    pub fn mean(&self, table: &StatTable) -> Vec<f64> {
        let mut m = vec![0.0; table.dim()];
        for (a, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                for (mi, t) in m.iter_mut().zip(table.row(a)) {
                    *mi += p * t;
                }
            }
        }
        m
    }

    /// Covariance of `T` under this pmf, row-major `d × d`.
    pub fn covariance(&self, table: &StatTable) -> Vec<f64> {
        let d = table.dim();
        let mu = self.mean(table);
        let mut c = vec![0.0; d * d];
        for (a, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                let r = table.row(a);
                for i in 0..d {
                    let di = r[i] - mu[i];
                    for j in 0..d {
                        c[i * d + j] += p * di * (r[j] - mu[j]);
                    }
                }
            }
        }
        c
    }

    pub fn total_variation(&self, other: &GraphPmf) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// `KL(self ‖ other)`; infinite when `self` charges a null set of `other`.
    pub fn kl_divergence(&self, other: &GraphPmf) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(&f, &p)| {
                if f == 0.0 {
                    0.0
                } else if p == 0.0 {
                    f64::INFINITY
                } else {
                    f * (f / p).ln()
                }
            })
            .sum()
    }

    /// CSV with header `mask,probability`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["mask", "probability"])?;
        for (a, p) in self.probs.iter().enumerate() {
            w.write_record([a.to_string(), format!("{p:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact pmf of an ERGM on `n ≤ 6` vertices.
pub fn enumerate_ergm(spec: &ErgmSpec) -> Result<GraphPmf> {
    spec.validate()?;
    let table = StatTable::new(spec.n, &spec.stats)?;
    GraphPmf::from_log_weights(spec.n, &table.linear(&spec.theta))
}

/// Exact pmf of an independent-edge agent on `n ≤ 6` vertices.
pub fn enumerate_agent(agent: &AgentModel, n: usize) -> Result<GraphPmf> {
    let idx = check_enum_n(n)?;
    if let super::AgentKind::Er { .. } = agent.kind {
        // a function of the edge count only, so isomorphic graphs get
        // bitwise-equal mass
        let m = idx.num_pairs() as i32;
        let p = if n >= 2 { agent.edge_prob(0, 1) } else { 0.0 };
        let probs = (0..1u64 << m)
            .map(|a| {
                let k = a.count_ones() as i32;
                p.powi(k) * (1.0 - p).powi(m - k)
            })
            .collect();
        return GraphPmf::from_probs(n, probs);
    }
    let probs = super::edge_prob_matrix(agent, n)?;
    // bit k of the mask is pair k, so appending doubles the table per pair
    let mut v = vec![1.0];
    for &(i, j) in idx.pairs() {
        let p = probs[i][j];
        let mut next: Vec<f64> = v.iter().map(|x| x * (1.0 - p)).collect();
        next.extend(v.iter().map(|x| x * p));
        v = next;
    }
    GraphPmf::from_probs(n, v)
}

/// `α(A) = exp(τᵀT(A))` for every graph.
pub fn entropic_weights(table: &StatTable, tau: &[f64]) -> Result<Vec<f64>> {
    check_len(table.dim(), tau.len())?;
    Ok(table.linear(tau).into_iter().map(f64::exp).collect())
}

/// Per-component tilt `α_j` used in mixture synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Alpha {
    /// `α ≡ 1`: plain Bayesian model averaging.
    Unit,
    /// Explicit nonnegative weights indexed by bitmask.
    Values { values: Vec<f64> },
    /// `α(A) = exp(τᵀT(A))`.
    Entropic { stats: Vec<ErgmStat>, tau: Vec<f64> },
}

impl Alpha {
    fn log_values(&self, n: usize, len: usize) -> Result<Vec<f64>> {
        match self {
            Alpha::Unit => Ok(vec![0.0; len]),
            Alpha::Values { values } => {
                check_len(len, values.len())?;
                if values.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                    return Err(Error::invalid("tilt values must be finite and nonnegative"));
                }
                Ok(values.iter().map(|v| v.ln()).collect())
            }
            Alpha::Entropic { stats, tau } => {
                let table = StatTable::new(n, stats)?;
                check_len(table.dim(), tau.len())?;
                Ok(table.linear(tau))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MixtureComponent {
    pub pmf: GraphPmf,
    pub alpha: Alpha,
}

/// Mixture synthesis `f = Σ_j π̃_j f_j` with `f_j ∝ α_j p_j`.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub pmf: GraphPmf,
    pub components: Vec<GraphPmf>,
    /// `a_j = Σ_A α_j(A) p_j(A)`.
    pub normalizers: Vec<f64>,
    /// Posterior weights `π̃_j ∝ π_j a_j`.
    pub weights: Vec<f64>,
}

pub fn mixture_pmf(components: &[MixtureComponent], prior: &[f64]) -> Result<Mixture> {
    check_len(components.len(), prior.len())?;
    let first = components
        .first()
        .ok_or_else(|| Error::invalid("mixture needs at least one component"))?;
    let n = first.pmf.n();
    if prior.iter().any(|&p| !(p >= 0.0 && p.is_finite())) || prior.iter().sum::<f64>() <= 0.0 {
        return Err(Error::invalid("prior weights must be nonnegative with positive sum"));
    }
    let len = first.pmf.probs().len();
    let mut tilted = Vec::with_capacity(components.len());
    let mut log_a = Vec::with_capacity(components.len());
    for c in components {
        if c.pmf.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.pmf.n(),
            });
        }
        let la = c.alpha.log_values(n, len)?;
        let l: Vec<f64> = la
            .iter()
            .zip(c.pmf.probs())
            .map(|(a, &p)| if p > 0.0 { a + p.ln() } else { f64::NEG_INFINITY })
            .collect();
        let z = log_sum_exp(&l);
        log_a.push(z);
        tilted.push(if z.is_finite() {
            Some(GraphPmf::from_log_weights(n, &l)?)
        } else {
            None
        });
    }
    let log_post: Vec<f64> = prior
        .iter()
        .zip(&log_a)
        .map(|(&p, &a)| if p > 0.0 { p.ln() + a } else { f64::NEG_INFINITY })
        .collect();
    let z = log_sum_exp(&log_post);
    if !z.is_finite() {
        return Err(Error::Degenerate("every component has zero tilted mass".into()));
    }
    let weights: Vec<f64> = log_post.iter().map(|l| (l - z).exp()).collect();
    let mut mix = vec![0.0; len];
    for (w, f) in weights.iter().zip(&tilted) {
        if let (true, Some(f)) = (*w > 0.0, f) {
            for (m, p) in mix.iter_mut().zip(f.probs()) {
                *m += w * p;
            }
        }
    }
    let total: f64 = mix.iter().sum();
    mix.iter_mut().for_each(|m| *m /= total);
    let components = tilted
        .into_iter()
        .map(|f| {
            f.unwrap_or_else(|| GraphPmf {
                n,
                probs: vec![0.0; len],
            })
        })
        .collect();
    Ok(Mixture {
        pmf: GraphPmf::from_probs(n, mix)?,
        components,
        normalizers: log_a.iter().map(|l| l.exp()).collect(),
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_only_ergm_is_er() {
        let lam = -0.7f64;
        let spec = ErgmSpec::new(4, vec![ErgmStat::Edges], vec![lam]).unwrap();
        let f = enumerate_ergm(&spec).unwrap();
        let p = (lam.exp()) / (1.0 + lam.exp());
        let er = enumerate_agent(&AgentModel::er(p).unwrap(), 4).unwrap();
        assert!(f.total_variation(&er) < 1e-14);
    }

    #[test]
    fn enumeration_size_limits() {
        assert!(StatTable::new(7, &[ErgmStat::Edges]).is_err());
        assert!(StatTable::new(1, &[ErgmStat::Edges]).is_err());
        let t = StatTable::new(5, &[ErgmStat::Edges]).unwrap();
        assert_eq!(t.len(), 1024);
    }

    #[test]
    fn unit_alpha_is_model_averaging() {
        let a = enumerate_agent(&AgentModel::er(0.2).unwrap(), 3).unwrap();
        let b = enumerate_agent(&AgentModel::er(0.6).unwrap(), 3).unwrap();
        let comps = vec![
            MixtureComponent {
                pmf: a.clone(),
                alpha: Alpha::Unit,
            },
            MixtureComponent {
                pmf: b.clone(),
                alpha: Alpha::Unit,
            },
        ];
        let m = mixture_pmf(&comps, &[0.25, 0.75]).unwrap();
        for k in 0..8 {
            let want = 0.25 * a.probs()[k] + 0.75 * b.probs()[k];
            assert!((m.pmf.probs()[k] - want).abs() < 1e-15);
        }
        assert!((m.normalizers[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_mass_components_drop_out() {
        let a = enumerate_agent(&AgentModel::er(0.3).unwrap(), 3).unwrap();
        let mut only_empty = vec![0.0; 8];
        only_empty[0] = 2.0;
        let comps = vec![
            MixtureComponent {
                pmf: a.clone(),
                alpha: Alpha::Values { values: only_empty },
            },
            MixtureComponent {
                pmf: a.clone(),
                alpha: Alpha::Values { values: vec![0.0; 8] },
            },
        ];
        let m = mixture_pmf(&comps, &[0.5, 0.5]).unwrap();
        assert_eq!(m.weights, vec![1.0, 0.0]);
        assert!((m.pmf.probs()[0] - 1.0).abs() < 1e-15);
        let dead = vec![comps[1].clone()];
        assert!(mixture_pmf(&dead, &[1.0]).is_err());
    }

    #[test]
    fn csv_dump() {
        let a = enumerate_agent(&AgentModel::er(0.5).unwrap(), 2).unwrap();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "mask,probability\n0,5e-1\n1,5e-1\n");
    }
}
