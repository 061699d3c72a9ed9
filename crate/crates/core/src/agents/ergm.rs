use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Vertex pairs `i < j` in lexicographic order; pair `k` is bit `k` of a
/// graph bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeIndex {
    n: usize,
    pairs: Vec<(usize, usize)>,
    triangles: Vec<u64>,
}

impl EdgeIndex {
    pub fn new(n: usize) -> Result<Self> {
        let m = n * n.saturating_sub(1) / 2;
        if m > 63 {
            return Err(Error::invalid(format!("{n} vertices do not fit a 64-bit edge mask")));
        }
        let mut pairs = Vec::with_capacity(m);
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i, j));
            }
        }
        let mut idx = EdgeIndex {
            n,
            pairs,
            triangles: Vec::new(),
        };
        let mut tris = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                for c in (b + 1)..n {
                    tris.push(idx.bit(a, b) | idx.bit(a, c) | idx.bit(b, c));
                }
            }
        }
        idx.triangles = tris;
        Ok(idx)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Position of `{i, j}` in the lexicographic order.
    pub fn position(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        debug_assert!(i != j && j < self.n);
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    pub fn bit(&self, i: usize, j: usize) -> u64 {
        1u64 << self.position(i, j)
    }

    pub fn degrees(&self, mask: u64) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            if mask >> k & 1 == 1 {
                d[i] += 1;
                d[j] += 1;
            }
        }
        d
    }

    pub fn triangle_count(&self, mask: u64) -> usize {
        self.triangles.iter().filter(|&&t| mask & t == t).count()
    }
}

fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Sufficient statistics available to ERGM agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stat", rename_all = "snake_case", deny_unknown_fields)]
pub enum ErgmStat {
    Edges,
    /// Edge counts `M_ab` for block pairs `a ≤ b`, ordered `(0,0),(0,1),…,(1,1),…`.
    BlockCounts {
        assignment: Vec<usize>,
        blocks: usize,
    },
    Triangles,
    /// Two-paths `Σ_i C(D_i, 2)`.
    Wedges,
    /// `Σ_i C(D_i, k)`.
    KStars {
        k: usize,
    },
}

impl ErgmStat {
    pub fn dim(&self) -> usize {
        match self {
            ErgmStat::BlockCounts { blocks, .. } => blocks * (blocks + 1) / 2,
            _ => 1,
        }
    }

    fn push(&self, idx: &EdgeIndex, mask: u64, out: &mut Vec<f64>) {
        match self {
            ErgmStat::Edges => out.push(mask.count_ones() as f64),
            ErgmStat::BlockCounts { assignment, blocks } => {
                let k = *blocks;
                let start = out.len();
                out.resize(start + k * (k + 1) / 2, 0.0);
                for (p, &(i, j)) in idx.pairs().iter().enumerate() {
                    if mask >> p & 1 == 1 {
                        let (a, b) = {
                            let (a, b) = (assignment[i], assignment[j]);
                            if a <= b {
                                (a, b)
                            } else {
                                (b, a)
                            }
                        };
                        out[start + a * (2 * k - a + 1) / 2 + (b - a)] += 1.0;
                    }
                }
            }
            ErgmStat::Triangles => out.push(idx.triangle_count(mask) as f64),
            ErgmStat::Wedges => out.push(idx.degrees(mask).iter().map(|&d| choose(d, 2)).sum()),
            ErgmStat::KStars { k } => out.push(idx.degrees(mask).iter().map(|&d| choose(d, *k)).sum()),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            ErgmStat::BlockCounts { assignment, blocks } => {
                check_len(n, assignment.len())?;
                if *blocks == 0 || assignment.iter().any(|&a| a >= *blocks) {
                    return Err(Error::invalid("block assignment out of range"));
                }
            }
            ErgmStat::KStars { k } if *k < 1 => return Err(Error::invalid("k-star order must be at least 1")),
            _ => {}
        }
        Ok(())
    }
}

/// An ERGM `p(A) ∝ exp(θᵀT(A))` on `n` labelled vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgmSpec {
    pub n: usize,
    pub stats: Vec<ErgmStat>,
    pub theta: Vec<f64>,
}

impl ErgmSpec {
    pub fn new(n: usize, stats: Vec<ErgmStat>, theta: Vec<f64>) -> Result<Self> {
        let s = ErgmSpec { n, stats, theta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for st in &self.stats {
            st.validate(self.n)?;
        }
        check_len(self.dim(), self.theta.len())?;
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("ERGM parameters must be finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.stats.iter().map(ErgmStat::dim).sum()
    }

    /// Full statistic vector `T(A)`.
    pub fn statistics(&self, idx: &EdgeIndex, mask: u64) -> Vec<f64> {
        statistics(&self.stats, idx, mask)
    }
}

pub(crate) fn statistics(stats: &[ErgmStat], idx: &EdgeIndex, mask: u64) -> Vec<f64> {
    let mut out = Vec::new();
    for s in stats {
        s.push(idx, mask, &mut out);
    }
    out
}

/// Tilting an ERGM agent by the stacking weight `omega` and entropic tilt
/// `tau` on the same statistics gives another ERGM with `θ' = ω θ + τ`.
pub fn ergm_stack_tilt(spec: &ErgmSpec, omega: f64, tau: &[f64]) -> Result<ErgmSpec> {
    check_len(spec.dim(), tau.len())?;
    if !omega.is_finite() || tau.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("stacking weight and tilt must be finite"));
    }
    let theta = spec.theta.iter().zip(tau).map(|(t, u)| omega * t + u).collect();
    ErgmSpec::new(spec.n, spec.stats.clone(), theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_positions() {
        let idx = EdgeIndex::new(4).unwrap();
        let want = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        assert_eq!(idx.pairs(), &want);
        for (k, &(i, j)) in want.iter().enumerate() {
            assert_eq!(idx.position(i, j), k);
            assert_eq!(idx.position(j, i), k);
        }
        assert!(EdgeIndex::new(12).is_err());
    }

    #[test]
    fn statistics_of_small_graphs() {
        let idx = EdgeIndex::new(4).unwrap();
        let stats = vec![
            ErgmStat::Edges,
            ErgmStat::Triangles,
            ErgmStat::Wedges,
            ErgmStat::KStars { k: 3 },
            ErgmStat::BlockCounts {
                assignment: vec![0, 0, 1, 1],
                blocks: 2,
            },
        ];
        // triangle 0-1-2 plus pendant 2-3
        let mask = idx.bit(0, 1) | idx.bit(0, 2) | idx.bit(1, 2) | idx.bit(2, 3);
        let t = statistics(&stats, &idx, mask);
        // degrees 2,2,3,1: wedges 1+1+3 = 5, 3-stars 1; blocks (0,0)=1, (0,1)=2, (1,1)=1
        assert_eq!(t, vec![4.0, 1.0, 5.0, 1.0, 1.0, 2.0, 1.0]);
        let full = (1u64 << 6) - 1;
        let t = statistics(&stats, &idx, full);
        assert_eq!(t, vec![6.0, 4.0, 12.0, 4.0, 1.0, 4.0, 1.0]);
    }

    #[test]
    fn stacking_combines_parameters() {
        let s = ErgmSpec::new(3, vec![ErgmStat::Edges, ErgmStat::Triangles], vec![-1.0, 0.5]).unwrap();
        let t = ergm_stack_tilt(&s, 2.0, &[0.5, -1.0]).unwrap();
        assert_eq!(t.theta, vec![-1.5, 0.0]);
        assert!(ergm_stack_tilt(&s, 1.0, &[0.0]).is_err());
    }
}
