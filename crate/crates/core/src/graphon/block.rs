use rayon::prelude::*;

use super::{Graphon, Partition};
use crate::error::{Error, Result};

/// Integration settings for graphon functionals.
///
/// Common refinements with at most `max_exact_pieces` pieces are integrated
/// exactly; anything finer falls back to a uniform midpoint grid of `grid`
/// points per axis (`triangle_grid` for the O(g³) triangle integral).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub grid: usize,
    pub triangle_grid: usize,
    pub max_exact_pieces: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            grid: 256,
            triangle_grid: 128,
            max_exact_pieces: 512,
        }
    }
}

impl QuadratureSpec {
    /// Always use the midpoint grid, never the exact refinement.
    pub fn midpoint(grid: usize) -> Self {
        QuadratureSpec {
            grid,
            triangle_grid: grid.min(128),
            max_exact_pieces: 0,
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.grid < 2 || self.triangle_grid < 2 {
            return Err(Error::invalid("quadrature grid size must be at least 2"));
        }
        Ok(())
    }
}

/// A kernel frozen onto a partition: `values[a*K + b]` on piece `a × b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockForm {
    partition: Partition,
    measures: Vec<f64>,
    values: Vec<f64>,
}

impl BlockForm {
    /// Samples `w` at the piece midpoints. Exact whenever `partition` refines
    /// every breakpoint set `w` is built on.
    pub fn from_graphon(w: &Graphon, partition: &Partition) -> Self {
        let mids = partition.midpoints();
        let k = mids.len();
        let mut values = vec![0.0; k * k];
        for a in 0..k {
            for b in a..k {
                let v = w.evaluate(mids[a], mids[b]);
                values[a * k + b] = v;
                values[b * k + a] = v;
            }
        }
        BlockForm {
            partition: partition.clone(),
            measures: partition.measures(),
            values,
        }
    }

    /// Places several kernels on one partition. Returns `true` alongside the
    /// forms when the partition is the exact common refinement.
    pub fn common(ws: &[&Graphon], grid: usize, spec: &QuadratureSpec) -> (Vec<BlockForm>, bool) {
        let breaks: Vec<Vec<f64>> = ws.iter().map(|w| w.breakpoints()).collect();
        let refined = Partition::refinement(breaks.iter().map(Vec::as_slice));
        let (part, exact) = if refined.len() <= spec.max_exact_pieces {
            (refined, true)
        } else {
            (Partition::uniform(grid), false)
        };
        (ws.iter().map(|w| BlockForm::from_graphon(w, &part)).collect(), exact)
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn pieces(&self) -> usize {
        self.measures.len()
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.pieces() + b]
    }

    /// `∫∫ w · v` for two forms on the same partition.
    pub fn inner(&self, other: &BlockForm) -> f64 {
        debug_assert_eq!(self.partition, other.partition);
        let k = self.pieces();
        let mut total = 0.0;
        for a in 0..k {
            let mut row = 0.0;
            for b in 0..k {
                row += self.measures[b] * self.values[a * k + b] * other.values[a * k + b];
            }
            total += self.measures[a] * row;
        }
        total
    }

    pub fn edge_density(&self) -> f64 {
        self.degrees().iter().zip(&self.measures).map(|(d, m)| d * m).sum()
    }

    /// Degree function `d_w` on each piece.
    pub fn degrees(&self) -> Vec<f64> {
        let k = self.pieces();
        (0..k)
            .map(|a| (0..k).map(|b| self.measures[b] * self.values[a * k + b]).sum())
            .collect()
    }

    /// `∫ d_w(x)² dx`.
    pub fn wedge(&self) -> f64 {
        self.degrees().iter().zip(&self.measures).map(|(d, m)| m * d * d).sum()
    }

    /// `∫∫∫ w(x,y) w(y,z) w(x,z)`; O(K³).
    pub fn triangle(&self) -> f64 {
        let k = self.pieces();
        let mu = &self.measures;
        let w = &self.values;
        let rows: Vec<f64> = (0..k)
            .into_par_iter()
            .map(|a| {
                let mut acc = 0.0;
                for b in 0..k {
                    let wab = w[a * k + b];
                    if wab == 0.0 {
                        continue;
                    }
                    let mut inner = 0.0;
                    for c in 0..k {
                        inner += mu[c] * w[b * k + c] * w[a * k + c];
                    }
                    acc += mu[b] * wab * inner;
                }
                mu[a] * acc
            })
            .collect();
        rows.iter().sum()
    }

    /// The discretized integral operator as a dense row-major matrix
    /// `M[a][b] = w_ab · μ_b` (acts on piecewise-constant functions).
    pub fn operator_matrix(&self) -> Vec<f64> {
        let k = self.pieces();
        let mut m = self.values.clone();
        for a in 0..k {
            for b in 0..k {
                m[a * k + b] *= self.measures[b];
            }
        }
        m
    }
}
