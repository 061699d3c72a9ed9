use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted breakpoints `0 = b_0 < b_1 < ... < b_K = 1` splitting the unit
/// interval into `K` half-open pieces `[b_k, b_{k+1})` (the last piece is closed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Partition(Vec<f64>);

impl Partition {
    pub fn new(breaks: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::invalid("partition needs at least the breakpoints 0 and 1"));
        }
        if breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 {
            return Err(Error::invalid("partition must start at 0 and end at 1"));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("partition breakpoints must be strictly increasing"));
        }
        Ok(Partition(breaks))
    }

    /// The trivial one-piece partition `{0, 1}`.
    pub fn whole() -> Self {
        Partition(vec![0.0, 1.0])
    }

    /// `k` equal-measure pieces.
    pub fn uniform(k: usize) -> Self {
        assert!(k >= 1, "uniform partition needs k >= 1");
        let mut b: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
        b[k] = 1.0;
        Partition(b)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.0
    }

    /// Number of pieces.
    pub fn len(&self) -> usize {
        self.0.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the piece containing `x`; values outside [0,1] are clamped.
    pub fn locate(&self, x: f64) -> usize {
        let k = self.len();
        // number of interior breakpoints <= x
        let interior = &self.0[1..k];
        interior.partition_point(|&b| b <= x)
    }

    pub fn measures(&self) -> Vec<f64> {
        self.0.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.0.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Common refinement of a set of breakpoint lists.
    pub fn refinement<'a>(parts: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut all: Vec<f64> = parts.into_iter().flatten().copied().collect();
        all.push(0.0);
        all.push(1.0);
        all.sort_by(f64::total_cmp);
        all.dedup();
        Partition(all)
    }
}

impl TryFrom<Vec<f64>> for Partition {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Partition::new(v)
    }
}

impl From<Partition> for Vec<f64> {
    fn from(p: Partition) -> Self {
        p.0
    }
}
