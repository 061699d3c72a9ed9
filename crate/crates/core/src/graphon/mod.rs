//! Graphon representations on the unit square.
//!
//! Every kind is piecewise constant on a finite partition of [0,1], so any
//! finite collection of graphons can be refined onto a common partition and
//! integrated exactly ([`BlockForm`]). A uniform midpoint grid is used when the
//! common refinement is too fine to be worth it.

mod block;
mod functionals;
mod partition;
mod spectral;

pub use block::{BlockForm, QuadratureSpec};
pub use functionals::{
    functionals, gram_and_target, inner_product, l2_distance, lipschitz_budget, FunctionalSet, L2Estimate,
    LipschitzBudget,
};
pub use partition::Partition;
pub use spectral::{power_iteration, spectral_bracket, spectral_radius, SpectralBracket};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// The concrete kernel behind a [`Graphon`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphonKind {
    Constant {
        p: f64,
    },
    /// `w(x,y) = probs[a][b]` for `x` in piece `a`, `y` in piece `b`.
    Block {
        boundaries: Partition,
        probs: Vec<Vec<f64>>,
    },
    /// `w(x,y) = sigmoid(z(x)·z(y) + intercept)` with `z` constant on pieces.
    LogisticLowRank {
        boundaries: Partition,
        positions: Vec<Vec<f64>>,
        intercept: f64,
    },
    /// `w(x,y) = min(1, θ(x) θ(y))` with `θ` constant on pieces.
    ProductWeight {
        boundaries: Partition,
        weights: Vec<f64>,
    },
    /// `w(x,y) = beta[0] + Σ_j beta[j+1] parts[j](x,y)`, optionally clipped to [0,1].
    LinearCombo {
        beta: Vec<f64>,
        parts: Vec<Graphon>,
        clipped: bool,
    },
}

/// A symmetric kernel `w: [0,1]² → R`.
///
/// All kinds except an unclipped [`GraphonKind::LinearCombo`] take values in
/// [0,1]; use [`Graphon::is_valid_probability_kernel`] to check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphonKind", into = "GraphonKind")]
pub struct Graphon {
    kind: GraphonKind,
}

impl TryFrom<GraphonKind> for Graphon {
    type Error = Error;
    fn try_from(kind: GraphonKind) -> Result<Self> {
        validate(&kind)?;
        Ok(Graphon { kind })
    }
}

impl From<Graphon> for GraphonKind {
    fn from(g: Graphon) -> Self {
        g.kind
    }
}

fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

fn validate(kind: &GraphonKind) -> Result<()> {
    match kind {
        GraphonKind::Constant { p } => {
            if !in_unit(*p) {
                return Err(Error::invalid(format!("constant graphon value {p} outside [0,1]")));
            }
        }
        GraphonKind::Block { boundaries, probs } => {
            let k = boundaries.len();
            check_len(k, probs.len())?;
            for (a, row) in probs.iter().enumerate() {
                check_len(k, row.len())?;
                for (b, &v) in row.iter().enumerate() {
                    if !in_unit(v) {
                        return Err(Error::invalid(format!("block value {v} outside [0,1]")));
                    }
                    if v != probs[b][a] {
                        return Err(Error::invalid("block matrix must be symmetric"));
                    }
                }
            }
        }
        GraphonKind::LogisticLowRank {
            boundaries,
            positions,
            intercept,
        } => {
            check_len(boundaries.len(), positions.len())?;
            let d = positions.first().map_or(0, Vec::len);
            for z in positions {
                check_len(d, z.len())?;
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("latent positions must be finite"));
                }
            }
            if !intercept.is_finite() {
                return Err(Error::invalid("intercept must be finite"));
            }
        }
        GraphonKind::ProductWeight { boundaries, weights } => {
            check_len(boundaries.len(), weights.len())?;
            if weights.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
                return Err(Error::invalid("product weights must be finite and nonnegative"));
            }
        }
        GraphonKind::LinearCombo { beta, parts, .. } => {
            check_len(parts.len() + 1, beta.len())?;
            if beta.iter().any(|b| !b.is_finite()) {
                return Err(Error::invalid("combination coefficients must be finite"));
            }
        }
    }
    Ok(())
}

impl Graphon {
    pub fn new(kind: GraphonKind) -> Result<Self> {
        Graphon::try_from(kind)
    }

    pub fn constant(p: f64) -> Result<Self> {
        Graphon::new(GraphonKind::Constant { p })
    }

    pub fn block(boundaries: Vec<f64>, probs: Vec<Vec<f64>>) -> Result<Self> {
        Graphon::new(GraphonKind::Block {
            boundaries: Partition::new(boundaries)?,
            probs,
        })
    }

    /// Block graphon with `probs.len()` equal-measure pieces.
    pub fn equal_blocks(probs: Vec<Vec<f64>>) -> Result<Self> {
        let k = probs.len();
        Graphon::new(GraphonKind::Block {
            boundaries: Partition::uniform(k.max(1)),
            probs,
        })
    }

    pub fn logistic_low_rank(boundaries: Vec<f64>, positions: Vec<Vec<f64>>, intercept: f64) -> Result<Self> {
        Graphon::new(GraphonKind::LogisticLowRank {
            boundaries: Partition::new(boundaries)?,
            positions,
            intercept,
        })
    }

    pub fn product_weight(boundaries: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Graphon::new(GraphonKind::ProductWeight {
            boundaries: Partition::new(boundaries)?,
            weights,
        })
    }

    /// `beta[0] + Σ beta[j+1] parts[j]`; `beta.len()` must be `parts.len() + 1`.
    pub fn linear_combo(beta: Vec<f64>, parts: Vec<Graphon>, clipped: bool) -> Result<Self> {
        Graphon::new(GraphonKind::LinearCombo { beta, parts, clipped })
    }

    /// `Σ weights[j] parts[j]` with no intercept and no clipping.
    pub fn weighted_sum(weights: &[f64], parts: &[Graphon]) -> Result<Self> {
        check_len(parts.len(), weights.len())?;
        let mut beta = Vec::with_capacity(weights.len() + 1);
        beta.push(0.0);
        beta.extend_from_slice(weights);
        Graphon::linear_combo(beta, parts.to_vec(), false)
    }

    pub fn kind(&self) -> &GraphonKind {
        &self.kind
    }

    /// Kernel value at `(x, y)`; coordinates outside [0,1] are clamped.
    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            GraphonKind::Constant { p } => *p,
            GraphonKind::Block { boundaries, probs } => probs[boundaries.locate(x)][boundaries.locate(y)],
            GraphonKind::LogisticLowRank {
                boundaries,
                positions,
                intercept,
            } => {
                let za = &positions[boundaries.locate(x)];
                let zb = &positions[boundaries.locate(y)];
                let dot: f64 = za.iter().zip(zb).map(|(a, b)| a * b).sum();
                sigmoid(dot + intercept)
            }
            GraphonKind::ProductWeight { boundaries, weights } => {
                (weights[boundaries.locate(x)] * weights[boundaries.locate(y)]).min(1.0)
            }
            GraphonKind::LinearCombo { beta, parts, clipped } => {
                let mut v = beta[0];
                for (b, w) in beta[1..].iter().zip(parts) {
                    v += b * w.evaluate(x, y);
                }
                if *clipped {
                    v.clamp(0.0, 1.0)
                } else {
                    v
                }
            }
        }
    }

    /// All breakpoints (with duplicates) of the partitions this kernel is built on.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_breaks(&mut out);
        out
    }

    fn collect_breaks(&self, out: &mut Vec<f64>) {
        match &self.kind {
            GraphonKind::Constant { .. } => out.extend_from_slice(&[0.0, 1.0]),
            GraphonKind::Block { boundaries, .. }
            | GraphonKind::LogisticLowRank { boundaries, .. }
            | GraphonKind::ProductWeight { boundaries, .. } => out.extend_from_slice(boundaries.breaks()),
            GraphonKind::LinearCombo { parts, .. } => {
                out.extend_from_slice(&[0.0, 1.0]);
                for p in parts {
                    p.collect_breaks(out);
                }
            }
        }
    }

    /// Whether values are guaranteed to lie in [0,1]. False only for unclipped
    /// linear combinations whose exact block form leaves the unit interval.
    pub fn is_valid_probability_kernel(&self) -> bool {
        match &self.kind {
            GraphonKind::LinearCombo { clipped: false, .. } => {
                let part = Partition::refinement([self.breakpoints().as_slice()]);
                BlockForm::from_graphon(self, &part)
                    .values()
                    .iter()
                    .all(|&v| in_unit(v))
            }
            _ => true,
        }
    }

    /// Flag for unclipped linear combinations, which may leave [0,1].
    pub fn is_unclipped_combo(&self) -> bool {
        matches!(self.kind, GraphonKind::LinearCombo { clipped: false, .. })
    }

    /// The same combination with clipping switched on; other kinds are returned unchanged.
    pub fn clipped(&self) -> Graphon {
        match &self.kind {
            GraphonKind::LinearCombo { beta, parts, .. } => Graphon {
                kind: GraphonKind::LinearCombo {
                    beta: beta.clone(),
                    parts: parts.clone(),
                    clipped: true,
                },
            },
            _ => self.clone(),
        }
    }

    /// `a · w` as an unclipped combination.
    pub fn scaled(&self, a: f64) -> Graphon {
        Graphon {
            kind: GraphonKind::LinearCombo {
                beta: vec![0.0, a],
                parts: vec![self.clone()],
                clipped: false,
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Writes the `g × g` midpoint grid as CSV: header `g,values...`, then a
    /// single record holding `g` followed by the `g²` values in row-major order.
    pub fn write_grid_csv<W: Write>(&self, g: usize, out: W) -> Result<()> {
        if g == 0 {
            return Err(Error::invalid("grid size must be positive"));
        }
        let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(out);
        wtr.write_record(["g", "values..."])?;
        let mut rec = Vec::with_capacity(g * g + 1);
        rec.push(g.to_string());
        for i in 0..g {
            let x = (i as f64 + 0.5) / g as f64;
            for j in 0..g {
                let y = (j as f64 + 0.5) / g as f64;
                rec.push(format!("{}", self.evaluate(x, y)));
            }
        }
        wtr.write_record(&rec)?;
        wtr.flush()?;
        Ok(())
    }
}
