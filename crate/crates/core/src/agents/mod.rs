//! Finite-graph agent models and their entropic tilts.
//!
//! Independent-edge agents (ER, SBM, logistic RDPG, Chung–Lu, degree-histogram)
//! are tilted by shifting every edge log-odds: a global shift for the edge-count
//! statistic, a block-pair shift for SBM block counts. ER, SBM and RDPG absorb
//! the shift into their own parameters.

mod calibrate;
mod enumerate;
mod ergm;

pub use calibrate::{calibrate_blocks, calibrate_edges, calibrate_ergm, ErgmCalibration, NEWTON_MAX_ITERS};
pub use enumerate::{
    entropic_weights, enumerate_agent, enumerate_ergm, mixture_pmf, Alpha, GraphPmf, Mixture, MixtureComponent,
    StatTable, MAX_ENUM_N,
};
pub use ergm::{ergm_stack_tilt, EdgeIndex, ErgmSpec, ErgmStat};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graphon::sigmoid;

/// Chung–Lu probabilities are capped here so log-odds stay finite.
pub const CHUNG_LU_CAP: f64 = 1.0 - 1e-12;

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `sigmoid(logit(p) + shift)`, exact at `p ∈ {0, 1}`.
fn shift_log_odds(p: f64, shift: f64) -> f64 {
    if shift == 0.0 || p <= 0.0 || p >= 1.0 {
        return p;
    }
    if shift <= 0.0 {
        let e = shift.exp() * p;
        e / (e + 1.0 - p)
    } else {
        p / (p + (1.0 - p) * (-shift).exp())
    }
}

/// Entropic tilt of an Erdős–Rényi edge probability by `exp(λ E(A))`:
/// `p' = e^λ p / (e^λ p + 1 − p)`.
pub fn tilt_er(p: f64, lambda: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("ER probability {p} must lie in (0,1)")));
    }
    if !lambda.is_finite() {
        return Err(Error::invalid("tilt must be finite"));
    }
    Ok(shift_log_odds(p, lambda))
}

pub(crate) fn check_symmetric(m: &[Vec<f64>], what: &str) -> Result<()> {
    let k = m.len();
    for (a, row) in m.iter().enumerate() {
        check_len(k, row.len())?;
        for (b, v) in row.iter().enumerate() {
            if *v != m[b][a] {
                return Err(Error::invalid(format!("{what} must be symmetric")));
            }
        }
    }
    Ok(())
}

/// Blockwise tilt of SBM connection probabilities:
/// `B'_ab = logit⁻¹(logit(B_ab) + Λ_ab)`.
pub fn tilt_sbm(probs: &[Vec<f64>], lambda: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_len(probs.len(), lambda.len())?;
    check_symmetric(lambda, "block tilt")?;
    check_symmetric(probs, "block matrix")?;
    probs
        .iter()
        .zip(lambda)
        .map(|(row, lrow)| {
            row.iter()
                .zip(lrow)
                .map(|(&p, &l)| {
                    if !(p > 0.0 && p < 1.0) {
                        return Err(Error::invalid(format!("block probability {p} not in (0,1)")));
                    }
                    Ok(shift_log_odds(p, l))
                })
                .collect()
        })
        .collect()
}

/// Per-agent tilt parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TiltState {
    /// Global edge log-odds shift.
    pub lambda_edge: f64,
    /// Symmetric block-pair shifts (SBM and degree-histogram agents).
    pub lambda_block: Option<Vec<Vec<f64>>>,
    /// True once the shift has been folded into the agent parameters.
    pub applied: bool,
}

impl TiltState {
    pub fn edge(lambda: f64) -> Self {
        TiltState {
            lambda_edge: lambda,
            ..TiltState::default()
        }
    }

    pub fn is_identity(&self) -> bool {
        self.lambda_edge == 0.0
            && self
                .lambda_block
                .as_ref()
                .is_none_or(|m| m.iter().flatten().all(|&v| v == 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentKind {
    Er {
        p: f64,
    },
    Sbm {
        assignment: Vec<usize>,
        probs: Vec<Vec<f64>>,
    },
    /// Edge probability `sigmoid(z_i·z_k + intercept)`.
    Rdpg {
        positions: Vec<Vec<f64>>,
        intercept: f64,
    },
    /// Edge probability `min(θ_i θ_k, 1 − 1e-12)`.
    ChungLu {
        weights: Vec<f64>,
    },
    /// Nodes binned by degree; `rates[a][b]` between bins.
    DegHist {
        bin_edges: Vec<f64>,
        node_bins: Vec<usize>,
        rates: Vec<Vec<f64>>,
    },
}

/// An edge-probability generator on a fixed vertex set, plus its tilt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentModel {
    pub kind: AgentKind,
    #[serde(default)]
    pub tilt: TiltState,
}

impl AgentModel {
    pub fn new(kind: AgentKind) -> Result<Self> {
        let m = AgentModel {
            kind,
            tilt: TiltState::default(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn er(p: f64) -> Result<Self> {
        AgentModel::new(AgentKind::Er { p })
    }

    pub fn sbm(assignment: Vec<usize>, probs: Vec<Vec<f64>>) -> Result<Self> {
        AgentModel::new(AgentKind::Sbm { assignment, probs })
    }

    pub fn rdpg(positions: Vec<Vec<f64>>, intercept: f64) -> Result<Self> {
        AgentModel::new(AgentKind::Rdpg { positions, intercept })
    }

    pub fn chung_lu(weights: Vec<f64>) -> Result<Self> {
        AgentModel::new(AgentKind::ChungLu { weights })
    }

    pub fn deg_hist(bin_edges: Vec<f64>, node_bins: Vec<usize>, rates: Vec<Vec<f64>>) -> Result<Self> {
        AgentModel::new(AgentKind::DegHist {
            bin_edges,
            node_bins,
            rates,
        })
    }

    pub fn with_tilt(mut self, tilt: TiltState) -> Result<Self> {
        self.tilt = tilt;
        self.validate()?;
        Ok(self)
    }

    /// Short label used in reports.
    pub fn name(&self) -> &'static str {
        match self.kind {
            AgentKind::Er { .. } => "ER",
            AgentKind::Sbm { .. } => "SBM",
            AgentKind::Rdpg { .. } => "LogRDPG",
            AgentKind::ChungLu { .. } => "ChungLu",
            AgentKind::DegHist { .. } => "DegHist",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let open = |p: f64| p > 0.0 && p < 1.0;
        let blocks = match &self.kind {
            AgentKind::Er { p } => {
                if !open(*p) {
                    return Err(Error::invalid(format!("ER probability {p} must lie in (0,1)")));
                }
                None
            }
            AgentKind::Sbm { assignment, probs } => {
                check_symmetric(probs, "SBM block matrix")?;
                if probs.iter().flatten().any(|&p| !open(p)) {
                    return Err(Error::invalid("SBM block probabilities must lie in (0,1)"));
                }
                if assignment.iter().any(|&c| c >= probs.len()) {
                    return Err(Error::invalid("SBM assignment refers to a missing block"));
                }
                Some(probs.len())
            }
            AgentKind::Rdpg { positions, intercept } => {
                let d = positions.first().map_or(0, Vec::len);
                for z in positions {
                    check_len(d, z.len())?;
                }
                if !intercept.is_finite() || positions.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("RDPG parameters must be finite"));
                }
                None
            }
            AgentKind::ChungLu { weights } => {
                if weights.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
                    return Err(Error::invalid("Chung-Lu weights must be finite and nonnegative"));
                }
                None
            }
            AgentKind::DegHist { node_bins, rates, .. } => {
                check_symmetric(rates, "degree-histogram rate matrix")?;
                if rates.iter().flatten().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(Error::invalid("degree-histogram rates must lie in [0,1]"));
                }
                if node_bins.iter().any(|&c| c >= rates.len()) {
                    return Err(Error::invalid("degree-histogram node refers to a missing bin"));
                }
                Some(rates.len())
            }
        };
        if let Some(lb) = &self.tilt.lambda_block {
            check_symmetric(lb, "block tilt")?;
            match blocks {
                Some(k) => check_len(k, lb.len())?,
                None => {
                    return Err(Error::invalid(
                        "block tilts only apply to SBM and degree-histogram agents",
                    ))
                }
            }
        }
        if !self.tilt.lambda_edge.is_finite() {
            return Err(Error::invalid("edge tilt must be finite"));
        }
        Ok(())
    }

    /// Number of vertices the parameters are sized for; `None` for ER.
    pub fn node_count(&self) -> Option<usize> {
        match &self.kind {
            AgentKind::Er { .. } => None,
            AgentKind::Sbm { assignment, .. } => Some(assignment.len()),
            AgentKind::Rdpg { positions, .. } => Some(positions.len()),
            AgentKind::ChungLu { weights } => Some(weights.len()),
            AgentKind::DegHist { node_bins, .. } => Some(node_bins.len()),
        }
    }

    fn group(&self, i: usize) -> usize {
        match &self.kind {
            AgentKind::Sbm { assignment, .. } => assignment[i],
            AgentKind::DegHist { node_bins, .. } => node_bins[i],
            _ => 0,
        }
    }

    /// Untilted edge probability for `i ≠ j`.
    pub fn base_edge_prob(&self, i: usize, j: usize) -> f64 {
        match &self.kind {
            AgentKind::Er { p } => *p,
            AgentKind::Sbm { assignment, probs } => probs[assignment[i]][assignment[j]],
            AgentKind::Rdpg { positions, intercept } => {
                let dot: f64 = positions[i].iter().zip(&positions[j]).map(|(a, b)| a * b).sum();
                sigmoid(dot + intercept)
            }
            AgentKind::ChungLu { weights } => (weights[i] * weights[j]).min(CHUNG_LU_CAP),
            AgentKind::DegHist { node_bins, rates, .. } => rates[node_bins[i]][node_bins[j]],
        }
    }

    /// Edge probability including any pending tilt.
    pub fn edge_prob(&self, i: usize, j: usize) -> f64 {
        let p = self.base_edge_prob(i, j);
        if self.tilt.applied {
            return p;
        }
        let mut shift = self.tilt.lambda_edge;
        if let Some(lb) = &self.tilt.lambda_block {
            shift += lb[self.group(i)][self.group(j)];
        }
        shift_log_odds(p, shift)
    }

    /// Folds a pending tilt into the parameters where the family is closed
    /// under it (ER, SBM, RDPG). Other kinds are returned unchanged.
    pub fn apply_tilt(&self) -> Result<AgentModel> {
        if self.tilt.applied || self.tilt.is_identity() {
            return Ok(self.clone());
        }
        let le = self.tilt.lambda_edge;
        let kind = match &self.kind {
            AgentKind::Er { p } => AgentKind::Er { p: tilt_er(*p, le)? },
            AgentKind::Sbm { assignment, probs } => {
                let k = probs.len();
                let lam: Vec<Vec<f64>> = (0..k)
                    .map(|a| {
                        (0..k)
                            .map(|b| le + self.tilt.lambda_block.as_ref().map_or(0.0, |m| m[a][b]))
                            .collect()
                    })
                    .collect();
                AgentKind::Sbm {
                    assignment: assignment.clone(),
                    probs: tilt_sbm(probs, &lam)?,
                }
            }
            AgentKind::Rdpg { .. } => tilt_rdpg(self, le)?.kind,
            _ => return Ok(self.clone()),
        };
        Ok(AgentModel {
            kind,
            tilt: TiltState {
                applied: true,
                ..self.tilt.clone()
            },
        })
    }
}

/// Global edge-density tilt of a logistic RDPG: the intercept absorbs `lambda`.
pub fn tilt_rdpg(agent: &AgentModel, lambda: f64) -> Result<AgentModel> {
    match &agent.kind {
        AgentKind::Rdpg { positions, intercept } => {
            if !lambda.is_finite() {
                return Err(Error::invalid("tilt must be finite"));
            }
            Ok(AgentModel {
                kind: AgentKind::Rdpg {
                    positions: positions.clone(),
                    intercept: intercept + lambda,
                },
                tilt: agent.tilt.clone(),
            })
        }
        _ => Err(Error::invalid("tilt_rdpg requires an RDPG agent")),
    }
}

fn check_size(agent: &AgentModel, n: usize) -> Result<()> {
    match agent.node_count() {
        Some(k) if k != n => Err(Error::DimensionMismatch { expected: k, got: n }),
        _ => Ok(()),
    }
}

/// Dense symmetric `n × n` edge-probability matrix with zero diagonal.
pub fn edge_prob_matrix(agent: &AgentModel, n: usize) -> Result<Vec<Vec<f64>>> {
    check_size(agent, n)?;
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let p = agent.edge_prob(i, j);
            m[i][j] = p;
            m[j][i] = p;
        }
    }
    Ok(m)
}

/// Mean edge probability over all `i < j`.
pub fn mean_edge_prob(agent: &AgentModel, n: usize) -> Result<f64> {
    check_size(agent, n)?;
    if n < 2 {
        return Err(Error::invalid("need at least two vertices"));
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += agent.edge_prob(i, j);
        }
    }
    Ok(s / (n * (n - 1) / 2) as f64)
}
