use nalgebra::{DMatrix, DVector};

use super::enumerate::{log_sum_exp, GraphPmf, StatTable};
use super::ergm::ErgmSpec;
use super::{logit, shift_log_odds, AgentKind, AgentModel, TiltState};
use crate::error::{check_len, Error, Result};

pub const NEWTON_MAX_ITERS: usize = 200;
const NEWTON_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 30;
/// Parameters beyond this magnitude mean the target sits on the boundary of
/// the attainable moment set.
const DIVERGENCE: f64 = 1e3;

fn fresh(agent: &AgentModel) -> Result<AgentModel> {
    let base = agent.apply_tilt()?;
    Ok(if base.tilt.applied {
        AgentModel {
            kind: base.kind,
            tilt: TiltState::default(),
        }
    } else {
        base
    })
}

/// Tilts an independent-edge agent by `exp(λ E(A))` so that its expected edge
/// count on `n` vertices equals `target`. ER is solved in closed form; other
/// agents start from the closed form at the mean probability and refine with
/// one-dimensional Newton steps.
pub fn calibrate_edges(agent: &AgentModel, n: usize, target: f64) -> Result<(AgentModel, f64)> {
    let base = fresh(agent)?;
    let probs = super::edge_prob_matrix(&base, n)?;
    let ps: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| probs[i][j])
        .collect();
    let fixed_hi = ps.iter().filter(|&&p| p >= 1.0).count() as f64;
    let free = ps.iter().filter(|&&p| p > 0.0 && p < 1.0).count() as f64;
    if !(target > fixed_hi && target < fixed_hi + free) {
        return Err(Error::Infeasible(format!(
            "expected edge count {target} outside the attainable range ({fixed_hi}, {})",
            fixed_hi + free
        )));
    }
    let m = ps.len() as f64;
    let lambda = match base.kind {
        AgentKind::Er { p } => logit(target / m) - logit(p),
        _ => {
            let mean = ps.iter().sum::<f64>() / m;
            let mut lam = logit(target / m) - logit(mean);
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITERS {
                let (mut f, mut df) = (-target, 0.0);
                for &p in &ps {
                    let q = shift_log_odds(p, lam);
                    f += q;
                    df += q * (1.0 - q);
                }
                if f.abs() <= 1e-10 * target.max(1.0) {
                    converged = true;
                    break;
                }
                lam -= f / df;
            }
            if !converged {
                return Err(Error::NotConverged {
                    iterations: NEWTON_MAX_ITERS,
                    residual: f64::NAN,
                });
            }
            lam
        }
    };
    let mut tilt = base.tilt.clone();
    tilt.lambda_edge += lambda;
    Ok((base.with_tilt(tilt)?.apply_tilt()?, lambda))
}

/// Blockwise tilt `exp(Σ_{a≤b} Λ_ab M_ab(A))` matching expected block edge
/// counts `targets[a][b]` (symmetric; off-diagonal entries count each edge
/// once). Closed form, since every pair in a block pair shares one probability.
pub fn calibrate_blocks(agent: &AgentModel, n: usize, targets: &[Vec<f64>]) -> Result<(AgentModel, Vec<Vec<f64>>)> {
    let base = fresh(agent)?;
    let (groups, k) = match &base.kind {
        AgentKind::Sbm { assignment, probs } => (assignment.clone(), probs.len()),
        AgentKind::DegHist { node_bins, rates, .. } => (node_bins.clone(), rates.len()),
        _ => {
            return Err(Error::invalid(
                "block calibration needs an SBM or degree-histogram agent",
            ))
        }
    };
    check_len(groups.len(), n)?;
    check_len(k, targets.len())?;
    super::check_symmetric(targets, "block targets")?;
    let mut pairs = vec![vec![0usize; k]; k];
    let mut rep = vec![vec![None; k]; k];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (groups[i], groups[j]);
            pairs[a][b] += 1;
            if a != b {
                pairs[b][a] += 1;
            }
            rep[a][b].get_or_insert((i, j));
            rep[b][a].get_or_insert((i, j));
        }
    }
    let mut lam = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in a..k {
            let cnt = pairs[a][b] as f64;
            let t = targets[a][b];
            let Some((i, j)) = rep[a][b] else {
                if t != 0.0 {
                    return Err(Error::Infeasible(format!("block pair ({a},{b}) has no vertex pairs")));
                }
                continue;
            };
            let q = base.edge_prob(i, j);
            let l = if q <= 0.0 || q >= 1.0 {
                if t != q * cnt {
                    return Err(Error::Infeasible(format!(
                        "block pair ({a},{b}) has degenerate probability {q}"
                    )));
                }
                0.0
            } else if !(t > 0.0 && t < cnt) {
                return Err(Error::Infeasible(format!(
                    "block target {t} outside (0, {cnt}) for pair ({a},{b})"
                )));
            } else {
                logit(t / cnt) - logit(q)
            };
            lam[a][b] = l;
            lam[b][a] = l;
        }
    }
    let mut tilt = base.tilt.clone();
    let prev = tilt.lambda_block.take().unwrap_or_else(|| vec![vec![0.0; k]; k]);
    tilt.lambda_block = Some(
        prev.iter()
            .zip(&lam)
            .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
            .collect(),
    );
    Ok((base.with_tilt(tilt)?.apply_tilt()?, lam))
}

#[derive(Debug, Clone)]
pub struct ErgmCalibration {
    pub tau: Vec<f64>,
    /// The agent ERGM with parameters `θ + τ`.
    pub tilted: ErgmSpec,
    pub pmf: GraphPmf,
    pub iterations: usize,
    /// `‖E_τ T − target‖_∞` at the returned `τ`.
    pub residual: f64,
}

struct Dual<'a> {
    table: &'a StatTable,
    theta: &'a [f64],
    target: &'a [f64],
    n: usize,
}

impl Dual<'_> {
    fn shifted(&self, tau: &[f64]) -> Vec<f64> {
        self.theta.iter().zip(tau).map(|(a, b)| a + b).collect()
    }

    /// `ψ(θ+τ) − τᵀm`, convex in `τ`.
    fn objective(&self, tau: &[f64]) -> f64 {
        let lw = self.table.linear(&self.shifted(tau));
        log_sum_exp(&lw) - tau.iter().zip(self.target).map(|(t, m)| t * m).sum::<f64>()
    }

    fn pmf(&self, tau: &[f64]) -> Result<GraphPmf> {
        GraphPmf::from_log_weights(self.n, &self.table.linear(&self.shifted(tau)))
    }
}

/// Finds `τ` with `E_{θ+τ} T = target` by damped Newton on the exactly
/// enumerated mean map (`n ≤ 6`). The Jacobian is `Cov(T)`; steps are
/// backtracked on the convex dual `ψ(θ+τ) − τᵀ target`.
pub fn calibrate_ergm(spec: &ErgmSpec, target: &[f64]) -> Result<ErgmCalibration> {
    spec.validate()?;
    check_len(spec.dim(), target.len())?;
    let table = StatTable::new(spec.n, &spec.stats)?;
    let d = table.dim();
    for (k, &t) in target.iter().enumerate() {
        let (lo, hi) = (0..table.len())
            .map(|a| table.row(a)[k])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        if !(t > lo && t < hi) {
            return Err(Error::Infeasible(format!(
                "target {t} for statistic {k} lies outside the open range ({lo}, {hi})"
            )));
        }
    }
    let dual = Dual {
        table: &table,
        theta: &spec.theta,
        target,
        n: spec.n,
    };
    let mut tau = vec![0.0; d];
    let mut pmf = dual.pmf(&tau)?;
    let mut obj = dual.objective(&tau);
    for it in 0..=NEWTON_MAX_ITERS {
        let mean = pmf.mean(&table);
        let grad: Vec<f64> = mean.iter().zip(target).map(|(a, b)| a - b).collect();
        let residual = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if residual <= NEWTON_TOL * target.iter().fold(1.0f64, |m, t| m.max(t.abs())) {
            return Ok(ErgmCalibration {
                tilted: ErgmSpec::new(spec.n, spec.stats.clone(), dual.shifted(&tau))?,
                tau,
                pmf,
                iterations: it,
                residual,
            });
        }
        if it == NEWTON_MAX_ITERS {
            return Err(Error::NotConverged {
                iterations: it,
                residual,
            });
        }
        let cov = DMatrix::from_row_slice(d, d, &pmf.covariance(&table));
        let eig = cov.symmetric_eigen();
        let floor = 1e-14 * eig.eigenvalues.max().max(f64::MIN_POSITIVE);
        let g = DVector::from_column_slice(&grad);
        let coords = eig.eigenvectors.transpose() * &g;
        let scaled = DVector::from_iterator(
            d,
            coords
                .iter()
                .zip(eig.eigenvalues.iter())
                .map(|(c, &l)| if l > floor { -c / l } else { 0.0 }),
        );
        let step = &eig.eigenvectors * scaled;
        let slope: f64 = step.dot(&g);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = tau.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let c_obj = dual.objective(&cand);
            if c_obj <= obj + 1e-4 * t * slope {
                tau = cand;
                obj = c_obj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // numerical floor: the objective cannot decrease any further
            let last: Vec<f64> = tau.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            tau = last;
            obj = dual.objective(&tau);
        }
        if tau.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE) {
            return Err(Error::Infeasible(
                "target is not in the interior of the attainable moment set".into(),
            ));
        }
        pmf = dual.pmf(&tau)?;
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::super::{enumerate_agent, ErgmStat};
    use super::*;

    #[test]
    fn er_edge_calibration_is_exact() {
        let (a, lam) = calibrate_edges(&AgentModel::er(0.3).unwrap(), 10, 20.0).unwrap();
        assert!(a.tilt.applied);
        match a.kind {
            AgentKind::Er { p } => assert!((p * 45.0 - 20.0).abs() < 1e-12),
            _ => unreachable!(),
        }
        assert!((lam - (logit(20.0 / 45.0) - logit(0.3))).abs() < 1e-15);
        assert!(calibrate_edges(&AgentModel::er(0.3).unwrap(), 10, 45.0).is_err());
        assert!(calibrate_edges(&AgentModel::er(0.3).unwrap(), 10, 0.0).is_err());
    }

    #[test]
    fn chung_lu_edge_calibration_by_newton() {
        let w: Vec<f64> = (0..30).map(|i| 0.1 + 0.02 * i as f64).collect();
        let a = AgentModel::chung_lu(w).unwrap();
        let (t, _) = calibrate_edges(&a, 30, 150.0).unwrap();
        assert!(!t.tilt.applied);
        let m = super::super::mean_edge_prob(&t, 30).unwrap() * 435.0;
        assert!((m - 150.0).abs() < 1e-8, "{m}");
    }

    #[test]
    fn sbm_block_calibration_matches_targets() {
        let a = AgentModel::sbm(vec![0, 0, 0, 1, 1], vec![vec![0.5, 0.2], vec![0.2, 0.4]]).unwrap();
        // pair counts: (0,0)=3, (0,1)=6, (1,1)=1
        let targets = vec![vec![2.0, 1.5], vec![1.5, 0.25]];
        let (t, _) = calibrate_blocks(&a, 5, &targets).unwrap();
        assert!((t.edge_prob(0, 1) * 3.0 - 2.0).abs() < 1e-13);
        assert!((t.edge_prob(0, 4) * 6.0 - 1.5).abs() < 1e-13);
        assert!((t.edge_prob(3, 4) - 0.25).abs() < 1e-13);
        assert!(calibrate_blocks(&a, 5, &[vec![3.0, 1.0], vec![1.0, 0.5]]).is_err());
    }

    #[test]
    fn ergm_calibration_hits_target() {
        let spec = ErgmSpec::new(5, vec![ErgmStat::Edges, ErgmStat::Triangles], vec![-0.5, 0.2]).unwrap();
        let target = [4.0, 1.0];
        let c = calibrate_ergm(&spec, &target).unwrap();
        assert!(c.residual <= 1e-8);
        let m = c.pmf.mean(&StatTable::new(5, &spec.stats).unwrap());
        assert!((m[0] - 4.0).abs() <= 1e-8 && (m[1] - 1.0).abs() <= 1e-8);
        assert!(calibrate_ergm(&spec, &[10.0, 1.0]).is_err());
    }

    #[test]
    fn edge_only_ergm_calibration_matches_er_formula() {
        let spec = ErgmSpec::new(4, vec![ErgmStat::Edges], vec![0.0]).unwrap();
        let c = calibrate_ergm(&spec, &[2.0]).unwrap();
        assert!((c.tau[0] - logit(2.0 / 6.0)).abs() < 1e-9);
        let er = enumerate_agent(&AgentModel::er(1.0 / 3.0).unwrap(), 4).unwrap();
        assert!(c.pmf.total_variation(&er) < 1e-9);
    }
}
