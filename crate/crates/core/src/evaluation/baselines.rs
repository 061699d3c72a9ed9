use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::metrics::{logloss, LOGLOSS_EPS};
use crate::error::{Error, Result};
use crate::graphon::sigmoid;
use crate::synthesis::DyadSample;

pub const STACK_GRAD_TOL: f64 = 1e-8;
pub const STACK_MAX_STEPS: usize = 500;

/// Index (0-based over agents) with the lowest validation log-loss; ties go
/// to the lowest index.
pub fn cv_best_agent(val: &[DyadSample]) -> Result<usize> {
    let first = val.first().ok_or_else(|| Error::invalid("validation split is empty"))?;
    let j = first.num_agents();
    if j == 0 {
        return Err(Error::invalid("no agents to select from"));
    }
    let labels: Vec<bool> = val.iter().map(|s| s.label).collect();
    let mut best = (0, f64::INFINITY);
    for a in 0..j {
        let preds: Vec<f64> = val.iter().map(|s| s.features[a + 1]).collect();
        let l = logloss(&preds, &labels);
        if l < best.1 {
            best = (a, l);
        }
    }
    Ok(best.0)
}

/// Logistic stacking `σ(βᵀF)` over `F = (1, p̂₁, …, p̂_J)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackModel {
    pub coef: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl StackModel {
    pub fn predict(&self, features: &[f64]) -> f64 {
        sigmoid(self.coef.iter().zip(features).map(|(b, f)| b * f).sum())
    }
}

/// Numerically stable `log(1 + e^z)`.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn loss(samples: &[DyadSample], beta: &[f64]) -> f64 {
    let m = samples.len() as f64;
    samples
        .iter()
        .map(|s| {
            let z: f64 = beta.iter().zip(&s.features).map(|(b, f)| b * f).sum();
            softplus(z) - s.y() * z
        })
        .sum::<f64>()
        / m
}

/// Mean gradient and Hessian of the log-loss.
fn grad_hess(samples: &[DyadSample], beta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let d = beta.len();
    let m = samples.len() as f64;
    let mut g = DVector::zeros(d);
    let mut h = DMatrix::zeros(d, d);
    for s in samples {
        let z: f64 = beta.iter().zip(&s.features).map(|(b, f)| b * f).sum();
        let p = sigmoid(z);
        let (r, w) = (p - s.y(), p * (1.0 - p));
        for a in 0..d {
            g[a] += r * s.features[a];
            for b in 0..=a {
                h[(a, b)] += w * s.features[a] * s.features[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            h[(b, a)] = h[(a, b)];
        }
    }
    (g / m, h / m)
}

/// Newton direction; a small Levenberg shift keeps the system solvable
/// when the design is collinear.
fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> DVector<f64> {
    let scale = h.diagonal().amax().max(1e-300);
    let mut shift = 1e-12 * scale;
    loop {
        let mut hs = h.clone();
        for i in 0..hs.nrows() {
            hs[(i, i)] += shift;
        }
        if let Some(ch) = hs.cholesky() {
            return ch.solve(g);
        }
        shift *= 100.0;
        if shift > 1e6 * scale {
            return g.clone();
        }
    }
}

/// Damped Newton on the mean log-loss with Armijo backtracking.
/// Deterministic. Single-class training labels give an intercept-only model
/// with a warning.
pub fn stack_logistic(train: &[DyadSample]) -> Result<StackModel> {
    let first = train.first().ok_or_else(|| Error::invalid("training split is empty"))?;
    let d = first.features.len();
    let pos = train.iter().filter(|s| s.label).count();
    if pos == 0 || pos == train.len() {
        let rate = (pos as f64 / train.len() as f64).clamp(LOGLOSS_EPS, 1.0 - LOGLOSS_EPS);
        let mut coef = vec![0.0; d];
        coef[0] = (rate / (1.0 - rate)).ln();
        return Ok(StackModel {
            coef,
            iterations: 0,
            grad_norm: 0.0,
            warning: Some("training labels contain a single class; intercept-only model".into()),
        });
    }
    let mut beta = vec![0.0; d];
    let mut f = loss(train, &beta);
    let (mut g, mut h) = grad_hess(train, &beta);
    let mut iterations = 0;
    while iterations < STACK_MAX_STEPS && g.norm() > STACK_GRAD_TOL {
        let dir = newton_direction(&g, &h);
        let slope = g.dot(&dir);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = beta.iter().zip(dir.iter()).map(|(b, s)| b - t * s).collect();
            let cf = loss(train, &cand);
            if cf <= f - 1e-4 * t * slope {
                accepted = Some((cand, cf));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        let Some((cand, cf)) = accepted else {
            // no further decrease is representable
            break;
        };
        beta = cand;
        f = cf;
        (g, h) = grad_hess(train, &beta);
    }
    Ok(StackModel {
        coef: beta,
        iterations,
        grad_norm: g.norm(),
        warning: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub cv_best_agent: usize,
    pub stack_logistic: StackModel,
}

pub fn baselines(train: &[DyadSample], val: &[DyadSample]) -> Result<Baselines> {
    Ok(Baselines {
        cv_best_agent: cv_best_agent(val)?,
        stack_logistic: stack_logistic(train)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(p: &[f64], y: bool, k: usize) -> DyadSample {
        DyadSample::new((k, k + 1), p, y).unwrap()
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let val = vec![ds(&[0.3, 0.3], true, 0), ds(&[0.3, 0.3], false, 1)];
        assert_eq!(cv_best_agent(&val).unwrap(), 0);
        let val = vec![ds(&[0.3], true, 0)];
        assert_eq!(cv_best_agent(&val).unwrap(), 0);
        assert!(cv_best_agent(&[]).is_err());
    }

    #[test]
    fn one_class_training() {
        let t = vec![ds(&[0.2], true, 0), ds(&[0.4], true, 1)];
        let m = stack_logistic(&t).unwrap();
        assert!(m.warning.is_some());
        assert_eq!(m.coef[1], 0.0);
        assert!(m.predict(&[1.0, 0.3]) > 1.0 - 1e-9);
    }

    #[test]
    fn stacking_matches_logistic_truth() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let train: Vec<_> = (0..20_000)
            .map(|k| {
                let p: f64 = rng.random();
                let q = sigmoid(-1.0 + 2.0 * p);
                ds(&[p], rng.random::<f64>() < q, k)
            })
            .collect();
        let m = stack_logistic(&train).unwrap();
        assert!(m.grad_norm <= STACK_GRAD_TOL, "{}", m.grad_norm);
        assert!(
            (m.coef[0] + 1.0).abs() < 0.1 && (m.coef[1] - 2.0).abs() < 0.2,
            "{:?}",
            m.coef
        );
    }
}
