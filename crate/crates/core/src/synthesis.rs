//! Synthesis weights over agent edge-probability predictions.
//!
//! A dyad carries the feature vector `F = (1, p̂₁, …, p̂_J)` and a binary
//! label; estimators fit `β` so that `βᵀF` approximates `P(Y = 1 | F)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graphon::{gram_and_target, Graphon, QuadratureSpec};

/// Scaled-Gram eigenvalue floor below which the design counts as singular.
pub const SINGULAR_TOL: f64 = 1e-12;
pub const SIMPLEX_MAX_ITERS: usize = 50_000;
const SIMPLEX_TOL: f64 = 1e-12;
/// Rows per chunk in Gram accumulation; fixed so the reduction order (and
/// therefore the floating-point result) does not depend on the thread count.
const GRAM_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadSample {
    /// `(1, p̂₁, …, p̂_J)`.
    pub features: Vec<f64>,
    pub label: bool,
    pub dyad: (usize, usize),
}

impl DyadSample {
    /// Builds a sample from raw agent predictions, prepending the constant.
    pub fn new(dyad: (usize, usize), predictions: &[f64], label: bool) -> Result<Self> {
        if dyad.0 >= dyad.1 {
            return Err(Error::invalid(format!("dyad {:?} must satisfy i < j", dyad)));
        }
        if let Some(p) = predictions.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("agent prediction {p} outside [0,1]")));
        }
        let mut features = Vec::with_capacity(predictions.len() + 1);
        features.push(1.0);
        features.extend_from_slice(predictions);
        Ok(DyadSample { features, label, dyad })
    }

    pub fn y(&self) -> f64 {
        if self.label {
            1.0
        } else {
            0.0
        }
    }

    pub fn num_agents(&self) -> usize {
        self.features.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Method {
    Ls,
    Ridge {
        lambda_reg: f64,
    },
    Simplex,
    /// Population projection `β⋆ = G⁻¹c`.
    Population,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub method: Method,
    /// `(β₀, β₁, …, β_J)`.
    pub beta: Vec<f64>,
    /// Condition number of the diagonally scaled Gram matrix.
    pub condition_number: f64,
    pub m_train: usize,
    /// `‖β‖₂`.
    pub beta_norm: f64,
    /// Projected-gradient optimality residual (simplex only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kkt_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

impl WeightVector {
    fn new(method: Method, beta: Vec<f64>, condition_number: f64, m_train: usize) -> Self {
        let beta_norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
        WeightVector {
            method,
            beta,
            condition_number,
            m_train,
            beta_norm,
            kkt_residual: None,
            iterations: None,
        }
    }

    pub fn num_agents(&self) -> usize {
        self.beta.len() - 1
    }

    /// Unclipped `βᵀF`.
    pub fn predict_raw(&self, features: &[f64]) -> f64 {
        self.beta.iter().zip(features).map(|(b, f)| b * f).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `(βᵀF ∨ 0) ∧ 1`.
pub fn predict_clipped(beta: &WeightVector, features: &[f64]) -> Result<f64> {
    check_len(beta.beta.len(), features.len())?;
    if features[0] != 1.0 {
        return Err(Error::invalid("leading feature must be the constant 1"));
    }
    Ok(beta.predict_raw(features).clamp(0.0, 1.0))
}

fn check_samples(samples: &[DyadSample]) -> Result<usize> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("at least one dyad sample is required"))?;
    let d = first.features.len();
    if d < 2 {
        return Err(Error::invalid("at least one agent feature is required"));
    }
    for s in samples {
        check_len(d, s.features.len())?;
        if s.features[0] != 1.0 {
            return Err(Error::invalid("leading feature must be the constant 1"));
        }
    }
    Ok(d)
}

/// Mean-scaled normal equations `Ĝ = (1/m) Σ F Fᵀ`, `ĥ = (1/m) Σ F Y`.
pub fn empirical_gram(samples: &[DyadSample]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let d = check_samples(samples)?;
    let partials: Vec<(Vec<f64>, Vec<f64>)> = samples
        .par_chunks(GRAM_CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0; d * d];
            let mut h = vec![0.0; d];
            for s in chunk {
                let f = &s.features;
                let y = s.y();
                for i in 0..d {
                    h[i] += f[i] * y;
                    for j in i..d {
                        g[i * d + j] += f[i] * f[j];
                    }
                }
            }
            (g, h)
        })
        .collect();
    let mut g = vec![0.0; d * d];
    let mut h = vec![0.0; d];
    for (pg, ph) in &partials {
        g.iter_mut().zip(pg).for_each(|(a, b)| *a += b);
        h.iter_mut().zip(ph).for_each(|(a, b)| *a += b);
    }
    let m = samples.len() as f64;
    let mut gm = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            gm[(i, j)] = g[i * d + j] / m;
            gm[(j, i)] = g[i * d + j] / m;
        }
    }
    Ok((gm, DVector::from_iterator(d, h.into_iter().map(|v| v / m))))
}

/// Eigenvalue range of `D^{-1/2} G D^{-1/2}`, `D = diag(G)`.
fn scaled_spectrum(g: &DMatrix<f64>) -> (f64, f64) {
    let d = g.nrows();
    let diag: Vec<f64> = (0..d).map(|i| g[(i, i)]).collect();
    if diag.iter().any(|&v| !(v > 0.0)) {
        return (0.0, diag.iter().copied().fold(0.0, f64::max));
    }
    let s = DMatrix::from_fn(d, d, |i, j| g[(i, j)] / (diag[i] * diag[j]).sqrt());
    let ev = s.symmetric_eigen().eigenvalues;
    (ev.min(), ev.max())
}

fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    match a.clone().cholesky() {
        Some(c) => Ok(c.solve(b)),
        None => {
            let (lo, _) = scaled_spectrum(a);
            Err(Error::SingularDesign { min_eigenvalue: lo })
        }
    }
}

fn solve_normal(g: &DMatrix<f64>, h: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let (lo, hi) = scaled_spectrum(g);
    if !(lo >= SINGULAR_TOL) {
        return Err(Error::SingularDesign { min_eigenvalue: lo });
    }
    Ok((spd_solve(g, h)?, hi / lo))
}

/// Least-squares synthesis `β̂ = Ĝ⁻¹ĥ`. Never silently regularizes: a
/// numerically singular design is reported as `SingularDesign`.
pub fn fit_ls(samples: &[DyadSample]) -> Result<WeightVector> {
    let d = check_samples(samples)?;
    if samples.len() < d {
        return Err(Error::invalid(format!(
            "least squares needs at least {d} samples, got {}",
            samples.len()
        )));
    }
    let (g, h) = empirical_gram(samples)?;
    let (beta, cond) = solve_normal(&g, &h)?;
    Ok(WeightVector::new(
        Method::Ls,
        beta.iter().copied().collect(),
        cond,
        samples.len(),
    ))
}

/// Ridge synthesis: minimizes `Σ (Y − βᵀF)² + λ ‖β_{1:J}‖²`, leaving the
/// intercept unpenalized.
pub fn fit_ridge(samples: &[DyadSample], lambda_reg: f64) -> Result<WeightVector> {
    if !(lambda_reg >= 0.0 && lambda_reg.is_finite()) {
        return Err(Error::invalid(format!(
            "ridge penalty {lambda_reg} must be finite and ≥ 0"
        )));
    }
    check_samples(samples)?;
    let (mut g, h) = empirical_gram(samples)?;
    let m = samples.len();
    for i in 1..g.nrows() {
        g[(i, i)] += lambda_reg / m as f64;
    }
    let (beta, cond) = if lambda_reg == 0.0 {
        solve_normal(&g, &h)?
    } else {
        // strictly convex, so the system is positive definite
        let (lo, hi) = scaled_spectrum(&g);
        (spd_solve(&g, &h)?, if lo > 0.0 { hi / lo } else { f64::INFINITY })
    };
    Ok(WeightVector::new(
        Method::Ridge { lambda_reg },
        beta.iter().copied().collect(),
        cond,
        m,
    ))
}

/// Euclidean projection onto the probability simplex (sort-based; ties are
/// broken by index so the result is deterministic).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u: Vec<(usize, f64)> = v.iter().copied().enumerate().collect();
    u.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &(_, x)) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Simplex-constrained synthesis: `β_{1:J}` on the probability simplex,
/// free intercept. Projected gradient with step `1/L` on the centered
/// quadratic; the intercept is profiled out in closed form.
pub fn fit_simplex(samples: &[DyadSample]) -> Result<WeightVector> {
    let d = check_samples(samples)?;
    let j = d - 1;
    let (g, h) = empirical_gram(samples)?;
    // centered second moments: Σ_p = E[p pᵀ] − p̄ p̄ᵀ, σ = E[p y] − p̄ ȳ
    let pbar: Vec<f64> = (1..d).map(|i| g[(0, i)]).collect();
    let ybar = h[0];
    let sigma = DMatrix::from_fn(j, j, |a, b| g[(a + 1, b + 1)] - pbar[a] * pbar[b]);
    let cross = DVector::from_fn(j, |a, _| h[a + 1] - pbar[a] * ybar);
    let lip = 2.0 * sigma.clone().symmetric_eigen().eigenvalues.max().max(0.0);
    let objective = |b: &DVector<f64>| (b.transpose() * &sigma * b)[(0, 0)] - 2.0 * b.dot(&cross);
    let grad = |b: &DVector<f64>| 2.0 * (&sigma * b - &cross);
    let step = |b: &DVector<f64>| -> DVector<f64> {
        let z = b - grad(b) / lip;
        DVector::from_vec(project_simplex(z.as_slice()))
    };

    let mut b = DVector::from_element(j, 1.0 / j as f64);
    let mut iterations = 0;
    if lip > 0.0 {
        let mut obj = objective(&b);
        while iterations < SIMPLEX_MAX_ITERS {
            let next = step(&b);
            let next_obj = objective(&next);
            iterations += 1;
            let decrease = obj - next_obj;
            b = next;
            obj = next_obj;
            if decrease < SIMPLEX_TOL {
                break;
            }
        }
    }
    let kkt = if lip > 0.0 { (&b - step(&b)).amax() * lip } else { 0.0 };
    let intercept = ybar - b.dot(&DVector::from_vec(pbar));
    let mut beta = vec![intercept];
    beta.extend(b.iter());
    let (lo, hi) = scaled_spectrum(&g);
    let mut w = WeightVector::new(
        Method::Simplex,
        beta,
        if lo > 0.0 { hi / lo } else { f64::INFINITY },
        samples.len(),
    );
    w.kkt_residual = Some(kkt);
    w.iterations = Some(iterations);
    Ok(w)
}

/// Mean squared error `(1/m) Σ (Y − βᵀF)²` of the unclipped predictor.
pub fn empirical_risk(beta: &WeightVector, samples: &[DyadSample]) -> f64 {
    samples
        .iter()
        .map(|s| (s.y() - beta.predict_raw(&s.features)).powi(2))
        .sum::<f64>()
        / samples.len() as f64
}

/// Population synthesis weights `β⋆ = G⁻¹c`: the L² projection of `w_star`
/// onto `span{1, w_1, …, w_J}`.
pub fn population_projection(w_star: &Graphon, agents: &[Graphon], quad: &QuadratureSpec) -> Result<WeightVector> {
    let (g, c) = gram_and_target(agents, w_star, quad)?;
    let (beta, cond) = solve_normal(&g, &c)?;
    Ok(WeightVector::new(
        Method::Population,
        beta.iter().copied().collect(),
        cond,
        0,
    ))
}

/// `(β − β⋆)ᵀ G (β − β⋆)`: the L² risk of the synthesized graphon.
pub fn l2_risk(beta: &WeightVector, beta_star: &WeightVector, g: &DMatrix<f64>) -> Result<f64> {
    check_len(beta.beta.len(), beta_star.beta.len())?;
    check_len(beta.beta.len(), g.nrows())?;
    check_len(g.nrows(), g.ncols())?;
    let diff = DVector::from_iterator(
        beta.beta.len(),
        beta.beta.iter().zip(&beta_star.beta).map(|(a, b)| a - b),
    );
    Ok((diff.transpose() * g * &diff)[(0, 0)].max(0.0))
}
