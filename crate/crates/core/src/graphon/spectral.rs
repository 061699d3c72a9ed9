use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Graphon;
use crate::error::{check_len, Error, Result};

const REL_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 10_000;

/// Power iteration on a dense row-major `n × n` matrix from the all-ones
/// vector. Returns the limit of `‖A x_k‖ / ‖x_k‖` and the iteration count.
///
/// For symmetric matrices the ratio is nondecreasing in `k` and converges to
/// the spectral radius unless the start vector is orthogonal to the top
/// eigenspace.
pub fn power_iteration(a: &[f64], n: usize) -> (f64, usize) {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return (0.0, 0);
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut est = 0.0;
    for it in 1..=MAX_ITERS {
        let y: Vec<f64> = a
            .par_chunks(n)
            .map(|row| row.iter().zip(&x).map(|(r, v)| r * v).sum())
            .collect();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return (0.0, it);
        }
        let converged = (norm - est).abs() <= REL_TOL * norm;
        est = norm;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        if converged {
            return (est, it);
        }
    }
    (est, MAX_ITERS)
}

/// Spectral radius of the integral operator `T_w f(x) = ∫ w(x,y) f(y) dy`,
/// from the `g × g` midpoint discretization with entries `w(x_i, y_j) / g`.
pub fn spectral_radius(w: &Graphon, grid_g: usize) -> Result<f64> {
    if grid_g < 8 {
        return Err(Error::invalid("spectral grid must have at least 8 points"));
    }
    let g = grid_g;
    let mids: Vec<f64> = (0..g).map(|i| (i as f64 + 0.5) / g as f64).collect();
    let mut a = vec![0.0; g * g];
    a.par_chunks_mut(g).enumerate().for_each(|(i, row)| {
        for (j, r) in row.iter_mut().enumerate() {
            *r = w.evaluate(mids[i], mids[j]) / g as f64;
        }
    });
    Ok(power_iteration(&a, g).0)
}

/// Agent-level bracket on the spectral radius of a nonnegative combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralBracket {
    /// `max_j β_j ρ_j`
    pub lower: f64,
    /// `Σ_j β_j ρ_j`
    pub upper: f64,
    /// Spectral radius of `Σ_j β_j w_j`.
    pub rho_bps: f64,
    /// Per-part radii `ρ_j`.
    pub part_rhos: Vec<f64>,
}

impl SpectralBracket {
    /// Critical sparsity bounds `(1/upper, 1/lower)` for `λ_c = 1/ρ_bps`.
    pub fn lambda_c_bounds(&self) -> (f64, f64) {
        (1.0 / self.upper, 1.0 / self.lower)
    }

    pub fn contains(&self, tol: f64) -> bool {
        self.lower - tol <= self.rho_bps && self.rho_bps <= self.upper + tol
    }
}

/// Brackets the spectral radius of `Σ_j beta[j] · parts[j]`. An intercept is
/// expressed by including `Graphon::constant(1.0)` among the parts.
pub fn spectral_bracket(beta: &[f64], parts: &[Graphon], grid_g: usize) -> Result<SpectralBracket> {
    check_len(parts.len(), beta.len())?;
    if parts.is_empty() {
        return Err(Error::invalid("at least one part is required"));
    }
    if let Some(b) = beta.iter().find(|&&b| !(b >= 0.0)) {
        return Err(Error::invalid(format!(
            "spectral bracket requires nonnegative coefficients, got {b}"
        )));
    }
    let part_rhos = parts
        .iter()
        .map(|w| spectral_radius(w, grid_g))
        .collect::<Result<Vec<_>>>()?;
    let scaled: Vec<f64> = beta.iter().zip(&part_rhos).map(|(b, r)| b * r).collect();
    let lower = scaled.iter().copied().fold(0.0, f64::max);
    let upper = scaled.iter().sum();
    let combo = Graphon::weighted_sum(beta, parts)?;
    let rho_bps = spectral_radius(&combo, grid_g)?;
    Ok(SpectralBracket {
        lower,
        upper,
        rho_bps,
        part_rhos,
    })
}
