use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{BlockForm, Graphon, QuadratureSpec};
use crate::error::{Error, Result};

/// An L² quantity with its integration provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Estimate {
    pub value: f64,
    /// True when computed exactly on the common block refinement.
    pub exact: bool,
    /// Bound on |value - truth|; zero when exact.
    pub error_bound: f64,
}

/// Structural functionals of a graphon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSet {
    pub edge_density: f64,
    pub triangle: f64,
    pub wedge: f64,
    pub clustering: f64,
    /// `d_w` at the midpoints of a uniform grid.
    pub degree_grid: Vec<f64>,
    pub exact: bool,
}

/// Perturbation bounds on functionals for a given L² distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBudget {
    pub delta: f64,
    pub s0: f64,
    pub edge_bound: f64,
    pub degree_bound: f64,
    pub triangle_bound: f64,
    pub wedge_bound: f64,
    pub clustering_bound: f64,
}

/// Fraction-of-cells bound for midpoint integration of a kernel that is
/// constant off the grid lines through `breaks`, times the integrand range.
fn grid_error_bound(breaks: &[f64], grid: usize, range: f64) -> f64 {
    let g = grid as f64;
    let mut cells: Vec<usize> = breaks
        .iter()
        .filter(|&&b| b > 0.0 && b < 1.0)
        .filter(|&&b| (b * g).fract() != 0.0)
        .map(|&b| (b * g) as usize)
        .collect();
    cells.sort_unstable();
    cells.dedup();
    (2.0 * cells.len() as f64 / g).min(1.0) * range
}

fn union_breaks(ws: &[&Graphon]) -> Vec<f64> {
    ws.iter().flat_map(|w| w.breakpoints()).collect()
}

/// `⟨w, v⟩ = ∫∫ w v`.
pub fn inner_product(w: &Graphon, v: &Graphon, quad: &QuadratureSpec) -> Result<L2Estimate> {
    quad.check()?;
    let (forms, exact) = BlockForm::common(&[w, v], quad.grid, quad);
    let value = forms[0].inner(&forms[1]);
    let error_bound = if exact {
        0.0
    } else {
        let range = forms[0]
            .values()
            .iter()
            .zip(forms[1].values())
            .map(|(a, b)| (a * b).abs())
            .fold(0.0, f64::max);
        grid_error_bound(&union_breaks(&[w, v]), quad.grid, range)
    };
    Ok(L2Estimate {
        value,
        exact,
        error_bound,
    })
}

/// `‖w − v‖₂`.
pub fn l2_distance(w: &Graphon, v: &Graphon, quad: &QuadratureSpec) -> Result<L2Estimate> {
    quad.check()?;
    let (forms, exact) = BlockForm::common(&[w, v], quad.grid, quad);
    let k = forms[0].pieces();
    let mu = forms[0].measures();
    let mut sq = 0.0;
    let mut range: f64 = 0.0;
    for a in 0..k {
        let mut row = 0.0;
        for b in 0..k {
            let d = forms[0].value(a, b) - forms[1].value(a, b);
            range = range.max(d * d);
            row += mu[b] * d * d;
        }
        sq += mu[a] * row;
    }
    let value = sq.max(0.0).sqrt();
    let error_bound = if exact {
        0.0
    } else {
        grid_error_bound(&union_breaks(&[w, v]), quad.grid, range).sqrt()
    };
    Ok(L2Estimate {
        value,
        exact,
        error_bound,
    })
}

/// Gram matrix of `(1, w_1, …, w_J)` and its inner products with `w_star`.
pub fn gram_and_target(
    features: &[Graphon],
    w_star: &Graphon,
    quad: &QuadratureSpec,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    quad.check()?;
    if features.is_empty() {
        return Err(Error::invalid("at least one feature graphon is required"));
    }
    let one = Graphon::constant(1.0)?;
    let mut all: Vec<&Graphon> = Vec::with_capacity(features.len() + 2);
    all.push(&one);
    all.extend(features.iter());
    all.push(w_star);
    let (forms, _) = BlockForm::common(&all, quad.grid, quad);
    let d = features.len() + 1;
    let mut g = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = forms[i].inner(&forms[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let target = &forms[d];
    let c = DVector::from_iterator(d, (0..d).map(|i| forms[i].inner(target)));
    Ok((g, c))
}

/// Edge, triangle, wedge densities, clustering and the degree function.
pub fn functionals(w: &Graphon, quad: &QuadratureSpec) -> Result<FunctionalSet> {
    quad.check()?;
    let (forms, exact) = BlockForm::common(&[w], quad.grid, quad);
    let form = &forms[0];
    let edge_density = form.edge_density();
    let wedge = form.wedge();
    let triangle = if exact {
        form.triangle()
    } else {
        let tri_spec = QuadratureSpec::midpoint(quad.triangle_grid);
        BlockForm::common(&[w], quad.triangle_grid, &tri_spec).0[0].triangle()
    };
    let clustering = if wedge > 0.0 { triangle / wedge } else { 0.0 };

    let degrees = form.degrees();
    let g = quad.grid;
    let degree_grid = (0..g)
        .map(|i| {
            let x = (i as f64 + 0.5) / g as f64;
            degrees[form.partition().locate(x)]
        })
        .collect();
    Ok(FunctionalSet {
        edge_density,
        triangle,
        wedge,
        clustering,
        degree_grid,
        exact,
    })
}

/// Bounds on functional differences between two graphons at L² distance
/// `delta` whose wedge densities are both at least `s0`.
pub fn lipschitz_budget(delta: f64, s0: f64) -> Result<LipschitzBudget> {
    if !(delta >= 0.0) {
        return Err(Error::invalid("delta must be nonnegative"));
    }
    if !(s0 > 0.0) {
        return Err(Error::invalid("wedge floor s0 must be positive"));
    }
    Ok(LipschitzBudget {
        delta,
        s0,
        edge_bound: delta,
        degree_bound: delta,
        triangle_bound: 3.0 * delta,
        wedge_bound: 2.0 * delta,
        clustering_bound: (3.0 / s0 + 2.0 / (s0 * s0)) * delta,
    })
}
