//! Thresholded locality-constrained representation.
//!
//! For a test feature `x` and candidates `y_1 .. y_K` with distances `d_k`,
//! the coefficients minimise
//!
//! ```text
//!     || x - Σ w_k y_k ||² + τ Σ (d_k w_k)²    subject to  Σ w_k = 1
//! ```
//!
//! Because of the sum-to-one constraint the residual equals `G w` with
//! `G = [x - y_1, .., x - y_K]`, so the minimiser is proportional to
//! `(GᵀG + τD²)⁻¹ 1`. Thresholding restricts the candidates to the `K`
//! nearest before solving.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patches::ContextCandidateSet;

/// Default relative ridge: `1e-8 · trace(GᵀG) / K` is added to the diagonal.
pub const DEFAULT_RIDGE_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Locality regularization weight.
    pub tau: f64,
    /// Number of nearest candidates kept.
    pub k: usize,
    /// Diagonal stabilizer, relative to the mean diagonal of `GᵀG`.
    pub ridge_eps: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: 0.04,
            k: 360,
            ridge_eps: DEFAULT_RIDGE_EPS,
        }
    }
}

/// Selected candidate indices with their sum-to-one coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationWeights {
    pub indices: Vec<usize>,
    pub coefficients: Vec<f64>,
}

impl RepresentationWeights {
    /// Equal weights over `indices`.
    pub fn uniform(indices: Vec<usize>) -> Self {
        let w = 1.0 / indices.len() as f64;
        let coefficients = vec![w; indices.len()];
        Self {
            indices,
            coefficients,
        }
    }
}

/// Indices of the `k` smallest distances ordered by `(distance, index)`.
/// `k` larger than the list is clamped.
pub fn select_knn(distances: &[f64], k: usize) -> Result<Vec<usize>> {
    if distances.is_empty() {
        return Err(Error::invalid("no candidate distances to select from"));
    }
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    let k = k.min(distances.len());
    let cmp = |a: &usize, b: &usize| distances[*a].total_cmp(&distances[*b]).then(a.cmp(b));
    let mut order: Vec<usize> = (0..distances.len()).collect();
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    order.sort_unstable_by(cmp);
    Ok(order)
}

/// Solves the locality-constrained system for the given candidates and
/// rescales to sum to one.
pub fn solve_weights(
    test: &[f64],
    candidates: &[&[f64]],
    distances: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let k = candidates.len();
    if k == 0 || distances.len() != k {
        return Err(Error::invalid(format!(
            "{k} candidates but {} distances",
            distances.len()
        )));
    }
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let dim = test.len();
    if let Some(c) = candidates.iter().find(|c| c.len() != dim) {
        return Err(Error::invalid(format!(
            "candidate of length {} against test of length {dim}",
            c.len()
        )));
    }

    // G is dim x K with column k = x - y_k
    let g = DMatrix::from_fn(dim, k, |r, c| test[r] - candidates[c][r]);
    let mut system = g.tr_mul(&g);
    let trace = system.trace();
    let ridge = cfg.ridge_eps * trace / k as f64;
    for (i, d) in distances.iter().enumerate() {
        system[(i, i)] += cfg.tau * d * d + ridge;
    }

    let ones = DVector::from_element(k, 1.0);
    let u = match system.clone().cholesky() {
        Some(chol) => chol.solve(&ones),
        None => system
            .lu()
            .solve(&ones)
            .ok_or_else(|| Error::Degenerate("singular normal equations".into()))?,
    };
    let sum: f64 = u.iter().sum();
    if !sum.is_finite() || sum.abs() < 1e-12 {
        return Err(Error::Degenerate(format!(
            "coefficient sum {sum} cannot be rescaled"
        )));
    }
    Ok(u.iter().map(|v| v / sum).collect())
}

/// Unthresholded locality-constrained representation over every candidate.
pub fn solve_weights_full(
    test: &[f64],
    set: &ContextCandidateSet,
    tau: f64,
    ridge_eps: f64,
) -> Result<Vec<f64>> {
    let candidates: Vec<&[f64]> = (0..set.len()).map(|i| set.feature(i)).collect();
    let cfg = SolverConfig {
        tau,
        k: set.len(),
        ridge_eps,
    };
    solve_weights(test, &candidates, &set.distances, &cfg)
}

/// KNN selection followed by the thresholded solve. `K > N` is clamped;
/// the selected indices are returned in ascending order.
pub fn represent(
    test: &[f64],
    set: &ContextCandidateSet,
    cfg: &SolverConfig,
) -> Result<RepresentationWeights> {
    let mut indices = select_knn(&set.distances, cfg.k)?;
    // solve in candidate order so K = N is the same computation as the full solve
    indices.sort_unstable();
    let candidates: Vec<&[f64]> = indices.iter().map(|&i| set.feature(i)).collect();
    let distances: Vec<f64> = indices.iter().map(|&i| set.distances[i]).collect();
    let coefficients = solve_weights(test, &candidates, &distances, cfg)?;
    Ok(RepresentationWeights {
        indices,
        coefficients,
    })
}

/// As [`represent`], but a degenerate solve falls back to uniform weights
/// over the selected neighbours.
pub fn represent_or_uniform(
    test: &[f64],
    set: &ContextCandidateSet,
    cfg: &SolverConfig,
) -> Result<RepresentationWeights> {
    match represent(test, set, cfg) {
        Err(Error::Degenerate(msg)) => {
            warn!(
                "falling back to uniform weights at ({}, {}): {msg}",
                set.position.left, set.position.top
            );
            Ok(RepresentationWeights::uniform(select_knn(
                &set.distances,
                cfg.k,
            )?))
        }
        other => other,
    }
}

/// Weighted combination `Σ w_k · hr_k` of HR patches.
pub fn predict_hr_patch(coefficients: &[f64], hr_patches: &[&[f64]]) -> Vec<f64> {
    assert_eq!(coefficients.len(), hr_patches.len());
    let len = hr_patches.first().map_or(0, |p| p.len());
    let mut out = vec![0.0; len];
    for (w, patch) in coefficients.iter().zip(hr_patches) {
        for (o, v) in out.iter_mut().zip(patch.iter()) {
            *o += w * v;
        }
    }
    out
}

/// Predicts the HR residual patch for a representation over `set`.
pub fn predict_from_set(weights: &RepresentationWeights, set: &ContextCandidateSet) -> Vec<f64> {
    let patches: Vec<&[f64]> = weights.indices.iter().map(|&i| set.hr_patch(i)).collect();
    predict_hr_patch(&weights.coefficients, &patches)
}

/// Share of position patches among the `t` largest-magnitude coefficients,
/// and its complement. Ties are ranked by ascending index; `t` is clamped to
/// the number of coefficients.
pub fn contribution_ratio(
    coefficients: &[f64],
    position_indices: &[usize],
    t: usize,
) -> (f64, f64) {
    let t = t.max(1).min(coefficients.len());
    if t == 0 {
        return (0.0, 1.0);
    }
    let mut order: Vec<usize> = (0..coefficients.len()).collect();
    order.sort_by(|a, b| {
        coefficients[*b]
            .abs()
            .total_cmp(&coefficients[*a].abs())
            .then(a.cmp(b))
    });
    let hits = order[..t]
        .iter()
        .filter(|i| position_indices.contains(i))
        .count();
    let crpp = hits as f64 / t as f64;
    (crpp, 1.0 - crpp)
}
