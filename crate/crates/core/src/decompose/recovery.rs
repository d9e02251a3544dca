use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::decompose::Extracted;
use crate::error::{ensure_dim, Result, TpmError};
use crate::geometry::measure_incoherence;
use crate::recovery_bound;
use crate::tensor::ComponentSet;

/// Estimates matched to ground truth up to sign and permutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// `assignment[i]` is the truth index matched to estimate `i`.
    pub assignment: Vec<usize>,
    pub signs: Vec<i8>,
    pub vector_errors: Vec<f64>,
    pub weight_errors: Vec<f64>,
    pub tau: f64,
    pub kappa: f64,
    /// `ε = max(350 κ √k τ³, 1e-8)`.
    pub bound: f64,
    /// Every `‖ûᵢ - sᵢ u_π(i)‖ ≤ ε` and `|λ̂ᵢ - λ_π(i)| ≤ 5 ε λ_π(i)`.
    pub all_within_bound: bool,
}

/// Greedy matching by decreasing `|ûᵢᵀuⱼ|` over unmatched pairs.
pub fn match_components(estimates: &[Extracted], truth: &ComponentSet) -> Result<RecoveryReport> {
    let k = truth.len();
    if estimates.len() > k {
        return Err(TpmError::IndexMismatch { estimates: estimates.len(), components: k });
    }
    for e in estimates {
        ensure_dim(truth.dim(), e.vector.len())?;
    }
    let mut pairs = Vec::with_capacity(estimates.len() * k);
    for (i, e) in estimates.iter().enumerate() {
        let dots = truth.matrix().transpose() * &e.vector;
        for j in 0..k {
            pairs.push((dots[j].abs(), i, j, dots[j]));
        }
    }
    // descending magnitude, then lower estimate index, then lower truth index
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut assignment = vec![usize::MAX; estimates.len()];
    let mut signs = vec![1i8; estimates.len()];
    let mut truth_taken = vec![false; k];
    let mut remaining = estimates.len();
    for (_, i, j, dot) in pairs {
        if remaining == 0 {
            break;
        }
        if assignment[i] != usize::MAX || truth_taken[j] {
            continue;
        }
        assignment[i] = j;
        signs[i] = if dot < 0.0 { -1 } else { 1 };
        truth_taken[j] = true;
        remaining -= 1;
    }

    let tau = measure_incoherence(truth);
    let kappa = truth.kappa();
    let bound = recovery_bound(k, tau, kappa);
    let mut vector_errors = Vec::with_capacity(estimates.len());
    let mut weight_errors = Vec::with_capacity(estimates.len());
    let mut all_within_bound = true;
    for (i, e) in estimates.iter().enumerate() {
        let j = assignment[i];
        let u = truth.vector(j);
        let vector_error = (&e.vector - u * f64::from(signs[i])).norm();
        let lambda = truth.weights()[j];
        let weight_error = (e.weight - lambda).abs();
        all_within_bound &= vector_error <= bound && weight_error <= 5.0 * bound * lambda;
        vector_errors.push(vector_error);
        weight_errors.push(weight_error);
    }
    Ok(RecoveryReport { assignment, signs, vector_errors, weight_errors, tau, kappa, bound, all_within_bound })
}

/// `‖Σⱼ λⱼ(wᵀuⱼ)³uⱼ - λ̂ⱼ(wᵀûⱼ)³ûⱼ‖` over the extracted pairs, with
/// `extracted[j]` paired to `truth` component `j`.
pub fn deflation_residual_norm(truth: &ComponentSet, extracted: &[Extracted], w: &DVector<f64>) -> Result<f64> {
    if extracted.len() > truth.len() {
        return Err(TpmError::IndexMismatch { estimates: extracted.len(), components: truth.len() });
    }
    ensure_dim(truth.dim(), w.len())?;
    let mut residual = DVector::zeros(truth.dim());
    for (j, e) in extracted.iter().enumerate() {
        ensure_dim(truth.dim(), e.vector.len())?;
        let u = truth.vector(j);
        let c = w.dot(&u);
        let c_hat = w.dot(&e.vector);
        residual.axpy(truth.weights()[j] * c * c * c, &u, 1.0);
        residual.axpy(-e.weight * c_hat * c_hat * c_hat, &e.vector, 1.0);
    }
    Ok(residual.norm())
}
