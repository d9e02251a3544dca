//! Calculus on the unit sphere for `f(w) = -T(w,w,w,w)/4`, and the
//! conditioning measurements (incoherence, RIP constant, weight ratio) of a
//! component set.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Result, TpmError};
use crate::tensor::{check_unit, ComponentSet, Rank1SumTensor, OPERATION_UNIT_TOL};

/// Geometric regime threshold on `kτ` used by the landscape checks.
pub const GEOMETRIC_K_TAU_LIMIT: f64 = 0.05;
/// Largest weight ratio covered by the weighted landscape guarantee.
pub const KAPPA_LIMIT: f64 = 1.25;
/// Gram eigenvalues below this are treated as rank deficiency.
pub const GRAM_SINGULAR_TOL: f64 = 1e-10;

/// `f(w) = -T(w,w,w,w)/4`.
pub fn objective(t: &Rank1SumTensor, w: &DVector<f64>) -> Result<f64> {
    Ok(-0.25 * t.contract_full(w)?)
}

/// `-P_w T(I,w,w,w)` with `P_w = I - wwᵀ`.
pub fn riemannian_gradient(t: &Rank1SumTensor, w: &DVector<f64>) -> Result<DVector<f64>> {
    let v = t.contract_vector(w)?;
    let radial = w.dot(&v);
    Ok(-(v - w * radial))
}

/// `(Σ coeffᵢ cᵢ⁴) P_w - 3 Σ coeffᵢ cᵢ² (P_w vᵢ)(P_w vᵢ)ᵀ`, built from its lower
/// triangle so the result is exactly symmetric.
pub fn riemannian_hessian(t: &Rank1SumTensor, w: &DVector<f64>) -> Result<DMatrix<f64>> {
    ensure_dim(t.dim(), w.len())?;
    check_unit(w, 0, OPERATION_UNIT_TOL)?;
    let d = t.dim();
    let mut multiplier = 0.0;
    let mut projected = Vec::with_capacity(t.terms().len());
    for term in t.terms() {
        let c = term.direction.dot(w);
        multiplier += term.coefficient * c.powi(4);
        let p = &term.direction - w * c;
        projected.push((-3.0 * term.coefficient * c * c, p));
    }
    let mut h = DMatrix::zeros(d, d);
    for j in 0..d {
        for i in j..d {
            let identity = if i == j { 1.0 } else { 0.0 };
            let mut value = multiplier * (identity - w[i] * w[j]);
            for (scale, p) in &projected {
                value += scale * p[i] * p[j];
            }
            h[(i, j)] = value;
            h[(j, i)] = value;
        }
    }
    Ok(h)
}

/// An orthogonal `d × d` Householder reflector whose first column is `±w`;
/// columns `1..d` are an orthonormal basis of the tangent space at `w`.
pub fn householder_frame(w: &DVector<f64>) -> DMatrix<f64> {
    let d = w.len();
    let mut v = w.clone();
    let sign = if w[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign * w.norm();
    let vv = v.norm_squared();
    let mut q = DMatrix::identity(d, d);
    if vv > 0.0 {
        q.ger(-2.0 / vv, &v, &v, 1.0);
    }
    q
}

/// Eigenvalues (ascending) of the Hessian restricted to the tangent space at
/// `w`; the null direction along `w` is excluded.
pub fn tangent_spectrum(hessian: &DMatrix<f64>, w: &DVector<f64>) -> Vec<f64> {
    let d = w.len();
    if d < 2 {
        return Vec::new();
    }
    let q = householder_frame(w);
    let rotated = q.transpose() * hessian * &q;
    let tangent = rotated.view((1, 1), (d - 1, d - 1));
    let symmetric = (tangent.transpose() + tangent) * 0.5;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(symmetric).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    eigenvalues
}

/// `‖w - (wᵀu)u‖ / |wᵀu|`, the tangent of the angle between `w` and the unit
/// vector `u`; infinite when `w ⟂ u`.
pub fn off_axis_ratio(w: &DVector<f64>, u: &DVector<f64>) -> f64 {
    let c = w.dot(u);
    if c.abs() <= 1e-300 {
        return f64::INFINITY;
    }
    (w - u * c).norm() / c.abs()
}

/// `max_{i<j} |uᵢᵀuⱼ|`; zero for a single component.
pub fn measure_incoherence(components: &ComponentSet) -> f64 {
    let gram = components.matrix().transpose() * components.matrix();
    let k = components.len();
    let mut tau: f64 = 0.0;
    for j in 0..k {
        for i in (j + 1)..k {
            tau = tau.max(gram[(i, j)].abs());
        }
    }
    tau.min(1.0)
}

/// Exact RIP constant over `span(U)`: `max(σmax(G) - 1, 1 - σmin(G))` for `G = UᵀU`.
pub fn measure_rip(components: &ComponentSet) -> Result<f64> {
    let gram = components.matrix().transpose() * components.matrix();
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if min < GRAM_SINGULAR_TOL {
        return Err(TpmError::DegenerateComponents { min_eigenvalue: min });
    }
    Ok((max - 1.0).max(1.0 - min).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningReport {
    pub tau: f64,
    pub delta: f64,
    pub kappa: f64,
    pub k_tau: f64,
    pub passes_geometric: bool,
    pub passes_kappa: bool,
}

impl ConditioningReport {
    pub fn measure(components: &ComponentSet) -> Result<Self> {
        let tau = measure_incoherence(components);
        let delta = measure_rip(components)?;
        let kappa = components.kappa();
        let k_tau = components.len() as f64 * tau;
        Ok(Self {
            tau,
            delta,
            kappa,
            k_tau,
            passes_geometric: k_tau <= GEOMETRIC_K_TAU_LIMIT,
            passes_kappa: kappa <= KAPPA_LIMIT,
        })
    }
}

/// Signed correlations `cᵢ = wᵀuᵢ` and their order by decreasing magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationProfile {
    pub values: Vec<f64>,
    pub sorted_abs: Vec<usize>,
}

impl CorrelationProfile {
    pub fn largest(&self) -> f64 {
        self.values[self.sorted_abs[0]].abs()
    }

    pub fn second_largest(&self) -> Option<f64> {
        self.sorted_abs.get(1).map(|&i| self.values[i].abs())
    }
}

pub fn correlation_profile(components: &ComponentSet, w: &DVector<f64>) -> Result<CorrelationProfile> {
    ensure_dim(components.dim(), w.len())?;
    let values: Vec<f64> = (components.matrix().transpose() * w).iter().copied().collect();
    let mut sorted_abs: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps the lower index first on ties
    sorted_abs.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    Ok(CorrelationProfile { values, sorted_abs })
}

/// Orthogonal projection of `w` onto `span(U)`, via the Gram system `G a = Uᵀw`.
pub fn project_onto_span(components: &ComponentSet, w: &DVector<f64>) -> Result<DVector<f64>> {
    ensure_dim(components.dim(), w.len())?;
    let u = components.matrix();
    let gram = u.transpose() * u;
    let rhs = u.transpose() * w;
    let coefficients = gram
        .cholesky()
        .ok_or(TpmError::DegenerateComponents { min_eigenvalue: 0.0 })?
        .solve(&rhs);
    Ok(u * coefficients)
}

/// `‖w - P_span(U) w‖`.
pub fn span_residual(components: &ComponentSet, w: &DVector<f64>) -> Result<f64> {
    Ok((w - project_onto_span(components, w)?).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn e(d: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        v
    }

    fn orthonormal(d: usize, k: usize) -> ComponentSet {
        ComponentSet::equal_weights(&(0..k).map(|i| e(d, i)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn objective_values() {
        let t = Rank1SumTensor::from_components(&orthonormal(3, 1));
        assert_eq!(objective(&t, &e(3, 0)).unwrap(), -0.25);
        assert_eq!(objective(&t, &e(3, 2)).unwrap(), 0.0);
    }

    #[test]
    fn gradient_vanishes_at_component_and_symmetric_saddle() {
        let t = Rank1SumTensor::from_components(&orthonormal(3, 2));
        assert_eq!(riemannian_gradient(&t, &e(3, 0)).unwrap().norm(), 0.0);
        let w = DVector::from_vec(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0]);
        assert!(riemannian_gradient(&t, &w).unwrap().norm() < 1e-15);
    }

    #[test]
    fn hessian_at_component_is_the_projector() {
        let t = Rank1SumTensor::from_components(&orthonormal(4, 2));
        let w = e(4, 0);
        let h = riemannian_hessian(&t, &w).unwrap();
        let p = DMatrix::identity(4, 4) - &w * w.transpose();
        assert!((h - p).abs().max() < 1e-15);
    }

    #[test]
    fn hessian_at_symmetric_saddle_has_negative_curvature() {
        let t = Rank1SumTensor::from_components(&orthonormal(3, 2));
        let w = DVector::from_vec(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0]);
        let v = DVector::from_vec(vec![FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0]);
        let h = riemannian_hessian(&t, &w).unwrap();
        let q = (v.transpose() * &h * &v)[(0, 0)];
        assert!((q + 1.0).abs() < 1e-14);
        assert!((&h * &w).norm() < 1e-15);
        assert_eq!(h, h.transpose());
    }

    #[test]
    fn tangent_spectrum_drops_the_radial_direction() {
        let t = Rank1SumTensor::from_components(&orthonormal(5, 3));
        let w = e(5, 1);
        let spectrum = tangent_spectrum(&riemannian_hessian(&t, &w).unwrap(), &w);
        assert_eq!(spectrum.len(), 4);
        assert!(spectrum.iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn incoherence_values() {
        assert_eq!(measure_incoherence(&orthonormal(4, 3)), 0.0);
        assert_eq!(measure_incoherence(&orthonormal(4, 1)), 0.0);
        let sixty = DVector::from_vec(vec![0.5, 3f64.sqrt() / 2.0]);
        let set = ComponentSet::equal_weights(&[e(2, 0), sixty]).unwrap();
        assert!((measure_incoherence(&set) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rip_for_a_correlated_pair_equals_the_correlation() {
        assert!(measure_rip(&orthonormal(5, 4)).unwrap().abs() < 1e-12);
        let rho: f64 = 0.3;
        let second = DVector::from_vec(vec![rho, (1.0 - rho * rho).sqrt(), 0.0]);
        let set = ComponentSet::equal_weights(&[e(3, 0), second]).unwrap();
        assert!((measure_rip(&set).unwrap() - rho).abs() < 1e-14);
    }

    #[test]
    fn rip_rejects_dependent_components() {
        let set = ComponentSet::equal_weights(&[e(3, 0), e(3, 0)]).unwrap();
        assert!(matches!(measure_rip(&set), Err(TpmError::DegenerateComponents { .. })));
    }

    #[test]
    fn profile_orders_by_magnitude_with_index_ties() {
        let set = orthonormal(4, 3);
        let p = correlation_profile(&set, &e(4, 0)).unwrap();
        assert_eq!(p.values, vec![1.0, 0.0, 0.0]);
        assert_eq!(p.sorted_abs, vec![0, 1, 2]);

        let w = DVector::from_vec(vec![FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0, 0.0]);
        let p = correlation_profile(&set, &w).unwrap();
        assert_eq!(p.sorted_abs, vec![0, 1, 2]);
        assert_eq!(p.values[1], -FRAC_1_SQRT_2);
    }

    #[test]
    fn conditioning_report_flags() {
        let report = ConditioningReport::measure(&orthonormal(8, 4)).unwrap();
        assert_eq!(report.tau, 0.0);
        assert!(report.delta.abs() < 1e-12);
        assert_eq!(report.kappa, 1.0);
        assert!(report.passes_geometric && report.passes_kappa);
        let json = serde_json::to_value(&report).unwrap();
        for key in ["tau", "delta", "kappa", "k_tau", "passes_geometric", "passes_kappa"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn span_projection_of_orthonormal_set() {
        let set = orthonormal(4, 2);
        let w = DVector::from_vec(vec![0.5, 0.5, 0.5, 0.5]);
        assert!((span_residual(&set, &w).unwrap() - FRAC_1_SQRT_2).abs() < 1e-15);
    }
}
