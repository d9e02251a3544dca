//! Manifold gradient descent, critical point certification and the
//! landscape checks: the correlation gap at minima and proximity of every
//! minimum to a true component.

use std::fmt;

use nalgebra::DVector;

use crate::error::{ensure_dim, Result, TpmError};
use crate::geometry::{
    householder_frame, measure_incoherence, measure_rip, off_axis_ratio, riemannian_gradient, riemannian_hessian,
    tangent_spectrum, CorrelationProfile,
};
use crate::recovery_bound;
use crate::sampling::{stream_rng, uniform_unit, Domain};
use crate::tensor::{check_unit, ComponentSet, Rank1SumTensor, OPERATION_UNIT_TOL};

pub const DEFAULT_GRAD_TOL: f64 = 1e-9;
pub const DEFAULT_EIG_TOL: f64 = 1e-8;
pub const DEFAULT_STEP: f64 = 0.1;
pub const DEFAULT_MAX_ITERS: usize = 100_000;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    pub step: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { step: DEFAULT_STEP, max_iters: DEFAULT_MAX_ITERS, grad_tol: DEFAULT_GRAD_TOL }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentOutcome {
    pub point: DVector<f64>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

/// `f(normalize(w - s g)) - f(w)` for a tangent `g`, evaluated term by term as
/// `-¼ coeff (c'-c)(c'+c)(c'²+c²)` with `c' - c = c(1/n - 1) - s vᵀg / n` and
/// `n = √(1 + s²‖g‖²)`. Also returns the rounding bound of the result, which
/// comes from `vᵀg` and scales like `ε s ‖T(I,w,w,w)‖ Σ|coeff||c|³`.
fn objective_change(t: &Rank1SumTensor, w: &DVector<f64>, gradient: &DVector<f64>, step: f64) -> (f64, f64) {
    let x = step * step * gradient.norm_squared();
    let n = (1.0 + x).sqrt();
    let inv_n_minus_one = -x / (n * (1.0 + n));
    let mut change = 0.0;
    let mut cubic_mass = 0.0;
    for term in t.terms() {
        let c = term.direction.dot(w);
        let along = term.direction.dot(gradient);
        let dc = c * inv_n_minus_one - step * along / n;
        let c_next = c + dc;
        change += term.coefficient * dc * (c_next + c) * (c_next * c_next + c * c);
        cubic_mass += term.coefficient.abs() * c.abs().powi(3);
    }
    let rounding = 16.0 * f64::EPSILON * step * t.contract_vector_unchecked(w).norm() * cubic_mass;
    (-0.25 * change, rounding)
}

/// `w ← normalize(w - step·∇f(w))`, halving the step (up to 30 times) whenever
/// the objective would increase by more than its rounding error, until
/// `‖∇f‖ ≤ grad_tol` or `max_iters`.
pub fn manifold_gradient_descent(
    t: &Rank1SumTensor,
    w0: &DVector<f64>,
    options: &DescentOptions,
) -> Result<DescentOutcome> {
    ensure_dim(t.dim(), w0.len())?;
    check_unit(w0, 0, OPERATION_UNIT_TOL)?;
    if !(options.step > 0.0) {
        return Err(TpmError::InvalidParameter(format!("step must be positive, got {}", options.step)));
    }
    let mut w = w0.normalize();
    let mut trace = vec![-0.25 * t.contract_full_unchecked(&w)];
    for iteration in 0..options.max_iters {
        let gradient = riemannian_gradient(t, &w)?;
        let gradient_norm = gradient.norm();
        if gradient_norm <= options.grad_tol {
            return Ok(DescentOutcome { point: w, objective_trace: trace, iterations: iteration, gradient_norm, converged: true });
        }
        let mut step = options.step;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let (change, rounding) = objective_change(t, &w, &gradient, step);
            if change <= rounding {
                accepted = Some((&w - &gradient * step).normalize());
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some(next) => {
                w = next;
                trace.push(-0.25 * t.contract_full_unchecked(&w));
            }
            None => return Err(TpmError::StalledDescent { iteration, point: w }),
        }
    }
    let gradient_norm = riemannian_gradient(t, &w)?.norm();
    Ok(DescentOutcome {
        point: w,
        objective_trace: trace,
        iterations: options.max_iters,
        gradient_norm,
        converged: gradient_norm <= options.grad_tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Minimum,
    Saddle,
    NonCritical,
}

impl fmt::Display for PointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Minimum => "minimum",
            Self::Saddle => "saddle",
            Self::NonCritical => "non-critical",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPointCertificate {
    pub point: DVector<f64>,
    pub gradient_norm: f64,
    pub min_tangent_eigenvalue: f64,
    /// Ascending eigenvalues of the Hessian on the tangent space.
    pub tangent_spectrum: Vec<f64>,
    pub classification: PointKind,
    /// `λ = T(w,w,w,w)`, the first-order multiplier.
    pub lambda_value: f64,
}

pub fn certify(t: &Rank1SumTensor, w: &DVector<f64>, grad_tol: f64, eig_tol: f64) -> Result<CriticalPointCertificate> {
    let gradient_norm = riemannian_gradient(t, w)?.norm();
    let hessian = riemannian_hessian(t, w)?;
    let spectrum = tangent_spectrum(&hessian, w);
    let min_tangent_eigenvalue = spectrum.first().copied().unwrap_or(0.0);
    let classification = if gradient_norm > grad_tol {
        PointKind::NonCritical
    } else if min_tangent_eigenvalue >= -eig_tol {
        PointKind::Minimum
    } else {
        PointKind::Saddle
    };
    Ok(CriticalPointCertificate {
        point: w.clone(),
        gradient_norm,
        min_tangent_eigenvalue,
        tangent_spectrum: spectrum,
        classification,
        lambda_value: t.contract_full_unchecked(w),
    })
}

/// `|c₍₁₎| > √2 |c₍₂₎|` for the two largest correlations.
pub fn gap_check(profile: &CorrelationProfile) -> Result<bool> {
    match profile.second_largest() {
        Some(second) => Ok(profile.largest() > std::f64::consts::SQRT_2 * second),
        None => Err(TpmError::InvalidParameter("gap check needs at least two components".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proximity {
    pub index: usize,
    pub sign: f64,
    pub error: f64,
    pub bound: f64,
    pub within: bool,
}

/// Nearest `±uᵢ` to `w` and the comparison against `350 κ √k τ³`.
pub fn proximity_check(w: &DVector<f64>, truth: &ComponentSet) -> Result<Proximity> {
    ensure_dim(truth.dim(), w.len())?;
    let dots = truth.matrix().transpose() * w;
    let mut index = 0;
    for i in 1..dots.len() {
        if dots[i].abs() > dots[index].abs() {
            index = i;
        }
    }
    let sign = if dots[index] < 0.0 { -1.0 } else { 1.0 };
    let error = (w - truth.vector(index) * sign).norm();
    let bound = recovery_bound(truth.len(), measure_incoherence(truth), truth.kappa());
    Ok(Proximity { index, sign, error, bound, within: error <= bound })
}

/// `‖w - (wᵀuᵢ)uᵢ‖ / |wᵀuᵢ|`; infinite when `|wᵀuᵢ| ≤ 1e-300`.
pub fn correlation_ratio(w: &DVector<f64>, truth: &ComponentSet, i: usize) -> Result<f64> {
    ensure_dim(truth.dim(), w.len())?;
    if i >= truth.len() {
        return Err(TpmError::InvalidParameter(format!("component index {i} out of range")));
    }
    Ok(off_axis_ratio(w, &truth.vector(i)))
}

fn check_fd_step(h: f64) -> Result<()> {
    if (1e-8..=1e-3).contains(&h) {
        Ok(())
    } else {
        Err(TpmError::InvalidParameter(format!("finite-difference step {h} outside [1e-8, 1e-3]")))
    }
}

fn retracted_objective(t: &Rank1SumTensor, w: &DVector<f64>, v: &DVector<f64>, s: f64) -> f64 {
    -0.25 * t.contract_full_unchecked(&(w + v * s).normalize())
}

/// Riemannian gradient by central differences of `f(normalize(w ± h b))` over
/// an orthonormal tangent basis `b`.
pub fn finite_difference_gradient(t: &Rank1SumTensor, w: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
    check_fd_step(h)?;
    ensure_dim(t.dim(), w.len())?;
    check_unit(w, 0, OPERATION_UNIT_TOL)?;
    let frame = householder_frame(w);
    let mut gradient = DVector::zeros(w.len());
    for j in 1..w.len() {
        let b = frame.column(j).into_owned();
        let slope = (retracted_objective(t, w, &b, h) - retracted_objective(t, w, &b, -h)) / (2.0 * h);
        gradient.axpy(slope, &b, 1.0);
    }
    Ok(gradient)
}

/// Second central difference of `f(normalize(w + s v))` at `s = 0`; equals
/// `vᵀ H v` for a unit tangent `v`.
pub fn finite_difference_curvature(t: &Rank1SumTensor, w: &DVector<f64>, v: &DVector<f64>, h: f64) -> Result<f64> {
    ensure_dim(t.dim(), w.len())?;
    ensure_dim(t.dim(), v.len())?;
    check_unit(w, 0, OPERATION_UNIT_TOL)?;
    let centre = -0.25 * t.contract_full_unchecked(w);
    let plus = retracted_objective(t, w, v, h);
    let minus = retracted_objective(t, w, v, -h);
    Ok((plus - 2.0 * centre + minus) / (h * h))
}

/// One descent start of a landscape sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub seed: u64,
    pub d: usize,
    pub k: usize,
    pub tau: f64,
    pub delta: f64,
    pub kappa: f64,
    /// `minimum`, `saddle`, `non-critical` or `stalled`.
    pub point_kind: String,
    pub gradient_norm: f64,
    pub min_eig: f64,
    pub nearest_index: usize,
    pub error: f64,
    pub bound: f64,
    pub within: bool,
    /// Terminal point; not part of the CSV layout.
    pub point: DVector<f64>,
}

/// Runs descent from `starts` uniform points (stream `(seed, start)`) and
/// certifies every terminal point.
pub fn landscape_sweep(
    truth: &ComponentSet,
    seed: u64,
    starts: usize,
    options: &DescentOptions,
    eig_tol: f64,
) -> Result<Vec<SweepRow>> {
    let t = Rank1SumTensor::from_components(truth);
    let tau = measure_incoherence(truth);
    let delta = measure_rip(truth)?;
    let kappa = truth.kappa();
    let run = |start: usize| -> Result<SweepRow> {
        let mut rng = stream_rng(seed, Domain::DescentStarts, 0, start as u32);
        let w0 = uniform_unit(&mut rng, truth.dim());
        let (point, stalled) = match manifold_gradient_descent(&t, &w0, options) {
            Ok(outcome) => (outcome.point, false),
            Err(TpmError::StalledDescent { point, .. }) => (point, true),
            Err(e) => return Err(e),
        };
        let certificate = certify(&t, &point, options.grad_tol, eig_tol)?;
        let proximity = proximity_check(&point, truth)?;
        Ok(SweepRow {
            seed,
            d: truth.dim(),
            k: truth.len(),
            tau,
            delta,
            kappa,
            point_kind: if stalled { "stalled".to_owned() } else { certificate.classification.to_string() },
            gradient_norm: certificate.gradient_norm,
            min_eig: certificate.min_tangent_eigenvalue,
            nearest_index: proximity.index,
            error: proximity.error,
            bound: proximity.bound,
            within: proximity.within,
            point,
        })
    };
    collect_rows(starts, run)
}

#[cfg(feature = "parallel")]
fn collect_rows<F: Fn(usize) -> Result<SweepRow> + Sync + Send>(starts: usize, run: F) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    (0..starts).into_par_iter().map(run).collect()
}

#[cfg(not(feature = "parallel"))]
fn collect_rows<F: Fn(usize) -> Result<SweepRow>>(starts: usize, run: F) -> Result<Vec<SweepRow>> {
    (0..starts).map(run).collect()
}
