//! Built-in verification: implicit contractions against a dense quadruple
//! loop, derivatives against finite differences, and analytic certificates.
//!
//! The checks are generic over [`Contractions`] so that a deliberately broken
//! implementation can be run through the same harness.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::geometry::{householder_frame, riemannian_gradient, riemannian_hessian, tangent_spectrum};
use crate::sampling::{gaussian_vector, stream_rng, uniform_unit, Domain};
use crate::tensor::Rank1SumTensor;

/// The operations under test.
pub trait Contractions {
    fn contract_full(&self, w: &DVector<f64>) -> f64;
    fn contract_vector(&self, w: &DVector<f64>) -> DVector<f64>;
    fn gradient(&self, w: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, w: &DVector<f64>) -> DMatrix<f64>;
}

impl Contractions for Rank1SumTensor {
    fn contract_full(&self, w: &DVector<f64>) -> f64 {
        self.contract_full_unchecked(w)
    }

    fn contract_vector(&self, w: &DVector<f64>) -> DVector<f64> {
        self.contract_vector_unchecked(w)
    }

    fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        riemannian_gradient(self, w).expect("unit point of matching dimension")
    }

    fn hessian(&self, w: &DVector<f64>) -> DMatrix<f64> {
        riemannian_hessian(self, w).expect("unit point of matching dimension")
    }
}

pub const ORACLE_REL_TOL: f64 = 1e-10;
pub const GRADIENT_REL_TOL: f64 = 1e-6;
pub const HESSIAN_REL_TOL: f64 = 1e-4;
pub const FIXTURE_TOL: f64 = 1e-8;
pub const GRADIENT_FD_STEP: f64 = 1e-5;
pub const HESSIAN_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Largest observed error, in the units of the check's tolerance.
    pub worst: f64,
    pub tolerance: f64,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {} (worst {:e}, tolerance {:e})", self.name, self.worst, self.tolerance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &'static str, worst: f64, tolerance: f64) -> CheckResult {
    // NaN never passes
    CheckResult { name, passed: worst <= tolerance, worst, tolerance }
}

/// Random rank-one sum with coefficients in [-2, 2] so that both signs occur.
pub fn random_signed_tensor<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize) -> Rank1SumTensor {
    let mut t = Rank1SumTensor::empty(d);
    for _ in 0..k {
        let coefficient = rng.random_range(-2.0..=2.0);
        t.push_term(coefficient, uniform_unit(rng, d)).expect("unit direction");
    }
    t
}

/// `Σ coeff v(a)v(b)v(c)v(e)` materialised entry by entry.
pub fn dense_entries(t: &Rank1SumTensor) -> Vec<f64> {
    let d = t.dim();
    let mut entries = vec![0.0; d * d * d * d];
    for term in t.terms() {
        let v = &term.direction;
        let mut idx = 0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        entries[idx] += term.coefficient * v[a] * v[b] * v[c] * v[e];
                        idx += 1;
                    }
                }
            }
        }
    }
    entries
}

/// `(T(w,w,w,w), T(I,w,w,w))` from the dense entries.
pub fn dense_contractions(d: usize, entries: &[f64], w: &DVector<f64>) -> (f64, DVector<f64>) {
    let mut vector = DVector::zeros(d);
    let mut idx = 0;
    for a in 0..d {
        let mut s = 0.0;
        for b in 0..d {
            for c in 0..d {
                for e in 0..d {
                    s += entries[idx] * w[b] * w[c] * w[e];
                    idx += 1;
                }
            }
        }
        vector[a] = s;
    }
    (w.dot(&vector), vector)
}

fn objective_along<C: Contractions>(c: &C, w: &DVector<f64>, v: &DVector<f64>, s: f64) -> f64 {
    -0.25 * c.contract_full(&(w + v * s).normalize())
}

/// Largest relative disagreement with the dense oracle over `d ∈ 2..=6`,
/// `k ∈ 1..=4`, `tensors` tensors per shape and `points` points per tensor.
pub fn oracle_equivalence<C, F>(build: &F, seed: u64, tensors: usize, points: usize) -> CheckResult
where
    C: Contractions,
    F: Fn(&Rank1SumTensor) -> C,
{
    let mut worst: f64 = 0.0;
    for d in 2..=6usize {
        for k in 1..=4usize {
            for n in 0..tensors {
                let mut rng = stream_rng(seed, Domain::Experiment, (d * 10 + k) as u32, n as u32);
                let t = random_signed_tensor(&mut rng, d, k);
                let entries = dense_entries(&t);
                let under_test = build(&t);
                for _ in 0..points {
                    let w = uniform_unit(&mut rng, d);
                    let (full, vector) = dense_contractions(d, &entries, &w);
                    let full_err = (under_test.contract_full(&w) - full).abs() / full.abs().max(1.0);
                    let vector_err = (under_test.contract_vector(&w) - &vector).norm() / vector.norm().max(1.0);
                    worst = worst.max(full_err).max(vector_err);
                    if worst.is_nan() {
                        return check("dense-oracle", f64::NAN, ORACLE_REL_TOL);
                    }
                }
            }
        }
    }
    check("dense-oracle", worst, ORACLE_REL_TOL)
}

/// Relative errors `(gradient, hessian)` at one point.
///
/// The gradient error is relative to `max(‖g‖, h Σ|coeff|)`: along a single
/// term `f` is quartic in `c = vᵀw`, so the central-difference truncation
/// relative to `‖g‖` grows like `h²/c²` and the floor keeps points with tiny
/// correlations from dominating.
fn derivative_errors<C: Contractions>(
    c: &C,
    coefficient_mass: f64,
    w: &DVector<f64>,
    directions: &[DVector<f64>],
) -> (f64, f64) {
    let d = w.len();
    let frame = householder_frame(w);
    let mut fd_gradient = DVector::zeros(d);
    for j in 1..d {
        let b = frame.column(j).into_owned();
        let h = GRADIENT_FD_STEP;
        let slope = (objective_along(c, w, &b, h) - objective_along(c, w, &b, -h)) / (2.0 * h);
        fd_gradient.axpy(slope, &b, 1.0);
    }
    let gradient = c.gradient(w);
    let gradient_err = (&fd_gradient - &gradient).norm() / gradient.norm().max(coefficient_mass * GRADIENT_FD_STEP);

    let hessian = c.hessian(w);
    let scale = hessian.norm().max(1e-8);
    let centre = -0.25 * c.contract_full(w);
    let mut hessian_err: f64 = 0.0;
    for v in directions {
        let h = HESSIAN_FD_STEP;
        let fd = (objective_along(c, w, v, h) - 2.0 * centre + objective_along(c, w, v, -h)) / (h * h);
        let q = v.dot(&(&hessian * v));
        hessian_err = hessian_err.max((fd - q).abs() / q.abs().max(scale));
    }
    (gradient_err, hessian_err)
}

/// Finite-difference agreement of gradient and Hessian quadratic forms over
/// `instances` random instances with 10 random tangent directions each.
pub fn derivative_checks<C, F>(build: &F, seed: u64, instances: usize) -> [CheckResult; 2]
where
    C: Contractions,
    F: Fn(&Rank1SumTensor) -> C,
{
    let mut worst_gradient: f64 = 0.0;
    let mut worst_hessian: f64 = 0.0;
    for n in 0..instances {
        let mut rng = stream_rng(seed, Domain::Experiment, 100, n as u32);
        let d = rng.random_range(3..=8usize);
        let k = rng.random_range(1..=4usize);
        let mut t = Rank1SumTensor::empty(d);
        for _ in 0..k {
            let weight = rng.random_range(1.0..=1.25);
            t.push_term(weight, uniform_unit(&mut rng, d)).expect("unit direction");
        }
        let w = uniform_unit(&mut rng, d);
        let directions: Vec<DVector<f64>> = (0..10)
            .map(|_| {
                let g = gaussian_vector(&mut rng, d);
                (&g - &w * w.dot(&g)).normalize()
            })
            .collect();
        let mass = t.terms().iter().map(|term| term.coefficient.abs()).sum();
        let (g, h) = derivative_errors(&build(&t), mass, &w, &directions);
        worst_gradient = if g.is_nan() { f64::NAN } else { worst_gradient.max(g) };
        worst_hessian = if h.is_nan() { f64::NAN } else { worst_hessian.max(h) };
    }
    [check("gradient-fd", worst_gradient, GRADIENT_REL_TOL), check("hessian-fd", worst_hessian, HESSIAN_REL_TOL)]
}

/// Orthonormal equal-weight fixtures: `u₁` is a minimum with tangent spectrum
/// `{1}`, `(u₁+u₂)/√2` a saddle with smallest tangent eigenvalue `-1` and
/// `λ = 1/2`.
pub fn analytic_fixtures<C, F>(build: &F) -> CheckResult
where
    C: Contractions,
    F: Fn(&Rank1SumTensor) -> C,
{
    let d = 5;
    let mut t = Rank1SumTensor::empty(d);
    for i in 0..3 {
        let mut e = DVector::zeros(d);
        e[i] = 1.0;
        t.push_term(1.0, e).expect("unit direction");
    }
    let c = build(&t);
    let mut u1 = DVector::zeros(d);
    u1[0] = 1.0;
    let mut mid = DVector::zeros(d);
    mid[0] = std::f64::consts::FRAC_1_SQRT_2;
    mid[1] = std::f64::consts::FRAC_1_SQRT_2;

    let mut worst: f64 = 0.0;
    worst = worst.max(c.gradient(&u1).norm());
    for value in tangent_spectrum(&c.hessian(&u1), &u1) {
        worst = worst.max((value - 1.0).abs());
    }
    worst = worst.max((c.contract_full(&u1) - 1.0).abs());
    worst = worst.max(c.gradient(&mid).norm());
    let spectrum = tangent_spectrum(&c.hessian(&mid), &mid);
    worst = worst.max((spectrum.first().copied().unwrap_or(f64::NAN) + 1.0).abs());
    worst = worst.max((c.contract_full(&mid) - 0.5).abs());
    check("analytic-fixtures", if worst.is_nan() { f64::NAN } else { worst }, FIXTURE_TOL)
}

/// Runs every check against `build(t)`.
pub fn run_selftest_with<C, F>(build: F, seed: u64) -> SelftestReport
where
    C: Contractions,
    F: Fn(&Rank1SumTensor) -> C,
{
    let mut checks = vec![oracle_equivalence(&build, seed, 20, 100)];
    checks.extend(derivative_checks(&build, seed, 50));
    checks.push(analytic_fixtures(&build));
    SelftestReport { checks }
}

pub fn run_selftest(seed: u64) -> SelftestReport {
    run_selftest_with(Rank1SumTensor::clone, seed)
}
