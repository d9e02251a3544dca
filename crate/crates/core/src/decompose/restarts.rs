//! Restart-count planning and the good-initialization predicate.
//!
//! The initialization conditions grow like `0.5 √ln L`, so the smallest
//! feasible `L` routinely exceeds `u64` (and even `f64`) range. Restart counts
//! are therefore carried as [`RestartCount`], exact when small and as a
//! natural logarithm otherwise.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::error::{Result, TpmError};
use crate::geometry::measure_incoherence;
use crate::sampling::uniform_unit_orthogonal;
use crate::special::ln_beta_reg_from_ln_x;
use crate::tensor::ComponentSet;

/// Largest count kept as an exact integer; beyond it planning works in `ln L`.
const EXACT_LIMIT: u64 = 1 << 62;
/// Relative precision of the log-space bisection.
const LN_BISECTION_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RestartCount {
    Exact(u64),
    Huge { ln: f64 },
}

impl RestartCount {
    pub fn from_ln(ln: f64) -> Self {
        Self::Huge { ln }
    }

    pub fn ln(&self) -> f64 {
        match *self {
            Self::Exact(n) => (n as f64).ln(),
            Self::Huge { ln } => ln,
        }
    }

    pub fn exact(&self) -> Option<u64> {
        match *self {
            Self::Exact(n) => Some(n),
            Self::Huge { .. } => None,
        }
    }
}

impl From<u64> for RestartCount {
    fn from(n: u64) -> Self {
        Self::Exact(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionsMet {
    /// `A₁ ≥ 2 B₁`.
    pub separation: bool,
    /// `A₁ / C₁ ≥ τ`.
    pub magnitude: bool,
}

impl ConditionsMet {
    pub fn both(&self) -> bool {
        self.separation && self.magnitude
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartPlan {
    /// Exact restart count, or `null` when it only exists as `log_L`.
    #[serde(rename = "L")]
    pub restarts: Option<u64>,
    #[serde(rename = "log_L")]
    pub ln_restarts: f64,
    pub eta: f64,
    pub tau: f64,
    pub d: usize,
    pub k: usize,
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "B1")]
    pub b1: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    pub conditions_met: ConditionsMet,
}

impl RestartPlan {
    pub fn restart_count(&self) -> RestartCount {
        match self.restarts {
            Some(n) => RestartCount::Exact(n),
            None => RestartCount::Huge { ln: self.ln_restarts },
        }
    }
}

fn check_domain(eta: f64, tau: f64, d: usize, k: usize) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(TpmError::InvalidParameter(format!("eta must lie in (0, 1), got {eta}")));
    }
    if !(0.0..1.0).contains(&tau) {
        return Err(TpmError::InvalidParameter(format!("tau must lie in [0, 1), got {tau}")));
    }
    if d == 0 || k == 0 {
        return Err(TpmError::InvalidParameter(format!("d = {d}, k = {k}")));
    }
    Ok(())
}

/// Evaluates `A₁(L, η)`, `B₁(L, η, τ)`, `C₁(η, d)` and both conditions.
pub fn restart_conditions(restarts: RestartCount, eta: f64, tau: f64, d: usize, k: usize) -> Result<RestartPlan> {
    check_domain(eta, tau, d, k)?;
    let ln_l = restarts.ln();
    if !(ln_l >= LN_2) || !ln_l.is_finite() {
        return Err(TpmError::InvalidParameter("restart count must be at least 2".into()));
    }
    Ok(evaluate(restarts, ln_l, eta, tau, d, k))
}

fn evaluate(restarts: RestartCount, ln_l: f64, eta: f64, tau: f64, d: usize, k: usize) -> RestartPlan {
    let ln_12_eta = (12.0 / eta).ln();
    let ln_3_eta = (3.0 / eta).ln();
    let spread = 1.0 + tau * tau;
    let a1 = 0.5 * ln_l.sqrt() - (2.0 * ln_12_eta).sqrt();
    let b1 = (2.0 * spread * (2.0 * k as f64).ln()).sqrt()
        + tau * ((2.0 * (LN_2 + ln_l)).sqrt() + (2.0 * ln_12_eta).sqrt())
        + (2.0 * spread * ln_3_eta).sqrt();
    let c1 = (3.0 * ln_3_eta * d as f64 + 2.0 * ln_3_eta).sqrt();
    RestartPlan {
        restarts: restarts.exact(),
        ln_restarts: ln_l,
        eta,
        tau,
        d,
        k,
        a1,
        b1,
        c1,
        conditions_met: ConditionsMet { separation: a1 >= 2.0 * b1, magnitude: a1 / c1 >= tau },
    }
}

/// Smallest restart count up to `cap` meeting both conditions. The search
/// doubles `L` (and, past `2^62`, doubles `ln L`) until feasible, then bisects
/// in `ln L` to relative precision 1e-12. Counts below `2^62` are refined to
/// the exact minimal integer.
pub fn plan_restarts(eta: f64, tau: f64, d: usize, k: usize, cap: RestartCount) -> Result<RestartPlan> {
    check_domain(eta, tau, d, k)?;
    let cap_ln = cap.ln();
    let infeasible = || TpmError::NoFeasibleRestarts { max_ln_restarts: cap_ln };
    let feasible = |ln_l: f64| evaluate(RestartCount::Huge { ln: ln_l }, ln_l, eta, tau, d, k).conditions_met.both();
    let exact_limit_ln = (EXACT_LIMIT as f64).ln();

    let mut lo_ln = 0.0;
    let mut hi_ln = LN_2;
    loop {
        let probe = hi_ln.min(cap_ln);
        if probe < LN_2 {
            return Err(infeasible());
        }
        if feasible(probe) {
            hi_ln = probe;
            break;
        }
        if probe >= cap_ln {
            return Err(infeasible());
        }
        lo_ln = probe;
        hi_ln = if probe < exact_limit_ln { probe + LN_2 } else { probe * 2.0 };
    }
    if lo_ln < LN_2 {
        return Ok(evaluate(RestartCount::Exact(2), LN_2, eta, tau, d, k));
    }
    while hi_ln - lo_ln > LN_BISECTION_RTOL * hi_ln {
        let mid = 0.5 * (lo_ln + hi_ln);
        if feasible(mid) {
            hi_ln = mid;
        } else {
            lo_ln = mid;
        }
    }
    if hi_ln < exact_limit_ln {
        let cap_exact = cap.exact().unwrap_or(u64::MAX);
        let mut n = (hi_ln.exp().ceil() as u64).clamp(2, cap_exact);
        while n > 2 && feasible(((n - 1) as f64).ln()) {
            n -= 1;
        }
        while !feasible((n as f64).ln()) {
            if n >= cap_exact {
                return Err(infeasible());
            }
            n += 1;
        }
        return Ok(evaluate(RestartCount::Exact(n), (n as f64).ln(), eta, tau, d, k));
    }
    Ok(evaluate(RestartCount::Huge { ln: hi_ln }, hi_ln, eta, tau, d, k))
}

/// `|vᵀu_t| ≥ τ` and `|vᵀu_t| ≥ 2|vᵀu_j|` for all `j ≠ t`, with `τ` the
/// measured incoherence of `truth`.
pub fn is_good_initialization(v: &DVector<f64>, truth: &ComponentSet, target: usize) -> bool {
    if v.len() != truth.dim() || target >= truth.len() {
        return false;
    }
    let tau = measure_incoherence(truth);
    let c = truth.matrix().transpose() * v;
    let main = c[target].abs();
    main >= tau && (0..c.len()).filter(|&j| j != target).all(|j| main >= 2.0 * c[j].abs())
}

/// `ln P(|vᵀu| > a)` for `v` uniform on `S^{d-1}`, as a function of
/// `ln(1 - a²)`: `vᵀu` squared is `Beta(1/2, (d-1)/2)`.
pub fn ln_abs_correlation_survival(d: usize, ln_one_minus_a2: f64) -> f64 {
    ln_beta_reg_from_ln_x(0.5 * (d as f64 - 1.0), 0.5, ln_one_minus_a2)
}

/// Draws the restart that maximises `|vᵀu_target|` among `restarts` uniform
/// unit vectors, directly from its distribution: the maximum correlation by
/// inverse transform in log space, then the remaining direction uniformly on
/// the sphere orthogonal to `u_target`.
pub fn sample_best_restart<R: Rng + ?Sized>(
    rng: &mut R,
    truth: &ComponentSet,
    target: usize,
    restarts: RestartCount,
) -> Result<DVector<f64>> {
    if target >= truth.len() {
        return Err(TpmError::InvalidParameter(format!("target {target} out of range")));
    }
    let d = truth.dim();
    let u = truth.vector(target);
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    if d == 1 {
        return Ok(u * sign);
    }
    let ln_l = restarts.ln();
    // P(max > a) = 1 - (1 - S(a))^L = 1 - V  =>  S(a) = -expm1(ln V / L)
    let v: f64 = 1.0 - rng.random::<f64>();
    let ln_v = v.ln();
    let ln_survival = if ln_v == 0.0 {
        f64::NEG_INFINITY
    } else {
        let ln_neg_z = (-ln_v).ln() - ln_l;
        if ln_neg_z < -30.0 {
            ln_neg_z
        } else {
            (-(-ln_neg_z.exp()).exp_m1()).ln()
        }
    };
    let y = solve_ln_one_minus_a2(d, ln_survival);
    let along = (-y.exp_m1()).max(0.0).sqrt();
    let across = (0.5 * y).exp();
    let z = uniform_unit_orthogonal(rng, &u);
    Ok((u * (sign * along) + z * across).normalize())
}

fn solve_ln_one_minus_a2(d: usize, ln_survival: f64) -> f64 {
    if ln_survival == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if ln_survival >= 0.0 {
        return 0.0;
    }
    let mut hi = 0.0;
    let mut lo = -1.0;
    while ln_abs_correlation_survival(d, lo) > ln_survival {
        hi = lo;
        lo *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ln_abs_correlation_survival(d, mid) > ln_survival {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * lo.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}
