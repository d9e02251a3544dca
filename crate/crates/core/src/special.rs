//! Log-space regularized incomplete beta function.
//!
//! Restart planning produces restart counts far beyond `f64` range, so the
//! tail probabilities involved underflow unless handled as logarithms.

fn ln_beta(p: f64, q: f64) -> f64 {
    libm::lgamma(p) + libm::lgamma(q) - libm::lgamma(p + q)
}

/// Continued fraction for `I_x(p, q)` (modified Lentz).
fn beta_continued_fraction(p: f64, q: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const MAX_TERMS: usize = 10_000;
    let qab = p + q;
    let qap = p + 1.0;
    let qam = p - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_TERMS {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (q - m) * x / ((qam + m2) * (p + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(p + m) * (qab + m) * x / ((p + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// `ln I_x(p, q)` where the argument is supplied as `ln_x = ln x ≤ 0`, so that
/// `x` itself may underflow.
pub fn ln_beta_reg_from_ln_x(p: f64, q: f64, ln_x: f64) -> f64 {
    assert!(p > 0.0 && q > 0.0, "shape parameters must be positive");
    if ln_x >= 0.0 {
        return 0.0;
    }
    if ln_x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let x = ln_x.exp();
    let ln_one_minus_x = (-x).ln_1p();
    if x < (p + 1.0) / (p + q + 2.0) {
        let front = p * ln_x + q * ln_one_minus_x - ln_beta(p, q) - p.ln();
        front + beta_continued_fraction(p, q, x).ln()
    } else {
        // I_x(p,q) = 1 - I_{1-x}(q,p)
        let front = q * ln_one_minus_x + p * ln_x - ln_beta(p, q) - q.ln();
        let complement = (front + beta_continued_fraction(q, p, 1.0 - x).ln()).exp();
        (-complement).ln_1p()
    }
}

/// `ln I_x(p, q)` for `x ∈ [0, 1]`.
pub fn ln_beta_reg(p: f64, q: f64, x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        ln_beta_reg_from_ln_x(p, q, x.ln())
    }
}
