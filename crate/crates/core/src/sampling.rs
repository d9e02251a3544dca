//! Seeded random streams and instance generators.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by
//! `(seed, domain)` and positioned by two indices, so restart `ℓ` of round
//! `i` always sees the same numbers regardless of scheduling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TpmError};
use crate::tensor::ComponentSet;

/// Independent random domains sharing a user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Components = 1,
    Weights = 2,
    Restarts = 3,
    DescentStarts = 4,
    Probes = 5,
    Experiment = 6,
}

pub fn stream_rng(seed: u64, domain: Domain, major: u32, minor: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream((u64::from(major) << 32) | u64::from(minor));
    rng
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| StandardNormal.sample(rng))
}

/// Uniform point on the unit sphere in `R^d` (normalised Gaussian).
pub fn uniform_unit<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<f64> {
    loop {
        let g = gaussian_vector(rng, d);
        let norm = g.norm();
        if norm > 1e-300 {
            return g / norm;
        }
    }
}

/// Uniform unit vector orthogonal to the unit vector `u`.
pub fn uniform_unit_orthogonal<R: Rng + ?Sized>(rng: &mut R, u: &DVector<f64>) -> DVector<f64> {
    loop {
        let mut g = gaussian_vector(rng, u.len());
        let along = u.dot(&g);
        g.axpy(-along, u, 1.0);
        let norm = g.norm();
        if norm > 1e-12 {
            return g / norm;
        }
    }
}

/// Haar-random orthogonal matrix (QR of a Gaussian matrix with sign fix).
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ComponentModel {
    /// `k` orthonormalised Gaussian vectors.
    Orthonormal,
    /// i.i.d. standard normal vectors, each normalised.
    GaussianUnit,
    /// Orthonormal vectors perturbed by `spread · g / √d` and renormalised,
    /// giving incoherence of order `spread / √d`.
    NearOrthogonal { spread: f64 },
}

fn draw_weights<R: Rng + ?Sized>(rng: &mut R, k: usize, range: (f64, f64)) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
        return Err(TpmError::InvalidParameter(format!("weight range [{lo}, {hi}]")));
    }
    Ok((0..k)
        .map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo })
        .collect())
}

/// Draws a component set; weights are uniform in `weight_range`.
pub fn generate_components(
    model: ComponentModel,
    d: usize,
    k: usize,
    weight_range: (f64, f64),
    seed: u64,
) -> Result<ComponentSet> {
    if k == 0 || d == 0 {
        return Err(TpmError::InvalidParameter(format!("d = {d}, k = {k}")));
    }
    if k > d {
        return Err(TpmError::TooManyComponents { k, d });
    }
    let mut rng = stream_rng(seed, Domain::Components, 0, 0);
    let columns: Vec<DVector<f64>> = match model {
        ComponentModel::GaussianUnit => (0..k).map(|_| uniform_unit(&mut rng, d)).collect(),
        ComponentModel::Orthonormal => orthonormal_columns(&mut rng, d, k),
        ComponentModel::NearOrthogonal { spread } => {
            if !(spread >= 0.0) {
                return Err(TpmError::InvalidParameter(format!("spread {spread}")));
            }
            let scale = spread / (d as f64).sqrt();
            orthonormal_columns(&mut rng, d, k)
                .into_iter()
                .map(|q| {
                    let g = gaussian_vector(&mut rng, d);
                    (q + g * scale).normalize()
                })
                .collect()
        }
    };
    let mut weight_rng = stream_rng(seed, Domain::Weights, 0, 0);
    let weights = draw_weights(&mut weight_rng, k, weight_range)?;
    ComponentSet::normalized(&columns, weights)
}

fn orthonormal_columns<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize) -> Vec<DVector<f64>> {
    let g = DMatrix::from_fn(d, k, |_, _| StandardNormal.sample(rng));
    let q = g.qr().q();
    q.column_iter().map(|c| c.into_owned()).collect()
}
