//! WebAssembly bindings for the static page in `www/`.
//!
//! Points on the sphere cross the boundary as (θ, φ) pairs with
//! `w = (sin θ cos φ, sin θ sin φ, cos θ)`.

use std::f64::consts::PI;

use nalgebra::DVector;
use tpm_core::decompose::{match_components, tpm, tpmr};
use tpm_core::geometry::{measure_incoherence, objective};
use tpm_core::sampling::{generate_components, ComponentModel};
use tpm_core::{ComponentSet, Rank1SumTensor};
use wasm_bindgen::prelude::*;

fn to_error(e: tpm_core::TpmError) -> JsError {
    JsError::new(&e.to_string())
}

fn point(theta: f64, phi: f64) -> DVector<f64> {
    DVector::from_vec(vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()])
}

fn angles(w: &DVector<f64>) -> (f64, f64) {
    let theta = w[2].clamp(-1.0, 1.0).acos();
    let phi = w[1].atan2(w[0]).rem_euclid(2.0 * PI);
    (theta, phi)
}

/// A random instance in three dimensions.
#[wasm_bindgen]
pub struct SphereDemo {
    set: ComponentSet,
    tensor: Rank1SumTensor,
}

#[wasm_bindgen]
impl SphereDemo {
    /// `k ≤ 3` unit components with weights drawn from `[1, 1.25]`.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, k: u32) -> Result<SphereDemo, JsError> {
        let set = generate_components(ComponentModel::GaussianUnit, 3, k as usize, (1.0, 1.25), u64::from(seed))
            .map_err(to_error)?;
        let tensor = Rank1SumTensor::from_components(&set);
        Ok(Self { set, tensor })
    }

    /// `(θ, φ, λ)` for each component and its antipode.
    pub fn components(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(6 * self.set.len());
        for i in 0..self.set.len() {
            let u = self.set.vector(i);
            for v in [u.clone(), -u] {
                let (theta, phi) = angles(&v);
                out.extend([theta, phi, self.set.weights()[i]]);
            }
        }
        out
    }

    pub fn incoherence(&self) -> f64 {
        measure_incoherence(&self.set)
    }

    /// `f(w) = -T(w,w,w,w)/4` on a `rows × cols` grid, θ ∈ [0, π] by row and
    /// φ ∈ [0, 2π) by column, sampled at cell centres.
    pub fn heatmap(&self, rows: u32, cols: u32) -> Vec<f64> {
        let mut out = Vec::with_capacity((rows * cols) as usize);
        for r in 0..rows {
            let theta = PI * (f64::from(r) + 0.5) / f64::from(rows);
            for c in 0..cols {
                let phi = 2.0 * PI * (f64::from(c) + 0.5) / f64::from(cols);
                out.push(objective(&self.tensor, &point(theta, phi)).unwrap_or(f64::NAN));
            }
        }
        out
    }

    /// Power iterates from `(θ, φ)` as `(θ, φ, λ)` triples, the start first
    /// with `λ = T(w₀,w₀,w₀,w₀)`. Stops early once an iterate repeats.
    pub fn trajectory(&self, theta: f64, phi: f64, steps: u32) -> Result<Vec<f64>, JsError> {
        let mut w = point(theta, phi);
        let mut out = vec![theta, phi, self.tensor.contract_full(&w).map_err(to_error)?];
        for _ in 0..steps {
            let step = tpm(&self.tensor, &w, 1).map_err(to_error)?;
            let moved = (&step.vector - &w).norm().min((&step.vector + &w).norm());
            let (t, p) = angles(&step.vector);
            out.extend([t, p, step.weight]);
            w = step.vector;
            if moved <= 1e-13 {
                break;
            }
        }
        Ok(out)
    }
}

/// For each spread, a near-orthogonal instance in dimension `d` is decomposed
/// with `restarts` restarts per round. Returns `(spread, τ, worst vector error,
/// 350 κ √k τ³)` per spread.
#[wasm_bindgen]
pub fn recovery_sweep(seed: u32, d: u32, k: u32, restarts: u32, spreads: Vec<f64>) -> Result<Vec<f64>, JsError> {
    let (d, k) = (d as usize, k as usize);
    let mut out = Vec::with_capacity(4 * spreads.len());
    for spread in spreads {
        let set = generate_components(ComponentModel::NearOrthogonal { spread }, d, k, (1.0, 1.25), u64::from(seed))
            .map_err(to_error)?;
        let t = Rank1SumTensor::from_components(&set);
        let extracted = tpmr(&t, 100, restarts as usize, k, u64::from(seed)).map_err(to_error)?;
        let report = match_components(&extracted, &set).map_err(to_error)?;
        let worst = report.vector_errors.iter().copied().fold(0.0, f64::max);
        out.extend([spread, report.tau, worst, tpm_core::noise_floor(k, report.tau, report.kappa)]);
    }
    Ok(out)
}
