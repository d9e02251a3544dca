//! Fourth-order symmetric tensors stored as signed sums of rank-one terms.
//!
//! [`Rank1SumTensor`] never materialises its `d⁴` entries: both contractions
//! cost `O(d · terms)`. [`DenseTensor4`] exists only as an oracle for small `d`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Result, TpmError};

/// Unit-norm tolerance applied when a component set or tensor term is built.
pub const CONSTRUCTION_UNIT_TOL: f64 = 1e-12;
/// Unit-norm tolerance applied to evaluation points.
pub const OPERATION_UNIT_TOL: f64 = 1e-9;
/// Default dimension cap for [`Rank1SumTensor::to_dense`].
pub const DENSE_DIM_CAP: usize = 8;

pub(crate) fn check_unit(w: &DVector<f64>, index: usize, tol: f64) -> Result<()> {
    let norm = w.norm();
    if (norm - 1.0).abs() <= tol {
        Ok(())
    } else {
        Err(TpmError::NotUnitNorm { index, norm })
    }
}

/// Components `uᵢ` (stored as the columns of a `d × k` matrix) with positive weights `λᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSet {
    vectors: DMatrix<f64>,
    weights: Vec<f64>,
}

impl ComponentSet {
    pub fn from_columns(vectors: DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        let (d, k) = vectors.shape();
        if d == 0 || k == 0 {
            return Err(TpmError::InvalidComponents(format!(
                "need d >= 1 and k >= 1, got d = {d}, k = {k}"
            )));
        }
        if k > d {
            return Err(TpmError::TooManyComponents { k, d });
        }
        ensure_dim(k, weights.len())?;
        for (index, column) in vectors.column_iter().enumerate() {
            let norm = column.norm();
            if !norm.is_finite() || (norm - 1.0).abs() > CONSTRUCTION_UNIT_TOL {
                return Err(TpmError::NotUnitNorm { index, norm });
            }
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(TpmError::NonPositiveWeight { index, value });
            }
        }
        Ok(Self { vectors, weights })
    }

    pub fn new(vectors: &[DVector<f64>], weights: Vec<f64>) -> Result<Self> {
        let d = vectors.first().map_or(0, |v| v.len());
        for v in vectors {
            ensure_dim(d, v.len())?;
        }
        Self::from_columns(DMatrix::from_columns(vectors), weights)
    }

    pub fn equal_weights(vectors: &[DVector<f64>]) -> Result<Self> {
        Self::new(vectors, vec![1.0; vectors.len()])
    }

    /// Normalises each vector before validating, for callers holding raw directions.
    pub fn normalized(vectors: &[DVector<f64>], weights: Vec<f64>) -> Result<Self> {
        let unit: Vec<DVector<f64>> = vectors.iter().map(|v| v.normalize()).collect();
        Self::new(&unit, weights)
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.vectors.column(i).into_owned()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `λmax / λmin`.
    pub fn kappa(&self) -> f64 {
        let max = self.weights.iter().copied().fold(f64::MIN, f64::max);
        let min = self.weights.iter().copied().fold(f64::MAX, f64::min);
        max / min
    }

    /// The components listed in `order`, in that order.
    pub fn select(&self, order: &[usize]) -> Result<Self> {
        let mut columns = Vec::with_capacity(order.len());
        let mut weights = Vec::with_capacity(order.len());
        for &i in order {
            if i >= self.len() {
                return Err(TpmError::InvalidParameter(format!(
                    "component index {i} out of range for k = {}",
                    self.len()
                )));
            }
            columns.push(self.vector(i));
            weights.push(self.weights[i]);
        }
        Self::new(&columns, weights)
    }

    /// Applies `q` to every component (used for rotation-equivariance checks).
    pub fn transformed(&self, q: &DMatrix<f64>) -> Result<Self> {
        ensure_dim(self.dim(), q.ncols())?;
        Self::from_columns(q * &self.vectors, self.weights.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ComponentSetFile::from(self)).expect("plain numeric data")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ComponentSetFile = serde_json::from_str(text)
            .map_err(|e| TpmError::InvalidComponents(e.to_string()))?;
        Self::try_from(file)
    }
}

/// On-disk layout: one row per component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentSetFile {
    pub d: usize,
    pub k: usize,
    pub weights: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl From<&ComponentSet> for ComponentSetFile {
    fn from(set: &ComponentSet) -> Self {
        Self {
            d: set.dim(),
            k: set.len(),
            weights: set.weights.clone(),
            vectors: set
                .vectors
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
        }
    }
}

impl TryFrom<ComponentSetFile> for ComponentSet {
    type Error = TpmError;

    fn try_from(file: ComponentSetFile) -> Result<Self> {
        ensure_dim(file.k, file.vectors.len())?;
        ensure_dim(file.k, file.weights.len())?;
        let mut columns = Vec::with_capacity(file.k);
        for row in file.vectors {
            ensure_dim(file.d, row.len())?;
            columns.push(DVector::from_vec(row));
        }
        if columns.is_empty() {
            return Err(TpmError::InvalidComponents("no components".into()));
        }
        ComponentSet::new(&columns, file.weights)
    }
}

impl Serialize for ComponentSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ComponentSetFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComponentSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = ComponentSetFile::deserialize(d)?;
        ComponentSet::try_from(file).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOneTerm {
    pub coefficient: f64,
    pub direction: DVector<f64>,
}

/// `Σ coeffᵢ vᵢ⊗⁴` with unit `vᵢ`. Negative coefficients arise from deflation.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1SumTensor {
    dim: usize,
    terms: Vec<RankOneTerm>,
}

impl Rank1SumTensor {
    pub fn empty(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    /// One term `λᵢ uᵢ⊗⁴` per component.
    pub fn from_components(components: &ComponentSet) -> Self {
        let terms = (0..components.len())
            .map(|i| RankOneTerm {
                coefficient: components.weights()[i],
                direction: components.vector(i),
            })
            .collect();
        Self { dim: components.dim(), terms }
    }

    /// Adds `coefficient · direction⊗⁴`. The direction must be unit within 1e-12.
    pub fn push_term(&mut self, coefficient: f64, direction: DVector<f64>) -> Result<()> {
        ensure_dim(self.dim, direction.len())?;
        check_unit(&direction, self.terms.len(), CONSTRUCTION_UNIT_TOL)?;
        if !coefficient.is_finite() {
            return Err(TpmError::InvalidParameter(format!("coefficient {coefficient}")));
        }
        self.terms.push(RankOneTerm { coefficient, direction });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[RankOneTerm] {
        &self.terms
    }

    fn check_point(&self, w: &DVector<f64>) -> Result<()> {
        ensure_dim(self.dim, w.len())?;
        check_unit(w, 0, OPERATION_UNIT_TOL)
    }

    /// `T(w,w,w,w) = Σ coeffᵢ (vᵢᵀw)⁴`.
    pub fn contract_full(&self, w: &DVector<f64>) -> Result<f64> {
        self.check_point(w)?;
        Ok(self.contract_full_unchecked(w))
    }

    /// `T(I,w,w,w) = Σ coeffᵢ (vᵢᵀw)³ vᵢ`.
    pub fn contract_vector(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_point(w)?;
        Ok(self.contract_vector_unchecked(w))
    }

    pub(crate) fn contract_full_unchecked(&self, w: &DVector<f64>) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient * t.direction.dot(w).powi(4))
            .sum()
    }

    pub(crate) fn contract_vector_unchecked(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for t in &self.terms {
            let c = t.direction.dot(w);
            out.axpy(t.coefficient * c * c * c, &t.direction, 1.0);
        }
        out
    }

    /// Appends `-lambda_hat · u_hat⊗⁴`.
    pub fn deflate(&self, u_hat: &DVector<f64>, lambda_hat: f64) -> Result<Self> {
        ensure_dim(self.dim, u_hat.len())?;
        check_unit(u_hat, self.terms.len(), OPERATION_UNIT_TOL)?;
        let mut out = self.clone();
        out.push_term(-lambda_hat, u_hat.normalize())?;
        Ok(out)
    }

    /// Every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| RankOneTerm { coefficient: t.coefficient * factor, direction: t.direction.clone() })
            .collect();
        Self { dim: self.dim, terms }
    }

    pub fn to_dense(&self) -> Result<DenseTensor4> {
        self.to_dense_capped(DENSE_DIM_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<DenseTensor4> {
        let d = self.dim;
        if d > cap {
            return Err(TpmError::DimensionOverCap { d, cap });
        }
        let mut entries = vec![0.0; d * d * d * d];
        for t in &self.terms {
            let u = &t.direction;
            for a in 0..d {
                for b in 0..d {
                    let ab = t.coefficient * u[a] * u[b];
                    for c in 0..d {
                        let abc = ab * u[c];
                        let base = ((a * d + b) * d + c) * d;
                        for e in 0..d {
                            entries[base + e] += abc * u[e];
                        }
                    }
                }
            }
        }
        Ok(DenseTensor4 { dim: d, entries })
    }
}

/// Explicit `d⁴` array, indexed `(i, j, k, l)` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor4 {
    dim: usize,
    entries: Vec<f64>,
}

impl DenseTensor4 {
    pub fn from_entries(dim: usize, entries: Vec<f64>) -> Result<Self> {
        ensure_dim(dim.pow(4), entries.len())?;
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let d = self.dim;
        self.entries[((i * d + j) * d + k) * d + l]
    }

    /// Quadruple sum `Σ T(i,j,k,l) x(i) y(j) z(k) t(l)`.
    pub fn multilinear(
        &self,
        x: &DVector<f64>,
        y: &DVector<f64>,
        z: &DVector<f64>,
        t: &DVector<f64>,
    ) -> Result<f64> {
        for v in [x, y, z, t] {
            ensure_dim(self.dim, v.len())?;
        }
        let d = self.dim;
        let mut total = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        total += self.get(i, j, k, l) * x[i] * y[j] * z[k] * t[l];
                    }
                }
            }
        }
        Ok(total)
    }

    pub fn contract_full(&self, w: &DVector<f64>) -> Result<f64> {
        self.multilinear(w, w, w, w)
    }

    /// `Σ_{j,k,l} T(i,j,k,l) w(j) w(k) w(l) eᵢ`.
    pub fn contract_vector(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_dim(self.dim, w.len())?;
        let d = self.dim;
        Ok(DVector::from_fn(d, |i, _| {
            let mut total = 0.0;
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        total += self.get(i, j, k, l) * w[j] * w[k] * w[l];
                    }
                }
            }
            total
        }))
    }

    /// Largest deviation between `T(i,j,k,l)` and the entry under `perm` of its indices.
    pub fn asymmetry_under(&self, perm: [usize; 4]) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let idx = [i, j, k, l];
                        let p = [idx[perm[0]], idx[perm[1]], idx[perm[2]], idx[perm[3]]];
                        let diff = (self.get(i, j, k, l) - self.get(p[0], p[1], p[2], p[3])).abs();
                        worst = worst.max(diff);
                    }
                }
            }
        }
        worst
    }
}
