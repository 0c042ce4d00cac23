//! Matrix containers, the polar (weight/direction) decomposition, mixed norms,
//! angular and subspace metrics, and the proximal primitives shared by the
//! solvers.
//!
//! Orientation is fixed throughout the crate: a signal `Z` is `k x n`, the `n`
//! columns have length `k`, and sparsity is counted column-wise.

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};

/// Dense real matrix stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    /// Builds a `rows x cols` matrix from column-major entries.
    pub fn new(rows: usize, cols: usize, column_major: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if column_major.len() != rows * cols {
            return Err(shape(
                format!("{} entries", rows * cols),
                format!("{} entries", column_major.len()),
            ));
        }
        Self::from_dmatrix(DMatrix::from_vec(rows, cols, column_major))
    }

    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::InvalidParameter("empty matrix".into()));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(m))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    /// Builds a matrix whose `i`-th column is `columns[i]`.
    pub fn from_columns(columns: &[DVector<f64>]) -> Result<Self> {
        let k = columns.first().map(|c| c.len()).unwrap_or(0);
        if columns.iter().any(|c| c.len() != k) {
            return Err(shape(format!("columns of length {k}"), "ragged columns"));
        }
        Self::from_dmatrix(DMatrix::from_columns(columns))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn column(&self, i: usize) -> DVectorView<'_, f64> {
        self.0.column(i)
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Column-major entries; column `i` occupies `i*k .. (i+1)*k`.
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.0.column_iter().map(|c| c.norm()).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// `‖self − reference‖_F / ‖reference‖_F`; falls back to the absolute
    /// error when the reference vanishes.
    pub fn relative_error(&self, reference: &DenseMatrix) -> f64 {
        let diff = (&self.0 - &reference.0).norm();
        let denom = reference.0.norm();
        if denom > 0.0 {
            diff / denom
        } else {
            diff
        }
    }

    /// Matrix with all columns outside `support` set to zero.
    pub fn restrict_columns(&self, support: &SupportSet) -> DenseMatrix {
        let mut out = DMatrix::zeros(self.rows(), self.cols());
        for &i in support.indices() {
            out.set_column(i, &self.0.column(i));
        }
        DenseMatrix(out)
    }
}

/// A matrix written as nonnegative column weights times unit column directions.
///
/// Columns with zero weight carry no direction.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarMatrix {
    k: usize,
    weights: Vec<f64>,
    directions: Vec<Option<DVector<f64>>>,
}

impl PolarMatrix {
    /// Assembles a polar matrix, normalizing the supplied directions.
    ///
    /// A direction must be present for every positive weight.
    pub fn new(k: usize, weights: Vec<f64>, directions: Vec<Option<DVector<f64>>>) -> Result<Self> {
        if weights.len() != directions.len() {
            return Err(shape(
                format!("{} directions", weights.len()),
                format!("{} directions", directions.len()),
            ));
        }
        let mut dirs = Vec::with_capacity(directions.len());
        for (i, (w, d)) in weights.iter().zip(directions).enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "weight {i} must be finite and nonnegative, got {w}"
                )));
            }
            match d {
                Some(h) => {
                    if h.len() != k {
                        return Err(shape(format!("direction of length {k}"), format!("{}", h.len())));
                    }
                    dirs.push(Some(unit(&h)?));
                }
                None if *w > 0.0 => return Err(Error::AbsentDirection(i)),
                None => dirs.push(None),
            }
        }
        Ok(Self {
            k,
            weights,
            directions: dirs,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn direction(&self, i: usize) -> Option<&DVector<f64>> {
        self.directions[i].as_ref()
    }

    pub fn directions(&self) -> &[Option<DVector<f64>>] {
        &self.directions
    }

    /// `‖z‖₁`, which equals the ℓ₁,₂-norm of the recomposed matrix.
    pub fn weight_l1(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Indices of the nonzero columns.
    pub fn support(&self) -> SupportSet {
        SupportSet {
            n: self.n(),
            indices: (0..self.n()).filter(|&i| self.weights[i] > 0.0).collect(),
        }
    }

    pub fn recompose(&self) -> DenseMatrix {
        let mut out = DMatrix::zeros(self.k, self.n());
        for (i, (w, d)) in self.weights.iter().zip(&self.directions).enumerate() {
            if let Some(h) = d {
                out.set_column(i, &(h * *w));
            }
        }
        DenseMatrix(out)
    }
}

/// Splits every column into its Euclidean norm and unit direction.
pub fn polar_decompose(z: &DenseMatrix) -> PolarMatrix {
    let mut weights = Vec::with_capacity(z.cols());
    let mut directions = Vec::with_capacity(z.cols());
    for col in z.0.column_iter() {
        let norm = col.norm();
        weights.push(norm);
        directions.push(if norm > 0.0 { Some(col / norm) } else { None });
    }
    PolarMatrix {
        k: z.rows(),
        weights,
        directions,
    }
}

/// Sum of the Euclidean norms of the columns.
pub fn l12_norm(z: &DenseMatrix) -> f64 {
    z.0.column_iter().map(|c| c.norm()).sum()
}

/// Largest Euclidean column norm.
pub fn linf2_norm(z: &DenseMatrix) -> f64 {
    z.0.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn unit(v: &DVector<f64>) -> Result<DVector<f64>> {
    let norm = v.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidDirection(format!(
            "cannot normalize vector of norm {norm}"
        )));
    }
    Ok(v / norm)
}

/// Geodesic distance `arccos⟨h, g⟩` on the unit sphere.
///
/// Inputs are renormalized; the inner product is clamped to `[-1, 1]`.
pub fn angular_distance(h: &DVector<f64>, g: &DVector<f64>) -> Result<f64> {
    if h.len() != g.len() {
        return Err(shape(format!("length {}", h.len()), format!("length {}", g.len())));
    }
    let h = unit(h)?;
    let g = unit(g)?;
    Ok(h.dot(&g).clamp(-1.0, 1.0).acos())
}

/// Linear subspace of `R^k` given by an orthonormal basis (stored as columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

const ORTHONORMAL_TOL: f64 = 1e-10;

impl Subspace {
    /// Wraps an orthonormal basis; rejects bases violating `BᵀB = I`.
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let (k, r) = basis.shape();
        if r > k {
            return Err(Error::RankOutOfRange { rank: r, max: k });
        }
        let gram = basis.transpose() * &basis;
        let err = (gram - DMatrix::<f64>::identity(r, r)).amax();
        if err > ORTHONORMAL_TOL {
            return Err(Error::InvalidParameter(format!(
                "basis is not orthonormal (max deviation {err:.3e})"
            )));
        }
        Ok(Self { basis })
    }

    /// The trivial subspace `{0}` of `R^k`.
    pub fn zero(k: usize) -> Self {
        Self {
            basis: DMatrix::zeros(k, 0),
        }
    }

    /// The whole space `R^k`.
    pub fn full(k: usize) -> Self {
        Self {
            basis: DMatrix::identity(k, k),
        }
    }

    /// Orthonormalizes the span of the given vectors, dropping directions
    /// whose singular value is below `1e-10` times the largest.
    pub fn span_of(k: usize, vectors: &[DVector<f64>]) -> Result<Self> {
        if vectors.is_empty() {
            return Ok(Self::zero(k));
        }
        if vectors.iter().any(|v| v.len() != k) {
            return Err(shape(format!("vectors of length {k}"), "mismatched length"));
        }
        let m = DMatrix::from_columns(vectors);
        let svd = sorted_svd(&m);
        let top = svd.values.first().copied().unwrap_or(0.0);
        let rank = svd.values.iter().filter(|&&s| s > 1e-10 * top && s > 0.0).count();
        Ok(Self {
            basis: svd.u.columns(0, rank).into_owned(),
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Orthogonal projection onto the subspace.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.dim() == 0 {
            return DVector::zeros(v.len());
        }
        &self.basis * (self.basis.transpose() * v)
    }

    /// Orthogonal projection onto the orthogonal complement.
    pub fn project_perp(&self, v: &DVector<f64>) -> DVector<f64> {
        v - self.project(v)
    }

    /// Dense `k x k` projector matrix.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

/// `sin ∠(E, F) = ‖Π_{E⊥} Π_F‖`.
///
/// With `F` orthonormal this is the largest singular value of
/// `F − E(EᵀF)`.
pub fn principal_angle_sin(e: &Subspace, f: &Subspace) -> Result<f64> {
    if e.ambient_dim() != f.ambient_dim() {
        return Err(shape(
            format!("ambient dimension {}", e.ambient_dim()),
            format!("{}", f.ambient_dim()),
        ));
    }
    if f.dim() == 0 {
        return Ok(0.0);
    }
    let residual = if e.dim() == 0 {
        f.basis.clone()
    } else {
        &f.basis - &e.basis * (e.basis.transpose() * &f.basis)
    };
    let top = residual.singular_values().max();
    Ok(top.clamp(0.0, 1.0))
}

/// Proximal map of `t‖·‖₂`: `(1 − t/‖v‖₂)₊ · v`.
pub fn block_soft_threshold(v: &DVector<f64>, t: f64) -> DVector<f64> {
    let mut out = v.clone();
    block_soft_threshold_in_place(out.as_mut_slice(), t);
    out
}

pub(crate) fn block_soft_threshold_in_place(v: &mut [f64], t: f64) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = if norm > t { 1.0 - t / norm } else { 0.0 };
    v.iter_mut().for_each(|x| *x *= scale);
}

/// Span of the `r` leading left singular vectors of `z`.
pub fn top_r_left_subspace(z: &DenseMatrix, r: usize) -> Result<Subspace> {
    let max = z.rows().min(z.cols());
    if r == 0 || r > max {
        return Err(Error::RankOutOfRange { rank: r, max });
    }
    let svd = sorted_svd(&z.0);
    Ok(Subspace {
        basis: svd.u.columns(0, r).into_owned(),
    })
}

/// Singular values of `z` in nonincreasing order.
pub fn singular_values(z: &DenseMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = z.0.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Thin SVD with singular values sorted nonincreasingly (stable on ties) and
/// each left singular vector signed so its first nonzero entry is positive.
pub(crate) struct SortedSvd {
    pub u: DMatrix<f64>,
    pub values: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

pub(crate) fn sorted_svd(m: &DMatrix<f64>) -> SortedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let values = svd.singular_values;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let mut su = DMatrix::zeros(u.nrows(), order.len());
    let mut sv = DMatrix::zeros(order.len(), v_t.ncols());
    let mut sorted = Vec::with_capacity(order.len());
    for (dst, &src) in order.iter().enumerate() {
        let mut col = u.column(src).into_owned();
        let mut row = v_t.row(src).into_owned();
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                col.neg_mut();
                row.neg_mut();
            }
        }
        su.set_column(dst, &col);
        sv.set_row(dst, &row);
        sorted.push(values[src]);
    }
    SortedSvd {
        u: su,
        values: sorted,
        v_t: sv,
    }
}

/// Strictly increasing set of column indices in `[0, n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SupportSet {
    n: usize,
    indices: Vec<usize>,
}

impl SupportSet {
    /// Validates that `indices` is strictly increasing and below `n`.
    pub fn new(n: usize, indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "support indices must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::InvalidParameter(format!(
                    "support index {last} out of range for n = {n}"
                )));
            }
        }
        Ok(Self { n, indices })
    }

    /// Sorts and deduplicates before validating.
    pub fn from_unsorted(n: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        Self::new(n, indices)
    }

    pub fn full(n: usize) -> Self {
        Self {
            n,
            indices: (0..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn complement(&self) -> SupportSet {
        SupportSet {
            n: self.n,
            indices: (0..self.n).filter(|i| !self.contains(*i)).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &SupportSet) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }
}
