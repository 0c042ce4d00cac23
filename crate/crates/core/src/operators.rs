//! Linear measurement maps `𝒜: R^{k×n} → R^m` stored as `n` blocks
//! `A_i ∈ R^{m×k}`, with `𝒜(Z) = Σ_i A_i Z(i)`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};
use crate::matrix::{DenseMatrix, SupportSet};
use crate::rng::{standard_normal_vec, stream_rng};

/// A vector in the measurement space `R^m` (measurements `b`, dual vectors `p`).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector(DVector<f64>);

impl MeasurementVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::from_dvector(DVector::from_vec(values))
    }

    pub fn from_dvector(v: DVector<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(v))
    }

    pub fn zeros(m: usize) -> Self {
        Self(DVector::zeros(m))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn dot(&self, other: &MeasurementVector) -> f64 {
        self.0.dot(&other.0)
    }
}

/// Block-structured measurement operator.
///
/// Internally the blocks are laid side by side in one `m × kn` matrix, so
/// block `i` is columns `i*k .. (i+1)*k` and the flattened operator acts on
/// the column-major vectorization of `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOp {
    k: usize,
    n: usize,
    flat: DMatrix<f64>,
}

impl MeasurementOp {
    /// Assembles an operator from its `n` blocks, each `m × k`.
    pub fn from_blocks(blocks: &[DMatrix<f64>]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidParameter("operator needs at least one block".into()))?;
        let (m, k) = first.shape();
        if m == 0 || k == 0 {
            return Err(Error::InvalidParameter("blocks must be nonempty".into()));
        }
        let n = blocks.len();
        let mut flat = DMatrix::zeros(m, k * n);
        for (i, b) in blocks.iter().enumerate() {
            if b.shape() != (m, k) {
                return Err(shape(format!("block {m}x{k}"), format!("{}x{}", b.nrows(), b.ncols())));
            }
            flat.columns_mut(i * k, k).copy_from(b);
        }
        Self::from_flat(k, n, flat)
    }

    /// Wraps an `m × kn` matrix whose column blocks of width `k` are the `A_i`.
    pub fn from_flat(k: usize, n: usize, flat: DMatrix<f64>) -> Result<Self> {
        if k == 0 || n == 0 || flat.nrows() == 0 {
            return Err(Error::InvalidParameter("dimensions must be positive".into()));
        }
        if flat.ncols() != k * n {
            return Err(shape(format!("{} columns", k * n), format!("{}", flat.ncols())));
        }
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { k, n, flat })
    }

    /// I.i.d. standard normal operator drawn from ChaCha20 stream 0 of `seed`.
    ///
    /// Entries are unnormalized `N(0, 1)`.
    pub fn sample_gaussian(k: usize, n: usize, m: usize, seed: u64) -> Result<Self> {
        if k == 0 || n == 0 || m == 0 {
            return Err(Error::InvalidParameter("dimensions must be positive".into()));
        }
        let mut rng = stream_rng(seed, 0);
        let entries = standard_normal_vec(&mut rng, m * k * n);
        Self::from_flat(k, n, DMatrix::from_vec(m, k * n, entries))
    }

    pub fn m(&self) -> usize {
        self.flat.nrows()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The flattened `m × kn` matrix (the oracle export).
    pub fn flat(&self) -> &DMatrix<f64> {
        &self.flat
    }

    pub fn block(&self, i: usize) -> DMatrix<f64> {
        self.flat.columns(i * self.k, self.k).into_owned()
    }

    fn check_signal(&self, z: &DenseMatrix) -> Result<()> {
        if z.rows() != self.k || z.cols() != self.n {
            return Err(shape(
                format!("{}x{} signal", self.k, self.n),
                format!("{}x{}", z.rows(), z.cols()),
            ));
        }
        Ok(())
    }

    fn check_measurement(&self, p: &MeasurementVector) -> Result<()> {
        if p.len() != self.m() {
            return Err(shape(format!("length {}", self.m()), format!("{}", p.len())));
        }
        Ok(())
    }

    /// `𝒜(Z) = Σ_i A_i Z(i)`.
    pub fn apply(&self, z: &DenseMatrix) -> Result<MeasurementVector> {
        self.check_signal(z)?;
        Ok(MeasurementVector(self.apply_flat(z.as_slice())))
    }

    pub(crate) fn apply_flat(&self, x: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m());
        out.gemv(1.0, &self.flat, &DVector::from_column_slice(x), 0.0);
        out
    }

    /// `𝒜*p`, whose column `i` is `A_iᵀ p`.
    pub fn adjoint(&self, p: &MeasurementVector) -> Result<DenseMatrix> {
        self.check_measurement(p)?;
        let flat = self.adjoint_flat(p.values());
        DenseMatrix::new(self.k, self.n, flat.data.into())
    }

    pub(crate) fn adjoint_flat(&self, p: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.k * self.n);
        out.gemv_tr(1.0, &self.flat, p, 0.0);
        out
    }

    /// The `m × n` matrix of `A_H: z ↦ 𝒜(z.H)`, column `i` equal to `A_i h_i`.
    pub fn induced_ah(&self, directions: &[Option<DVector<f64>>]) -> Result<DMatrix<f64>> {
        if directions.len() != self.n {
            return Err(shape(format!("{} directions", self.n), format!("{}", directions.len())));
        }
        let mut out = DMatrix::zeros(self.m(), self.n);
        for (i, d) in directions.iter().enumerate() {
            let h = d.as_ref().ok_or(Error::AbsentDirection(i))?;
            if h.len() != self.k {
                return Err(shape(format!("direction of length {}", self.k), format!("{}", h.len())));
            }
            out.set_column(i, &(self.flat.columns(i * self.k, self.k) * h));
        }
        Ok(out)
    }

    /// Operator norm `‖A_i‖` of every block, by power iteration on `A_iᵀA_i`.
    pub fn block_op_norms(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let b = self.flat.columns(i * self.k, self.k);
                let gram = b.transpose() * b;
                largest_eigenvalue_psd(&gram).max(0.0).sqrt()
            })
            .collect()
    }

    /// Smallest singular value of `A_{H0}` restricted to the columns in `support`.
    pub fn restricted_sigma_min(
        &self,
        h0: &[Option<DVector<f64>>],
        support: &SupportSet,
    ) -> Result<f64> {
        if h0.len() != self.n || support.n() != self.n {
            return Err(shape(format!("{} columns", self.n), format!("{}", h0.len())));
        }
        if support.is_empty() {
            return Ok(0.0);
        }
        let mut sub = DMatrix::zeros(self.m(), support.len());
        for (j, &i) in support.indices().iter().enumerate() {
            let h = h0[i].as_ref().ok_or(Error::AbsentDirection(i))?;
            sub.set_column(j, &(self.flat.columns(i * self.k, self.k) * h));
        }
        if support.len() > self.m() {
            return Ok(0.0);
        }
        Ok(sub.singular_values().min())
    }

    /// Estimate of `‖𝒜‖` from power iterations on `𝒜𝒜*`.
    pub fn norm_estimate(&self, iterations: usize) -> f64 {
        let mut v = DVector::from_fn(self.m(), |i, _| 1.0 + 0.01 * (i % 7) as f64);
        v /= v.norm();
        let mut lambda = 0.0;
        for _ in 0..iterations.max(1) {
            let w = &self.flat * (self.flat.transpose() * &v);
            lambda = w.norm();
            if lambda == 0.0 {
                return 0.0;
            }
            v = w / lambda;
        }
        lambda.sqrt()
    }

    /// Operator acting only on the columns in `support` (a `k × |support|` signal).
    pub fn restrict(&self, support: &SupportSet) -> Result<MeasurementOp> {
        if support.n() != self.n || support.is_empty() {
            return Err(Error::InvalidParameter("support must be a nonempty subset of [n]".into()));
        }
        let mut flat = DMatrix::zeros(self.m(), self.k * support.len());
        for (j, &i) in support.indices().iter().enumerate() {
            flat.columns_mut(j * self.k, self.k)
                .copy_from(&self.flat.columns(i * self.k, self.k));
        }
        MeasurementOp::from_flat(self.k, support.len(), flat)
    }

    fn to_file(&self) -> OperatorFile {
        let mut entries = Vec::with_capacity(self.flat.len());
        for i in 0..self.n {
            let b = self.flat.columns(i * self.k, self.k);
            for r in 0..self.m() {
                entries.extend(b.row(r).iter());
            }
        }
        OperatorFile {
            m: self.m(),
            k: self.k,
            n: self.n,
            entries,
        }
    }

    fn from_file(f: OperatorFile) -> Result<Self> {
        let OperatorFile { m, k, n, entries } = f;
        if entries.len() != m * k * n {
            return Err(shape(format!("{} entries", m * k * n), format!("{}", entries.len())));
        }
        let mut flat = DMatrix::zeros(m, k * n);
        for (idx, x) in entries.into_iter().enumerate() {
            let block = idx / (m * k);
            let within = idx % (m * k);
            flat[(within / k, block * k + within % k)] = x;
        }
        Self::from_flat(k, n, flat)
    }

    /// JSON container `{"m", "k", "n", "entries"}` with row-major block entries.
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, &self.to_file())?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        Self::from_file(serde_json::from_reader(r)?)
    }

    /// Binary container: magic `CSOP`, `m`, `k`, `n` as little-endian `u64`,
    /// then the row-major block entries as little-endian `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let file = self.to_file();
        let mut out = Vec::with_capacity(28 + 8 * file.entries.len());
        out.extend_from_slice(BINARY_MAGIC);
        for d in [file.m, file.k, file.n] {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for x in file.entries {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 28 || &bytes[..4] != BINARY_MAGIC {
            return Err(Error::InvalidParameter("not an operator container".into()));
        }
        let dim = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) as usize;
        let (m, k, n) = (dim(4), dim(12), dim(20));
        let body = &bytes[28..];
        if body.len() != 8 * m * k * n {
            return Err(shape(format!("{} bytes", 8 * m * k * n), format!("{}", body.len())));
        }
        let entries = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_file(OperatorFile { m, k, n, entries })
    }
}

const BINARY_MAGIC: &[u8; 4] = b"CSOP";

#[derive(Serialize, Deserialize)]
struct OperatorFile {
    m: usize,
    k: usize,
    n: usize,
    entries: Vec<f64>,
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, iterated until the Rayleigh quotient stalls.
pub(crate) fn largest_eigenvalue_psd(g: &DMatrix<f64>) -> f64 {
    let d = g.nrows();
    if d == 0 {
        return 0.0;
    }
    let mut v = DVector::from_fn(d, |i, _| 1.0 + 0.1 * i as f64 / d as f64);
    v /= v.norm();
    let mut lambda = 0.0f64;
    for _ in 0..20_000 {
        let w = g * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= 1e-16 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda
}
