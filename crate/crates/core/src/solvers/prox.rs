//! Objectives and their proximal maps over flattened column-major variables.

use nalgebra::{DMatrix, DVector};

use crate::matrix::{block_soft_threshold_in_place, sorted_svd};

/// A closed convex objective with a cheap proximal map.
pub(crate) trait Objective {
    fn value(&self, x: &[f64]) -> f64;
    /// Writes `prox_{t·f}(v)` into `out`.
    fn prox(&self, v: &[f64], t: f64, out: &mut [f64]);
}

/// Sum of Euclidean norms of consecutive blocks of length `k`.
pub(crate) struct L12 {
    pub k: usize,
}

impl Objective for L12 {
    fn value(&self, x: &[f64]) -> f64 {
        x.chunks(self.k).map(norm).sum()
    }

    fn prox(&self, v: &[f64], t: f64, out: &mut [f64]) {
        out.copy_from_slice(v);
        for col in out.chunks_mut(self.k) {
            block_soft_threshold_in_place(col, t);
        }
    }
}

/// Nuclear norm of the `k × (len/k)` matrix stored column-major.
pub(crate) struct Nuclear {
    pub k: usize,
}

impl Objective for Nuclear {
    fn value(&self, x: &[f64]) -> f64 {
        if x.is_empty() {
            return 0.0;
        }
        let m = DMatrix::from_column_slice(self.k, x.len() / self.k, x);
        m.singular_values().sum()
    }

    fn prox(&self, v: &[f64], t: f64, out: &mut [f64]) {
        if v.is_empty() {
            return;
        }
        let m = DMatrix::from_column_slice(self.k, v.len() / self.k, v);
        let svd = sorted_svd(&m);
        let mut res = DMatrix::zeros(m.nrows(), m.ncols());
        for (j, &sv) in svd.values.iter().enumerate() {
            let shrunk = sv - t;
            if shrunk <= 0.0 {
                break;
            }
            res += shrunk * svd.u.column(j) * svd.v_t.row(j);
        }
        out.copy_from_slice(res.as_slice());
    }
}

/// `Σ_i ‖x_i‖ + ‖Π_{V⊥} x_i‖` for a subspace `V` with orthonormal basis.
pub(crate) struct Streamlined {
    pub k: usize,
    pub basis: DMatrix<f64>,
}

impl Streamlined {
    fn split(&self, col: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let v = DVector::from_column_slice(col);
        let inside = &self.basis * self.basis.tr_mul(&v);
        let perp = &v - &inside;
        (inside, perp)
    }
}

impl Objective for Streamlined {
    fn value(&self, x: &[f64]) -> f64 {
        x.chunks(self.k)
            .map(|col| {
                let (_, perp) = self.split(col);
                norm(col) + perp.norm()
            })
            .sum()
    }

    // prox of ‖·‖ + ‖Π⊥·‖ is prox_{‖·‖} ∘ prox_{‖Π⊥·‖}: the second term's
    // subdifferential is invariant under positive scaling, which is all the
    // outer shrinkage does
    fn prox(&self, v: &[f64], t: f64, out: &mut [f64]) {
        for (col, dst) in v.chunks(self.k).zip(out.chunks_mut(self.k)) {
            let (inside, mut perp) = self.split(col);
            block_soft_threshold_in_place(perp.as_mut_slice(), t);
            for ((d, a), b) in dst.iter_mut().zip(inside.iter()).zip(perp.iter()) {
                *d = a + b;
            }
            block_soft_threshold_in_place(dst, t);
        }
    }
}

/// Vector ℓ₁ norm, optionally restricted to the nonnegative orthant.
pub(crate) struct L1 {
    pub nonneg: bool,
}

impl Objective for L1 {
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v.abs()).sum()
    }

    fn prox(&self, v: &[f64], t: f64, out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(v) {
            *o = if self.nonneg {
                (x - t).max(0.0)
            } else {
                x.signum() * (x.abs() - t).max(0.0)
            };
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
