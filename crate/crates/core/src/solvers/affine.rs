//! Projections onto `{x : Mx = c}` and `ran Mᵀ` with a cached factorization of
//! the smaller Gram matrix of `M`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Pseudo-inverse solve with a symmetric positive semidefinite Gram matrix.
#[derive(Debug, Clone)]
enum GramSolver {
    Cholesky(Cholesky<f64, Dyn>),
    Eigen {
        vectors: DMatrix<f64>,
        inv_values: DVector<f64>,
    },
}

impl GramSolver {
    fn new(gram: DMatrix<f64>) -> Self {
        let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
        if let Some(chol) = gram.clone().cholesky() {
            // reject numerically singular factors and fall through to the
            // eigen pseudo-inverse
            let diag_min = chol.l_dirty().diagonal().min();
            if diag_min * diag_min > 1e-12 * scale {
                return GramSolver::Cholesky(chol);
            }
        }
        let eig = gram.symmetric_eigen();
        let top = eig.eigenvalues.max().max(0.0);
        let inv_values = eig
            .eigenvalues
            .map(|l| if l > 1e-12 * top { 1.0 / l } else { 0.0 });
        GramSolver::Eigen {
            vectors: eig.eigenvectors,
            inv_values,
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            GramSolver::Cholesky(c) => c.solve(rhs),
            GramSolver::Eigen {
                vectors,
                inv_values,
            } => {
                let coeff = vectors.transpose() * rhs;
                vectors * coeff.component_mul(inv_values)
            }
        }
    }
}

/// Cached projector for a fixed matrix `M` (`rows × cols`).
#[derive(Debug, Clone)]
pub(crate) struct AffineProjector {
    mat: DMatrix<f64>,
    wide: bool,
    gram: GramSolver,
}

impl AffineProjector {
    pub fn new(mat: DMatrix<f64>) -> Self {
        let wide = mat.nrows() <= mat.ncols();
        let gram = if wide {
            &mat * mat.transpose()
        } else {
            mat.transpose() * &mat
        };
        Self {
            gram: GramSolver::new(gram),
            mat,
            wide,
        }
    }

    pub fn mat(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.mat * x
    }

    /// `M⁺ r`.
    fn pinv(&self, r: &DVector<f64>) -> DVector<f64> {
        if self.wide {
            self.mat.tr_mul(&self.gram.solve(r))
        } else {
            self.gram.solve(&self.mat.tr_mul(r))
        }
    }

    /// Euclidean projection of `v` onto `{x : Mx = c}` (`c` assumed in range).
    pub fn project_affine(&self, v: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
        let r = &self.mat * v - c;
        v - self.pinv(&r)
    }

    /// Projection of `v` onto `ran Mᵀ`.
    pub fn project_range(&self, v: &DVector<f64>) -> DVector<f64> {
        self.pinv(&(&self.mat * v))
    }

    /// Least-squares `p` with `Mᵀp ≈ w`.
    pub fn dual_from(&self, w: &DVector<f64>) -> DVector<f64> {
        if self.wide {
            self.gram.solve(&(&self.mat * w))
        } else {
            &self.mat * self.gram.solve(w)
        }
    }

    /// Minimum-norm solution of `Mx = c`.
    pub fn least_norm(&self, c: &DVector<f64>) -> DVector<f64> {
        self.pinv(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normal_vec, stream_rng};
    use approx::assert_abs_diff_eq;

    fn random(seed: u64, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_vec(r, c, standard_normal_vec(&mut stream_rng(seed, 0), r * c))
    }

    #[test]
    fn affine_projection_is_feasible_and_orthogonal() {
        for (r, c) in [(4, 9), (9, 4), (5, 5)] {
            let m = random(1, r, c);
            let p = AffineProjector::new(m.clone());
            let v = DVector::from_vec(standard_normal_vec(&mut stream_rng(2, 0), c));
            let x0 = DVector::from_vec(standard_normal_vec(&mut stream_rng(3, 0), c));
            let rhs = &m * &x0;
            let x = p.project_affine(&v, &rhs);
            assert_abs_diff_eq!((&m * &x - &rhs).norm(), 0.0, epsilon = 1e-9);
            // v − x lies in ran Mᵀ, hence is orthogonal to every feasible direction
            let d = &v - &x;
            assert_abs_diff_eq!((p.project_range(&d) - &d).norm(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn rank_deficient_gram_uses_pseudo_inverse() {
        let mut m = random(4, 3, 6);
        let row = m.row(0).into_owned();
        m.set_row(2, &row);
        let p = AffineProjector::new(m.clone());
        let x0 = DVector::from_vec(standard_normal_vec(&mut stream_rng(5, 0), 6));
        let rhs = &m * &x0;
        let x = p.project_affine(&DVector::zeros(6), &rhs);
        assert_abs_diff_eq!((&m * &x - &rhs).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn dual_recovers_exact_range_vectors() {
        let m = random(6, 4, 10);
        let p = AffineProjector::new(m.clone());
        let y = DVector::from_vec(vec![0.5, -1.0, 2.0, 0.25]);
        let w = m.tr_mul(&y);
        assert_abs_diff_eq!((p.dual_from(&w) - y).norm(), 0.0, epsilon = 1e-10);
    }
}
