//! Dense symmetric-matrix helpers shared by the solver, embedding and oracle.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order (columns of `vectors` follow the same order).
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SortedEigen {
    pub fn new(m: &DMatrix<f64>) -> Option<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let sym = symmetrize(m);
        let n = sym.nrows();
        let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Some(SortedEigen { values, vectors })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let scaled_vt = {
            let mut vt = self.vectors.transpose();
            for (r, &lam) in self.values.iter().enumerate() {
                vt.row_mut(r).scale_mut(f(lam));
            }
            vt
        };
        let mut out = &self.vectors * scaled_vt;
        out = symmetrize(&out);
        out
    }
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest relative asymmetry `|M_ij − M_ji| / max(1, |M_ij|)`.
pub fn symmetry_residual(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = (m[(i, j)] - m[(j, i)]).abs() / m[(i, j)].abs().max(1.0);
            worst = worst.max(r);
        }
    }
    worst
}

/// Frobenius norm of a matrix list taken as one block vector.
pub fn frobenius_norm<'a>(ms: impl IntoIterator<Item = &'a DMatrix<f64>>) -> f64 {
    ms.into_iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}
