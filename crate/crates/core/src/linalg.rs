//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::signal::C64;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `(A + A*) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c(0.5)
}

/// Smallest eigenvalue of a Hermitian matrix (dense eigensolve).
pub fn min_eigenvalue_hermitian(h: &CMatrix) -> f64 {
    SymmetricEigen::new(h.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    SVD::new(a.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Largest entry modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Block-diagonal matrix from square blocks.
pub fn diag_blocks(blocks: &[&CMatrix]) -> CMatrix {
    let m: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(m, m);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(*b);
        off += b.nrows();
    }
    out
}

pub fn real_diag(v: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(v.len(), v.iter().map(|&x| c(x))))
}

/// `H^{−1/2}` of a Hermitian positive definite matrix.
pub fn inv_sqrt_hermitian(h: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(h.clone());
    let q = &eig.eigenvectors;
    let d = CVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| c(1.0 / l.sqrt())),
    );
    q * CMatrix::from_diagonal(&d) * q.adjoint()
}

/// SVD truncated at `cutoff_ratio·σ_max`.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v_t: CMatrix,
    pub rank: usize,
    pub cutoff: f64,
}

impl TruncatedSvd {
    pub fn new(a: &CMatrix, cutoff_ratio: f64) -> Self {
        let svd = SVD::new(a.clone(), true, true);
        let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
        let smax = singular_values.first().copied().unwrap_or(0.0);
        let cutoff = smax * cutoff_ratio;
        let rank = singular_values
            .iter()
            .take_while(|&&s| s > cutoff && s > 0.0)
            .count();
        Self {
            u: svd.u.expect("u requested"),
            singular_values,
            v_t: svd.v_t.expect("v_t requested"),
            rank,
            cutoff,
        }
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Least-norm solution `A⁺ B` of `A X = B` within the retained rank.
    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        let r = self.rank;
        let ncols = self.v_t.ncols();
        if r == 0 {
            return CMatrix::zeros(ncols, b.ncols());
        }
        let ur = self.u.columns(0, r);
        let mut y = ur.adjoint() * b;
        for i in 0..r {
            let s = self.singular_values[i];
            y.row_mut(i).iter_mut().for_each(|z| *z /= s);
        }
        self.v_t.rows(0, r).adjoint() * y
    }

    /// Orthonormal basis of the retained range.
    pub fn range_basis(&self) -> CMatrix {
        self.u.columns(0, self.rank).into_owned()
    }

    /// Orthonormal basis of the complement of the retained range, within the
    /// computed left singular vectors. For wide matrices nalgebra returns a
    /// thin `U`, which already spans the whole target space.
    pub fn cokernel_basis(&self) -> CMatrix {
        let total = self.u.nrows();
        let full = complete_basis(&self.range_basis(), total);
        full.columns(self.rank, total - self.rank).into_owned()
    }

    /// Right singular vectors spanning the numerical kernel.
    pub fn kernel_basis(&self) -> CMatrix {
        let n = self.v_t.ncols();
        let v = self.v_t.adjoint();
        let retained = v.columns(0, self.rank).into_owned();
        let full = complete_basis(&retained, n);
        full.columns(self.rank, n - self.rank).into_owned()
    }
}

/// Extends orthonormal columns `q` to an orthonormal basis of `C^dim`
/// (Gram–Schmidt against the canonical basis, twice for stability).
pub fn complete_basis(q: &CMatrix, dim: usize) -> CMatrix {
    let mut cols: Vec<CVector> = (0..q.ncols()).map(|j| q.column(j).into_owned()).collect();
    for e in 0..dim {
        if cols.len() == dim {
            break;
        }
        let mut v = CVector::zeros(dim);
        v[e] = c(1.0);
        for _ in 0..2 {
            for u in &cols {
                let proj = u.dotc(&v);
                v -= u * proj;
            }
        }
        let nrm = v.norm();
        if nrm > 1e-8 {
            cols.push(v / c(nrm));
        }
    }
    CMatrix::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_svd_solves_consistent_systems() {
        let a = CMatrix::from_row_slice(3, 2, &[c(1.0), c(0.0), c(0.0), c(2.0), c(0.0), c(0.0)]);
        let t = TruncatedSvd::new(&a, 1e-10);
        assert_eq!(t.rank, 2);
        let b = CMatrix::from_row_slice(3, 1, &[c(3.0), c(4.0), c(0.0)]);
        let x = t.solve(&b);
        assert!((x[(0, 0)] - c(3.0)).norm() < 1e-14);
        assert!((x[(1, 0)] - c(2.0)).norm() < 1e-14);
        let co = t.cokernel_basis();
        assert_eq!(co.ncols(), 1);
        assert!((a.adjoint() * co).norm() < 1e-14);
    }

    #[test]
    fn kernel_basis_of_rank_deficient_matrix() {
        let a = CMatrix::from_row_slice(2, 3, &[c(1.0), c(1.0), c(0.0), c(2.0), c(2.0), c(0.0)]);
        let t = TruncatedSvd::new(&a, 1e-10);
        assert_eq!(t.rank, 1);
        let k = t.kernel_basis();
        assert_eq!(k.ncols(), 2);
        assert!((&a * k).norm() < 1e-13);
    }

    #[test]
    fn inverse_square_root() {
        let h = CMatrix::from_row_slice(2, 2, &[c(4.0), c(0.0), c(0.0), c(9.0)]);
        let r = inv_sqrt_hermitian(&h);
        assert!((r[(0, 0)] - c(0.5)).norm() < 1e-14);
        assert!((r[(1, 1)] - c(1.0 / 3.0)).norm() < 1e-14);
    }
}
