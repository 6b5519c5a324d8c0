//! Skew-selfadjoint spatial operators and the heat, wave and Maxwell-type
//! block systems built from adjoint pairs of 1D difference stencils.

use serde::{Deserialize, Serialize};

use crate::error::{EvoqError, Result};
use crate::linalg::{c, diag_blocks, hermitian_part, max_abs, min_eigenvalue_hermitian, CMatrix};
use crate::material::{coercivity, CoercivityCertificate, MaterialLaw};
use crate::signal::{TimeGrid, WeightedSignal};

/// Relative tolerance of the skewness check.
pub const SKEW_TOLERANCE: f64 = 1e-12;

/// Finite-dimensional skew-selfadjoint `A`, lifted pointwise in time.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialOperator {
    matrix: CMatrix,
    label: String,
}

impl SpatialOperator {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn zero(m: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(m, m),
            label: "zero".into(),
        }
    }

    /// `−A`, again skew-selfadjoint.
    pub fn negated(&self) -> Self {
        Self {
            matrix: -self.matrix.clone(),
            label: format!("-({})", self.label),
        }
    }

    /// Applies `A` at every time sample.
    pub fn apply(&self, f: &WeightedSignal) -> Result<WeightedSignal> {
        let m = self.dim();
        if f.dim() != m {
            return Err(EvoqError::Dimension(format!(
                "operator acts on dimension {m}, signal has {}",
                f.dim()
            )));
        }
        let mut out = f.clone();
        for j in 0..f.len() {
            let v = nalgebra::DVector::from_column_slice(f.sample(j));
            out.sample_mut(j).copy_from_slice((&self.matrix * v).as_slice());
        }
        Ok(out)
    }
}

/// Accepts `A` when `‖A + A*‖_max ≤ 1e−12·(1 + ‖A‖_max)`.
pub fn check_skew(a: CMatrix) -> Result<SpatialOperator> {
    if a.nrows() != a.ncols() {
        return Err(EvoqError::Dimension(format!(
            "spatial operator must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(EvoqError::NonFinite("spatial operator entries".into()));
    }
    let tol = SKEW_TOLERANCE * (1.0 + max_abs(&a));
    let sym = &a + a.adjoint();
    let mut worst = (0, 0, 0.0);
    for col in 0..sym.ncols() {
        for row in 0..sym.nrows() {
            let v = sym[(row, col)].norm();
            if v > worst.2 {
                worst = (row, col, v);
            }
        }
    }
    if worst.2 > tol {
        return Err(EvoqError::NotSkew {
            row: worst.0,
            col: worst.1,
            value: worst.2,
        });
    }
    Ok(SpatialOperator {
        matrix: a,
        label: "matrix".into(),
    })
}

/// Uniform 1D stencil with `k` unknowns of the Dirichlet-side field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stencil1d {
    pub k: usize,
    pub dx: f64,
}

impl Stencil1d {
    pub fn new(k: usize, dx: f64) -> Result<Self> {
        if k == 0 {
            return Err(EvoqError::Dimension("stencil needs k >= 1".into()));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(EvoqError::InvalidGrid(format!("dx must be positive, got {dx}")));
        }
        Ok(Self { k, dx })
    }

    /// `D`: `ℂ^{k+1} → ℂ^k`, `(Dθ)_i = (θ_{i+1} − θ_i)/dx`. No boundary
    /// condition on `θ`; this is the Neumann-side gradient.
    pub fn forward_difference(&self) -> CMatrix {
        let mut d = CMatrix::zeros(self.k, self.k + 1);
        let h = 1.0 / self.dx;
        for i in 0..self.k {
            d[(i, i)] = c(-h);
            d[(i, i + 1)] = c(h);
        }
        d
    }

    /// `D₀ = −Dᵀ`: `ℂ^k → ℂ^{k+1}`, differences of a field that vanishes at
    /// both ends (the Dirichlet-side gradient).
    pub fn dirichlet_difference(&self) -> CMatrix {
        -self.forward_difference().transpose()
    }
}

/// A spatial operator paired with its material law.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    pub spatial: SpatialOperator,
    pub law: MaterialLaw,
    /// Sizes of the two field blocks.
    pub blocks: (usize, usize),
}

fn skew_block(upper: &CMatrix, lower: &CMatrix) -> CMatrix {
    // [[0, upper], [lower, 0]]
    let (p, q) = (lower.ncols(), upper.ncols());
    let mut a = CMatrix::zeros(p + q, p + q);
    a.view_mut((0, p), (upper.nrows(), upper.ncols())).copy_from(upper);
    a.view_mut((p, 0), (lower.nrows(), lower.ncols())).copy_from(lower);
    a
}

fn require_positive_hermitian(name: &str, a: &CMatrix, size: usize) -> Result<f64> {
    if a.nrows() != size || a.ncols() != size {
        return Err(EvoqError::Dimension(format!(
            "{name} must be {size}x{size}, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let lam = min_eigenvalue_hermitian(&hermitian_part(a));
    if !(lam > 0.0) {
        return Err(EvoqError::Definiteness(format!(
            "Hermitian part of {name} has smallest eigenvalue {lam:.3e}"
        )));
    }
    Ok(lam)
}

fn invert(name: &str, a: &CMatrix) -> Result<CMatrix> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| EvoqError::Definiteness(format!("{name} is singular")))
}

/// Heat conduction with insulated ends: state `(θ, q)` with `θ ∈ ℂ^{k+1}`,
/// `q ∈ ℂ^k`, operator `[[0, div₀], [grad, 0]]` with `grad = D`,
/// `div₀ = −Dᵀ`, and law `diag(1, 0) + z^{−1} diag(0, a^{−1})`.
pub fn build_heat_block(stencil: Stencil1d, conductivity: &CMatrix) -> Result<BlockSystem> {
    let k = stencil.k;
    require_positive_hermitian("conductivity", conductivity, k)?;
    let a_inv = invert("conductivity", conductivity)?;
    let grad = stencil.forward_difference();
    let div0 = -grad.transpose();
    let spatial = check_skew(skew_block(&div0, &grad))?.with_label("heat");
    let m0 = diag_blocks(&[&CMatrix::identity(k + 1, k + 1), &CMatrix::zeros(k, k)]);
    let m1 = diag_blocks(&[&CMatrix::zeros(k + 1, k + 1), &a_inv]);
    Ok(BlockSystem {
        spatial,
        law: MaterialLaw::finite_sum(vec![m0, m1])?,
        blocks: (k + 1, k),
    })
}

/// Elastic waves with clamped ends: state `(v, σ)` with `v ∈ ℂ^k`,
/// `σ ∈ ℂ^{k+1}`, operator `−[[0, div], [grad₀, 0]]` with `grad₀ = D₀`,
/// `div = −D₀ᵀ`, and constant law `diag(1, T^{−1})`.
pub fn build_wave_block(stencil: Stencil1d, elasticity: &CMatrix) -> Result<BlockSystem> {
    let k = stencil.k;
    require_positive_hermitian("elasticity tensor", elasticity, k + 1)?;
    let t_inv = invert("elasticity tensor", elasticity)?;
    let grad0 = stencil.dirichlet_difference();
    let div = -grad0.transpose();
    let spatial = check_skew(-skew_block(&div, &grad0))?.with_label("wave");
    let m0 = diag_blocks(&[&CMatrix::identity(k, k), &t_inv]);
    Ok(BlockSystem {
        spatial,
        law: MaterialLaw::constant(m0)?,
        blocks: (k, k + 1),
    })
}

/// 1D reduction of Maxwell's equations with perfectly conducting ends:
/// state `(E, H)` with `E ∈ ℂ^k`, `H ∈ ℂ^{k+1}`, operator
/// `[[0, −curl], [curl₀, 0]]` with `curl₀ = D₀`, `curl = D₀ᵀ`, and law
/// `diag(ε, μ) + z^{−1} diag(σ, 0)`. The law is certified at `(nu, grid)`.
pub fn build_maxwell_block(
    stencil: Stencil1d,
    eps: &CMatrix,
    mu: &CMatrix,
    sigma: &CMatrix,
    nu: f64,
    grid: &TimeGrid,
) -> Result<(BlockSystem, CoercivityCertificate)> {
    let k = stencil.k;
    require_positive_hermitian("permittivity", eps, k)?;
    require_positive_hermitian("permeability", mu, k + 1)?;
    if sigma.nrows() != k || sigma.ncols() != k {
        return Err(EvoqError::Dimension(format!(
            "conductivity must be {k}x{k}, got {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let curl0 = stencil.dirichlet_difference();
    let curl = curl0.transpose();
    let spatial = check_skew(skew_block(&(-curl), &curl0))?.with_label("maxwell");
    let m0 = diag_blocks(&[eps, mu]);
    let m1 = diag_blocks(&[sigma, &CMatrix::zeros(k + 1, k + 1)]);
    let law = MaterialLaw::finite_sum(vec![m0, m1])?;
    let cert = coercivity(&law, nu, grid)?;
    Ok((
        BlockSystem {
            spatial,
            law,
            blocks: (k, k + 1),
        },
        cert,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skew_check_examples() {
        let rot = CMatrix::from_row_slice(2, 2, &[c(0.0), c(-1.0), c(1.0), c(0.0)]);
        assert!(check_skew(rot).is_ok());
        let bad = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        match check_skew(bad) {
            Err(EvoqError::NotSkew { row, col, value }) => {
                assert_eq!((row, col), (0, 0));
                assert!((value - 2.0).abs() < 1e-15);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
        assert!(check_skew(CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn heat_block_single_cell_stencil() {
        let s = Stencil1d::new(1, 1.0).unwrap();
        assert_eq!(
            s.forward_difference(),
            CMatrix::from_row_slice(1, 2, &[c(-1.0), c(1.0)])
        );
        let sys = build_heat_block(s, &CMatrix::identity(1, 1)).unwrap();
        let a = sys.spatial.matrix();
        assert_eq!(a.nrows(), 3);
        assert_eq!(a + a.adjoint(), CMatrix::zeros(3, 3));
        // grad in the lower-left block, div0 = -grad^T in the upper right
        assert_eq!(a[(2, 0)], c(-1.0));
        assert_eq!(a[(2, 1)], c(1.0));
        assert_eq!(a[(0, 2)], c(1.0));
        assert_eq!(a[(1, 2)], c(-1.0));
    }

    #[test]
    fn builders_reject_indefinite_coefficients() {
        let s = Stencil1d::new(2, 0.5).unwrap();
        assert!(matches!(
            build_heat_block(s, &(-CMatrix::identity(2, 2))),
            Err(EvoqError::Definiteness(_))
        ));
        assert!(matches!(
            build_wave_block(s, &CMatrix::zeros(3, 3)),
            Err(EvoqError::Definiteness(_))
        ));
        assert!(build_heat_block(s, &CMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn wave_and_maxwell_shapes() {
        let s = Stencil1d::new(3, 0.25).unwrap();
        let w = build_wave_block(s, &CMatrix::identity(4, 4)).unwrap();
        assert_eq!(w.spatial.dim(), 7);
        assert_eq!(w.blocks, (3, 4));
        let g = TimeGrid::symmetric(2.0, 32).unwrap();
        let (mx, cert) = build_maxwell_block(
            s,
            &CMatrix::identity(3, 3),
            &CMatrix::identity(4, 4),
            &CMatrix::zeros(3, 3),
            0.8,
            &g,
        )
        .unwrap();
        assert_eq!(mx.spatial.dim(), 7);
        assert!((cert.c_est - 0.8).abs() < 1e-12);
        // conductivity lifts only the electric block
        let (_, lossy) = build_maxwell_block(
            s,
            &CMatrix::identity(3, 3),
            &CMatrix::identity(4, 4),
            &CMatrix::identity(3, 3),
            0.8,
            &g,
        )
        .unwrap();
        assert!((lossy.c_est - 0.8).abs() < 1e-12);
        let (_, heavy_mu) = build_maxwell_block(
            s,
            &CMatrix::identity(3, 3),
            &(CMatrix::identity(4, 4) * c(3.0)),
            &CMatrix::identity(3, 3),
            0.8,
            &g,
        )
        .unwrap();
        assert!((heavy_mu.c_est - 1.8).abs() < 1e-12);
        let strongly_lossy = build_maxwell_block(
            s,
            &CMatrix::identity(3, 3),
            &CMatrix::identity(4, 4),
            &(-CMatrix::identity(3, 3) * c(5.0)),
            0.8,
            &g,
        );
        assert!(matches!(strongly_lossy, Err(EvoqError::NonCoercive { .. })));
    }

    #[test]
    fn dirichlet_difference_is_minus_transpose() {
        let s = Stencil1d::new(2, 1.0).unwrap();
        let d0 = s.dirichlet_difference();
        let expect = CMatrix::from_row_slice(
            3,
            2,
            &[c(1.0), c(0.0), c(-1.0), c(1.0), c(0.0), c(-1.0)],
        );
        assert_eq!(d0, expect);
    }
}
