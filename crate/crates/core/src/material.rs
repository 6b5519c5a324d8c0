//! Material laws `M(z)`, their coercivity certificates and the operators
//! `M(∂_{t,ν})` and `M(∂_{t,ν})^{*ν}`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EvoqError, Result};
use crate::linalg::{hermitian_part, min_eigenvalue_hermitian, CMatrix};
use crate::signal::{TimeGrid, WeightedSignal, C64};
use crate::transform::{frequencies, multiply_bins};

/// Plugin evaluator for sampled laws.
pub type LawEval = Arc<dyn Fn(C64) -> CMatrix + Send + Sync>;

#[derive(Clone)]
pub enum LawForm {
    /// `z ↦ Σ_k w^k C_k` with `w = z^{−1}`, or `w = conj(z)^{−1}` when
    /// `conjugate_argument` is set (the pointwise adjoint of a finite sum).
    FiniteSum {
        coeffs: Vec<CMatrix>,
        conjugate_argument: bool,
    },
    /// User-declared bounded evaluator on `Re z ≥ ν₀`; `adjoint` returns
    /// `eval(z)*` instead of `eval(z)`.
    Sampled { eval: LawEval, adjoint: bool },
}

impl fmt::Debug for LawForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LawForm::FiniteSum {
                coeffs,
                conjugate_argument,
            } => f
                .debug_struct("FiniteSum")
                .field("order", &(coeffs.len().saturating_sub(1)))
                .field("conjugate_argument", conjugate_argument)
                .finish(),
            LawForm::Sampled { adjoint, .. } => {
                f.debug_struct("Sampled").field("adjoint", adjoint).finish()
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct MaterialLaw {
    m: usize,
    form: LawForm,
    nu0: f64,
}

/// Lower bound for `Re⟨h, zM(z)h⟩ / ‖h‖²` over the grid frequencies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoercivityCertificate {
    pub nu: f64,
    pub c_est: f64,
    pub sample_count: usize,
    pub min_location: f64,
}

impl MaterialLaw {
    /// `M(z) = Σ_{k=0}^{n} z^{−k} M_k`.
    pub fn finite_sum(coeffs: Vec<CMatrix>) -> Result<Self> {
        let m = match coeffs.first() {
            Some(c0) => c0.nrows(),
            None => return Err(EvoqError::Dimension("finite sum needs M_0".into())),
        };
        for (k, c) in coeffs.iter().enumerate() {
            if c.nrows() != m || c.ncols() != m {
                return Err(EvoqError::Dimension(format!(
                    "coefficient M_{k} is {}x{}, expected {m}x{m}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(EvoqError::NonFinite(format!("coefficient M_{k}")));
            }
        }
        Ok(Self {
            m,
            form: LawForm::FiniteSum {
                coeffs,
                conjugate_argument: false,
            },
            nu0: 0.0,
        })
    }

    /// Constant law `M(z) = M_0`.
    pub fn constant(m0: CMatrix) -> Result<Self> {
        Self::finite_sum(vec![m0])
    }

    pub fn identity(m: usize) -> Self {
        Self::constant(CMatrix::identity(m, m)).expect("identity is a valid law")
    }

    /// Wraps an evaluator declared bounded on `Re z ≥ nu0`.
    pub fn sampled(m: usize, nu0: f64, eval: LawEval) -> Self {
        Self {
            m,
            form: LawForm::Sampled {
                eval,
                adjoint: false,
            },
            nu0,
        }
    }

    pub fn with_nu0(mut self, nu0: f64) -> Self {
        self.nu0 = nu0;
        self
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn nu0(&self) -> f64 {
        self.nu0
    }

    pub fn form(&self) -> &LawForm {
        &self.form
    }

    /// Coefficients `M_0..M_n` of a plain finite sum, `None` otherwise.
    pub fn coefficients(&self) -> Option<&[CMatrix]> {
        match &self.form {
            LawForm::FiniteSum {
                coeffs,
                conjugate_argument: false,
            } => Some(coeffs),
            _ => None,
        }
    }

    /// `(M_0, M_1)` for laws of the form `M_0 + z^{−1} M_1`.
    pub fn first_order(&self) -> Result<(CMatrix, CMatrix)> {
        match self.coefficients() {
            Some([m0]) => Ok((m0.clone(), CMatrix::zeros(self.m, self.m))),
            Some([m0, m1]) => Ok((m0.clone(), m1.clone())),
            _ => Err(EvoqError::UnsupportedLaw(
                "expected a finite sum M_0 + z^-1 M_1".into(),
            )),
        }
    }

    pub fn eval(&self, z: C64) -> Result<CMatrix> {
        eval_law(self, z)
    }
}

/// `M(z)`; finite sums by Horner's scheme in `z^{−1}`.
pub fn eval_law(law: &MaterialLaw, z: C64) -> Result<CMatrix> {
    match &law.form {
        LawForm::FiniteSum {
            coeffs,
            conjugate_argument,
        } => {
            if coeffs.len() == 1 {
                return Ok(coeffs[0].clone());
            }
            if z.norm_sqr() == 0.0 {
                return Err(EvoqError::Pole { re: z.re, im: z.im });
            }
            let w = if *conjugate_argument { z.conj().inv() } else { z.inv() };
            let mut acc = coeffs[coeffs.len() - 1].clone();
            for c in coeffs.iter().rev().skip(1) {
                acc *= w;
                acc += c;
            }
            Ok(acc)
        }
        LawForm::Sampled { eval, adjoint } => {
            if z.re < law.nu0 {
                return Err(EvoqError::OutsideRegion {
                    re: z.re,
                    nu0: law.nu0,
                });
            }
            let v = eval(z);
            if v.nrows() != law.m || v.ncols() != law.m {
                return Err(EvoqError::Dimension(format!(
                    "sampled law returned {}x{}, expected {}x{}",
                    v.nrows(),
                    v.ncols(),
                    law.m,
                    law.m
                )));
            }
            Ok(if *adjoint { v.adjoint() } else { v })
        }
    }
}

/// The dual law `M*(z) = M(z)*`.
///
/// Finite-sum coefficients are conjugate-transposed; since
/// `M(z)* = Σ conj(z)^{−k} M_k*`, the result evaluates at the conjugated
/// argument. Applying this twice gives back the original law.
pub fn adjoint_law(law: &MaterialLaw) -> MaterialLaw {
    let form = match &law.form {
        LawForm::FiniteSum {
            coeffs,
            conjugate_argument,
        } => LawForm::FiniteSum {
            coeffs: coeffs.iter().map(|c| c.adjoint()).collect(),
            conjugate_argument: !conjugate_argument,
        },
        LawForm::Sampled { eval, adjoint } => LawForm::Sampled {
            eval: eval.clone(),
            adjoint: !adjoint,
        },
    };
    MaterialLaw {
        m: law.m,
        form,
        nu0: law.nu0,
    }
}

/// `z ↦ Σ z^{−k} M_k*`, the law of the time-reversed adjoint system.
pub fn time_reversed_law(law: &MaterialLaw) -> Result<MaterialLaw> {
    match &law.form {
        LawForm::FiniteSum {
            coeffs,
            conjugate_argument: false,
        } => Ok(MaterialLaw {
            m: law.m,
            form: LawForm::FiniteSum {
                coeffs: coeffs.iter().map(|c| c.adjoint()).collect(),
                conjugate_argument: false,
            },
            nu0: law.nu0,
        }),
        _ => Err(EvoqError::UnsupportedLaw(
            "time reversal of the adjoint system needs a plain finite-sum law".into(),
        )),
    }
}

/// Hermitian part of `(iξ + ν) M(iξ + ν)`.
pub fn coercivity_matrix(law: &MaterialLaw, nu: f64, xi: f64) -> Result<CMatrix> {
    let z = C64::new(nu, xi);
    Ok(hermitian_part(&(eval_law(law, z)? * z)))
}

/// Certifies `Re⟨h, zM(z)h⟩ ≥ c‖h‖²` on the frequencies of `grid`.
pub fn coercivity(law: &MaterialLaw, nu: f64, grid: &TimeGrid) -> Result<CoercivityCertificate> {
    if !(nu > 0.0) {
        return Err(EvoqError::Precondition(format!("weight must be positive, got {nu}")));
    }
    if nu < law.nu0 {
        return Err(EvoqError::Precondition(format!(
            "weight {nu} is below the admissible bound nu0 = {}",
            law.nu0
        )));
    }
    let xs = frequencies(grid);
    let mins: Vec<Result<f64>> = xs
        .par_iter()
        .map(|&xi| Ok(min_eigenvalue_hermitian(&coercivity_matrix(law, nu, xi)?)))
        .collect();
    let mut c_est = f64::INFINITY;
    let mut min_location = 0.0;
    for (xi, lam) in xs.iter().zip(mins) {
        let lam = lam?;
        if lam < c_est {
            c_est = lam;
            min_location = *xi;
        }
    }
    if !(c_est > 0.0) {
        return Err(EvoqError::NonCoercive {
            c_est,
            xi: min_location,
        });
    }
    Ok(CoercivityCertificate {
        nu,
        c_est,
        sample_count: xs.len(),
        min_location,
    })
}

/// `M(∂_{t,ν}) = L_ν* M(im + ν) L_ν` on the signal's grid.
pub fn apply_material_op(law: &MaterialLaw, f: &WeightedSignal) -> Result<WeightedSignal> {
    check_dim(law, f)?;
    let nu = f.nu();
    let table = symbol_table(law, nu, f.grid(), false)?;
    multiply_bins(f, |k| Ok(table[k].clone()))
}

/// `M(∂_{t,ν})^{*ν} = L_{−ν}* M*(im + ν) L_{−ν}` for `g ∈ L²_{−ν}`.
pub fn apply_adjoint_material_op(law: &MaterialLaw, g: &WeightedSignal) -> Result<WeightedSignal> {
    check_dim(law, g)?;
    let nu = -g.nu();
    let table = symbol_table(law, nu, g.grid(), true)?;
    multiply_bins(g, |k| Ok(table[k].clone()))
}

fn check_dim(law: &MaterialLaw, f: &WeightedSignal) -> Result<()> {
    if law.m != f.dim() {
        return Err(EvoqError::Dimension(format!(
            "law acts on dimension {}, signal has {}",
            law.m,
            f.dim()
        )));
    }
    Ok(())
}

// Evaluated once per bin; the multiplier closure indexes by frequency.
fn symbol_table(law: &MaterialLaw, nu: f64, grid: &TimeGrid, adjoint: bool) -> Result<Vec<CMatrix>> {
    frequencies(grid)
        .into_par_iter()
        .map(|xi| {
            let v = eval_law(law, C64::new(nu, xi))?;
            Ok(if adjoint { v.adjoint() } else { v })
        })
        .collect()
}

/// Largest `‖M(iξ + ν)‖₂` over the grid frequencies.
pub fn multiplier_norm(law: &MaterialLaw, nu: f64, grid: &TimeGrid, adjoint: bool) -> Result<f64> {
    let table = symbol_table(law, nu, grid, adjoint)?;
    Ok(table
        .iter()
        .map(crate::linalg::spectral_norm)
        .fold(0.0, f64::max))
}
