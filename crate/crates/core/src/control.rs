//! Null-controllability of `(∂_{t,ν}M(∂_{t,ν}) + A)U = F + BG`.
//!
//! Two notions are covered. The supported variant asks for `G` with
//! `spt S_ν(F + BG) ⊆ (−∞, T]`; it is decided through the end maps
//! `L_F = r_{≥T}S_ν` and `L_G = r_{≥T}S_νB`, assembled densely from solver
//! columns. The pointwise variant, for laws `M₀ + z^{−1}M₁`, asks for
//! `M₀U(T) = 0` given an initial state `U₀` and is built on the exactly
//! causal trapezoidal stepper.
//!
//! Matrices act on flat sample vectors. With the pairing
//! `dt·Σ conj(φ)ψ` the ν-adjoint of a flat matrix is its conjugate
//! transpose, so Euclidean ratios of flat vectors are ratios of weighted
//! norms.

use std::ops::Range;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EvoqError, Result};
use crate::linalg::{c, inv_sqrt_hermitian, spectral_norm, CMatrix, CVector, TruncatedSvd};
use crate::signal::{TimeGrid, WeightedSignal, C64};
use crate::solver::{timestep_oracle, Direction, EvoProblem, EvoSystem, SolutionOperator};

/// Singular values below `SVD_CUTOFF·σ_max` are treated as zero.
pub const SVD_CUTOFF: f64 = 1e-10;
/// Relative residual below which a supported-variant control is feasible.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Pointwise controls are feasible when `‖ΦG − b‖ < POINTWISE_TOL·(1 + ‖b‖)`.
pub const POINTWISE_TOL: f64 = 1e-8;
/// Largest number of matrix entries a dense end map may have.
pub const DEFAULT_SIZE_LIMIT: usize = 4_000_000;

/// Relative threshold of the range-projector test.
const PROJECTOR_TOL: f64 = 1e-8;
/// Eigenvalues of `BB*` below this fraction of the largest count as kernel.
const EIGEN_KERNEL_RATIO: f64 = 1e-12;
/// `‖A*x‖ ≤ KERNEL_SEEN_TOL·‖A‖` on the kernel of `B*` means `A*` misses it.
const KERNEL_SEEN_TOL: f64 = 1e-6;
/// Linearity probes of an assembled map must agree with direct solves.
const LINEARITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub enum ControlVariant {
    /// Null control of the solution driven by the forcing `F` at weight `ν`.
    Supported { forcing: WeightedSignal },
    /// Steering `M₀U(T)` to zero from the initial state `U₀`.
    Pointwise { u0: CVector },
}

#[derive(Clone, Debug)]
pub struct ControlProblem {
    pub system: EvoSystem,
    /// `m × q` control injection, applied sample by sample.
    pub b: CMatrix,
    pub horizon: f64,
    pub variant: ControlVariant,
    /// Upper bound on the entries of a dense end map.
    pub size_limit: usize,
}

impl ControlProblem {
    fn new(system: EvoSystem, b: CMatrix, horizon: f64, variant: ControlVariant) -> Result<Self> {
        let m = system.dim();
        if b.nrows() != m || b.ncols() == 0 {
            return Err(EvoqError::Dimension(format!(
                "control injection must be {m} x q with q >= 1, got {} x {}",
                b.nrows(),
                b.ncols()
            )));
        }
        if b.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(EvoqError::NonFinite("control injection".into()));
        }
        let g = system.grid;
        if !(horizon >= g.t_min() && horizon <= g.t_max()) {
            return Err(EvoqError::OutOfRange {
                t: horizon,
                t_min: g.t_min(),
                t_max: g.t_max(),
            });
        }
        Ok(Self {
            system,
            b,
            horizon,
            variant,
            size_limit: DEFAULT_SIZE_LIMIT,
        })
    }

    pub fn supported(
        system: EvoSystem,
        b: CMatrix,
        horizon: f64,
        forcing: WeightedSignal,
    ) -> Result<Self> {
        EvoProblem::forward(system.clone(), forcing.clone())?;
        if !forcing.grid().matches(&system.grid) {
            return Err(EvoqError::Pairing("forcing lives on another grid".into()));
        }
        Self::new(system, b, horizon, ControlVariant::Supported { forcing })
    }

    pub fn pointwise(system: EvoSystem, b: CMatrix, horizon: f64, u0: CVector) -> Result<Self> {
        system.law.first_order()?;
        if u0.len() != system.dim() {
            return Err(EvoqError::Dimension(format!(
                "initial state has length {}, system dimension {}",
                u0.len(),
                system.dim()
            )));
        }
        if horizon <= 0.0 {
            return Err(EvoqError::Precondition(format!(
                "pointwise horizon must be positive, got {horizon}"
            )));
        }
        Self::new(system, b, horizon, ControlVariant::Pointwise { u0 })
    }

    pub fn with_size_limit(mut self, limit: usize) -> Self {
        self.size_limit = limit;
        self
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn controls(&self) -> usize {
        self.b.ncols()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.system.grid
    }

    /// Sample indices kept by `r_{≥T}`.
    pub fn post_range(&self) -> Result<Range<usize>> {
        let g = &self.system.grid;
        let start = g.index_at_least(self.horizon);
        if start >= g.len() {
            return Err(EvoqError::Precondition(format!(
                "horizon {} leaves no samples after it",
                self.horizon
            )));
        }
        Ok(start..g.len())
    }

    /// `(I ⊗ B) g` for a flat control with `q` components.
    pub fn inject(&self, g: &[C64]) -> Vec<C64> {
        let (m, q) = (self.dim(), self.controls());
        let mut out = vec![C64::new(0.0, 0.0); g.len() / q * m];
        for (j, chunk) in g.chunks(q).enumerate() {
            let v = &self.b * CVector::from_column_slice(chunk);
            out[j * m..(j + 1) * m].copy_from_slice(v.as_slice());
        }
        out
    }
}

/// Rank policy of a truncated-SVD solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regularization {
    pub rank: usize,
    pub cutoff: f64,
    pub sigma_max: f64,
}

impl Regularization {
    fn of(svd: &TruncatedSvd) -> Self {
        Self {
            rank: svd.rank,
            cutoff: svd.cutoff,
            sigma_max: svd.sigma_max(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ControlResult {
    /// Control at weight `ν` with `q` components.
    pub g: WeightedSignal,
    /// `‖r_{≥T}S_ν(F + BG)‖` or `‖M₀U(T)‖`.
    pub terminal_residual: f64,
    /// Residual relative to the uncontrolled target.
    pub relative_residual: f64,
    pub control_norm: f64,
    pub feasible: bool,
    pub regularization: Regularization,
    /// `‖(I + A*A)^{−1/2} M₀U(T)‖` for the pointwise variant.
    pub terminal_residual_weak: Option<f64>,
}

/// Serializable digest of a [`ControlResult`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSummary {
    pub feasible: bool,
    pub terminal_residual: f64,
    pub relative_residual: f64,
    pub control_norm: f64,
    pub regularization: Regularization,
    pub terminal_residual_weak: Option<f64>,
}

impl ControlResult {
    pub fn summary(&self) -> ControlSummary {
        ControlSummary {
            feasible: self.feasible,
            terminal_residual: self.terminal_residual,
            relative_residual: self.relative_residual,
            control_norm: self.control_norm,
            regularization: self.regularization,
            terminal_residual_weak: self.terminal_residual_weak,
        }
    }
}

// ---------------------------------------------------------------------------
// Douglas lemma

/// Outcome of [`douglas_check`] on a pair `(A, B)`.
#[derive(Clone, Debug)]
pub struct DouglasReport {
    /// `ran A ⊆ ran B`, decided by the range projector of `B`.
    pub included: bool,
    /// Verdicts of the four equivalent conditions:
    /// range projector, factorization `A = BC`, bounded preimages of the
    /// unit ball, and `‖A*x‖ ≤ c‖B*x‖` through the eigenvectors of `BB*`.
    pub conditions: [bool; 4],
    /// All four conditions agree.
    pub consistent: bool,
    /// `C = B⁺A` when included.
    pub factor: Option<CMatrix>,
    /// `‖A − BC‖_F / max(1, ‖A‖_F)` for `C = B⁺A`.
    pub factor_residual: f64,
    /// `‖B⁺A‖`, or infinity when excluded.
    pub constant: f64,
    /// Same constant from the eigen route.
    pub constant_eigen: f64,
    /// Unit `x` with `B*x ≈ 0` and `A*x ≠ 0` when excluded.
    pub witness: Option<CVector>,
    pub regularization: Regularization,
}

/// Decides `ran A ⊆ ran B` and cross-checks the four equivalent conditions.
pub fn douglas_check(a: &CMatrix, b: &CMatrix) -> DouglasReport {
    assert_eq!(a.nrows(), b.nrows(), "douglas_check needs a common target space");
    let p = a.nrows();
    let a_fro = a.norm();
    let a_norm = spectral_norm(a);
    let svd = TruncatedSvd::new(b, SVD_CUTOFF);
    let ub = svd.range_basis();

    // (i) range projector
    let outside = a - &ub * (ub.adjoint() * a);
    let outside_fro = outside.norm();
    let cond_projector = outside_fro <= PROJECTOR_TOL * a_fro;

    // (ii) factorization
    let factor = svd.solve(a);
    let factor_residual = (a - b * &factor).norm() / a_fro.max(1.0);
    let cond_factor = factor_residual <= PROJECTOR_TOL * a_fro / a_fro.max(1.0);
    let constant = spectral_norm(&factor);

    // (iii) the image of the unit ball has bounded preimages
    let cond_preimage = if a_norm == 0.0 {
        true
    } else {
        let sa = TruncatedSvd::new(a, SVD_CUTOFF);
        let v = sa.v_t.rows(0, sa.rank).adjoint();
        let images = a * &v;
        let pre = svd.solve(&images);
        let res = &images - b * &pre;
        (0..images.ncols()).all(|k| {
            let target = images.column(k).norm();
            res.column(k).norm() <= PROJECTOR_TOL * target.max(a_norm * SVD_CUTOFF)
                && pre.column(k).norm() <= constant * (1.0 + 1e-8)
        })
    };

    // (iv) observability form through the eigenvectors of BB*
    let eig = SymmetricEigen::new(b * b.adjoint());
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let mut kernel_seen: f64 = 0.0;
    let mut kernel_witness: Option<CVector> = None;
    let mut kept = Vec::new();
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let w = eig.eigenvectors.column(k).into_owned();
        if lmax == 0.0 || l <= EIGEN_KERNEL_RATIO * lmax {
            let seen = (a.adjoint() * &w).norm();
            if seen > kernel_seen {
                kernel_seen = seen;
                kernel_witness = Some(w);
            }
        } else {
            kept.push((l, w));
        }
    }
    let cond_observe = kernel_seen <= KERNEL_SEEN_TOL * a_norm;
    let constant_eigen = if !cond_observe {
        f64::INFINITY
    } else if kept.is_empty() {
        0.0
    } else {
        let mut rows = CMatrix::zeros(kept.len(), a.ncols());
        for (i, (l, w)) in kept.iter().enumerate() {
            let r = (w.adjoint() * a) / c(l.sqrt());
            rows.row_mut(i).copy_from(&r);
        }
        spectral_norm(&rows)
    };

    let included = cond_projector;
    let conditions = [cond_projector, cond_factor, cond_preimage, cond_observe];
    let consistent = conditions.iter().all(|&x| x == included);
    let witness = if included {
        None
    } else {
        let mut best = 0;
        let mut best_norm = 0.0;
        for k in 0..outside.ncols() {
            let nrm = outside.column(k).norm();
            if nrm > best_norm {
                best_norm = nrm;
                best = k;
            }
        }
        if best_norm > 0.0 {
            Some(outside.column(best) / c(best_norm))
        } else {
            kernel_witness.or_else(|| Some(CVector::zeros(p)))
        }
    };
    DouglasReport {
        included,
        conditions,
        consistent,
        factor: included.then_some(factor),
        factor_residual,
        constant: if included { constant } else { f64::INFINITY },
        constant_eigen,
        witness,
        regularization: Regularization::of(&svd),
    }
}

// ---------------------------------------------------------------------------
// end maps

/// Dense matrices of `L_F = r_{≥T}S_ν` and `L_G = r_{≥T}S_νB` on flat samples.
///
/// Rows are indexed by `(j − post.start)·m + i` for kept samples `j`,
/// columns of `L_F` by `j·m + i` and columns of `L_G` by `j·q + i`.
#[derive(Clone, Debug)]
pub struct EndMaps {
    pub l_f: CMatrix,
    pub l_g: CMatrix,
    pub post: Range<usize>,
    pub m: usize,
    pub q: usize,
    pub grid: TimeGrid,
    pub nu: f64,
    /// Largest relative gap between `L_F x` and a direct solve on random probes.
    pub linearity_error: f64,
}

/// Dense matrices of the ν-adjoint end maps `S^{*ν}r_{≥T,−ν}` and
/// `B*S^{*ν}r_{≥T,−ν}`, assembled from adjoint solves.
#[derive(Clone, Debug)]
pub struct AdjointEndMaps {
    pub lambda_f: CMatrix,
    pub lambda_g: CMatrix,
    pub post: Range<usize>,
}

fn size_guard(cp: &ControlProblem, rows: usize, cols: usize) -> Result<()> {
    let entries = rows.saturating_mul(cols);
    if entries > cp.size_limit {
        return Err(EvoqError::SizeGuard {
            entries,
            limit: cp.size_limit,
        });
    }
    Ok(())
}

fn unit_signal(grid: TimeGrid, nu: f64, m: usize, index: usize) -> WeightedSignal {
    let mut s = WeightedSignal::zeros(grid, nu, m);
    s.flat_mut()[index] = c(1.0);
    s
}

fn random_flat(rng: &mut ChaCha8Rng, len: usize) -> Vec<C64> {
    (0..len)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn relative_gap(a: &[C64], b: &[C64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Assembles `L_F` and `L_G` from forward solves with canonical right-hand sides.
pub fn assemble_endmaps(cp: &ControlProblem) -> Result<EndMaps> {
    let op = cp.system.operator()?;
    assemble_endmaps_with(cp, &op)
}

pub fn assemble_endmaps_with(cp: &ControlProblem, op: &SolutionOperator) -> Result<EndMaps> {
    let grid = cp.system.grid;
    let (m, q, n, nu) = (cp.dim(), cp.controls(), grid.len(), cp.system.nu);
    let post = cp.post_range()?;
    let rows = post.len() * m;
    size_guard(cp, rows, n * m)?;
    let columns: Vec<Vec<C64>> = (0..n * m)
        .into_par_iter()
        .map(|col| {
            let u = op.apply(Direction::Forward, &unit_signal(grid, nu, m, col))?;
            Ok(u.flat()[post.start * m..].to_vec())
        })
        .collect::<Result<_>>()?;
    let mut l_f = CMatrix::zeros(rows, n * m);
    for (k, col) in columns.iter().enumerate() {
        l_f.column_mut(k).copy_from_slice(col);
    }
    let mut l_g = CMatrix::zeros(rows, n * q);
    for j in 0..n {
        let block = l_f.columns(j * m, m) * &cp.b;
        l_g.columns_mut(j * q, q).copy_from(&block);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut linearity_error: f64 = 0.0;
    for _ in 0..2 {
        let x = random_flat(&mut rng, n * m);
        let direct = op.apply(
            Direction::Forward,
            &WeightedSignal::from_flat(grid, nu, m, x.clone())?,
        )?;
        let via = &l_f * CVector::from_vec(x);
        linearity_error =
            linearity_error.max(relative_gap(via.as_slice(), &direct.flat()[post.start * m..]));

        let y = random_flat(&mut rng, n * q);
        let direct = op.apply(
            Direction::Forward,
            &WeightedSignal::from_flat(grid, nu, m, cp.inject(&y))?,
        )?;
        let via = &l_g * CVector::from_vec(y);
        linearity_error =
            linearity_error.max(relative_gap(via.as_slice(), &direct.flat()[post.start * m..]));
    }
    if linearity_error > LINEARITY_TOL {
        return Err(EvoqError::Solver(format!(
            "assembled end map deviates from direct solves by {linearity_error:.3e}"
        )));
    }
    Ok(EndMaps {
        l_f,
        l_g,
        post,
        m,
        q,
        grid,
        nu,
        linearity_error,
    })
}

/// Assembles the ν-adjoint end maps from adjoint solves with canonical data
/// supported after the horizon.
pub fn assemble_adjoint_endmaps(cp: &ControlProblem) -> Result<AdjointEndMaps> {
    let op = cp.system.operator()?;
    assemble_adjoint_endmaps_with(cp, &op)
}

pub fn assemble_adjoint_endmaps_with(
    cp: &ControlProblem,
    op: &SolutionOperator,
) -> Result<AdjointEndMaps> {
    let grid = cp.system.grid;
    let (m, q, n, nu) = (cp.dim(), cp.controls(), grid.len(), cp.system.nu);
    let post = cp.post_range()?;
    let cols = post.len() * m;
    size_guard(cp, n * m, cols)?;
    let columns: Vec<Vec<C64>> = (0..cols)
        .into_par_iter()
        .map(|k| {
            let v = op.apply(
                Direction::Adjoint,
                &unit_signal(grid, -nu, m, post.start * m + k),
            )?;
            Ok(v.into_flat())
        })
        .collect::<Result<_>>()?;
    let mut lambda_f = CMatrix::zeros(n * m, cols);
    for (k, col) in columns.iter().enumerate() {
        lambda_f.column_mut(k).copy_from_slice(col);
    }
    let bh = cp.b.adjoint();
    let mut lambda_g = CMatrix::zeros(n * q, cols);
    for j in 0..n {
        let block = &bh * lambda_f.rows(j * m, m);
        lambda_g.rows_mut(j * q, q).copy_from(&block);
    }
    Ok(AdjointEndMaps {
        lambda_f,
        lambda_g,
        post,
    })
}

/// `max(‖Λ_F − L_F*‖, ‖Λ_G − L_G*‖) / ‖L_F‖`, Frobenius norms.
pub fn adjoint_factorization_gap(maps: &EndMaps, adj: &AdjointEndMaps) -> f64 {
    let gf = (&adj.lambda_f - maps.l_f.adjoint()).norm();
    let gg = (&adj.lambda_g - maps.l_g.adjoint()).norm();
    gf.max(gg) / maps.l_f.norm().max(f64::MIN_POSITIVE)
}

/// Least-norm synthesis `G = −L_G⁺L_F F` with a fixed SVD of `L_G`.
#[derive(Clone, Debug)]
pub struct ControlSynthesis {
    svd: TruncatedSvd,
}

/// Result of one supported-variant synthesis in flat coordinates.
#[derive(Clone, Debug)]
pub struct FlatControl {
    pub g: Vec<C64>,
    /// `‖L_F F + L_G G‖` on flat samples.
    pub residual: f64,
    /// `‖L_F F‖` on flat samples.
    pub target: f64,
}

impl FlatControl {
    pub fn relative_residual(&self) -> f64 {
        if self.target == 0.0 {
            0.0
        } else {
            self.residual / self.target
        }
    }
}

impl EndMaps {
    pub fn synthesis(&self) -> ControlSynthesis {
        ControlSynthesis {
            svd: TruncatedSvd::new(&self.l_g, SVD_CUTOFF),
        }
    }

    pub fn post_samples(&self) -> usize {
        self.post.len()
    }
}

impl ControlSynthesis {
    pub fn regularization(&self) -> Regularization {
        Regularization::of(&self.svd)
    }

    /// Least-norm controls for every column of `f` (flat forcings), with
    /// residual and target norms per column.
    pub fn solve_many(&self, maps: &EndMaps, f: &CMatrix) -> (CMatrix, Vec<f64>, Vec<f64>) {
        let target = &maps.l_f * f;
        let g = -self.svd.solve(&target);
        let res = &target + &maps.l_g * &g;
        let residuals = (0..f.ncols()).map(|k| res.column(k).norm()).collect();
        let targets = (0..f.ncols()).map(|k| target.column(k).norm()).collect();
        (g, residuals, targets)
    }

    pub fn solve(&self, maps: &EndMaps, f: &[C64]) -> FlatControl {
        let fm = CMatrix::from_column_slice(f.len(), 1, f);
        let (g, r, t) = self.solve_many(maps, &fm);
        FlatControl {
            g: g.column(0).iter().copied().collect(),
            residual: r[0],
            target: t[0],
        }
    }
}

/// Minimum-norm control `G` with `r_{≥T}S_ν(F + BG) ≈ 0`; infeasibility is
/// reported through `feasible = false`.
pub fn null_control(cp: &ControlProblem) -> Result<ControlResult> {
    let ControlVariant::Supported { forcing } = &cp.variant else {
        return Err(EvoqError::Precondition("null_control needs the supported variant".into()));
    };
    let maps = assemble_endmaps(cp)?;
    let synth = maps.synthesis();
    Ok(control_from_maps(cp, &maps, &synth, forcing))
}

pub fn control_from_maps(
    cp: &ControlProblem,
    maps: &EndMaps,
    synth: &ControlSynthesis,
    forcing: &WeightedSignal,
) -> ControlResult {
    let sol = synth.solve(maps, forcing.flat());
    let dt = maps.grid.dt();
    let rel = sol.relative_residual();
    let g = WeightedSignal::from_flat(maps.grid, maps.nu, cp.controls(), sol.g)
        .expect("least-norm control is finite");
    ControlResult {
        control_norm: g.norm(),
        g,
        terminal_residual: sol.residual * dt.sqrt(),
        relative_residual: rel,
        feasible: rel < FEASIBILITY_TOL,
        regularization: synth.regularization(),
        terminal_residual_weak: None,
    }
}

/// Closed-loop check: solves with `F + BG` and returns the weighted norm of
/// the solution after the horizon.
pub fn closed_loop_residual(cp: &ControlProblem, g: &WeightedSignal) -> Result<f64> {
    let ControlVariant::Supported { forcing } = &cp.variant else {
        return Err(EvoqError::Precondition("closed loop needs the supported variant".into()));
    };
    let injected =
        WeightedSignal::from_flat(cp.system.grid, cp.system.nu, cp.dim(), cp.inject(g.flat()))?;
    let rhs = injected.axpy(c(1.0), forcing)?;
    let u = cp.system.operator()?.apply(Direction::Forward, &rhs)?;
    Ok(u.norm_on(cp.post_range()?))
}

// ---------------------------------------------------------------------------
// observability

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservabilityMethod {
    GeneralizedSvd,
    PowerIteration,
}

#[derive(Clone, Debug)]
pub struct ObservabilityEstimate {
    /// Smallest `c` with `‖Λ_F x‖ ≤ c‖Λ_G x‖`; infinite when `Λ_G` has a
    /// kernel direction that `Λ_F` sees.
    pub c_obs: f64,
    /// Data at `−ν`, supported after the horizon, attaining the ratio.
    pub witness: WeightedSignal,
    /// `‖Λ_F w‖ / ‖Λ_G w‖` at the witness.
    pub witness_ratio: f64,
    pub method: ObservabilityMethod,
    pub regularization: Regularization,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservabilitySummary {
    pub c_obs: Option<f64>,
    pub infinite: bool,
    pub witness_ratio: f64,
    pub method: ObservabilityMethod,
    pub regularization: Regularization,
}

impl ObservabilityEstimate {
    pub fn is_finite(&self) -> bool {
        self.c_obs.is_finite()
    }

    pub fn summary(&self) -> ObservabilitySummary {
        ObservabilitySummary {
            c_obs: self.c_obs.is_finite().then_some(self.c_obs),
            infinite: !self.c_obs.is_finite(),
            witness_ratio: self.witness_ratio,
            method: self.method,
            regularization: self.regularization,
        }
    }
}

fn embed_post(grid: TimeGrid, nu: f64, m: usize, post: &Range<usize>, x: &[C64]) -> WeightedSignal {
    let mut data = vec![C64::new(0.0, 0.0); grid.len() * m];
    data[post.start * m..].copy_from_slice(x);
    WeightedSignal::from_flat(grid, nu, m, data).expect("finite data")
}

fn ratio(lf: &CMatrix, lg: &CMatrix, x: &CVector) -> f64 {
    let num = (lf * x).norm();
    let den = (lg * x).norm();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Observability constant of the pair `(Λ_F, Λ_G)` through the SVD of `Λ_G`.
pub fn observability_from_adjoint(
    cp: &ControlProblem,
    adj: &AdjointEndMaps,
) -> ObservabilityEstimate {
    let (lf, lg) = (&adj.lambda_f, &adj.lambda_g);
    let svd = TruncatedSvd::new(lg, SVD_CUTOFF);
    let r = svd.rank;
    let dim = lf.ncols();
    let lf_norm = spectral_norm(lf);
    let kernel = svd.kernel_basis();
    let seen_norm = if kernel.ncols() > 0 {
        spectral_norm(&(lf * &kernel))
    } else {
        0.0
    };
    let (c_obs, x) = if seen_norm > KERNEL_SEEN_TOL * lf_norm {
        let s = TruncatedSvd::new(&(lf * &kernel), 0.0);
        let y = s.v_t.row(0).adjoint();
        (f64::INFINITY, &kernel * y)
    } else if r == 0 {
        (0.0, CVector::zeros(dim))
    } else {
        // x = Z_r Σ⁻¹ y gives Λ_G x = W_r y
        let mut zs = svd.v_t.rows(0, r).adjoint();
        for k in 0..r {
            let s = svd.singular_values[k];
            zs.column_mut(k).iter_mut().for_each(|v| *v /= s);
        }
        let s = TruncatedSvd::new(&(lf * &zs), 0.0);
        let y = s.v_t.row(0).adjoint();
        (s.sigma_max(), &zs * y)
    };
    let witness = embed_post(cp.system.grid, -cp.system.nu, cp.dim(), &adj.post, x.as_slice());
    ObservabilityEstimate {
        c_obs,
        witness_ratio: ratio(lf, lg, &x),
        witness,
        method: ObservabilityMethod::GeneralizedSvd,
        regularization: Regularization::of(&svd),
    }
}

/// Dense generalized-SVD estimate, or the matrix-free power iteration when
/// the adjoint end maps exceed the size guard.
pub fn observability_constant(cp: &ControlProblem) -> Result<ObservabilityEstimate> {
    match assemble_adjoint_endmaps(cp) {
        Ok(adj) => Ok(observability_from_adjoint(cp, &adj)),
        Err(EvoqError::SizeGuard { .. }) => observability_power_iteration(cp, 30, 0x0b5e),
        Err(e) => Err(e),
    }
}

/// Matrix-free estimate: power iteration for the largest eigenvalue of
/// `(Λ_G*Λ_G)⁻¹Λ_F*Λ_F` with conjugate-gradient inner solves built from
/// forward and adjoint solves. The result is a lower bound for the constant;
/// a ratio above `1e12` is reported as infinite.
pub fn observability_power_iteration(
    cp: &ControlProblem,
    iterations: usize,
    seed: u64,
) -> Result<ObservabilityEstimate> {
    let op = cp.system.operator()?;
    let grid = cp.system.grid;
    let (m, nu) = (cp.dim(), cp.system.nu);
    let post = cp.post_range()?;
    let dim = post.len() * m;
    let bh = cp.b.adjoint();
    let lambda_f = |x: &[C64]| -> Result<Vec<C64>> {
        Ok(op
            .apply(Direction::Adjoint, &embed_post(grid, -nu, m, &post, x))?
            .into_flat())
    };
    let filter = |v: &[C64]| -> Vec<C64> {
        v.chunks(m)
            .flat_map(|s| (&bh * CVector::from_column_slice(s)).as_slice().to_vec())
            .collect()
    };
    // Λ*y = r_{≥T}S_ν y, so Λ*Λ needs one adjoint and one forward solve
    let gram = |x: &[C64], filtered: bool| -> Result<Vec<C64>> {
        let mut y = lambda_f(x)?;
        if filtered {
            y = cp.inject(&filter(&y));
        }
        let u = op.apply(Direction::Forward, &WeightedSignal::from_flat(grid, nu, m, y)?)?;
        Ok(u.flat()[post.start * m..].to_vec())
    };
    let dot = |a: &[C64], b: &[C64]| -> C64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    let norm = |a: &[C64]| dot(a, a).re.sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = random_flat(&mut rng, dim);
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let full = lambda_f(&x)?;
        let num = norm(&full);
        let den = norm(&filter(&full));
        estimate = if den == 0.0 { f64::INFINITY } else { num / den };
        if estimate > 1e12 {
            estimate = f64::INFINITY;
            break;
        }
        let rhs = gram(&x, false)?;
        let mut y = vec![C64::new(0.0, 0.0); dim];
        let mut r = rhs;
        let mut p = r.clone();
        let mut rr = dot(&r, &r).re;
        let stop = 1e-12 * rr.sqrt();
        for _ in 0..(4 * dim).max(50) {
            if rr.sqrt() <= stop {
                break;
            }
            let ap = gram(&p, true)?;
            let pap = dot(&p, &ap).re;
            if pap <= 0.0 {
                break;
            }
            let alpha = rr / pap;
            for k in 0..dim {
                y[k] += p[k] * alpha;
                r[k] -= ap[k] * alpha;
            }
            let rr_new = dot(&r, &r).re;
            let beta = rr_new / rr;
            for k in 0..dim {
                p[k] = r[k] + p[k] * beta;
            }
            rr = rr_new;
        }
        if norm(&y) == 0.0 {
            break;
        }
        x = y;
    }
    let nx = norm(&x).max(f64::MIN_POSITIVE);
    x.iter_mut().for_each(|v| *v /= nx);
    Ok(ObservabilityEstimate {
        c_obs: estimate,
        witness_ratio: estimate,
        witness: embed_post(grid, -nu, m, &post, &x),
        method: ObservabilityMethod::PowerIteration,
        regularization: Regularization {
            rank: dim,
            cutoff: 0.0,
            sigma_max: 0.0,
        },
    })
}

/// Largest ratio `‖Λ_F x‖/‖Λ_G x‖` over `samples` random complex Gaussian
/// directions; a lower bound for the observability constant.
pub fn observability_lower_bound(adj: &AdjointEndMaps, samples: usize, seed: u64) -> f64 {
    let dim = adj.lambda_f.ncols();
    (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let x = CVector::from_iterator(
                dim,
                (0..dim).map(|_| {
                    let re: f64 = rng.sample(rand_distr::StandardNormal);
                    let im: f64 = rng.sample(rand_distr::StandardNormal);
                    C64::new(re, im)
                }),
            );
            ratio(&adj.lambda_f, &adj.lambda_g, &x)
        })
        .reduce(|| 0.0, f64::max)
}

/// Verdicts of the three equivalent characterizations of null-controllability.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualityVerdict {
    pub feasible: bool,
    pub included: bool,
    pub observable: bool,
    pub agree: bool,
    pub c_obs: Option<f64>,
    pub douglas_constant: Option<f64>,
    pub douglas_consistent: bool,
    pub worst_relative_residual: f64,
    pub adjoint_gap: f64,
}

/// Dense artefacts behind a [`DualityVerdict`].
#[derive(Clone, Debug)]
pub struct DualityCertificate {
    pub verdict: DualityVerdict,
    pub observability: ObservabilityEstimate,
    pub maps: EndMaps,
    pub adjoint: AdjointEndMaps,
}

/// Runs null control over a spanning set of forcings, the Douglas check of
/// `(L_F, L_G)` and the observability constant, and compares the verdicts.
///
/// The spanning set consists of the right singular vectors of `L_F` whose
/// singular values exceed `FEASIBILITY_TOL·σ_max`; `G = 0` already meets the
/// feasibility tolerance on the rest.
pub fn certify_duality(cp: &ControlProblem) -> Result<DualityCertificate> {
    let op = cp.system.operator()?;
    let maps = assemble_endmaps_with(cp, &op)?;
    let adj = assemble_adjoint_endmaps_with(cp, &op)?;
    let synth = maps.synthesis();
    let sf = TruncatedSvd::new(&maps.l_f, FEASIBILITY_TOL);
    let basis = sf.v_t.rows(0, sf.rank).adjoint();
    let (_, residuals, targets) = synth.solve_many(&maps, &basis);
    let worst = residuals
        .iter()
        .zip(&targets)
        .map(|(r, t)| if *t == 0.0 { 0.0 } else { r / t })
        .fold(0.0, f64::max);
    let feasible = worst < FEASIBILITY_TOL;
    let douglas = douglas_check(&maps.l_f, &maps.l_g);
    let obs = observability_from_adjoint(cp, &adj);
    let observable = obs.is_finite();
    let verdict = DualityVerdict {
        feasible,
        included: douglas.included,
        observable,
        agree: feasible == douglas.included && douglas.included == observable,
        c_obs: observable.then_some(obs.c_obs),
        douglas_constant: douglas.included.then_some(douglas.constant),
        douglas_consistent: douglas.consistent,
        worst_relative_residual: worst,
        adjoint_gap: adjoint_factorization_gap(&maps, &adj),
    };
    Ok(DualityCertificate {
        verdict,
        observability: obs,
        maps,
        adjoint: adj,
    })
}

// ---------------------------------------------------------------------------
// pointwise variant

/// Solution of the initial value problem with control `G`.
#[derive(Clone, Debug)]
pub struct PointwiseSolution {
    /// `U = V + 1_{[0,∞)}U₀` at weight `ν`.
    pub u: WeightedSignal,
    /// `M₀U(T)`.
    pub m0u_at_t: CVector,
    /// Largest jump of `M₀(U − 1_{[0,∞)}U₀)` between adjacent samples.
    pub max_jump: f64,
}

fn pointwise_parts(cp: &ControlProblem) -> Result<(CMatrix, CMatrix, CVector)> {
    let ControlVariant::Pointwise { u0 } = &cp.variant else {
        return Err(EvoqError::Precondition("expected the pointwise variant".into()));
    };
    let (m0, m1) = cp.system.law.first_order()?;
    Ok((m0, m1, u0.clone()))
}

/// Index of the first sample at or after `t = 0`.
fn origin_index(grid: &TimeGrid) -> Result<usize> {
    let j0 = grid.index_at_least(0.0);
    if j0 >= grid.len() {
        return Err(EvoqError::Precondition("grid has no samples at t >= 0".into()));
    }
    Ok(j0)
}

/// `(a, w)` with `t = (1 − w)t_a + w·t_{a+1}`.
fn interpolation(grid: &TimeGrid, t: f64) -> Result<(usize, f64)> {
    let pos = (t - grid.t_min()) / grid.dt();
    if pos < 0.0 || pos.floor() as usize + 1 >= grid.len() {
        return Err(EvoqError::OutOfRange {
            t,
            t_min: grid.t_min(),
            t_max: grid.time(grid.len() - 1),
        });
    }
    let a = pos.floor() as usize;
    Ok((a, pos - a as f64))
}

/// Unweighted value of a ν-signal at `t` by linear interpolation of flat samples.
pub fn value_at(f: &WeightedSignal, t: f64) -> Result<CVector> {
    let (a, w) = interpolation(f.grid(), t)?;
    let m = f.dim();
    let scale = (f.nu() * t).exp();
    Ok(CVector::from_iterator(
        m,
        (0..m).map(|i| (f.sample(a)[i] * (1.0 - w) + f.sample(a + 1)[i] * w) * scale),
    ))
}

/// `1_{[0,∞)}(t)·v` at weight `ν`.
fn step_signal(grid: TimeGrid, nu: f64, v: &CVector) -> Result<WeightedSignal> {
    let m = v.len();
    let j0 = origin_index(&grid)?;
    let mut out = WeightedSignal::zeros(grid, nu, m);
    for j in j0..grid.len() {
        let w = (-nu * grid.time(j)).exp();
        for (i, z) in v.iter().enumerate() {
            out.sample_mut(j)[i] = z * w;
        }
    }
    Ok(out)
}

/// `U = V + 1_{[0,∞)}U₀` with `V = S_ν(BG − 1_{[0,∞)}(M₁ + A)U₀)`, computed
/// by the trapezoidal stepper.
pub fn pointwise_solve(cp: &ControlProblem, g: &WeightedSignal) -> Result<PointwiseSolution> {
    let (m0, m1, u0) = pointwise_parts(cp)?;
    let grid = cp.system.grid;
    let (m, nu) = (cp.dim(), cp.system.nu);
    if g.dim() != cp.controls() || !g.grid().matches(&grid) || g.nu() != nu {
        return Err(EvoqError::Dimension(
            "control must be a q-component signal at weight nu on the problem grid".into(),
        ));
    }
    let j0 = origin_index(&grid)?;
    if g.flat()[..j0 * cp.controls()].iter().any(|z| z.norm() != 0.0) {
        return Err(EvoqError::Precondition("control must vanish before t = 0".into()));
    }
    let drift = (&m1 + cp.system.spatial.matrix()) * &u0;
    let rhs = WeightedSignal::from_flat(grid, nu, m, cp.inject(g.flat()))?
        .axpy(c(-1.0), &step_signal(grid, nu, &drift)?)?;
    let v = timestep_oracle(&EvoProblem::forward(cp.system.clone(), rhs)?)?;
    let u = v.axpy(c(1.0), &step_signal(grid, nu, &u0)?)?;
    let m0u_at_t = &m0 * (value_at(&v, cp.horizon)? + &u0);
    let mut max_jump: f64 = 0.0;
    let mut prev = CVector::zeros(m);
    for j in 0..grid.len() {
        let cur = &m0 * CVector::from_vec(v.value(j));
        max_jump = max_jump.max((&cur - &prev).norm());
        prev = cur;
    }
    Ok(PointwiseSolution {
        u,
        m0u_at_t,
        max_jump,
    })
}

/// Solution driven by a one-sample impulse of mass `M₀U₀` at `t = 0`, the
/// regular stand-in for `S_ν(δ₀M₀U₀)`.
pub fn dirac_solution(cp: &ControlProblem) -> Result<WeightedSignal> {
    let (m0, _, u0) = pointwise_parts(cp)?;
    let grid = cp.system.grid;
    let (m, nu) = (cp.dim(), cp.system.nu);
    let j0 = origin_index(&grid)?;
    let mass = &m0 * &u0;
    let mut rhs = WeightedSignal::zeros(grid, nu, m);
    let scale = (-nu * grid.time(j0)).exp() / grid.dt();
    for (i, z) in mass.iter().enumerate() {
        rhs.sample_mut(j0)[i] = z * scale;
    }
    timestep_oracle(&EvoProblem::forward(cp.system.clone(), rhs)?)
}

/// The map `Φ: G ↦ M₀(S_νBG)(T)` on controls supported in `[0, ∞)` and the
/// target `b = M₀(S_ν1_{[0,∞)}(M₁ + A)U₀)(T) − M₀U₀`.
///
/// Unknowns are `√dt·φ_G` at samples `j ≥ start`, so Euclidean norms of the
/// unknowns are weighted norms of `G`.
#[derive(Clone, Debug)]
pub struct PointwiseMap {
    pub phi: CMatrix,
    pub target: CVector,
    pub start: usize,
}

/// Stepper responses to a unit flat impulse `B e_i` at the first sample;
/// the stepper is shift invariant, so these generate every column of `Φ`.
fn impulse_responses(cp: &ControlProblem) -> Result<Vec<WeightedSignal>> {
    let grid = cp.system.grid;
    let (m, nu) = (cp.dim(), cp.system.nu);
    (0..cp.controls())
        .into_par_iter()
        .map(|i| {
            let mut rhs = WeightedSignal::zeros(grid, nu, m);
            rhs.sample_mut(0).copy_from_slice(cp.b.column(i).as_slice());
            timestep_oracle(&EvoProblem::forward(cp.system.clone(), rhs)?)
        })
        .collect()
}

fn target_for(cp: &ControlProblem, m0: &CMatrix, m1: &CMatrix, u0: &CVector) -> Result<CVector> {
    let grid = cp.system.grid;
    let drift = (m1 + cp.system.spatial.matrix()) * u0;
    let rhs = step_signal(grid, cp.system.nu, &drift)?;
    let w = timestep_oracle(&EvoProblem::forward(cp.system.clone(), rhs)?)?;
    Ok(m0 * value_at(&w, cp.horizon)? - m0 * u0)
}

pub fn pointwise_map(cp: &ControlProblem) -> Result<PointwiseMap> {
    let (m0, m1, u0) = pointwise_parts(cp)?;
    let grid = cp.system.grid;
    let (m, q, nu) = (cp.dim(), cp.controls(), cp.system.nu);
    let j0 = origin_index(&grid)?;
    let (a, w) = interpolation(&grid, cp.horizon)?;
    let responses = impulse_responses(cp)?;
    let unknowns = (grid.len() - j0) * q;
    let mut phi = CMatrix::zeros(m, unknowns);
    let scale = (nu * cp.horizon).exp() / grid.dt().sqrt();
    for j in j0..=(a + 1).min(grid.len() - 1) {
        for (i, h) in responses.iter().enumerate() {
            let mut v = CVector::zeros(m);
            if a >= j {
                v += CVector::from_column_slice(h.sample(a - j)) * c(1.0 - w);
            }
            v += CVector::from_column_slice(h.sample(a + 1 - j)) * c(w);
            let col = &m0 * v * c(scale);
            phi.column_mut((j - j0) * q + i).copy_from(&col);
        }
    }
    Ok(PointwiseMap {
        phi,
        target: target_for(cp, &m0, &m1, &u0)?,
        start: j0,
    })
}

/// Least-norm control steering `M₀U(T)` to zero, verified in closed loop.
pub fn pointwise_null_control(cp: &ControlProblem) -> Result<ControlResult> {
    let map = pointwise_map(cp)?;
    let grid = cp.system.grid;
    let q = cp.controls();
    let svd = TruncatedSvd::new(&map.phi, SVD_CUTOFF);
    let b = CMatrix::from_column_slice(map.target.len(), 1, map.target.as_slice());
    let x = svd.solve(&b);
    let residual = (&map.phi * &x - &b).norm();
    let bnorm = map.target.norm();
    let feasible = residual < POINTWISE_TOL * (1.0 + bnorm);
    let mut data = vec![C64::new(0.0, 0.0); grid.len() * q];
    let inv = 1.0 / grid.dt().sqrt();
    for (k, z) in x.column(0).iter().enumerate() {
        data[map.start * q + k] = z * inv;
    }
    let g = WeightedSignal::from_flat(grid, cp.system.nu, q, data)?;
    let closed = pointwise_solve(cp, &g)?;
    let a = cp.system.spatial.matrix();
    let h = CMatrix::identity(a.nrows(), a.ncols()) + a.adjoint() * a;
    let weak = (inv_sqrt_hermitian(&h) * &closed.m0u_at_t).norm();
    Ok(ControlResult {
        control_norm: g.norm(),
        g,
        terminal_residual: closed.m0u_at_t.norm(),
        relative_residual: residual / (1.0 + bnorm),
        feasible,
        regularization: Regularization::of(&svd),
        terminal_residual_weak: Some(weak),
    })
}

/// Feasibility for every canonical initial state against the Douglas check
/// of `([b(e₁) … b(e_m)], Φ)`.
#[derive(Clone, Debug)]
pub struct PointwiseCertificate {
    pub feasible_per_state: Vec<bool>,
    pub douglas: DouglasReport,
    pub consistent: bool,
}

pub fn pointwise_certify(cp: &ControlProblem) -> Result<PointwiseCertificate> {
    let (m0, m1, _) = pointwise_parts(cp)?;
    let m = cp.dim();
    let map = pointwise_map(cp)?;
    let mut targets = CMatrix::zeros(m, m);
    for k in 0..m {
        let mut e = CVector::zeros(m);
        e[k] = c(1.0);
        targets.set_column(k, &target_for(cp, &m0, &m1, &e)?);
    }
    let svd = TruncatedSvd::new(&map.phi, SVD_CUTOFF);
    let res = &map.phi * svd.solve(&targets) - &targets;
    let feasible_per_state: Vec<bool> = (0..m)
        .map(|k| res.column(k).norm() < POINTWISE_TOL * (1.0 + targets.column(k).norm()))
        .collect();
    let douglas = douglas_check(&targets, &map.phi);
    let all = feasible_per_state.iter().all(|&f| f);
    Ok(PointwiseCertificate {
        consistent: all == douglas.included,
        feasible_per_state,
        douglas,
    })
}
