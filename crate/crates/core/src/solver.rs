//! Forward and ν-adjoint solution operators.
//!
//! The forward system `(∂_{t,ν}M(∂_{t,ν}) + A)u = f` is solved bin by bin in
//! the Fourier–Laplace domain: `((iξ+ν)M(iξ+ν) + A)û = f̂`. The ν-adjoint
//! system `(−∂_{t,−ν}L*_{−ν}M*(im+ν)L_{−ν} − A)v = g` uses the conjugate
//! transposed blocks `−(iξ−ν)M(iξ+ν)* − A`. Both run on a zero-padded grid
//! so that the periodicity of the DFT stays visible as wraparound leakage.
//!
//! [`timestep_oracle`] integrates the same equations by implicit trapezoidal
//! stepping; it is exactly causal and serves as the independent check.

use std::sync::OnceLock;

use nalgebra::{Dyn, LU};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EvoqError, Result};
use crate::linalg::{CMatrix, CVector};
use crate::material::{coercivity, eval_law, time_reversed_law, CoercivityCertificate, MaterialLaw};
use crate::signal::{time_reverse, SupportWindow, TimeGrid, WeightedSignal, C64, LEAKAGE_FLOOR};
use crate::spatial::SpatialOperator;
use crate::transform::{frequency, multiply_bins, FftPair, DEFAULT_PADDING};

/// Tolerance ladder shared by solvers and harnesses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub algebraic: f64,
    pub pairing: f64,
    pub conjugation: f64,
    pub cross_method: f64,
    pub cross_nu: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            algebraic: 1e-12,
            pairing: 1e-10,
            conjugation: 1e-8,
            cross_method: 1e-6,
            cross_nu: 1e-4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Zero padding per side, as a fraction of the grid length.
    pub padding: f64,
    /// Largest accepted relative residual of the assembled discrete system.
    pub residual_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            padding: DEFAULT_PADDING,
            residual_threshold: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Adjoint,
}

/// `(ν, grid, M, A)` without a right-hand side.
#[derive(Clone, Debug)]
pub struct EvoSystem {
    pub nu: f64,
    pub grid: TimeGrid,
    pub law: MaterialLaw,
    pub spatial: SpatialOperator,
    pub options: SolverOptions,
}

impl EvoSystem {
    pub fn new(nu: f64, grid: TimeGrid, law: MaterialLaw, spatial: SpatialOperator) -> Result<Self> {
        if law.dim() != spatial.dim() {
            return Err(EvoqError::Dimension(format!(
                "law has dimension {}, spatial operator {}",
                law.dim(),
                spatial.dim()
            )));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(EvoqError::Precondition(format!("weight must be positive, got {nu}")));
        }
        Ok(Self {
            nu,
            grid,
            law,
            spatial,
            options: SolverOptions::default(),
        })
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        Ok(Self::new(nu, self.grid, self.law.clone(), self.spatial.clone())?
            .with_options(self.options))
    }

    pub fn dim(&self) -> usize {
        self.spatial.dim()
    }

    pub fn padded_grid(&self) -> Result<(TimeGrid, usize)> {
        self.grid.padded(self.options.padding)
    }

    /// Coercivity certificate on the padded frequency set used by the solver.
    pub fn certificate(&self) -> Result<CoercivityCertificate> {
        let (padded, _) = self.padded_grid()?;
        coercivity(&self.law, self.nu, &padded)
    }

    /// `(iξ + ν) M(iξ + ν) + A`.
    pub fn forward_block(&self, xi: f64) -> Result<CMatrix> {
        let z = C64::new(self.nu, xi);
        Ok(eval_law(&self.law, z)? * z + self.spatial.matrix())
    }

    /// `−(iξ − ν) M(iξ + ν)* − A`, the conjugate transpose of the forward block.
    pub fn adjoint_block(&self, xi: f64) -> Result<CMatrix> {
        let z = C64::new(self.nu, xi);
        let w = C64::new(-self.nu, xi);
        Ok(-(eval_law(&self.law, z)?.adjoint() * w) - self.spatial.matrix())
    }

    pub fn block(&self, direction: Direction, xi: f64) -> Result<CMatrix> {
        match direction {
            Direction::Forward => self.forward_block(xi),
            Direction::Adjoint => self.adjoint_block(xi),
        }
    }

    /// Factors every padded frequency block.
    pub fn operator(&self) -> Result<SolutionOperator> {
        SolutionOperator::new(self)
    }
}

/// Applies the evolutionary operator itself (not its inverse) on the signal's
/// own periodic grid: `∂_{t,ν}M(∂_{t,ν}) + A` for `Forward` (signal at `+ν`)
/// or the ν-adjoint system operator for `Adjoint` (signal at `−ν`).
pub fn apply_evo_operator(
    system: &EvoSystem,
    direction: Direction,
    f: &WeightedSignal,
) -> Result<WeightedSignal> {
    check_rhs(system, direction, f)?;
    let grid = *f.grid();
    multiply_bins(f, |k| system.block(direction, frequency(&grid, k)))
}

fn check_rhs(system: &EvoSystem, direction: Direction, f: &WeightedSignal) -> Result<()> {
    if f.dim() != system.dim() {
        return Err(EvoqError::Dimension(format!(
            "system has dimension {}, signal has {}",
            system.dim(),
            f.dim()
        )));
    }
    let expect = match direction {
        Direction::Forward => system.nu,
        Direction::Adjoint => -system.nu,
    };
    if (f.nu() - expect).abs() > 1e-12 * expect.abs().max(1.0) {
        return Err(EvoqError::Precondition(format!(
            "{direction:?} problems need data at weight {expect}, got {}",
            f.nu()
        )));
    }
    Ok(())
}

type BlockLu = LU<C64, Dyn, Dyn>;

/// Per-bin LU factorizations of the forward blocks on the padded grid, with
/// the adjoint factorizations built on first use.
pub struct SolutionOperator {
    system: EvoSystem,
    padded: TimeGrid,
    pad: usize,
    fft: FftPair,
    certificate: CoercivityCertificate,
    forward_blocks: Vec<CMatrix>,
    forward_lu: Vec<BlockLu>,
    adjoint_lu: OnceLock<Vec<BlockLu>>,
}

impl std::fmt::Debug for SolutionOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolutionOperator")
            .field("nu", &self.system.nu)
            .field("padded", &self.padded)
            .field("c_est", &self.certificate.c_est)
            .finish()
    }
}

/// Everything a solve returns besides the solution itself.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub direction: Direction,
    pub nu: f64,
    pub c_est: f64,
    pub residual_rel: f64,
    pub norm_ratio: f64,
    pub causality_leakage: Option<f64>,
    pub amnesia_leakage: Option<f64>,
    pub wraparound_tolerance: f64,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: WeightedSignal,
    pub summary: SolveSummary,
}

impl SolveReport {
    pub fn residual_rel(&self) -> f64 {
        self.summary.residual_rel
    }

    pub fn norm_ratio(&self) -> f64 {
        self.summary.norm_ratio
    }

    pub fn wraparound_tolerance(&self) -> f64 {
        self.summary.wraparound_tolerance
    }

    /// Causality leakage for forward solves, amnesia leakage for adjoint ones.
    pub fn support_leakage(&self) -> f64 {
        self.summary
            .causality_leakage
            .or(self.summary.amnesia_leakage)
            .unwrap_or(0.0)
    }
}

impl SolutionOperator {
    pub fn new(system: &EvoSystem) -> Result<Self> {
        let certificate = system.certificate()?;
        let (padded, pad) = system.padded_grid()?;
        let forward_blocks: Vec<CMatrix> = (0..padded.len())
            .into_par_iter()
            .map(|k| system.forward_block(frequency(&padded, k)))
            .collect::<Result<_>>()?;
        let forward_lu = factor_all(&forward_blocks, &padded)?;
        Ok(Self {
            system: system.clone(),
            padded,
            pad,
            fft: FftPair::new(padded.len()),
            certificate,
            forward_blocks,
            forward_lu,
            adjoint_lu: OnceLock::new(),
        })
    }

    pub fn system(&self) -> &EvoSystem {
        &self.system
    }

    pub fn certificate(&self) -> &CoercivityCertificate {
        &self.certificate
    }

    pub fn padded_grid(&self) -> (&TimeGrid, usize) {
        (&self.padded, self.pad)
    }

    fn adjoint_factors(&self) -> Result<&Vec<BlockLu>> {
        if let Some(f) = self.adjoint_lu.get() {
            return Ok(f);
        }
        let blocks: Vec<CMatrix> = self.forward_blocks.par_iter().map(|b| b.adjoint()).collect();
        let lu = factor_all(&blocks, &self.padded)?;
        Ok(self.adjoint_lu.get_or_init(|| lu))
    }

    /// Solves on the padded grid and returns the padded solution together
    /// with the relative residual of the assembled discrete system.
    pub fn solve_padded(
        &self,
        direction: Direction,
        rhs: &WeightedSignal,
    ) -> Result<(WeightedSignal, f64)> {
        check_rhs(&self.system, direction, rhs)?;
        if !rhs.grid().matches(&self.system.grid) {
            return Err(EvoqError::Pairing("right-hand side lives on another grid".into()));
        }
        let m = self.system.dim();
        let wide = rhs.zero_pad(self.padded, self.pad);
        let hat = self.fft.forward(wide.flat(), m);
        let factors = match direction {
            Direction::Forward => &self.forward_lu,
            Direction::Adjoint => self.adjoint_factors()?,
        };
        let solved: Vec<Result<(Vec<C64>, f64)>> = (0..self.padded.len())
            .into_par_iter()
            .map(|k| {
                let b = CVector::from_column_slice(&hat[k * m..(k + 1) * m]);
                let x = factors[k].solve(&b).ok_or_else(|| {
                    EvoqError::Solver(format!(
                        "singular block at xi = {}",
                        frequency(&self.padded, k)
                    ))
                })?;
                let block = &self.forward_blocks[k];
                let r = match direction {
                    Direction::Forward => block * &x - &b,
                    Direction::Adjoint => block.ad_mul(&x) - &b,
                };
                Ok((x.as_slice().to_vec(), r.norm_squared()))
            })
            .collect();
        let mut out_hat = Vec::with_capacity(hat.len());
        let mut res2 = 0.0;
        for s in solved {
            let (x, r) = s?;
            out_hat.extend(x);
            res2 += r;
        }
        let rhs2: f64 = hat.iter().map(|z| z.norm_sqr()).sum();
        let residual = if rhs2 > 0.0 { (res2 / rhs2).sqrt() } else { res2.sqrt() };
        let data = self.fft.inverse(&out_hat, m);
        let sol = WeightedSignal::from_flat(self.padded, rhs.nu(), m, data)?;
        Ok((sol, residual))
    }

    /// Solution cropped to the problem grid, without diagnostics.
    pub fn apply(&self, direction: Direction, rhs: &WeightedSignal) -> Result<WeightedSignal> {
        let (wide, _) = self.solve_padded(direction, rhs)?;
        Ok(wide.crop(self.system.grid, self.pad))
    }

    /// Full solve with residual, norm ratio and support diagnostics.
    pub fn solve(&self, direction: Direction, rhs: &WeightedSignal) -> Result<SolveReport> {
        let (wide, residual_rel) = self.solve_padded(direction, rhs)?;
        if residual_rel > self.system.options.residual_threshold {
            return Err(EvoqError::Solver(format!(
                "relative residual {residual_rel:.3e} exceeds {:.1e}",
                self.system.options.residual_threshold
            )));
        }
        let n = self.system.grid.len();
        let total = wide.norm().max(LEAKAGE_FLOOR);
        let pad = self.pad;
        let edge = (pad / 4).max(1).min(pad);
        let np = self.padded.len();
        let padded_rhs = rhs.zero_pad(self.padded, pad);
        let (lead, tail, leakage) = match direction {
            Direction::Forward => {
                let lead = wide.norm_on(0..pad) / total;
                let tail = wide.norm_on(np - edge..np) / total;
                let start = padded_rhs.support_start().unwrap_or(np);
                (lead, tail, wide.norm_on(0..start) / total)
            }
            Direction::Adjoint => {
                let lead = wide.norm_on(pad + n..np) / total;
                let tail = wide.norm_on(0..edge) / total;
                let end = padded_rhs.support_end().unwrap_or(0);
                (lead, tail, wide.norm_on(end..np) / total)
            }
        };
        let wraparound_tolerance = (10.0 * lead.max(tail)).max(1e-13);
        let solution = wide.crop(self.system.grid, pad);
        let norm_ratio = solution.norm() / rhs.norm().max(LEAKAGE_FLOOR);
        let (causality_leakage, amnesia_leakage) = match direction {
            Direction::Forward => (Some(leakage), None),
            Direction::Adjoint => (None, Some(leakage)),
        };
        Ok(SolveReport {
            solution,
            summary: SolveSummary {
                direction,
                nu: self.system.nu,
                c_est: self.certificate.c_est,
                residual_rel,
                norm_ratio,
                causality_leakage,
                amnesia_leakage,
                wraparound_tolerance,
            },
        })
    }
}

fn factor_all(blocks: &[CMatrix], grid: &TimeGrid) -> Result<Vec<BlockLu>> {
    blocks
        .par_iter()
        .enumerate()
        .map(|(k, b)| {
            let lu = LU::new(b.clone());
            if lu.is_invertible() {
                Ok(lu)
            } else {
                Err(EvoqError::Solver(format!(
                    "singular block at xi = {}",
                    frequency(grid, k)
                )))
            }
        })
        .collect()
}

/// A system together with its data and direction.
#[derive(Clone, Debug)]
pub struct EvoProblem {
    pub system: EvoSystem,
    pub rhs: WeightedSignal,
    pub direction: Direction,
}

impl EvoProblem {
    pub fn forward(system: EvoSystem, rhs: WeightedSignal) -> Result<Self> {
        check_rhs(&system, Direction::Forward, &rhs)?;
        Ok(Self {
            system,
            rhs,
            direction: Direction::Forward,
        })
    }

    pub fn adjoint(system: EvoSystem, rhs: WeightedSignal) -> Result<Self> {
        check_rhs(&system, Direction::Adjoint, &rhs)?;
        Ok(Self {
            system,
            rhs,
            direction: Direction::Adjoint,
        })
    }
}

pub fn solve_forward(p: &EvoProblem) -> Result<SolveReport> {
    if p.direction != Direction::Forward {
        return Err(EvoqError::Precondition("solve_forward needs a forward problem".into()));
    }
    p.system.operator()?.solve(Direction::Forward, &p.rhs)
}

pub fn solve_adjoint(p: &EvoProblem) -> Result<SolveReport> {
    if p.direction != Direction::Adjoint {
        return Err(EvoqError::Precondition("solve_adjoint needs an adjoint problem".into()));
    }
    p.system.operator()?.solve(Direction::Adjoint, &p.rhs)
}

/// Implicit trapezoidal integration of
/// `(∂_t + ν)M₀φ + M₁φ + Aφ = ψ` from a zero state at the left edge, for
/// laws `M₀ + z^{−1}M₁`. Adjoint problems are integrated from the right edge
/// through the time-reversed system `(∂_s + ν)M₀*ψ + M₁*ψ − Aψ = g`.
pub fn timestep_oracle(p: &EvoProblem) -> Result<WeightedSignal> {
    let (m0, m1) = p.system.law.first_order()?;
    let a = p.system.spatial.matrix().clone();
    let nu = p.system.nu;
    match p.direction {
        Direction::Forward => march(&m0, &(m0.clone() * C64::new(nu, 0.0) + m1 + a), &p.rhs),
        Direction::Adjoint => {
            // only the sample order is reversed, so any grid works
            let rev = reverse_samples(&p.rhs).with_nu(nu);
            let n_mat = m0.adjoint() * C64::new(nu, 0.0) + m1.adjoint() - a;
            let out = march(&m0.adjoint(), &n_mat, &rev)?;
            Ok(reverse_samples(&out).with_nu(-nu))
        }
    }
}

fn reverse_samples(f: &WeightedSignal) -> WeightedSignal {
    let m = f.dim();
    let mut data = Vec::with_capacity(f.flat().len());
    for j in (0..f.len()).rev() {
        data.extend_from_slice(f.sample(j));
    }
    WeightedSignal::from_flat(*f.grid(), f.nu(), m, data).expect("reordering keeps values finite")
}

/// `(M₀/dt + N/2)φ_{j+1} = (M₀/dt − N/2)φ_j + (ψ_j + ψ_{j+1})/2`.
fn march(m0: &CMatrix, n_mat: &CMatrix, rhs: &WeightedSignal) -> Result<WeightedSignal> {
    let m = rhs.dim();
    if m0.nrows() != m {
        return Err(EvoqError::Dimension(format!(
            "law has dimension {}, data {m}",
            m0.nrows()
        )));
    }
    let dt = rhs.grid().dt();
    let half = C64::new(0.5, 0.0);
    let lhs = m0 / C64::new(dt, 0.0) + n_mat * half;
    let explicit = m0 / C64::new(dt, 0.0) - n_mat * half;
    let lu = LU::new(lhs);
    if !lu.is_invertible() {
        return Err(EvoqError::Oracle("trapezoidal step matrix is singular".into()));
    }
    let mut out = WeightedSignal::zeros(*rhs.grid(), rhs.nu(), m);
    let mut state = CVector::zeros(m);
    let mut prev_f = CVector::zeros(m);
    for j in 0..rhs.len() {
        let f = CVector::from_column_slice(rhs.sample(j));
        let b = &explicit * &state + (&prev_f + &f) * half;
        state = lu
            .solve(&b)
            .ok_or_else(|| EvoqError::Oracle("trapezoidal step failed".into()))?;
        out.sample_mut(j).copy_from_slice(state.as_slice());
        prev_f = f;
    }
    Ok(out)
}

/// Result of [`time_reversal_conjugation_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReversalReport {
    /// Largest relative gap between the ν-adjoint system operator and its
    /// time-reversed forward form.
    pub operator_discrepancy: f64,
    /// Same comparison for the solution operators.
    pub solution_discrepancy: f64,
    pub signals: usize,
}

impl ReversalReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.operator_discrepancy.max(self.solution_discrepancy)
    }
}

/// Compares the ν-adjoint system against
/// `T_ν (∂_{t,ν} Σ ∂_{t,ν}^{−k} M_k* − A) T_{−ν}` on test data at `−ν`.
pub fn time_reversal_conjugation_check(
    system: &EvoSystem,
    tests: &[WeightedSignal],
) -> Result<ReversalReport> {
    if !system.grid.is_symmetric() {
        return Err(EvoqError::UnsupportedGrid(
            "time reversal needs a grid symmetric about 0".into(),
        ));
    }
    let reversed = EvoSystem::new(
        system.nu,
        system.grid,
        time_reversed_law(&system.law)?,
        system.spatial.negated(),
    )?
    .with_options(system.options);
    let adj_op = system.operator()?;
    let rev_op = reversed.operator()?;
    let mut op_gap: f64 = 0.0;
    let mut sol_gap: f64 = 0.0;
    for g in tests {
        let direct = apply_evo_operator(system, Direction::Adjoint, g)?;
        let via = time_reverse(&apply_evo_operator(
            &reversed,
            Direction::Forward,
            &time_reverse(g)?,
        )?)?;
        op_gap = op_gap.max(via.relative_distance(&direct)?);

        let direct = adj_op.apply(Direction::Adjoint, g)?;
        let via = time_reverse(&rev_op.apply(Direction::Forward, &time_reverse(g)?)?)?;
        sol_gap = sol_gap.max(via.relative_distance(&direct)?);
    }
    Ok(ReversalReport {
        operator_discrepancy: op_gap,
        solution_discrepancy: sol_gap,
        signals: tests.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuIndependenceReport {
    pub nu1: f64,
    pub nu2: f64,
    pub direction: Direction,
    /// `max |u₁ − u₂| / max |u₁|` over the window, unweighted values.
    pub relative_difference: f64,
    pub window: (f64, f64),
}

/// Solves with two weights and compares the unweighted solutions
/// `e^{±νt}φ` on the window `[t_lo, t_hi)`.
///
/// `f` is the unweighted right-hand side; for the adjoint direction the
/// data are taken at weights `−ν₁`, `−ν₂`.
pub fn nu_independence_check<F>(
    system: &EvoSystem,
    f: F,
    nu1: f64,
    nu2: f64,
    direction: Direction,
    window: (f64, f64),
) -> Result<NuIndependenceReport>
where
    F: Fn(f64) -> Vec<C64>,
{
    let m = system.dim();
    let grid = system.grid;
    let lo = grid.index_at_least(window.0);
    let hi = grid.index_at_least(window.1);
    let mut values = Vec::with_capacity(2);
    for nu in [nu1, nu2] {
        let sys = system.with_nu(nu)?;
        let weight = match direction {
            Direction::Forward => nu,
            Direction::Adjoint => -nu,
        };
        let rhs = WeightedSignal::from_fn(grid, weight, m, &f)?;
        let u = sys.operator()?.apply(direction, &rhs)?;
        let vals: Vec<Vec<C64>> = (lo..hi).map(|j| u.value(j)).collect();
        values.push(vals);
    }
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (a, b) in values[0].iter().zip(&values[1]) {
        for (x, y) in a.iter().zip(b) {
            diff = diff.max((x - y).norm());
            scale = scale.max(x.norm());
        }
    }
    Ok(NuIndependenceReport {
        nu1,
        nu2,
        direction,
        relative_difference: diff / scale.max(LEAKAGE_FLOOR),
        window,
    })
}

/// Support window used by the causality diagnostics of a forward solve
/// whose data start at `t`.
pub fn causal_window(t: f64) -> SupportWindow {
    SupportWindow::at_least(t)
}
