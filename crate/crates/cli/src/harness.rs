//! Verification harnesses on a single instance.
//!
//! Each harness returns plain measurements; callers decide pass/fail against
//! the instance's tolerance ladder.

use evoq_core::solver::{
    apply_evo_operator, nu_independence_check, time_reversal_conjugation_check, timestep_oracle,
    NuIndependenceReport, ReversalReport,
};
use evoq_core::{
    nu_product, support_leakage, Direction, EvoProblem, SupportWindow, TimeGrid, WeightedSignal,
    C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::instance::{bump, CliError, Instance};

/// Complex Gaussian white noise in flat coordinates.
pub fn random_signal(rng: &mut ChaCha8Rng, grid: TimeGrid, nu: f64, m: usize) -> WeightedSignal {
    let data = (0..grid.len() * m)
        .map(|_| {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = rng.sample(rand_distr::StandardNormal);
            C64::new(re, im)
        })
        .collect();
    WeightedSignal::from_flat(grid, nu, m, data).expect("gaussian samples are finite")
}

/// Gaussian-windowed oscillation in flat coordinates, numerically band-limited
/// on grids reaching `|t| ≥ 4`.
pub fn smooth_signal(grid: TimeGrid, nu: f64, m: usize, seed: u64) -> WeightedSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<(f64, f64, f64, f64)> = (0..m)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(0.5..3.0),
                rng.random_range(0.0..6.3),
                rng.random_range(-0.5..0.5),
            )
        })
        .collect();
    WeightedSignal::from_flat_fn(grid, nu, m, |t| {
        params
            .iter()
            .map(|&(amp, freq, phase, shift)| {
                let env = (-3.0 * (t - shift) * (t - shift)).exp();
                C64::from_polar(amp * env, freq * t + phase)
            })
            .collect()
    })
    .expect("smooth samples are finite")
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NormBound {
    pub c_est: f64,
    pub forward_max: f64,
    pub adjoint_max: f64,
    /// `1/c_est`.
    pub bound: f64,
    pub samples: usize,
}

/// Largest `‖S f‖/‖f‖` over random data, forward and adjoint.
pub fn norm_bound(inst: &Instance, samples: usize, seed: u64) -> Result<NormBound, CliError> {
    let op = inst.system.operator()?;
    let (grid, nu, m) = (*inst.grid(), inst.system.nu, inst.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut fwd, mut adj): (f64, f64) = (0.0, 0.0);
    for _ in 0..samples {
        let f = random_signal(&mut rng, grid, nu, m);
        fwd = fwd.max(op.apply(Direction::Forward, &f)?.norm() / f.norm());
        let g = random_signal(&mut rng, grid, -nu, m);
        adj = adj.max(op.apply(Direction::Adjoint, &g)?.norm() / g.norm());
    }
    let c_est = op.certificate().c_est;
    Ok(NormBound {
        c_est,
        forward_max: fwd,
        adjoint_max: adj,
        bound: 1.0 / c_est,
        samples,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Causality {
    pub spectral_forward_leakage: f64,
    pub spectral_forward_tolerance: f64,
    pub spectral_adjoint_leakage: f64,
    pub spectral_adjoint_tolerance: f64,
    /// `None` when the law has no trapezoidal oracle.
    pub stepper_forward_leakage: Option<f64>,
    pub stepper_adjoint_leakage: Option<f64>,
}

impl Causality {
    pub fn pass(&self, stepper_tol: f64) -> bool {
        self.spectral_forward_leakage <= self.spectral_forward_tolerance
            && self.spectral_adjoint_leakage <= self.spectral_adjoint_tolerance
            && self.stepper_forward_leakage.is_none_or(|l| l < stepper_tol)
            && self.stepper_adjoint_leakage.is_none_or(|l| l < stepper_tol)
    }
}

/// Bump data on the middle of the grid; support leakage of both solution
/// paths before (forward) or after (adjoint) the data.
pub fn causality(inst: &Instance) -> Result<Causality, CliError> {
    let op = inst.system.operator()?;
    let (grid, nu, m) = (*inst.grid(), inst.system.nu, inst.dim());
    let (lo, hi) = (grid.t_min(), grid.t_max());
    let center = 0.5 * (lo + hi);
    let width = 0.15 * (hi - lo);
    let shape = |t: f64| vec![C64::new(bump(t, center, width), 0.0); m];
    let f = WeightedSignal::from_fn(grid, nu, m, shape)?;
    let g = WeightedSignal::from_fn(grid, -nu, m, shape)?;
    let fwd = op.solve(Direction::Forward, &f)?;
    let adj = op.solve(Direction::Adjoint, &g)?;
    let start = grid.time(f.support_start().unwrap_or(0));
    let end = grid.time(g.support_end().unwrap_or(grid.len()).min(grid.len() - 1));
    let (sf, sa) = if inst.system.law.first_order().is_ok() {
        let u = timestep_oracle(&EvoProblem::forward(inst.system.clone(), f)?)?;
        let v = timestep_oracle(&EvoProblem::adjoint(inst.system.clone(), g)?)?;
        (
            Some(support_leakage(&u, SupportWindow::at_least(start))?),
            Some(support_leakage(&v, SupportWindow::at_most(end))?),
        )
    } else {
        (None, None)
    };
    Ok(Causality {
        spectral_forward_leakage: fwd.support_leakage(),
        spectral_forward_tolerance: fwd.wraparound_tolerance(),
        spectral_adjoint_leakage: adj.support_leakage(),
        spectral_adjoint_tolerance: adj.wraparound_tolerance(),
        stepper_forward_leakage: sf,
        stepper_adjoint_leakage: sa,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PairingGap {
    /// Largest `|⟨Sf, g⟩ − ⟨f, S*g⟩| / (‖f‖‖g‖)`.
    pub max_relative_gap: f64,
    pub pairs: usize,
}

/// Duality of the solution operators on random pairs.
pub fn solution_duality(inst: &Instance, pairs: usize, seed: u64) -> Result<PairingGap, CliError> {
    let op = inst.system.operator()?;
    let (grid, nu, m) = (*inst.grid(), inst.system.nu, inst.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let f = random_signal(&mut rng, grid, nu, m);
        let g = random_signal(&mut rng, grid, -nu, m);
        let lhs = nu_product(&op.apply(Direction::Forward, &f)?, &g)?;
        let rhs = nu_product(&f, &op.apply(Direction::Adjoint, &g)?)?;
        worst = worst.max((lhs - rhs).norm() / (f.norm() * g.norm()));
    }
    Ok(PairingGap {
        max_relative_gap: worst,
        pairs,
    })
}

/// `⟨Lf, g⟩ = ⟨f, L^{*ν}g⟩` for the assembled system operators on smooth data.
pub fn system_adjoint(inst: &Instance, pairs: usize, seed: u64) -> Result<PairingGap, CliError> {
    let (grid, nu, m) = (*inst.grid(), inst.system.nu, inst.dim());
    let mut worst: f64 = 0.0;
    for k in 0..pairs as u64 {
        let f = smooth_signal(grid, nu, m, seed.wrapping_add(2 * k));
        let g = smooth_signal(grid, -nu, m, seed.wrapping_add(2 * k + 1));
        let lf = apply_evo_operator(&inst.system, Direction::Forward, &f)?;
        let lg = apply_evo_operator(&inst.system, Direction::Adjoint, &g)?;
        let gap = (nu_product(&lf, &g)? - nu_product(&f, &lg)?).norm();
        worst = worst.max(gap / (lf.norm() * g.norm()).max(f.norm() * lg.norm()));
    }
    Ok(PairingGap {
        max_relative_gap: worst,
        pairs,
    })
}

/// Time-reversal conjugation on smooth test data at `−ν`.
pub fn reversal(inst: &Instance, signals: usize, seed: u64) -> Result<ReversalReport, CliError> {
    let (grid, nu, m) = (*inst.grid(), inst.system.nu, inst.dim());
    let tests: Vec<WeightedSignal> = (0..signals as u64)
        .map(|k| smooth_signal(grid, -nu, m, seed.wrapping_add(k)))
        .collect();
    Ok(time_reversal_conjugation_check(&inst.system, &tests)?)
}

/// Forward and adjoint comparisons of the unweighted solutions for two
/// weights on the middle half of the grid.
pub fn nu_independence(
    inst: &Instance,
    nu1: f64,
    nu2: f64,
) -> Result<[NuIndependenceReport; 2], CliError> {
    let grid = *inst.grid();
    let (lo, hi) = (grid.t_min(), grid.t_max());
    let len = hi - lo;
    let m = inst.dim();
    let window = (lo + 0.25 * len, hi - 0.25 * len);
    let fwd_center = lo + 0.3 * len;
    let adj_center = hi - 0.3 * len;
    let width = 0.1 * len;
    let fwd = nu_independence_check(
        &inst.system,
        |t| vec![C64::new(bump(t, fwd_center, width), 0.0); m],
        nu1,
        nu2,
        Direction::Forward,
        window,
    )?;
    let adj = nu_independence_check(
        &inst.system,
        |t| vec![C64::new(bump(t, adj_center, width), 0.0); m],
        nu1,
        nu2,
        Direction::Adjoint,
        window,
    )?;
    Ok([fwd, adj])
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OracleAgreement {
    pub forward_difference: f64,
    pub adjoint_difference: f64,
    pub forward_tolerance: f64,
    pub adjoint_tolerance: f64,
}

impl OracleAgreement {
    pub fn pass(&self, floor: f64) -> bool {
        self.forward_difference < self.forward_tolerance.max(floor)
            && self.adjoint_difference < self.adjoint_tolerance.max(floor)
    }
}

/// Spectral solve against the trapezoidal stepper on the instance's own data.
pub fn oracle_agreement(inst: &Instance) -> Result<OracleAgreement, CliError> {
    let op = inst.system.operator()?;
    let f = inst.rhs(inst.system.nu)?;
    let g = inst.rhs(-inst.system.nu)?;
    let fwd = op.solve(Direction::Forward, &f)?;
    let adj = op.solve(Direction::Adjoint, &g)?;
    let u = timestep_oracle(&EvoProblem::forward(inst.system.clone(), f)?)?;
    let v = timestep_oracle(&EvoProblem::adjoint(inst.system.clone(), g)?)?;
    Ok(OracleAgreement {
        forward_difference: u.relative_distance(&fwd.solution)?,
        adjoint_difference: v.relative_distance(&adj.solution)?,
        forward_tolerance: fwd.wraparound_tolerance(),
        adjoint_tolerance: adj.wraparound_tolerance(),
    })
}
