//! Discrete Fourier–Laplace transform and the functional calculus of `∂_{t,ν}`.
//!
//! In flat coordinates `L_ν = F exp(−νm)` is the plain DFT of `φ`, so the
//! derivative becomes the multiplier `iξ + ν` and a material law `M` becomes
//! the multiplier `ξ ↦ M(iξ + ν)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{EvoqError, Result};
use crate::signal::{TimeGrid, WeightedSignal, C64};

/// Default zero-padding margin per side for spectral solves.
pub const DEFAULT_PADDING: f64 = 0.25;

/// Angular frequency of DFT bin `k`, wrapped to `(−π/dt, π/dt]`.
pub fn frequency(grid: &TimeGrid, k: usize) -> f64 {
    let n = grid.len();
    let base = 2.0 * std::f64::consts::PI / (n as f64 * grid.dt());
    let signed = if 2 * k <= n { k as f64 } else { k as f64 - n as f64 };
    base * signed
}

pub fn frequencies(grid: &TimeGrid) -> Vec<f64> {
    (0..grid.len()).map(|k| frequency(grid, k)).collect()
}

/// Unitary discrete transform of a weighted signal.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: TimeGrid,
    nu: f64,
    m: usize,
    hat: Vec<C64>,
}

impl Spectrum {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.hat
    }

    pub fn bin(&self, k: usize) -> &[C64] {
        &self.hat[k * self.m..(k + 1) * self.m]
    }

    pub fn frequency(&self, k: usize) -> f64 {
        frequency(&self.grid, k)
    }

    /// `sqrt(dt · Σ_k ‖ĥ_k‖²)`, equal to the signal norm by Parseval.
    pub fn norm(&self) -> f64 {
        (self.grid.dt() * self.hat.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }
}

/// FFT plans for one grid length, reusable across many transforms.
#[derive(Clone)]
pub struct FftPair {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPair").field("n", &self.n).finish()
    }
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Unitary DFT of each of the `m` interleaved components.
    pub fn forward(&self, data: &[C64], m: usize) -> Vec<C64> {
        self.run(&self.forward, data, m)
    }

    pub fn inverse(&self, data: &[C64], m: usize) -> Vec<C64> {
        self.run(&self.inverse, data, m)
    }

    fn run(&self, plan: &Arc<dyn Fft<f64>>, data: &[C64], m: usize) -> Vec<C64> {
        let n = self.n;
        debug_assert_eq!(data.len(), n * m);
        let scale = 1.0 / (n as f64).sqrt();
        let mut out = vec![C64::new(0.0, 0.0); n * m];
        let mut column = vec![C64::new(0.0, 0.0); n];
        let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for i in 0..m {
            for (j, slot) in column.iter_mut().enumerate() {
                *slot = data[j * m + i];
            }
            plan.process_with_scratch(&mut column, &mut scratch);
            for (j, z) in column.iter().enumerate() {
                out[j * m + i] = z * scale;
            }
        }
        out
    }
}

pub fn fourier_laplace(f: &WeightedSignal) -> Spectrum {
    let plans = FftPair::new(f.len());
    Spectrum {
        grid: *f.grid(),
        nu: f.nu(),
        m: f.dim(),
        hat: plans.forward(f.flat(), f.dim()),
    }
}

pub fn inverse_fourier_laplace(s: &Spectrum) -> WeightedSignal {
    let plans = FftPair::new(s.grid.len());
    let data = plans.inverse(&s.hat, s.m);
    WeightedSignal::from_flat(s.grid, s.nu, s.m, data)
        .expect("inverse transform of a finite spectrum is finite")
}

/// Applies `ĥ_k ← sym(ξ_k)·ĥ_k` on the signal's own (periodic) grid.
pub fn spectral_multiplier<S>(f: &WeightedSignal, sym: S) -> Result<WeightedSignal>
where
    S: Fn(f64) -> DMatrix<C64> + Sync,
{
    let grid = *f.grid();
    multiply_bins(f, |k| {
        let xi = frequency(&grid, k);
        let s = sym(xi);
        if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(EvoqError::Symbol { xi });
        }
        Ok(s)
    })
}

/// Per-bin form of [`spectral_multiplier`]: `symbol(k)` is the matrix for bin `k`.
pub fn multiply_bins<S>(f: &WeightedSignal, symbol: S) -> Result<WeightedSignal>
where
    S: Fn(usize) -> Result<DMatrix<C64>> + Sync,
{
    let m = f.dim();
    let grid = *f.grid();
    let plans = FftPair::new(grid.len());
    let hat = plans.forward(f.flat(), m);
    let bins: Vec<Result<Vec<C64>>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let s = symbol(k)?;
            if s.nrows() != m || s.ncols() != m {
                return Err(EvoqError::Dimension(format!(
                    "symbol is {}x{}, expected {m}x{m}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            let v = nalgebra::DVector::from_column_slice(&hat[k * m..(k + 1) * m]);
            Ok((s * v).as_slice().to_vec())
        })
        .collect();
    let mut out_hat = Vec::with_capacity(hat.len());
    for b in bins {
        out_hat.extend(b?);
    }
    let data = plans.inverse(&out_hat, m);
    WeightedSignal::from_flat(grid, f.nu(), m, data)
}

/// Output of a multiplier evaluated on a zero-padded grid.
#[derive(Clone, Debug)]
pub struct PaddedOutput {
    pub signal: WeightedSignal,
    /// Share of the padded output norm found in the padding, where the
    /// ℝ-solution of a causal or anticausal multiplier vanishes or decays.
    pub wraparound_leakage: f64,
}

/// Zero-pads by `padding` per side, applies the multiplier, crops back.
pub fn spectral_multiplier_padded<S>(
    f: &WeightedSignal,
    padding: f64,
    sym: S,
) -> Result<PaddedOutput>
where
    S: Fn(f64) -> DMatrix<C64> + Sync,
{
    let (padded, pad) = f.grid().padded(padding)?;
    let wide = spectral_multiplier(&f.zero_pad(padded, pad), sym)?;
    let n = f.len();
    let outside = wide.norm_on(0..pad).hypot(wide.norm_on(pad + n..padded.len()));
    let leakage = outside / wide.norm().max(crate::signal::LEAKAGE_FLOOR);
    Ok(PaddedOutput {
        signal: wide.crop(*f.grid(), pad),
        wraparound_leakage: leakage,
    })
}

/// `∂_{t,ν}`: multiplier `iξ + ν`, i.e. `(∂_t + ν)φ` in flat coordinates.
pub fn time_derivative(f: &WeightedSignal) -> WeightedSignal {
    let nu = f.nu();
    let m = f.dim();
    spectral_multiplier(f, |xi| {
        DMatrix::from_diagonal_element(m, m, C64::new(nu, xi))
    })
    .expect("derivative symbol is finite")
}

/// `∂_{t,ν}^{−1}` by cumulative trapezoidal quadrature.
///
/// For `ν > 0` this is `t ↦ ∫_{−∞}^t f`, for `ν < 0` it is `t ↦ −∫_t^∞ f`;
/// the signal is taken to vanish outside the grid. The recurrence runs in flat
/// coordinates, so the result is exactly causal (resp. anticausal).
pub fn antiderivative(g: &WeightedSignal) -> Result<WeightedSignal> {
    let nu = g.nu();
    if nu == 0.0 {
        return Err(EvoqError::NotInvertible(
            "the time derivative is not boundedly invertible for nu = 0".into(),
        ));
    }
    let m = g.dim();
    let n = g.len();
    let dt = g.grid().dt();
    let decay = (-nu.abs() * dt).exp();
    let mut out = WeightedSignal::zeros(*g.grid(), nu, m);
    let src = g.flat();
    let dst = out.flat_mut();
    if nu > 0.0 {
        // Φ_{j+1} = e^{−ν dt} Φ_j + dt/2 (e^{−ν dt} φ_j + φ_{j+1}), Φ_0 = dt/2 φ_0
        for i in 0..m {
            dst[i] = src[i] * (0.5 * dt);
        }
        for j in 0..n - 1 {
            for i in 0..m {
                let prev = dst[j * m + i];
                dst[(j + 1) * m + i] = prev * decay
                    + (src[j * m + i] * decay + src[(j + 1) * m + i]) * (0.5 * dt);
            }
        }
    } else {
        // Φ_j = e^{ν dt} Φ_{j+1} − dt/2 (φ_j + e^{ν dt} φ_{j+1})
        for i in 0..m {
            dst[(n - 1) * m + i] = -src[(n - 1) * m + i] * (0.5 * dt);
        }
        for j in (0..n - 1).rev() {
            for i in 0..m {
                let next = dst[(j + 1) * m + i];
                dst[j * m + i] = next * decay
                    - (src[j * m + i] + src[(j + 1) * m + i] * decay) * (0.5 * dt);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::TimeGrid;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn frequency_layout_wraps_with_positive_nyquist() {
        let g = TimeGrid::new(0.0, 8.0, 8).unwrap();
        let two_pi_over = 2.0 * std::f64::consts::PI / 8.0;
        let xs = frequencies(&g);
        assert_eq!(xs[0], 0.0);
        assert!((xs[1] - two_pi_over).abs() < 1e-15);
        assert!((xs[4] - 4.0 * two_pi_over).abs() < 1e-15);
        assert!((xs[5] + 3.0 * two_pi_over).abs() < 1e-15);
        assert!((xs[4] - std::f64::consts::PI / g.dt()).abs() < 1e-12);
    }

    #[test]
    fn impulse_has_flat_spectrum_and_constant_is_concentrated() {
        let g = TimeGrid::new(-1.0, 1.0, 16).unwrap();
        let mut f = WeightedSignal::zeros(g, 0.5, 1);
        f.flat_mut()[3] = c(1.0);
        let s = fourier_laplace(&f);
        let mag = 1.0 / 4.0;
        assert!(s.coefficients().iter().all(|z| (z.norm() - mag).abs() < 1e-14));

        let ones = WeightedSignal::from_flat(g, 0.5, 1, vec![c(1.0); 16]).unwrap();
        let s = fourier_laplace(&ones);
        assert!((s.bin(0)[0] - c(4.0)).norm() < 1e-13);
        assert!(s.coefficients()[1..].iter().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn derivative_of_eigenfunction_and_constant() {
        let g = TimeGrid::new(0.0, 2.0 * std::f64::consts::PI, 64).unwrap();
        let omega = 3.0;
        let nu = 0.7;
        let f = WeightedSignal::from_flat_fn(g, nu, 1, |t| vec![C64::from_polar(1.0, omega * t)])
            .unwrap();
        let d = time_derivative(&f);
        let factor = C64::new(nu, omega);
        for j in 0..g.len() {
            assert!((d.sample(j)[0] - factor * f.sample(j)[0]).norm() < 1e-12);
        }
        let k = WeightedSignal::from_flat(g, nu, 1, vec![c(2.0); 64]).unwrap();
        let d = time_derivative(&k);
        assert!(d.flat().iter().all(|z| (z - c(2.0 * nu)).norm() < 1e-12));
    }

    #[test]
    fn antiderivative_rejects_zero_weight() {
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let f = WeightedSignal::zeros(g, 0.0, 1);
        assert!(matches!(antiderivative(&f), Err(EvoqError::NotInvertible(_))));
        let z = WeightedSignal::zeros(g, 1.0, 1);
        assert_eq!(antiderivative(&z).unwrap().norm(), 0.0);
    }

    #[test]
    fn non_finite_symbol_is_reported() {
        let g = TimeGrid::new(0.0, 1.0, 8).unwrap();
        let f = WeightedSignal::zeros(g, 1.0, 1);
        let r = spectral_multiplier(&f, |xi| {
            DMatrix::from_element(1, 1, c(if xi == 0.0 { f64::INFINITY } else { 1.0 }))
        });
        assert!(matches!(r, Err(EvoqError::Symbol { .. })));
    }
}
