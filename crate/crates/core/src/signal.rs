//! Time grids and signals in exponentially weighted L² spaces.
//!
//! A signal `f ∈ L²_ν(ℝ, ℂ^m)` is stored in flat coordinates
//! `φ_j = e^{−ν t_j} f(t_j)`. In these coordinates the weighted norm, the
//! ν-product and the unitary weight maps are plain array operations, so no
//! factor `e^{ν t}` is ever materialised.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{EvoqError, Result};

pub type C64 = Complex64;

/// Relative slack used when mapping a time onto a grid index.
const INDEX_SLACK: f64 = 1e-9;

/// Floor for the denominator of [`support_leakage`].
pub const LEAKAGE_FLOOR: f64 = 1e-300;

/// Uniform grid `t_j = t_min + j·dt`, `j = 0..n`, with `dt = (t_max − t_min)/n`.
///
/// Sample `j` represents the half-open cell `[t_j, t_{j+1})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_min: f64,
    t_max: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        if !t_min.is_finite() || !t_max.is_finite() {
            return Err(EvoqError::InvalidGrid("endpoints must be finite".into()));
        }
        if t_min >= t_max {
            return Err(EvoqError::InvalidGrid(format!(
                "t_min = {t_min} must be below t_max = {t_max}"
            )));
        }
        if n < 2 {
            return Err(EvoqError::InvalidGrid(format!("need n >= 2 samples, got {n}")));
        }
        Ok(Self { t_min, t_max, n })
    }

    /// Grid on `[−half_width, half_width]`.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n)
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dt(&self) -> f64 {
        (self.t_max - self.t_min) / self.n as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t_min + j as f64 * self.dt()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.time(j))
    }

    pub fn is_symmetric(&self) -> bool {
        (self.t_min + self.t_max).abs() <= 1e-12 * self.t_max.abs().max(1.0)
    }

    /// First index `j` with `t_j ≥ t`; `n` when every sample lies before `t`.
    pub fn index_at_least(&self, t: f64) -> usize {
        let x = (t - self.t_min) / self.dt();
        let j = (x - INDEX_SLACK).ceil();
        if j <= 0.0 {
            0
        } else {
            (j as usize).min(self.n)
        }
    }

    /// Extends the grid by `ceil(fraction·n)` samples on each side, keeping `dt`.
    /// Returns the padded grid and the number of samples added per side.
    pub fn padded(&self, fraction: f64) -> Result<(TimeGrid, usize)> {
        if !(fraction >= 0.0 && fraction.is_finite()) {
            return Err(EvoqError::InvalidGrid(format!(
                "padding fraction must be non-negative, got {fraction}"
            )));
        }
        let pad = (fraction * self.n as f64).ceil() as usize;
        let dt = self.dt();
        let grid = TimeGrid {
            t_min: self.t_min - pad as f64 * dt,
            t_max: self.t_max + pad as f64 * dt,
            n: self.n + 2 * pad,
        };
        Ok((grid, pad))
    }

    /// Same sample spacing and extent, within rounding.
    pub fn matches(&self, other: &TimeGrid) -> bool {
        let scale = self.t_max.abs().max(self.t_min.abs()).max(1.0);
        self.n == other.n
            && (self.t_min - other.t_min).abs() <= 1e-12 * scale
            && (self.t_max - other.t_max).abs() <= 1e-12 * scale
    }
}

/// Element of `L²_ν(ℝ, ℂ^m)` sampled on a [`TimeGrid`], stored flat.
///
/// `data[j*m + i]` is component `i` of `φ_j = e^{−ν t_j} f(t_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSignal {
    grid: TimeGrid,
    nu: f64,
    m: usize,
    data: Vec<C64>,
}

impl WeightedSignal {
    pub fn zeros(grid: TimeGrid, nu: f64, m: usize) -> Self {
        Self {
            grid,
            nu,
            m,
            data: vec![C64::new(0.0, 0.0); grid.len() * m],
        }
    }

    /// Wraps flat coordinates laid out sample-major.
    pub fn from_flat(grid: TimeGrid, nu: f64, m: usize, data: Vec<C64>) -> Result<Self> {
        if m == 0 {
            return Err(EvoqError::Dimension("spatial dimension must be positive".into()));
        }
        if data.len() != grid.len() * m {
            return Err(EvoqError::Dimension(format!(
                "expected {} flat entries, got {}",
                grid.len() * m,
                data.len()
            )));
        }
        if !nu.is_finite() {
            return Err(EvoqError::NonFinite("weight nu".into()));
        }
        if let Some(idx) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(EvoqError::NonFinite(format!("flat entry {idx}")));
        }
        Ok(Self { grid, nu, m, data })
    }

    /// Samples the flat coordinates directly from `phi(t)`.
    pub fn from_flat_fn<F>(grid: TimeGrid, nu: f64, m: usize, mut phi: F) -> Result<Self>
    where
        F: FnMut(f64) -> Vec<C64>,
    {
        let mut data = Vec::with_capacity(grid.len() * m);
        for t in grid.times() {
            let v = phi(t);
            if v.len() != m {
                return Err(EvoqError::Dimension(format!(
                    "sample function returned {} components, expected {m}",
                    v.len()
                )));
            }
            data.extend(v);
        }
        Self::from_flat(grid, nu, m, data)
    }

    /// Samples an unweighted function `f(t)` and stores `e^{−νt} f(t)`.
    ///
    /// `f` must not overflow after weighting; the product is formed as
    /// `e^{−νt}·f(t)` so functions that already carry `e^{νt}` growth should
    /// use [`WeightedSignal::from_flat_fn`] instead.
    pub fn from_fn<F>(grid: TimeGrid, nu: f64, m: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(f64) -> Vec<C64>,
    {
        Self::from_flat_fn(grid, nu, m, |t| {
            let w = (-nu * t).exp();
            f(t).into_iter().map(|z| z * w).collect()
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn flat(&self) -> &[C64] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<C64> {
        self.data
    }

    pub fn sample(&self, j: usize) -> &[C64] {
        &self.data[j * self.m..(j + 1) * self.m]
    }

    pub fn sample_mut(&mut self, j: usize) -> &mut [C64] {
        let m = self.m;
        &mut self.data[j * m..(j + 1) * m]
    }

    /// Unweighted value `f(t_j) = e^{ν t_j} φ_j`.
    pub fn value(&self, j: usize) -> Vec<C64> {
        let w = (self.nu * self.grid.time(j)).exp();
        self.sample(j).iter().map(|z| z * w).collect()
    }

    /// Same flat array under a different weight tag.
    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    /// `‖f‖_{L²_ν} = sqrt(dt · Σ_j ‖φ_j‖²)`.
    pub fn norm(&self) -> f64 {
        (self.grid.dt() * self.data.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Largest flat magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, alpha: C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= alpha);
        out
    }

    /// `self + alpha·other`; grids, weights and dimensions must agree.
    pub fn axpy(&self, alpha: C64, other: &WeightedSignal) -> Result<Self> {
        self.check_same_space(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(Self { data, ..self.clone() })
    }

    pub fn sub(&self, other: &WeightedSignal) -> Result<Self> {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    /// `‖self − other‖ / max(‖other‖, floor)`.
    pub fn relative_distance(&self, other: &WeightedSignal) -> Result<f64> {
        Ok(self.sub(other)?.norm() / other.norm().max(LEAKAGE_FLOOR))
    }

    pub fn check_same_space(&self, other: &WeightedSignal) -> Result<()> {
        if !self.grid.matches(&other.grid) {
            return Err(EvoqError::Pairing("grids differ".into()));
        }
        if self.m != other.m {
            return Err(EvoqError::Pairing(format!(
                "spatial dimensions differ: {} vs {}",
                self.m, other.m
            )));
        }
        if (self.nu - other.nu).abs() > 1e-12 * self.nu.abs().max(1.0) {
            return Err(EvoqError::Pairing(format!(
                "weights differ: {} vs {}",
                self.nu, other.nu
            )));
        }
        Ok(())
    }

    /// Zero-extends onto `padded`, which must contain this grid at offset `pad`.
    pub fn zero_pad(&self, padded: TimeGrid, pad: usize) -> Self {
        let mut out = Self::zeros(padded, self.nu, self.m);
        let start = pad * self.m;
        out.data[start..start + self.data.len()].copy_from_slice(&self.data);
        out
    }

    /// Extracts `len` samples starting at `offset` onto `grid`.
    pub fn crop(&self, grid: TimeGrid, offset: usize) -> Self {
        let start = offset * self.m;
        let data = self.data[start..start + grid.len() * self.m].to_vec();
        Self {
            grid,
            nu: self.nu,
            m: self.m,
            data,
        }
    }

    /// Index of the first sample with a nonzero entry, if any.
    pub fn support_start(&self) -> Option<usize> {
        (0..self.len()).find(|&j| self.sample(j).iter().any(|z| z.norm_sqr() > 0.0))
    }

    /// Index one past the last sample with a nonzero entry, if any.
    pub fn support_end(&self) -> Option<usize> {
        (0..self.len())
            .rev()
            .find(|&j| self.sample(j).iter().any(|z| z.norm_sqr() > 0.0))
            .map(|j| j + 1)
    }

    /// Norm of the samples with index in `range`.
    pub fn norm_on(&self, range: std::ops::Range<usize>) -> f64 {
        let lo = range.start.min(self.len()) * self.m;
        let hi = range.end.min(self.len()) * self.m;
        (self.grid.dt() * self.data[lo..hi].iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }
}

/// The ν-product `⟨f, g⟩_ν = ∫ ⟨f(t), g(t)⟩ dt` for `f ∈ L²_ν`, `g ∈ L²_{−ν}`.
///
/// Antilinear in `f`, linear in `g`.
pub fn nu_product(f: &WeightedSignal, g: &WeightedSignal) -> Result<C64> {
    if !f.grid.matches(&g.grid) {
        return Err(EvoqError::Pairing("grids differ".into()));
    }
    if f.m != g.m {
        return Err(EvoqError::Pairing(format!(
            "spatial dimensions differ: {} vs {}",
            f.m, g.m
        )));
    }
    if (f.nu + g.nu).abs() > 1e-12 * f.nu.abs().max(1.0) {
        return Err(EvoqError::Pairing(format!(
            "weights {} and {} are not negatives of each other",
            f.nu, g.nu
        )));
    }
    let sum: C64 = f.data.iter().zip(&g.data).map(|(a, b)| a.conj() * b).sum();
    Ok(sum * f.grid.dt())
}

/// `exp(−2ν·)`: `L²_ν → L²_{−ν}`. The flat array is unchanged.
pub fn weight_flip(f: &WeightedSignal) -> WeightedSignal {
    f.clone().with_nu(-f.nu)
}

/// Time reversal `f ↦ f(−·)`, `L²_ν → L²_{−ν}`.
///
/// Sample `j` maps to sample `n−1−j`, pairing the cell `[t_j, t_{j+1})` with
/// `[−t_{j+1}, −t_j)`.
pub fn time_reverse(f: &WeightedSignal) -> Result<WeightedSignal> {
    if !f.grid.is_symmetric() {
        return Err(EvoqError::UnsupportedGrid(format!(
            "time reversal needs t_min = -t_max, got [{}, {}]",
            f.grid.t_min, f.grid.t_max
        )));
    }
    let m = f.m;
    let mut data = Vec::with_capacity(f.data.len());
    for j in (0..f.len()).rev() {
        data.extend_from_slice(&f.data[j * m..(j + 1) * m]);
    }
    Ok(WeightedSignal {
        grid: f.grid,
        nu: -f.nu,
        m,
        data,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// Keeps samples with `t_j < T`.
    AtMost,
    /// Keeps samples with `t_j ≥ T`.
    AtLeast,
}

/// `spt f ⊆ (−∞, T]` or `spt f ⊆ [T, ∞)` on the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportWindow {
    pub kind: WindowKind,
    pub t: f64,
}

impl SupportWindow {
    pub fn at_most(t: f64) -> Self {
        Self {
            kind: WindowKind::AtMost,
            t,
        }
    }

    pub fn at_least(t: f64) -> Self {
        Self {
            kind: WindowKind::AtLeast,
            t,
        }
    }

    /// Index range of samples kept on `grid`.
    pub fn kept(&self, grid: &TimeGrid) -> Result<std::ops::Range<usize>> {
        let scale = grid.t_max().abs().max(grid.t_min().abs()).max(1.0);
        if !(self.t >= grid.t_min() - 1e-12 * scale && self.t <= grid.t_max() + 1e-12 * scale) {
            return Err(EvoqError::OutOfRange {
                t: self.t,
                t_min: grid.t_min(),
                t_max: grid.t_max(),
            });
        }
        let split = grid.index_at_least(self.t);
        Ok(match self.kind {
            WindowKind::AtMost => 0..split,
            WindowKind::AtLeast => split..grid.len(),
        })
    }

    pub fn complement(&self) -> Self {
        let kind = match self.kind {
            WindowKind::AtMost => WindowKind::AtLeast,
            WindowKind::AtLeast => WindowKind::AtMost,
        };
        Self { kind, t: self.t }
    }
}

/// Restriction `r_{≤T}` or `r_{≥T}`: zeroes samples outside the window.
pub fn restrict(f: &WeightedSignal, w: SupportWindow) -> Result<WeightedSignal> {
    let kept = w.kept(&f.grid)?;
    let m = f.m;
    let mut out = f.clone();
    for j in (0..f.len()).filter(|j| !kept.contains(j)) {
        out.data[j * m..(j + 1) * m].fill(C64::new(0.0, 0.0));
    }
    Ok(out)
}

/// `‖f − restrict(f, w)‖ / max(‖f‖, 1e−300)`.
pub fn support_leakage(f: &WeightedSignal, w: SupportWindow) -> Result<f64> {
    let kept = w.kept(&f.grid)?;
    let outside = f.norm_on(0..kept.start).hypot(f.norm_on(kept.end..f.len()));
    Ok(outside / f.norm().max(LEAKAGE_FLOOR))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn grid_rejects_degenerate_input() {
        assert!(TimeGrid::new(1.0, 1.0, 8).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
        assert!(TimeGrid::new(f64::NAN, 1.0, 4).is_err());
    }

    #[test]
    fn index_at_least_uses_half_open_cells() {
        let g = TimeGrid::new(0.0, 4.0, 4).unwrap();
        assert_eq!(g.index_at_least(-1.0), 0);
        assert_eq!(g.index_at_least(0.0), 0);
        assert_eq!(g.index_at_least(0.5), 1);
        assert_eq!(g.index_at_least(1.0), 1);
        assert_eq!(g.index_at_least(3.5), 4);
        assert_eq!(g.index_at_least(4.0), 4);
    }

    #[test]
    fn nu_product_of_cancelling_weights_on_unit_interval() {
        let g = TimeGrid::new(-2.0, 2.0, 400).unwrap();
        let ind = |t: f64| if (0.0..1.0).contains(&t) { 1.0 } else { 0.0 };
        let f = WeightedSignal::from_flat_fn(g, 1.5, 1, |t| vec![c(ind(t))]).unwrap();
        let h = WeightedSignal::from_flat_fn(g, -1.5, 1, |t| vec![c(ind(t))]).unwrap();
        let p = nu_product(&f, &h).unwrap();
        assert!((p - c(1.0)).norm() < 1e-12);
        let zero = WeightedSignal::zeros(g, -1.5, 1);
        assert_eq!(nu_product(&f, &zero).unwrap(), c(0.0));
    }

    #[test]
    fn nu_product_rejects_mismatched_spaces() {
        let g = TimeGrid::new(-1.0, 1.0, 8).unwrap();
        let f = WeightedSignal::zeros(g, 1.0, 2);
        assert!(nu_product(&f, &WeightedSignal::zeros(g, 1.0, 2)).is_err());
        assert!(nu_product(&f, &WeightedSignal::zeros(g, -1.0, 3)).is_err());
        let g2 = TimeGrid::new(-1.0, 1.0, 16).unwrap();
        assert!(nu_product(&f, &WeightedSignal::zeros(g2, -1.0, 2)).is_err());
    }

    #[test]
    fn weight_flip_keeps_flat_array() {
        let g = TimeGrid::new(0.0, 3.0, 3).unwrap();
        let f = WeightedSignal::from_flat(g, 1.0, 1, vec![c(1.0), c(2.0), c(3.0)]).unwrap();
        let w = weight_flip(&f);
        assert_eq!(w.nu(), -1.0);
        assert_eq!(w.flat(), f.flat());
        assert_eq!(weight_flip(&w), f);
    }

    #[test]
    fn time_reverse_flips_index_order() {
        let g = TimeGrid::symmetric(2.0, 4).unwrap();
        let v = vec![c(1.0), c(2.0), c(3.0), c(4.0)];
        let f = WeightedSignal::from_flat(g, 0.5, 1, v).unwrap();
        let r = time_reverse(&f).unwrap();
        assert_eq!(r.flat(), &[c(4.0), c(3.0), c(2.0), c(1.0)]);
        assert_eq!(r.nu(), -0.5);
        assert_eq!(time_reverse(&r).unwrap(), f);
    }

    #[test]
    fn time_reverse_needs_symmetric_grid() {
        let g = TimeGrid::new(0.0, 2.0, 4).unwrap();
        let f = WeightedSignal::zeros(g, 1.0, 1);
        assert!(matches!(time_reverse(&f), Err(EvoqError::UnsupportedGrid(_))));
    }

    #[test]
    fn restrict_windows() {
        let g = TimeGrid::new(-1.0, 3.0, 40).unwrap();
        let f = WeightedSignal::from_fn(g, 0.3, 1, |t| {
            vec![c(if (0.0..=1.0).contains(&t) { 1.0 + t } else { 0.0 })]
        })
        .unwrap();
        assert_eq!(restrict(&f, SupportWindow::at_most(2.0)).unwrap(), f);
        let zero = restrict(&f, SupportWindow::at_least(3.0)).unwrap();
        assert_eq!(zero.norm(), 0.0);
        assert!(matches!(
            restrict(&f, SupportWindow::at_least(3.5)),
            Err(EvoqError::OutOfRange { .. })
        ));
        let w = SupportWindow::at_least(0.55);
        let once = restrict(&f, w).unwrap();
        assert_eq!(restrict(&once, w).unwrap(), once);
        let rest = restrict(&f, w.complement()).unwrap();
        assert_eq!(once.axpy(c(1.0), &rest).unwrap(), f);
    }

    #[test]
    fn leakage_cases() {
        let g = TimeGrid::new(0.0, 4.0, 400).unwrap();
        let bump = |t: f64, a: f64| if (a..a + 1.0).contains(&t) { 1.0 } else { 0.0 };
        // flat-coordinate bumps of equal mass on [0,1) and [2,3)
        let f = WeightedSignal::from_flat_fn(g, 0.7, 1, |t| vec![c(bump(t, 0.0) + bump(t, 2.0))])
            .unwrap();
        let w = SupportWindow::at_most(1.5);
        let leak = support_leakage(&f, w).unwrap();
        assert!((leak - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        let inside = restrict(&f, w).unwrap();
        assert_eq!(support_leakage(&inside, w).unwrap(), 0.0);
        let outside = restrict(&f, w.complement()).unwrap();
        assert!((support_leakage(&outside, w).unwrap() - 1.0).abs() < 1e-15);
        let zero = WeightedSignal::zeros(g, 0.7, 1);
        assert_eq!(support_leakage(&zero, w).unwrap(), 0.0);
    }

    #[test]
    fn from_flat_rejects_non_finite() {
        let g = TimeGrid::new(0.0, 1.0, 2).unwrap();
        assert!(WeightedSignal::from_flat(g, 1.0, 1, vec![c(1.0), c(f64::NAN)]).is_err());
        assert!(WeightedSignal::from_flat(g, 1.0, 1, vec![c(1.0)]).is_err());
    }

    #[test]
    fn padding_round_trip() {
        let g = TimeGrid::symmetric(2.0, 8).unwrap();
        let (p, pad) = g.padded(0.25).unwrap();
        assert_eq!(pad, 2);
        assert_eq!(p.len(), 12);
        assert!((p.dt() - g.dt()).abs() < 1e-15);
        assert!(p.is_symmetric());
        let f = WeightedSignal::from_flat_fn(g, 1.0, 2, |t| vec![c(t), c(-t)]).unwrap();
        let back = f.zero_pad(p, pad).crop(g, pad);
        assert_eq!(back, f);
    }
}
