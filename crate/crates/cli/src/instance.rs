//! Turns a config into solver objects.

use std::fmt;

use evoq_core::control::ControlProblem;
use evoq_core::io::read_columns;
use evoq_core::material::{coercivity, CoercivityCertificate, MaterialLaw};
use evoq_core::solver::{SolverOptions, Tolerances};
use evoq_core::spatial::{
    build_heat_block, build_maxwell_block, build_wave_block, check_skew, Stencil1d,
};
use evoq_core::{CMatrix, EvoSystem, EvoqError, TimeGrid, WeightedSignal, C64};

use crate::config::{
    complex_vector, InstanceConfig, LoadedConfig, MatrixSpec, RhsShape, SpatialKind, VariantName,
};

/// Failure classes with their process exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Invalid config or rejected instance (exit 2).
    Schema(String),
    /// A numerical assertion failed (exit 1).
    Assertion(String),
    /// Reading or writing files failed (exit 3).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Assertion(_) => 1,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema(s) => write!(f, "invalid instance: {s}"),
            CliError::Assertion(s) => write!(f, "assertion failed: {s}"),
            CliError::Io(s) => write!(f, "i/o failure: {s}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<EvoqError> for CliError {
    fn from(e: EvoqError) -> Self {
        match e {
            EvoqError::Io(_) => CliError::Io(e.to_string()),
            EvoqError::Solver(_) | EvoqError::Oracle(_) | EvoqError::NonFinite(_) => {
                CliError::Assertion(e.to_string())
            }
            _ => CliError::Schema(e.to_string()),
        }
    }
}

fn schema(e: impl fmt::Display) -> CliError {
    CliError::Schema(e.to_string())
}

/// A validated instance: system, data and tolerances.
#[derive(Clone, Debug)]
pub struct Instance {
    pub name: String,
    pub config: InstanceConfig,
    pub system: EvoSystem,
    pub certificate: CoercivityCertificate,
    pub tolerances: Tolerances,
    rhs_samples: Option<Vec<Vec<C64>>>,
}

fn builder_law(cfg: &InstanceConfig, grid: &TimeGrid) -> Result<(MaterialLaw, CMatrix), CliError> {
    let sp = &cfg.spatial;
    let stencil = || -> Result<Stencil1d, CliError> {
        let k = sp.k.ok_or_else(|| schema("spatial.k is required for builder kinds"))?;
        Stencil1d::new(k, sp.dx).map_err(CliError::from)
    };
    let need = |m: &Option<MatrixSpec>, name: &str, size: usize| {
        m.as_ref()
            .map(|s| s.to_matrix(Some((size, size))))
            .unwrap_or_else(|| Ok(CMatrix::identity(size, size)))
            .map_err(|e| schema(format!("spatial.{name}: {e}")))
    };
    if sp.kind != SpatialKind::Matrix && cfg.law.is_some() {
        return Err(schema("[law] is only allowed with spatial.kind = \"matrix\""));
    }
    match sp.kind {
        SpatialKind::Heat => {
            let s = stencil()?;
            let a = need(&sp.conductivity, "conductivity", s.k)?;
            let b = build_heat_block(s, &a)?;
            Ok((b.law, b.spatial.matrix().clone()))
        }
        SpatialKind::Wave => {
            let s = stencil()?;
            let t = need(&sp.elasticity, "elasticity", s.k + 1)?;
            let b = build_wave_block(s, &t)?;
            Ok((b.law, b.spatial.matrix().clone()))
        }
        SpatialKind::Maxwell => {
            let s = stencil()?;
            let eps = need(&sp.epsilon, "epsilon", s.k)?;
            let mu = need(&sp.mu, "mu", s.k + 1)?;
            let sigma = need(&sp.sigma, "sigma", s.k)?;
            let (b, _) = build_maxwell_block(s, &eps, &mu, &sigma, cfg.nu, grid)?;
            Ok((b.law, b.spatial.matrix().clone()))
        }
        SpatialKind::Matrix => {
            let a = sp
                .a
                .as_ref()
                .ok_or_else(|| schema("spatial.a is required for kind = \"matrix\""))?
                .to_matrix(None)
                .map_err(|e| schema(format!("spatial.a: {e}")))?;
            let m = a.nrows();
            let law = cfg
                .law
                .as_ref()
                .ok_or_else(|| schema("[law] is required for kind = \"matrix\""))?;
            let coeffs = law
                .coeffs
                .iter()
                .map(|s| s.to_matrix(Some((m, m))))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| schema(format!("law.coeffs: {e}")))?;
            Ok((MaterialLaw::finite_sum(coeffs)?, a))
        }
    }
}

impl Instance {
    pub fn from_loaded(name: &str, loaded: &LoadedConfig) -> Result<Self, CliError> {
        let cfg = &loaded.config;
        let g = cfg.grid;
        let grid = TimeGrid::new(g.t_min, g.t_max, g.n)?;
        if !(g.padding_fraction >= 0.0 && g.padding_fraction.is_finite()) {
            return Err(schema("grid.padding_fraction must be non-negative"));
        }
        if !(cfg.nu > 0.0 && cfg.nu.is_finite()) {
            return Err(schema(format!("nu must be positive, got {}", cfg.nu)));
        }
        let (law, a) = builder_law(cfg, &grid)?;
        let spatial = check_skew(a)?.with_label(format!("{:?}", cfg.spatial.kind).to_lowercase());
        let system = EvoSystem::new(cfg.nu, grid, law, spatial)?.with_options(SolverOptions {
            padding: g.padding_fraction,
            ..SolverOptions::default()
        });
        let certificate = system.certificate()?;
        let m = system.dim();
        if let Some(p) = &cfg.rhs.profile {
            if p.len() != m {
                return Err(schema(format!("rhs.profile has {} entries, expected {m}", p.len())));
            }
        }
        let rhs_samples = match cfg.rhs.shape {
            RhsShape::Csv => {
                let rel = cfg
                    .rhs
                    .path
                    .as_ref()
                    .ok_or_else(|| schema("rhs.path is required for shape = \"csv\""))?;
                let path = loaded.base_dir.join(rel);
                if !path.exists() {
                    return Err(schema(format!("rhs file {} does not exist", path.display())));
                }
                let rows = read_columns(&path, 1 + 2 * m)?;
                if rows.len() != grid.len() {
                    return Err(schema(format!(
                        "rhs file has {} rows, grid has {}",
                        rows.len(),
                        grid.len()
                    )));
                }
                Some(
                    rows.iter()
                        .map(|r| (0..m).map(|i| C64::new(r[1 + i], r[1 + m + i])).collect())
                        .collect(),
                )
            }
            RhsShape::Bump => {
                if !(cfg.rhs.width > 0.0) {
                    return Err(schema("rhs.width must be positive"));
                }
                None
            }
            RhsShape::Indicator => None,
        };
        if let Some(ctl) = &cfg.control {
            let b = injection(&ctl.b, m)?;
            if b.nrows() != m {
                return Err(schema(format!("control.b must have {m} rows, got {}", b.nrows())));
            }
            if ctl.variant == VariantName::Pointwise {
                match &ctl.u0 {
                    Some(u) if u.len() == m => {}
                    _ => return Err(schema(format!("control.u0 must list {m} entries"))),
                }
            }
        }
        Ok(Self {
            name: name.to_string(),
            tolerances: cfg.tolerances.resolve(),
            config: cfg.clone(),
            system,
            certificate,
            rhs_samples,
        })
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.system.grid
    }

    /// Same instance on another grid; custom CSV data cannot be resampled.
    pub fn with_grid(&self, grid: TimeGrid) -> Result<Self, CliError> {
        if self.rhs_samples.is_some() {
            return Err(schema("instances with CSV data cannot change grid"));
        }
        let mut out = self.clone();
        out.system.grid = grid;
        out.config.grid.t_min = grid.t_min();
        out.config.grid.t_max = grid.t_max();
        out.config.grid.n = grid.len();
        out.certificate = out.system.certificate()?;
        Ok(out)
    }

    pub fn with_nu(&self, nu: f64) -> Result<Self, CliError> {
        let mut out = self.clone();
        out.system = self.system.with_nu(nu)?;
        out.config.nu = nu;
        out.certificate = out.system.certificate()?;
        Ok(out)
    }

    fn profile(&self) -> Vec<C64> {
        match &self.config.rhs.profile {
            Some(p) => complex_vector(p).iter().copied().collect(),
            None => vec![C64::new(1.0, 0.0); self.dim()],
        }
    }

    /// Unweighted scalar shape of the right-hand side.
    pub fn shape(&self, t: f64) -> f64 {
        let r = &self.config.rhs;
        match r.shape {
            RhsShape::Bump => bump(t, r.center, r.width),
            RhsShape::Indicator => {
                if t >= r.start && t < r.end {
                    1.0
                } else {
                    0.0
                }
            }
            RhsShape::Csv => 0.0,
        }
    }

    /// Right-hand side at weight `weight` (`ν` for forward, `−ν` for adjoint).
    pub fn rhs(&self, weight: f64) -> Result<WeightedSignal, CliError> {
        let grid = *self.grid();
        let m = self.dim();
        if let Some(rows) = &self.rhs_samples {
            let mut data = Vec::with_capacity(grid.len() * m);
            for (j, row) in rows.iter().enumerate() {
                let w = (-weight * grid.time(j)).exp();
                data.extend(row.iter().map(|z| z * w));
            }
            return Ok(WeightedSignal::from_flat(grid, weight, m, data)?);
        }
        let profile = self.profile();
        Ok(WeightedSignal::from_fn(grid, weight, m, |t| {
            let s = self.shape(t);
            profile.iter().map(|p| p * s).collect()
        })?)
    }

    pub fn control_problem(&self) -> Result<ControlProblem, CliError> {
        let ctl = self
            .config
            .control
            .as_ref()
            .ok_or_else(|| schema("this command needs a [control] section"))?;
        let b = injection(&ctl.b, self.dim())?;
        Ok(match ctl.variant {
            VariantName::Supported => {
                ControlProblem::supported(self.system.clone(), b, ctl.horizon, self.rhs(self.system.nu)?)?
            }
            VariantName::Pointwise => {
                let u0 = complex_vector(ctl.u0.as_deref().unwrap_or_default());
                ControlProblem::pointwise(self.system.clone(), b, ctl.horizon, u0)?
            }
        })
    }

    /// Re-certifies the law on the solver's padded grid.
    pub fn recertify(&self) -> Result<CoercivityCertificate, CliError> {
        let (padded, _) = self.system.padded_grid()?;
        Ok(coercivity(&self.system.law, self.system.nu, &padded)?)
    }
}

/// `{ scale = x }` injections are square of the system dimension.
fn injection(spec: &MatrixSpec, m: usize) -> Result<CMatrix, CliError> {
    let size = matches!(spec, MatrixSpec::Scale { .. }).then_some((m, m));
    spec.to_matrix(size).map_err(|e| schema(format!("control.b: {e}")))
}

/// Smooth compactly supported bump `exp(−1/(1 − x²))`, `x = (t − c)/w`.
pub fn bump(t: f64, center: f64, width: f64) -> f64 {
    let x = (t - center) / width;
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suite::bundled_instance;

    #[test]
    fn bump_is_smooth_and_compact() {
        assert_eq!(bump(0.0, 0.0, 1.0), (-1.0f64).exp());
        assert_eq!(bump(1.0, 0.0, 1.0), 0.0);
        assert_eq!(bump(-3.0, -1.0, 2.0), 0.0);
        assert!(bump(0.999, 0.0, 1.0) < 1e-200);
    }

    #[test]
    fn scale_injection_matches_system_dimension() {
        let b = injection(&MatrixSpec::Scale { scale: 2.0 }, 5).unwrap();
        assert_eq!(b.shape(), (5, 5));
        let d = injection(&MatrixSpec::Diag { diag: vec![1.0, 0.0] }, 5).unwrap();
        assert_eq!(d.shape(), (2, 2));
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(CliError::from(EvoqError::Io("x".into())).exit_code(), 3);
        assert_eq!(CliError::from(EvoqError::Solver("x".into())).exit_code(), 1);
        assert_eq!(CliError::from(EvoqError::NotSkew { row: 0, col: 1, value: 1.0 }).exit_code(), 2);
    }

    #[test]
    fn rhs_weights_are_consistent() {
        let inst = bundled_instance("heat_b0").unwrap();
        let f = inst.rhs(inst.system.nu).unwrap();
        let g = inst.rhs(-inst.system.nu).unwrap();
        let grid = *inst.grid();
        for j in [10, 20, 30] {
            let t = grid.time(j);
            let ratio = f.sample(j)[0] / g.sample(j)[0];
            assert!((ratio.re - (-2.0 * inst.system.nu * t).exp()).abs() < 1e-12);
        }
        let moved = inst.with_nu(2.0).unwrap();
        assert_eq!(moved.certificate.nu, 2.0);
        assert!(moved.certificate.c_est >= inst.certificate.c_est);
    }
}
